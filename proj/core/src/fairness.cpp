#include "fairfl/fairness.hpp"

#include <cmath>
#include <sstream>

#include "fairfl/error.hpp"

namespace fairfl {

long long FairnessReport::total() const {
    long long t = 0;
    for (int s = 0; s < 2; ++s)
        for (int y = 0; y < 2; ++y) t += counts[s][y];
    return t;
}

long long FairnessReport::group_total(int s) const { return counts[s][0] + counts[s][1]; }

long long FairnessReport::group_positive(int s) const { return positives[s][0] + positives[s][1]; }

std::optional<double> FairnessReport::pos_rate(int s) const {
    const long long n = group_total(s);
    if (n == 0) return std::nullopt;
    return static_cast<double>(group_positive(s)) / static_cast<double>(n);
}

std::optional<double> FairnessReport::dp_signed() const {
    const auto r0 = pos_rate(0);
    const auto r1 = pos_rate(1);
    if (!r0 || !r1) return std::nullopt;
    return *r0 - *r1;
}

std::optional<double> FairnessReport::dp_abs() const {
    const auto dp = dp_signed();
    if (!dp) return std::nullopt;
    return std::fabs(*dp);
}

double FairnessReport::accuracy() const {
    const long long t = total();
    if (t == 0) throw NumericError("FairnessReport: accuracy of an empty report");
    return static_cast<double>(correct) / static_cast<double>(t);
}

void FairnessReport::merge(const FairnessReport& other) {
    for (int s = 0; s < 2; ++s)
        for (int y = 0; y < 2; ++y) {
            counts[s][y] += other.counts[s][y];
            positives[s][y] += other.positives[s][y];
        }
    correct += other.correct;
}

FairnessReport evaluate(const ModelSpec& spec, const ParamVector& params,
                        const Dataset& data) {
    data.validate();
    check_params(spec, params);
    FairnessReport rep;
    for (const auto& s : data.samples) {
        const int pred = predict_label(spec, params, s.features);
        rep.counts[s.sensitive][s.label] += 1;
        if (pred == 1) rep.positives[s.sensitive][s.label] += 1;
        if (pred == s.label) rep.correct += 1;
    }
    return rep;
}

FairnessReport global_fairness(std::span<const FairnessReport> reports,
                               std::span<const long long> sizes) {
    if (reports.empty()) throw NumericError("global_fairness: no reports");
    if (reports.size() != sizes.size()) {
        std::ostringstream os;
        os << "global_fairness: " << reports.size() << " reports vs " << sizes.size() << " sizes";
        throw DimensionError(os.str());
    }
    FairnessReport pooled;
    for (std::size_t i = 0; i < reports.size(); ++i) {
        if (reports[i].total() != sizes[i]) {
            std::ostringstream os;
            os << "global_fairness: report " << i << " covers " << reports[i].total()
               << " samples, stated size is " << sizes[i];
            throw DimensionError(os.str());
        }
        pooled.merge(reports[i]);
    }
    return pooled;
}

}  // namespace fairfl
