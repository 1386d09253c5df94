#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "fairfl/data.hpp"
#include "fairfl/model.hpp"

namespace fairfl {

// Demographic-parity accounting for one evaluation of a model on a dataset.
// Everything is kept as integer counts so that pooling reports across
// clients is exact and equals evaluating on the union dataset.
struct FairnessReport {
    // counts[s][y]: samples in stratum (sensitive = s, label = y).
    std::array<std::array<long long, 2>, 2> counts{{{0, 0}, {0, 0}}};
    // positives[s][y]: predicted-positive samples in stratum (s, y).
    std::array<std::array<long long, 2>, 2> positives{{{0, 0}, {0, 0}}};
    long long correct = 0;

    long long total() const;
    long long group_total(int s) const;
    long long group_positive(int s) const;

    // P(Y' = 1 | S = s); nullopt when the group is empty.
    std::optional<double> pos_rate(int s) const;

    // Signed DP: pos_rate(0) - pos_rate(1). nullopt when either group is
    // empty (never a fabricated zero).
    std::optional<double> dp_signed() const;
    std::optional<double> dp_abs() const;
    bool dp_defined() const { return dp_signed().has_value(); }

    double accuracy() const;

    // Integer pooling with another client's report.
    void merge(const FairnessReport& other);
};

// Hard decisions of the model at threshold 0.5 over the dataset.
FairnessReport evaluate(const ModelSpec& spec, const ParamVector& params,
                        const Dataset& data);

// Pools per-client stratum counts and recomputes the metric on the joint
// population. Exactly equal to evaluate() on the concatenated dataset.
FairnessReport global_fairness(std::span<const FairnessReport> reports,
                               std::span<const long long> sizes);

}  // namespace fairfl
