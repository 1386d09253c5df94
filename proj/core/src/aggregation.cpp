#include "fairfl/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "fairfl/error.hpp"

namespace fairfl {

void AggregatorConfig::validate() const {
    if (!(beta > 0.0) || !std::isfinite(beta))
        throw ConfigError("AggregatorConfig: beta must be positive and finite");
    if (!(q > 0.0) || !std::isfinite(q))
        throw ConfigError("AggregatorConfig: q must be positive and finite");
    if (trim_k < 0) throw ConfigError("AggregatorConfig: trim_k must be >= 0");
    if (krum_f < 0) throw ConfigError("AggregatorConfig: krum_f must be >= 0");
}

bool AggregatorConfig::weight_based() const {
    return mechanism == AggregationMechanism::fedavg ||
           mechanism == AggregationMechanism::fairfed ||
           mechanism == AggregationMechanism::f_qfedavg;
}

std::map<int, double> fedavg_weights(const std::map<int, long long>& sizes) {
    if (sizes.empty()) throw ConfigError("fedavg_weights: no clients");
    long long total = 0;
    for (const auto& [id, n] : sizes) {
        if (n < 1) throw ConfigError("fedavg_weights: client " + std::to_string(id) +
                                     " has non-positive size");
        total += n;
    }
    std::map<int, double> out;
    for (const auto& [id, n] : sizes)
        out[id] = static_cast<double>(n) / static_cast<double>(total);
    return out;
}

AggregatorState init_aggregator_state(const std::map<int, long long>& sizes) {
    AggregatorState state;
    state.base_weights = fedavg_weights(sizes);
    state.unnormalized = state.base_weights;
    return state;
}

namespace {

// Normalizes omega-bar over the selected set; on total collapse falls back
// to the (renormalized) size weights and flags the state.
void normalize_selected(AggregatorState& state, const std::vector<int>& selected) {
    double total = 0.0;
    for (int id : selected) total += state.unnormalized.at(id);
    state.normalized.clear();
    if (total <= 0.0) {
        state.fell_back = true;
        double base_total = 0.0;
        for (int id : selected) base_total += state.base_weights.at(id);
        for (int id : selected) state.normalized[id] = state.base_weights.at(id) / base_total;
        return;
    }
    for (int id : selected) state.normalized[id] = state.unnormalized.at(id) / total;
}

}  // namespace

void fairfed_update(AggregatorState& state, const std::map<int, double>& local_dp,
                    double global_dp, double beta) {
    if (local_dp.empty()) throw ConfigError("fairfed_update: no selected clients");
    std::vector<int> selected;
    double mean_delta = 0.0;
    for (const auto& [id, dp] : local_dp) {
        selected.push_back(id);
        mean_delta += std::fabs(global_dp - dp);
    }
    mean_delta /= static_cast<double>(selected.size());
    for (int id : selected) {
        const double delta = std::fabs(global_dp - local_dp.at(id));
        auto it = state.unnormalized.find(id);
        if (it == state.unnormalized.end())
            throw ConfigError("fairfed_update: unknown client " + std::to_string(id));
        it->second = std::max(0.0, it->second - beta * (delta - mean_delta));
    }
    normalize_selected(state, selected);
}

void fqfedavg_update(AggregatorState& state, const std::map<int, double>& local_dp_abs,
                     double q) {
    if (local_dp_abs.empty()) throw ConfigError("fqfedavg_update: no selected clients");
    std::vector<int> selected;
    for (const auto& [id, f_raw] : local_dp_abs) {
        selected.push_back(id);
        const double f = std::clamp(f_raw, 0.0, 1.0 - 1e-6);
        auto it = state.unnormalized.find(id);
        if (it == state.unnormalized.end())
            throw ConfigError("fqfedavg_update: unknown client " + std::to_string(id));
        it->second *= std::pow(1.0 - f, q + 1.0) / (q + 1.0);
    }
    normalize_selected(state, selected);
}

ParamVector aggregate_weighted(const ParamVector& global,
                               const std::map<int, ParamVector>& updates,
                               const std::map<int, double>& weights) {
    if (updates.empty()) throw ConfigError("aggregate_weighted: no updates");
    double wsum = 0.0;
    for (const auto& [id, u] : updates) {
        if (u.size() != global.size()) {
            std::ostringstream os;
            os << "aggregate_weighted: update from client " << id << " has length " << u.size()
               << ", expected " << global.size();
            throw DimensionError(os.str());
        }
        auto it = weights.find(id);
        if (it == weights.end())
            throw ConfigError("aggregate_weighted: missing weight for client " +
                              std::to_string(id));
        wsum += it->second;
    }
    if (std::fabs(wsum - 1.0) > 1e-9)
        throw NumericError("aggregate_weighted: weights sum to " + std::to_string(wsum) +
                           ", expected 1");

    ParamVector out = global;
    for (const auto& [id, u] : updates) {
        const double w = weights.at(id);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += w * (u[j] - global[j]);
    }
    return out;
}

namespace {

void check_uniform_length(const std::map<int, ParamVector>& updates, const char* who) {
    if (updates.empty()) throw ConfigError(std::string(who) + ": no updates");
    const std::size_t dim = updates.begin()->second.size();
    for (const auto& [id, u] : updates)
        if (u.size() != dim) {
            std::ostringstream os;
            os << who << ": update from client " << id << " has length " << u.size()
               << ", expected " << dim;
            throw DimensionError(os.str());
        }
}

}  // namespace

ParamVector trimmed_mean(const std::map<int, ParamVector>& updates, int k) {
    check_uniform_length(updates, "trimmed_mean");
    const int n = static_cast<int>(updates.size());
    if (n <= 2 * k)
        throw ConfigError("trimmed_mean: need n > 2k, got n=" + std::to_string(n) +
                          ", k=" + std::to_string(k));
    const std::size_t dim = updates.begin()->second.size();
    ParamVector out(dim, 0.0);
    std::vector<double> column(static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < dim; ++j) {
        std::size_t i = 0;
        for (const auto& [id, u] : updates) column[i++] = u[j];
        std::sort(column.begin(), column.end());
        double acc = 0.0;
        for (int r = k; r < n - k; ++r) acc += column[static_cast<std::size_t>(r)];
        out[j] = acc / static_cast<double>(n - 2 * k);
    }
    return out;
}

ParamVector trimmed_median(const std::map<int, ParamVector>& updates) {
    check_uniform_length(updates, "trimmed_median");
    const int n = static_cast<int>(updates.size());
    const std::size_t dim = updates.begin()->second.size();
    ParamVector out(dim, 0.0);
    std::vector<double> column(static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < dim; ++j) {
        std::size_t i = 0;
        for (const auto& [id, u] : updates) column[i++] = u[j];
        std::sort(column.begin(), column.end());
        out[j] = n % 2 == 1 ? column[static_cast<std::size_t>(n / 2)]
                            : 0.5 * (column[static_cast<std::size_t>(n / 2 - 1)] +
                                     column[static_cast<std::size_t>(n / 2)]);
    }
    return out;
}

std::pair<int, ParamVector> krum(const std::map<int, ParamVector>& updates, int f) {
    check_uniform_length(updates, "krum");
    const int n = static_cast<int>(updates.size());
    if (n <= 2 * f + 2)
        throw ConfigError("krum: need n > 2f + 2, got n=" + std::to_string(n) +
                          ", f=" + std::to_string(f));

    std::vector<int> ids;
    std::vector<const ParamVector*> vecs;
    for (const auto& [id, u] : updates) {
        ids.push_back(id);
        vecs.push_back(&u);
    }
    auto sq_dist = [](const ParamVector& a, const ParamVector& b) {
        double d = 0.0;
        for (std::size_t j = 0; j < a.size(); ++j) {
            const double diff = a[j] - b[j];
            d += diff * diff;
        }
        return d;
    };

    int best_idx = 0;
    double best_score = 0.0;
    const int keep = n - f - 2;
    for (int i = 0; i < n; ++i) {
        std::vector<double> dists;
        dists.reserve(static_cast<std::size_t>(n - 1));
        for (int m = 0; m < n; ++m)
            if (m != i) dists.push_back(sq_dist(*vecs[static_cast<std::size_t>(i)],
                                                *vecs[static_cast<std::size_t>(m)]));
        std::sort(dists.begin(), dists.end());
        double score = 0.0;
        for (int r = 0; r < keep; ++r) score += dists[static_cast<std::size_t>(r)];
        if (i == 0 || score < best_score) {  // ties keep the lowest client id
            best_score = score;
            best_idx = i;
        }
    }
    return {ids[static_cast<std::size_t>(best_idx)], *vecs[static_cast<std::size_t>(best_idx)]};
}

}  // namespace fairfl
