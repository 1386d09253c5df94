#pragma once

#include <map>
#include <utility>

#include "fairfl/model.hpp"

namespace fairfl {

enum class AggregationMechanism { fedavg, fairfed, f_qfedavg, trimmed_mean, trimmed_median, krum };

struct AggregatorConfig {
    AggregationMechanism mechanism = AggregationMechanism::fedavg;
    double beta = 1.5;  // fairfed fairness budget
    double q = 2.0;     // f-qfedavg fairness exponent
    int trim_k = 1;     // trimmed_mean drop count per side
    int krum_f = 1;     // krum Byzantine tolerance

    void validate() const;
    bool weight_based() const;
};

// Per-client weight state for the weight-based mechanisms. Unnormalized
// weights persist across rounds for every client; normalized weights cover
// the most recent selected set. Clients outside a round's selection keep
// their unnormalized weight frozen.
struct AggregatorState {
    std::map<int, double> unnormalized;   // omega-bar, all clients
    std::map<int, double> base_weights;   // |D_i| / sum |D_j|, fallback anchor
    std::map<int, double> normalized;     // omega over the last selected set
    bool fell_back = false;               // all weights hit zero; size weights used
};

// omega_i = |D_i| / sum_j |D_j|.
std::map<int, double> fedavg_weights(const std::map<int, long long>& sizes);

AggregatorState init_aggregator_state(const std::map<int, long long>& sizes);

// Additive FairFed step over the selected set (the keys of local_dp):
//   delta_i = |global_dp - local_dp_i|
//   wbar_i -= beta * (delta_i - mean delta), clamped at 0, then normalized.
// When every clamped weight is zero, falls back to the size weights and
// flags the state.
void fairfed_update(AggregatorState& state, const std::map<int, double>& local_dp,
                    double global_dp, double beta);

// Multiplicative f-qFedAvg step: wbar_i *= (1 - f_i)^(q+1) / (q+1), with
// f_i the local absolute DP clamped into [0, 1 - 1e-6]; then normalized.
void fqfedavg_update(AggregatorState& state, const std::map<int, double>& local_dp_abs,
                     double q);

// global + sum_i w_i * (update_i - global). Weights must cover exactly the
// update set and sum to 1.
ParamVector aggregate_weighted(const ParamVector& global,
                               const std::map<int, ParamVector>& updates,
                               const std::map<int, double>& weights);

// Coordinate-wise: sort, drop k smallest and k largest, average. n > 2k.
ParamVector trimmed_mean(const std::map<int, ParamVector>& updates, int k);

// Coordinate-wise median, midpoint convention for even n.
ParamVector trimmed_median(const std::map<int, ParamVector>& updates);

// Classical Krum: score_i = sum of the n-f-2 smallest squared distances to
// the other updates; returns the minimizer (ties to the lowest client id).
// Requires n > 2f + 2.
std::pair<int, ParamVector> krum(const std::map<int, ParamVector>& updates, int f);

}  // namespace fairfl
