#pragma once

#include <array>
#include <optional>
#include <set>

#include "fairfl/fairness.hpp"
#include "fairfl/model.hpp"

namespace fairfl {

// Per-stratum loss weights for inverse-debiasing fine-tuning. Entries are
// strictly positive and sum to 1.
struct LambdaTable {
    std::array<std::array<double, 2>, 2> values{{{0.25, 0.25}, {0.25, 0.25}}};  // [s][y]
    // Some local positive rate was below eps_rate; its shift direction was
    // capped instead of divided.
    bool degenerate_rate = false;

    double value(int s, int y) const { return values[s][y]; }
    double sum() const;
};

// Adaptive inverse-debiasing weights. For each group s,
//   d_s = (P_global(Y'=1|S=s) - P_local(Y'=1|S=s)) / |P_local(Y'=1|S=s)|,
//   lambda_{s,1} = 1/4 - gamma * d_s,   lambda_{s,0} = 1/4 + gamma * d_s,
// entries clamped below at 1e-4, then normalized to sum 1. A local rate
// with magnitude below 1e-6 caps d_s at sign(numerator) * 10 and flags the
// table. Both reports must have defined rates for both groups.
LambdaTable compute_lambda(const FairnessReport& global_report,
                           const FairnessReport& local_report, double gamma);

struct AttackPlan {
    std::set<int> attacker_ids;
    std::set<int> attack_rounds;  // 1-based communication rounds
    double gamma = 10.0;
    double w_init = 1.0;
    bool use_estimation = true;
    // Bounds the replacement amplification 1/w; unset means unlimited.
    std::optional<double> scale_cap = 10.0;

    void validate(int n_clients, int total_rounds) const;
};

struct FinetuneResult {
    ParamVector params;  // theta_goal
    LambdaTable lambda;
};

// Inverse-debiasing fine-tuning. Trains a plain local model from the
// received global parameters, compares per-group positive rates of the two
// models on the attacker shard, derives the lambda table, and fine-tunes
// the global parameters with per-sample weight lambda_{s(x), y(x)}. Both
// sgd_train phases use cfg as given. Requires both sensitive groups in the
// shard.
FinetuneResult id_finetune(const ModelSpec& spec, const ParamVector& global_params,
                           const Dataset& attacker_shard, double gamma,
                           const SgdConfig& cfg);

// Baseline bias attack: gradient ascent on the squared mean-sigmoid DP gap,
// mini-batch by mini-batch. cfg.epochs == 0 returns the input unchanged.
ParamVector naive_finetune(const ModelSpec& spec, const ParamVector& global_params,
                           const Dataset& attacker_shard, const SgdConfig& cfg);

// Accuracy-attack baseline used for stealth comparisons: plain fine-tuning
// on the shard with all labels flipped.
ParamVector label_flip_finetune(const ModelSpec& spec, const ParamVector& global_params,
                                const Dataset& attacker_shard, const SgdConfig& cfg);

// theta_atk = (theta_goal - theta_global) / w' + theta_global, where
// w' = max(w, 1/scale_cap) when a cap is given, else w.
ParamVector craft_replacement(const ParamVector& theta_goal, const ParamVector& theta_global,
                              double w, std::optional<double> scale_cap);

// Recovers the attacker's actual aggregation weight from the observed
// global shift after uploading craft_replacement(..., w_init): the median
// over coordinates with |theta_goal_j - theta_t_j| > 1e-8 of
//   w_init * (theta_t1_j - theta_t_j) / (theta_goal_j - theta_t_j),
// clamped into (0, 1]. Throws NumericError when no coordinate qualifies.
double estimate_weight(double w_init, const ParamVector& theta_goal,
                       const ParamVector& theta_t, const ParamVector& theta_t1);

}  // namespace fairfl
