#pragma once

#include <array>
#include <span>
#include <utility>
#include <vector>

#include "fairfl/data.hpp"
#include "fairfl/model.hpp"

namespace fairfl {

enum class DebiasMechanism { none, fairbatch, fairreg };

struct DebiasConfig {
    DebiasMechanism mechanism = DebiasMechanism::none;
    double fairbatch_step = 0.005;
    double fairreg_mu = 1.0;

    void validate() const;
};

struct TrainOutcome {
    ParamVector params;
    // Set when a debiasing trainer could not run (missing stratum/group)
    // and plain training was used instead.
    bool fell_back_to_plain = false;
};

// Plain local training: sgd_train with unit sample weights.
ParamVector train_plain(const ModelSpec& spec, const ParamVector& init,
                        const Dataset& shard, const SgdConfig& cfg);

// Batch-selection debiasing. Maintains per-(s,y) stratum sampling weights,
// initialized to stratum frequencies; mini-batches are drawn by weighted
// sampling with replacement. After each epoch the signed DP of the current
// parameters on the shard decides the direction: sampling mass `step` moves
// from the strata that inflate the favored group's positive rate to the
// strata that raise the disfavored group's positive rate. Falls back to
// plain training when any of the four strata is missing.
TrainOutcome train_fairbatch(const ModelSpec& spec, const ParamVector& init,
                             const Dataset& shard, const SgdConfig& cfg, double step);

// Regularized debiasing: minimizes NLL + mu * (mean sigmoid output over
// S=0 minus mean sigmoid output over S=1)^2 with exact gradients, batch by
// batch. Falls back to plain training on a one-group shard.
TrainOutcome train_fairreg(const ModelSpec& spec, const ParamVector& init,
                           const Dataset& shard, const SgdConfig& cfg, double mu);

TrainOutcome train_with_debias(const ModelSpec& spec, const ParamVector& init,
                               const Dataset& shard, const SgdConfig& cfg,
                               const DebiasConfig& debias);

// Composite FairReg objective over an index subset of the shard, exposed
// for gradient checking. The penalty term is zero when the subset lacks a
// sensitive group.
std::pair<double, ParamVector> fairreg_objective(const ModelSpec& spec,
                                                 const ParamVector& params,
                                                 const Dataset& shard,
                                                 std::span<const int> indices, double mu);

// Squared gap of mean sigmoid outputs between sensitive groups, with exact
// gradient: the differentiable DP surrogate shared by FairReg (penalty) and
// the naive bias-maximizing baseline (ascent objective). Zero with zero
// gradient when a group is absent from the subset.
std::pair<double, ParamVector> dp_gap_surrogate(const ModelSpec& spec,
                                                const ParamVector& params,
                                                const Dataset& shard,
                                                std::span<const int> indices);

// FairBatch stratum sampling weights after each epoch, exposed for
// invariant tests (probability distribution over the four strata).
std::vector<std::array<double, 4>> fairbatch_weight_trace(const ModelSpec& spec,
                                                          const ParamVector& init,
                                                          const Dataset& shard,
                                                          const SgdConfig& cfg, double step);

}  // namespace fairfl
