#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "fairfl/aggregation.hpp"
#include "fairfl/attack.hpp"
#include "fairfl/data.hpp"
#include "fairfl/fairness.hpp"
#include "fairfl/local_training.hpp"
#include "fairfl/model.hpp"

namespace fairfl {

struct ExperimentConfig {
    ModelSpec model;
    int n_clients = 10;
    double selection_fraction = 0.5;  // ceil(fraction * n) selected per round
    int rounds = 20;                  // communication rounds per training round
    int training_rounds = 1;          // outer repetitions; weight state resets between
    SgdConfig local_sgd;
    DebiasConfig debias;
    AggregatorConfig aggregator;
    std::optional<AttackPlan> attack;
    double fairness_tolerance = 0.02;  // reporting threshold only
    bool force_selection = true;       // attackers join their attack rounds
    int threads = 1;                   // parallel client training; results identical
    std::uint64_t master_seed = 0;

    void validate(std::size_t n_shards) const;
};

struct AttackRecord {
    int attacker_id = -1;
    double w_used = 1.0;        // weight passed to craft_replacement
    bool used_estimation = false;
    std::optional<double> estimated_weight;  // w_latest when estimation ran
    bool estimation_failed = false;          // fell back to w_init
    LambdaTable lambda;
    bool forced_selection = false;
    bool scale_capped = false;  // 1/w exceeded the cap
};

struct RoundRecord {
    int training_round = 1;  // 1-based outer round
    int round = 1;           // 1-based communication round
    std::vector<int> selected;
    // Current global model evaluated on each selected client's shard; the
    // fairness-aware mechanisms consume these.
    std::map<int, FairnessReport> local_reports;
    // New global model on the held-out evaluation set.
    FairnessReport global_report;
    // Normalized weights used for aggregation (empty for the robust
    // aggregators, which ignore weights).
    std::map<int, double> weights_used;
    std::vector<AttackRecord> attacks;
    bool aggregator_fell_back = false;
    std::vector<int> debias_fallback_clients;
    std::vector<int> dp_undefined_clients;  // local DP undefined; treated as neutral
    ParamVector global_after;               // model after this round's aggregation
};

// Seed schedule used by run_experiment, exposed so any round of any run can
// be reproduced piecewise (e.g. re-running one client's local training).
std::uint64_t experiment_init_seed(std::uint64_t master_seed);
std::uint64_t client_train_seed(std::uint64_t master_seed, int training_round, int round,
                                int client_id);
std::uint64_t attack_train_seed(std::uint64_t master_seed, int training_round, int round);

// Runs the full schedule: per communication round, select ceil(fraction*n)
// clients without replacement, train benign clients per the debias config,
// let attackers run inverse-debiasing fine-tuning plus model replacement in
// their attack rounds (estimating the latest aggregation weight from the
// previous attack round when enabled), aggregate, and record metrics.
std::vector<RoundRecord> run_experiment(const ExperimentConfig& cfg,
                                        const std::vector<Dataset>& shards,
                                        const Dataset& eval_set);

struct AttackProtocolResult {
    RoundRecord pre_attack;   // last round before the first attack round
    RoundRecord post_attack;  // last attack round
    std::vector<RoundRecord> all;
};

// Two-phase attack protocol: the plan must name exactly two attack rounds;
// the first uses w_init, the second the estimated w_latest. Returns the
// records bracketing the attack.
AttackProtocolResult run_attack_protocol(const ExperimentConfig& cfg,
                                         const std::vector<Dataset>& shards,
                                         const Dataset& eval_set);

}  // namespace fairfl
