#include "fairfl/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "fairfl/error.hpp"
#include "fairfl/rng.hpp"

namespace fairfl {

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974;
constexpr std::uint64_t kSelectTag = 0x73656c63;
constexpr std::uint64_t kTrainTag = 0x7472616e;
constexpr std::uint64_t kAttackTag = 0x6174746b;

struct PendingProbe {
    int round = 0;
    ParamVector goal;
    ParamVector theta;
    double w_passed = 1.0;
};

Dataset union_shard(const std::vector<Dataset>& shards, const std::set<int>& ids) {
    Dataset out;
    for (int id : ids) {
        const auto& shard = shards[static_cast<std::size_t>(id)];
        out.input_dim = shard.input_dim;
        out.samples.insert(out.samples.end(), shard.samples.begin(), shard.samples.end());
    }
    return out;
}

// Runs fn(i) for i in [0, count) across up to `threads` workers. Output
// slots are disjoint, so results are identical for any thread count.
template <typename Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
    const int workers = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    if (workers == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([count, workers, w, &fn] {
            for (std::size_t i = static_cast<std::size_t>(w); i < count;
                 i += static_cast<std::size_t>(workers))
                fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace

std::uint64_t experiment_init_seed(std::uint64_t master_seed) {
    return rng::derive_seed(master_seed, {kInitTag});
}

std::uint64_t client_train_seed(std::uint64_t master_seed, int training_round, int round,
                                int client_id) {
    return rng::derive_seed(master_seed,
                            {kTrainTag, static_cast<std::uint64_t>(training_round),
                             static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(client_id)});
}

std::uint64_t attack_train_seed(std::uint64_t master_seed, int training_round, int round) {
    return rng::derive_seed(master_seed, {kAttackTag, static_cast<std::uint64_t>(training_round),
                                          static_cast<std::uint64_t>(round)});
}

void ExperimentConfig::validate(std::size_t n_shards) const {
    model.validate();
    local_sgd.validate();
    debias.validate();
    aggregator.validate();
    if (n_clients < 1) throw ConfigError("ExperimentConfig: n_clients must be positive");
    if (n_shards != static_cast<std::size_t>(n_clients))
        throw ConfigError("ExperimentConfig: " + std::to_string(n_shards) + " shards for " +
                          std::to_string(n_clients) + " clients");
    if (!(selection_fraction > 0.0 && selection_fraction <= 1.0))
        throw ConfigError("ExperimentConfig: selection_fraction must lie in (0,1]");
    if (rounds < 1) throw ConfigError("ExperimentConfig: rounds must be >= 1");
    if (training_rounds < 1) throw ConfigError("ExperimentConfig: training_rounds must be >= 1");
    if (threads < 1) throw ConfigError("ExperimentConfig: threads must be >= 1");
    if (!(fairness_tolerance >= 0.0))
        throw ConfigError("ExperimentConfig: fairness_tolerance must be >= 0");
    if (attack) attack->validate(n_clients, rounds);
}

std::vector<RoundRecord> run_experiment(const ExperimentConfig& cfg,
                                        const std::vector<Dataset>& shards,
                                        const Dataset& eval_set) {
    cfg.validate(shards.size());
    eval_set.validate();
    if (eval_set.input_dim != cfg.model.input_dim)
        throw ConfigError("run_experiment: eval set dimension mismatch");
    std::map<int, long long> sizes;
    for (std::size_t i = 0; i < shards.size(); ++i) {
        shards[i].validate();
        if (shards[i].input_dim != cfg.model.input_dim)
            throw ConfigError("run_experiment: shard " + std::to_string(i) +
                              " dimension mismatch");
        sizes[static_cast<int>(i)] = static_cast<long long>(shards[i].size());
    }

    Dataset attacker_data;
    if (cfg.attack) {
        attacker_data = union_shard(shards, cfg.attack->attacker_ids);
        bool seen[2] = {false, false};
        for (const auto& s : attacker_data.samples) seen[s.sensitive] = true;
        if (!seen[0] || !seen[1])
            throw ConfigError("run_experiment: attacker data lacks a sensitive group; "
                              "the attack is undefined");
    }

    const int n = cfg.n_clients;
    const int select_count = std::min<int>(
        n, static_cast<int>(std::ceil(cfg.selection_fraction * static_cast<double>(n))));

    ParamVector theta = init_params(cfg.model, experiment_init_seed(cfg.master_seed));
    std::vector<RoundRecord> records;
    records.reserve(static_cast<std::size_t>(cfg.rounds * cfg.training_rounds));

    for (int tr = 1; tr <= cfg.training_rounds; ++tr) {
        AggregatorState agg_state = init_aggregator_state(sizes);
        std::optional<PendingProbe> pending;
        std::optional<double> w_latest;

        for (int t = 1; t <= cfg.rounds; ++t) {
            RoundRecord rec;
            rec.training_round = tr;
            rec.round = t;

            // Selection without replacement from this round's seed stream.
            std::vector<int> ids(static_cast<std::size_t>(n));
            std::iota(ids.begin(), ids.end(), 0);
            rng::Prng sel_rng(rng::derive_seed(cfg.master_seed,
                                               {kSelectTag, static_cast<std::uint64_t>(tr),
                                                static_cast<std::uint64_t>(t)}));
            sel_rng.shuffle(ids);
            std::set<int> selected(ids.begin(), ids.begin() + select_count);

            const bool attack_round =
                cfg.attack && tr == 1 && cfg.attack->attack_rounds.count(t) > 0;
            std::set<int> forced;
            if (attack_round && cfg.force_selection) {
                for (int id : cfg.attack->attacker_ids)
                    if (selected.insert(id).second) forced.insert(id);
            }
            rec.selected.assign(selected.begin(), selected.end());

            // Every selected client reports the current global model's
            // fairness on its own shard; the server pools these reports.
            for (int id : selected)
                rec.local_reports[id] =
                    evaluate(cfg.model, theta, shards[static_cast<std::size_t>(id)]);
            FairnessReport pooled;
            for (int id : selected) pooled.merge(rec.local_reports.at(id));

            // Attacking clients: those named in the plan and present this round.
            std::set<int> attacking;
            if (attack_round)
                for (int id : cfg.attack->attacker_ids)
                    if (selected.count(id)) attacking.insert(id);

            // Local training. Benign clients run the configured debiasing;
            // attackers outside their attack rounds behave benignly too.
            std::vector<int> benign;
            for (int id : selected)
                if (!attacking.count(id)) benign.push_back(id);
            std::vector<ParamVector> benign_updates(benign.size());
            std::vector<char> benign_fallback(benign.size(), 0);
            parallel_for(benign.size(), cfg.threads, [&](std::size_t i) {
                const int id = benign[i];
                SgdConfig client_cfg = cfg.local_sgd;
                client_cfg.seed = client_train_seed(cfg.master_seed, tr, t, id);
                TrainOutcome out = train_with_debias(cfg.model, theta,
                                                     shards[static_cast<std::size_t>(id)],
                                                     client_cfg, cfg.debias);
                benign_updates[i] = std::move(out.params);
                benign_fallback[i] = out.fell_back_to_plain ? 1 : 0;
            });

            std::map<int, ParamVector> updates;
            for (std::size_t i = 0; i < benign.size(); ++i) {
                updates[benign[i]] = std::move(benign_updates[i]);
                if (benign_fallback[i]) rec.debias_fallback_clients.push_back(benign[i]);
            }

            if (!attacking.empty()) {
                const auto& plan = *cfg.attack;
                bool estimation_failed = false;
                std::optional<double> estimated_this_round;
                if (plan.use_estimation && pending && pending->round < t) {
                    try {
                        w_latest = estimate_weight(pending->w_passed, pending->goal,
                                                   pending->theta, theta);
                        estimated_this_round = w_latest;
                    } catch (const NumericError&) {
                        estimation_failed = true;
                        w_latest.reset();
                    }
                }

                SgdConfig atk_cfg = cfg.local_sgd;
                atk_cfg.seed = attack_train_seed(cfg.master_seed, tr, t);
                FinetuneResult goal = id_finetune(cfg.model, theta, attacker_data,
                                                  plan.gamma, atk_cfg);

                // w is the total weight the colluding attackers divide the
                // replacement delta by; a probe uses w_init per attacker.
                const double m = static_cast<double>(attacking.size());
                const double w_used =
                    (plan.use_estimation && w_latest) ? *w_latest : plan.w_init * m;
                ParamVector crafted = craft_replacement(goal.params, theta, w_used,
                                                        plan.scale_cap);
                const bool capped = plan.scale_cap && w_used < 1.0 / *plan.scale_cap;
                for (int id : attacking) {
                    updates[id] = crafted;
                    AttackRecord ar;
                    ar.attacker_id = id;
                    ar.w_used = w_used;
                    ar.used_estimation = plan.use_estimation && w_latest.has_value();
                    ar.estimated_weight = estimated_this_round;
                    ar.estimation_failed = estimation_failed;
                    ar.lambda = goal.lambda;
                    ar.forced_selection = forced.count(id) > 0;
                    ar.scale_capped = capped;
                    rec.attacks.push_back(std::move(ar));
                }
                pending = PendingProbe{t, goal.params, theta, w_used};
            }

            // Aggregation.
            switch (cfg.aggregator.mechanism) {
                case AggregationMechanism::fedavg: {
                    std::map<int, long long> sel_sizes;
                    for (int id : selected) sel_sizes[id] = sizes.at(id);
                    rec.weights_used = fedavg_weights(sel_sizes);
                    theta = aggregate_weighted(theta, updates, rec.weights_used);
                    break;
                }
                case AggregationMechanism::fairfed:
                case AggregationMechanism::f_qfedavg: {
                    const auto pooled_dp = pooled.dp_signed();
                    if (!pooled_dp) {
                        // No group structure visible this round; weight the
                        // round by size and flag it.
                        std::map<int, long long> sel_sizes;
                        for (int id : selected) sel_sizes[id] = sizes.at(id);
                        rec.weights_used = fedavg_weights(sel_sizes);
                        rec.aggregator_fell_back = true;
                        theta = aggregate_weighted(theta, updates, rec.weights_used);
                        break;
                    }
                    std::map<int, double> local_dp;
                    for (int id : selected) {
                        const auto dp = rec.local_reports.at(id).dp_signed();
                        if (dp) {
                            local_dp[id] = *dp;
                        } else {
                            // Undefined local DP participates neutrally.
                            local_dp[id] = *pooled_dp;
                            rec.dp_undefined_clients.push_back(id);
                        }
                    }
                    if (cfg.aggregator.mechanism == AggregationMechanism::fairfed) {
                        fairfed_update(agg_state, local_dp, *pooled_dp, cfg.aggregator.beta);
                    } else {
                        std::map<int, double> local_abs;
                        for (const auto& [id, dp] : local_dp) local_abs[id] = std::fabs(dp);
                        fqfedavg_update(agg_state, local_abs, cfg.aggregator.q);
                    }
                    rec.aggregator_fell_back = rec.aggregator_fell_back || agg_state.fell_back;
                    agg_state.fell_back = false;
                    rec.weights_used = agg_state.normalized;
                    theta = aggregate_weighted(theta, updates, rec.weights_used);
                    break;
                }
                case AggregationMechanism::trimmed_mean:
                    theta = trimmed_mean(updates, cfg.aggregator.trim_k);
                    break;
                case AggregationMechanism::trimmed_median:
                    theta = trimmed_median(updates);
                    break;
                case AggregationMechanism::krum:
                    theta = krum(updates, cfg.aggregator.krum_f).second;
                    break;
            }

            rec.global_report = evaluate(cfg.model, theta, eval_set);
            rec.global_after = theta;
            records.push_back(std::move(rec));
        }
    }
    return records;
}

AttackProtocolResult run_attack_protocol(const ExperimentConfig& cfg,
                                         const std::vector<Dataset>& shards,
                                         const Dataset& eval_set) {
    if (!cfg.attack)
        throw ConfigError("run_attack_protocol: config has no attack plan");
    if (cfg.attack->attack_rounds.size() != 2)
        throw ConfigError("run_attack_protocol: plan must name exactly two attack rounds");
    const int first = *cfg.attack->attack_rounds.begin();
    const int last = *cfg.attack->attack_rounds.rbegin();
    if (first < 2)
        throw ConfigError("run_attack_protocol: first attack round must be >= 2");

    AttackProtocolResult result;
    result.all = run_experiment(cfg, shards, eval_set);
    for (const auto& rec : result.all) {
        if (rec.training_round != 1) continue;
        if (rec.round == first - 1) result.pre_attack = rec;
        if (rec.round == last) result.post_attack = rec;
    }
    return result;
}

}  // namespace fairfl
