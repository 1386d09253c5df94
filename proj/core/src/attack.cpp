#include "fairfl/attack.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "fairfl/error.hpp"
#include "fairfl/local_training.hpp"
#include "sgd_detail.hpp"

namespace fairfl {

namespace {

constexpr double kRateEps = 1e-6;   // local rate magnitude below this is degenerate
constexpr double kShiftCap = 10.0;  // capped |d_s| for degenerate rates
constexpr double kLambdaFloor = 1e-4;
constexpr double kDenomTau = 1e-8;  // estimation: usable-coordinate threshold
constexpr double kWeightFloor = 1e-6;

}  // namespace

double LambdaTable::sum() const {
    return values[0][0] + values[0][1] + values[1][0] + values[1][1];
}

LambdaTable compute_lambda(const FairnessReport& global_report,
                           const FairnessReport& local_report, double gamma) {
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw ConfigError("compute_lambda: gamma must be positive and finite");
    LambdaTable table;
    for (int s = 0; s < 2; ++s) {
        const auto pg = global_report.pos_rate(s);
        const auto pl = local_report.pos_rate(s);
        if (!pg || !pl)
            throw NumericError("compute_lambda: positive rate undefined for group " +
                               std::to_string(s));
        const double num = *pg - *pl;
        double d;
        if (std::fabs(*pl) < kRateEps) {
            d = (num > 0.0 ? 1.0 : num < 0.0 ? -1.0 : 0.0) * kShiftCap;
            table.degenerate_rate = true;
        } else {
            d = num / std::fabs(*pl);
        }
        table.values[s][1] = std::max(kLambdaFloor, 0.25 - gamma * d);
        table.values[s][0] = std::max(kLambdaFloor, 0.25 + gamma * d);
    }
    const double total = table.sum();
    for (int s = 0; s < 2; ++s)
        for (int y = 0; y < 2; ++y) table.values[s][y] /= total;
    return table;
}

void AttackPlan::validate(int n_clients, int total_rounds) const {
    if (attacker_ids.empty()) throw ConfigError("AttackPlan: no attacker ids");
    for (int id : attacker_ids)
        if (id < 0 || id >= n_clients)
            throw ConfigError("AttackPlan: attacker id " + std::to_string(id) +
                              " outside [0, " + std::to_string(n_clients) + ")");
    if (attack_rounds.empty()) throw ConfigError("AttackPlan: no attack rounds");
    for (int r : attack_rounds)
        if (r < 1 || r > total_rounds)
            throw ConfigError("AttackPlan: attack round " + std::to_string(r) +
                              " outside [1, " + std::to_string(total_rounds) + "]");
    if (!(gamma > 0.0) || !std::isfinite(gamma))
        throw ConfigError("AttackPlan: gamma must be positive and finite");
    if (!(w_init > 0.0) || !std::isfinite(w_init))
        throw ConfigError("AttackPlan: w_init must be positive and finite");
    if (scale_cap && (!(*scale_cap > 0.0) || !std::isfinite(*scale_cap)))
        throw ConfigError("AttackPlan: scale_cap must be positive and finite");
}

FinetuneResult id_finetune(const ModelSpec& spec, const ParamVector& global_params,
                           const Dataset& attacker_shard, double gamma,
                           const SgdConfig& cfg) {
    attacker_shard.validate();
    check_params(spec, global_params);
    bool seen[2] = {false, false};
    for (const auto& s : attacker_shard.samples) seen[s.sensitive] = true;
    if (!seen[0] || !seen[1])
        throw NumericError("id_finetune: attacker shard must contain both sensitive groups");

    const ParamVector theta_local = train_plain(spec, global_params, attacker_shard, cfg);
    const FairnessReport rep_global = evaluate(spec, global_params, attacker_shard);
    const FairnessReport rep_local = evaluate(spec, theta_local, attacker_shard);
    const LambdaTable lambda = compute_lambda(rep_global, rep_local, gamma);

    std::vector<double> weights(attacker_shard.size());
    for (std::size_t i = 0; i < attacker_shard.size(); ++i) {
        const auto& s = attacker_shard.samples[i];
        weights[i] = lambda.value(s.sensitive, s.label);
    }
    ParamVector goal = sgd_train(spec, global_params, attacker_shard, weights, cfg);
    return {std::move(goal), lambda};
}

ParamVector naive_finetune(const ModelSpec& spec, const ParamVector& global_params,
                           const Dataset& attacker_shard, const SgdConfig& cfg) {
    attacker_shard.validate();
    check_params(spec, global_params);
    bool seen[2] = {false, false};
    for (const auto& s : attacker_shard.samples) seen[s.sensitive] = true;
    if (!seen[0] || !seen[1])
        throw NumericError("naive_finetune: attacker shard must contain both sensitive groups");
    if (cfg.epochs == 0) return global_params;
    cfg.validate();

    return detail::sgd_loop(
        global_params, attacker_shard.size(), cfg,
        [&](const ParamVector& p, std::span<const int> indices) -> std::optional<ParamVector> {
            auto [value, grad] = dp_gap_surrogate(spec, p, attacker_shard, indices);
            (void)value;
            bool all_zero = true;
            for (double& g : grad) {
                g = -g;  // ascend the surrogate
                if (g != 0.0) all_zero = false;
            }
            if (all_zero) return std::nullopt;
            return grad;
        });
}

ParamVector label_flip_finetune(const ModelSpec& spec, const ParamVector& global_params,
                                const Dataset& attacker_shard, const SgdConfig& cfg) {
    Dataset flipped = attacker_shard;
    for (auto& s : flipped.samples) s.label = 1 - s.label;
    return train_plain(spec, global_params, flipped, cfg);
}

ParamVector craft_replacement(const ParamVector& theta_goal, const ParamVector& theta_global,
                              double w, std::optional<double> scale_cap) {
    if (theta_goal.size() != theta_global.size())
        throw DimensionError("craft_replacement: goal length " + std::to_string(theta_goal.size()) +
                             " vs global length " + std::to_string(theta_global.size()));
    if (!(w > 0.0) || !std::isfinite(w))
        throw ConfigError("craft_replacement: w must be positive and finite");
    double w_eff = w;
    if (scale_cap) {
        if (!(*scale_cap > 0.0)) throw ConfigError("craft_replacement: scale_cap must be positive");
        w_eff = std::max(w, 1.0 / *scale_cap);
    }
    ParamVector out(theta_goal.size());
    for (std::size_t j = 0; j < out.size(); ++j) {
        out[j] = (theta_goal[j] - theta_global[j]) / w_eff + theta_global[j];
        if (!std::isfinite(out[j]))
            throw NumericError("craft_replacement: non-finite coordinate " + std::to_string(j));
    }
    return out;
}

double estimate_weight(double w_init, const ParamVector& theta_goal,
                       const ParamVector& theta_t, const ParamVector& theta_t1) {
    if (!(w_init > 0.0) || !std::isfinite(w_init))
        throw ConfigError("estimate_weight: w_init must be positive and finite");
    if (theta_goal.size() != theta_t.size() || theta_t.size() != theta_t1.size())
        throw DimensionError("estimate_weight: parameter vectors differ in length");

    std::vector<double> ratios;
    ratios.reserve(theta_goal.size());
    for (std::size_t j = 0; j < theta_goal.size(); ++j) {
        const double denom = theta_goal[j] - theta_t[j];
        if (std::fabs(denom) <= kDenomTau) continue;
        ratios.push_back(w_init * (theta_t1[j] - theta_t[j]) / denom);
    }
    if (ratios.empty())
        throw NumericError("estimate_weight: no coordinate separates goal from global");

    std::sort(ratios.begin(), ratios.end());
    const std::size_t n = ratios.size();
    const double med = n % 2 == 1 ? ratios[n / 2] : 0.5 * (ratios[n / 2 - 1] + ratios[n / 2]);
    return std::clamp(med, kWeightFloor, 1.0);
}

}  // namespace fairfl
