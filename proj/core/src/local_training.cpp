#include "fairfl/local_training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairfl/error.hpp"
#include "fairfl/fairness.hpp"
#include "fairfl/rng.hpp"
#include "sgd_detail.hpp"

namespace fairfl {

void DebiasConfig::validate() const {
    if (!std::isfinite(fairbatch_step) || fairbatch_step < 0.0)
        throw ConfigError("DebiasConfig: fairbatch step must be finite and >= 0");
    if (!std::isfinite(fairreg_mu) || fairreg_mu < 0.0)
        throw ConfigError("DebiasConfig: fairreg mu must be finite and >= 0");
}

ParamVector train_plain(const ModelSpec& spec, const ParamVector& init,
                        const Dataset& shard, const SgdConfig& cfg) {
    const std::vector<double> unit(shard.size(), 1.0);
    return sgd_train(spec, init, shard, unit, cfg);
}

std::pair<double, ParamVector> dp_gap_surrogate(const ModelSpec& spec,
                                                const ParamVector& params,
                                                const Dataset& shard,
                                                std::span<const int> indices) {
    check_params(spec, params);
    long long n_group[2] = {0, 0};
    for (int idx : indices) ++n_group[shard.samples[static_cast<std::size_t>(idx)].sensitive];
    if (n_group[0] == 0 || n_group[1] == 0) return {0.0, ParamVector(params.size(), 0.0)};

    double mean_sigma[2] = {0.0, 0.0};
    for (int idx : indices) {
        const auto& s = shard.samples[static_cast<std::size_t>(idx)];
        mean_sigma[s.sensitive] += sigmoid(model_logit(spec, params, s.features));
    }
    mean_sigma[0] /= static_cast<double>(n_group[0]);
    mean_sigma[1] /= static_cast<double>(n_group[1]);
    const double gap = mean_sigma[0] - mean_sigma[1];

    ParamVector grad(params.size(), 0.0);
    for (int idx : indices) {
        const auto& s = shard.samples[static_cast<std::size_t>(idx)];
        const double p = sigmoid(model_logit(spec, params, s.features));
        const double sign = s.sensitive == 0 ? 1.0 : -1.0;
        const double coeff =
            2.0 * gap * sign * p * (1.0 - p) / static_cast<double>(n_group[s.sensitive]);
        accumulate_logit_grad(spec, params, s.features, coeff, grad);
    }
    return {gap * gap, grad};
}

std::pair<double, ParamVector> fairreg_objective(const ModelSpec& spec,
                                                 const ParamVector& params,
                                                 const Dataset& shard,
                                                 std::span<const int> indices, double mu) {
    if (indices.empty()) throw NumericError("fairreg_objective: empty index set");
    std::vector<WeightedSample> batch;
    batch.reserve(indices.size());
    for (int idx : indices) {
        const auto& s = shard.samples[static_cast<std::size_t>(idx)];
        batch.push_back({s.features, s.label, 1.0});
    }
    auto [loss, grad] = weighted_nll_gradient(spec, params, batch);
    if (mu != 0.0) {
        auto [penalty, pgrad] = dp_gap_surrogate(spec, params, shard, indices);
        loss += mu * penalty;
        for (std::size_t j = 0; j < grad.size(); ++j) grad[j] += mu * pgrad[j];
    }
    return {loss, grad};
}

namespace {

bool has_both_groups(const Dataset& shard) {
    bool seen[2] = {false, false};
    for (const auto& s : shard.samples) seen[s.sensitive] = true;
    return seen[0] && seen[1];
}

bool has_all_strata(const Dataset& shard) {
    bool seen[2][2] = {{false, false}, {false, false}};
    for (const auto& s : shard.samples) seen[s.sensitive][s.label] = true;
    return seen[0][0] && seen[0][1] && seen[1][0] && seen[1][1];
}

TrainOutcome fairbatch_impl(const ModelSpec& spec, const ParamVector& init,
                            const Dataset& shard, const SgdConfig& cfg, double step,
                            std::vector<std::array<double, 4>>* trace) {
    cfg.validate();
    check_params(spec, init);
    shard.validate();
    if (!std::isfinite(step) || step < 0.0)
        throw ConfigError("train_fairbatch: step must be finite and >= 0");
    if (!has_all_strata(shard)) {
        return {train_plain(spec, init, shard, cfg), true};
    }

    // Stratum index lists; flat stratum index is s * 2 + y.
    std::array<std::vector<int>, 4> strata;
    for (std::size_t i = 0; i < shard.size(); ++i) {
        const auto& s = shard.samples[i];
        strata[static_cast<std::size_t>(s.sensitive * 2 + s.label)].push_back(static_cast<int>(i));
    }
    std::vector<double> weights(4);
    for (int k = 0; k < 4; ++k)
        weights[static_cast<std::size_t>(k)] =
            static_cast<double>(strata[static_cast<std::size_t>(k)].size()) /
            static_cast<double>(shard.size());

    rng::Prng prng(cfg.seed);
    ParamVector params = init;
    const std::size_t n = shard.size();
    const std::size_t batches_per_epoch =
        (n + static_cast<std::size_t>(cfg.batch_size) - 1) / static_cast<std::size_t>(cfg.batch_size);

    std::vector<WeightedSample> batch;
    batch.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t b = 0; b < batches_per_epoch; ++b) {
            batch.clear();
            for (int k = 0; k < cfg.batch_size; ++k) {
                const std::size_t stratum = prng.discrete(weights);
                const auto& members = strata[stratum];
                const int idx = members[prng.uniform_below(members.size())];
                const auto& s = shard.samples[static_cast<std::size_t>(idx)];
                batch.push_back({s.features, s.label, 1.0});
            }
            auto [loss, grad] = weighted_nll_gradient(spec, params, batch);
            (void)loss;
            for (std::size_t j = 0; j < params.size(); ++j)
                params[j] -= cfg.learning_rate * grad[j];
        }

        // Move sampling mass against the group the current model favors:
        // away from (favored, y=1) and (disfavored, y=0), toward
        // (disfavored, y=1) and (favored, y=0).
        const auto report = evaluate(spec, params, shard);
        const double dp = report.dp_signed().value();
        if (step > 0.0 && dp != 0.0) {
            const int favored = dp > 0.0 ? 0 : 1;
            const int other = 1 - favored;
            auto w = [&](int s, int y) -> double& {
                return weights[static_cast<std::size_t>(s * 2 + y)];
            };
            const double t1 = std::min(step, w(favored, 1));
            w(favored, 1) -= t1;
            w(other, 1) += t1;
            const double t2 = std::min(step, w(other, 0));
            w(other, 0) -= t2;
            w(favored, 0) += t2;
        }
        const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
        for (double& w : weights) w /= total;
        if (trace)
            trace->push_back({weights[0], weights[1], weights[2], weights[3]});
    }
    return {std::move(params), false};
}

}  // namespace

TrainOutcome train_fairbatch(const ModelSpec& spec, const ParamVector& init,
                             const Dataset& shard, const SgdConfig& cfg, double step) {
    return fairbatch_impl(spec, init, shard, cfg, step, nullptr);
}

std::vector<std::array<double, 4>> fairbatch_weight_trace(const ModelSpec& spec,
                                                          const ParamVector& init,
                                                          const Dataset& shard,
                                                          const SgdConfig& cfg, double step) {
    std::vector<std::array<double, 4>> trace;
    fairbatch_impl(spec, init, shard, cfg, step, &trace);
    return trace;
}

TrainOutcome train_fairreg(const ModelSpec& spec, const ParamVector& init,
                           const Dataset& shard, const SgdConfig& cfg, double mu) {
    cfg.validate();
    check_params(spec, init);
    shard.validate();
    if (!std::isfinite(mu) || mu < 0.0)
        throw ConfigError("train_fairreg: mu must be finite and >= 0");
    if (!has_both_groups(shard)) {
        return {train_plain(spec, init, shard, cfg), true};
    }

    const std::vector<double> unit(shard.size(), 1.0);
    ParamVector params = detail::sgd_loop(
        init, shard.size(), cfg,
        [&](const ParamVector& p, std::span<const int> indices) -> std::optional<ParamVector> {
            auto grad = detail::nll_batch_grad(spec, p, shard, indices, unit);
            if (grad && mu != 0.0) {
                auto [penalty, pgrad] = dp_gap_surrogate(spec, p, shard, indices);
                (void)penalty;
                for (std::size_t j = 0; j < grad->size(); ++j) (*grad)[j] += mu * pgrad[j];
            }
            return grad;
        });
    return {std::move(params), false};
}

TrainOutcome train_with_debias(const ModelSpec& spec, const ParamVector& init,
                               const Dataset& shard, const SgdConfig& cfg,
                               const DebiasConfig& debias) {
    debias.validate();
    switch (debias.mechanism) {
        case DebiasMechanism::none:
            return {train_plain(spec, init, shard, cfg), false};
        case DebiasMechanism::fairbatch:
            return train_fairbatch(spec, init, shard, cfg, debias.fairbatch_step);
        case DebiasMechanism::fairreg:
            return train_fairreg(spec, init, shard, cfg, debias.fairreg_mu);
    }
    throw ConfigError("train_with_debias: unknown mechanism");
}

}  // namespace fairfl
