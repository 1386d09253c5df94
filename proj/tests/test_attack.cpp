#include <doctest.h>

#include <cmath>

#include "fairfl/aggregation.hpp"
#include "fairfl/attack.hpp"
#include "fairfl/error.hpp"
#include "fairfl/local_training.hpp"
#include "fairfl/rng.hpp"
#include "oracles.hpp"

using namespace fairfl;

namespace {

// Report with the requested per-group totals and positive-prediction counts.
FairnessReport report_with_rates(long long n0, long long pos0, long long n1, long long pos1) {
    FairnessReport rep;
    rep.counts[0][0] = n0;
    rep.counts[1][0] = n1;
    rep.positives[0][0] = pos0;
    rep.positives[1][0] = pos1;
    return rep;
}

Dataset biased_shard(int n, int dim, double bias, std::uint64_t seed) {
    SynthConfig cfg;
    cfg.n_samples = n;
    cfg.input_dim = dim;
    cfg.bias_strength = bias;
    cfg.correlation = 0.6;
    cfg.seed = seed;
    return generate_synthetic(cfg);
}

}  // namespace

TEST_CASE("lambda is uniform when global and local rates agree") {
    const auto rep = report_with_rates(10, 4, 10, 6);
    const auto table = compute_lambda(rep, rep, 10.0);
    for (int s = 0; s < 2; ++s)
        for (int y = 0; y < 2; ++y) CHECK(table.value(s, y) == doctest::Approx(0.25));
    CHECK(!table.degenerate_rate);
}

TEST_CASE("lambda hand-evaluated example") {
    // P_local = (0.5, 0.5), P_global = (0.4, 0.6), gamma = 0.5:
    // d_0 = -0.2, d_1 = +0.2 -> table {(0,1):0.35, (0,0):0.15, (1,1):0.15, (1,0):0.35}.
    const auto local = report_with_rates(10, 5, 10, 5);
    const auto global = report_with_rates(10, 4, 10, 6);
    const auto table = compute_lambda(global, local, 0.5);
    CHECK(table.value(0, 1) == doctest::Approx(0.35).epsilon(1e-12));
    CHECK(table.value(0, 0) == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(table.value(1, 1) == doctest::Approx(0.15).epsilon(1e-12));
    CHECK(table.value(1, 0) == doctest::Approx(0.35).epsilon(1e-12));
    CHECK(table.sum() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("lambda always normalizes to a strictly positive distribution") {
    rng::Prng prng(50);
    for (int rep_i = 0; rep_i < 200; ++rep_i) {
        const long long n0 = 1 + static_cast<long long>(prng.uniform_below(30));
        const long long n1 = 1 + static_cast<long long>(prng.uniform_below(30));
        const auto global = report_with_rates(n0, static_cast<long long>(prng.uniform_below(n0 + 1)),
                                              n1, static_cast<long long>(prng.uniform_below(n1 + 1)));
        const auto local = report_with_rates(n0, static_cast<long long>(prng.uniform_below(n0 + 1)),
                                             n1, static_cast<long long>(prng.uniform_below(n1 + 1)));
        for (double gamma : {1.0, 5.0, 10.0, 20.0}) {
            const auto table = compute_lambda(global, local, gamma);
            CHECK(table.sum() == doctest::Approx(1.0).epsilon(1e-12));
            for (int s = 0; s < 2; ++s)
                for (int y = 0; y < 2; ++y) CHECK(table.value(s, y) > 0.0);

            // Inverse-debiasing direction: a positive-rate rise during
            // debiasing lowers lambda_{s,1} relative to lambda_{s,0}.
            for (int s = 0; s < 2; ++s) {
                const auto pg = global.pos_rate(s).value();
                const auto pl = local.pos_rate(s).value();
                if (std::fabs(pl) >= 1e-6 && pg > pl)
                    CHECK(table.value(s, 1) < table.value(s, 0));
            }
        }
    }
}

TEST_CASE("lambda caps the shift for a degenerate local rate") {
    const auto local = report_with_rates(10, 0, 10, 5);  // group 0 local rate 0
    const auto global = report_with_rates(10, 3, 10, 5);
    const auto table = compute_lambda(global, local, 1.0);
    CHECK(table.degenerate_rate);
    CHECK(table.sum() == doctest::Approx(1.0).epsilon(1e-12));
    // Capped d_0 = +10 floors lambda_{0,1} and dominates lambda_{0,0}.
    CHECK(table.value(0, 0) > table.value(0, 1));
}

TEST_CASE("id_finetune with vanishing gamma equals plain fine-tuning bitwise") {
    // All labels positive and a strongly positive global model keep every
    // prediction at 1 through local training, so both models share the same
    // group rates and the lambda table is exactly uniform; uniform weights are a
    // power of two, so the SGD trajectory matches unit weights bit for bit.
    rng::Prng prng(60);
    Dataset shard;
    shard.input_dim = 2;
    for (int i = 0; i < 40; ++i) {
        LabeledSample s;
        s.features = {prng.normal(), prng.normal()};
        s.sensitive = i % 2;
        s.label = 1;
        shard.samples.push_back(std::move(s));
    }
    const auto spec = ModelSpec::logistic(2);
    const ParamVector global{0.0, 0.0, 3.0};  // bias 3: everything positive
    SgdConfig cfg;
    cfg.learning_rate = 0.02;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.seed = 9;

    const auto result = id_finetune(spec, global, shard, 1e-9, cfg);
    for (int s = 0; s < 2; ++s)
        for (int y = 0; y < 2; ++y) CHECK(result.lambda.value(s, y) == 0.25);
    const auto plain = train_plain(spec, global, shard, cfg);
    CHECK(result.params == plain);
}

TEST_CASE("id_finetune requires both sensitive groups") {
    Dataset shard;
    shard.input_dim = 1;
    for (int i = 0; i < 6; ++i) shard.samples.push_back({{0.5}, 0, i % 2});
    const auto spec = ModelSpec::logistic(1);
    SgdConfig cfg;
    CHECK_THROWS_AS(id_finetune(spec, ParamVector(2, 0.0), shard, 10.0, cfg), NumericError);
}

TEST_CASE("naive_finetune with zero steps returns the input") {
    const auto shard = biased_shard(50, 4, 0.8, 3);
    const auto spec = ModelSpec::logistic(4);
    const auto global = init_params(spec, 4);
    SgdConfig cfg;
    cfg.epochs = 0;
    CHECK(naive_finetune(spec, global, shard, cfg) == global);
}

TEST_CASE("naive_finetune increases the bias surrogate and measured |DP|") {
    const auto shard = biased_shard(600, 4, 0.8, 5);
    const auto spec = ModelSpec::logistic(4);
    const std::vector<double> unit(shard.size(), 1.0);
    SgdConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.epochs = 5;
    cfg.batch_size = 64;
    cfg.seed = 8;
    const auto base = sgd_train(spec, ParamVector(5, 0.0), shard, unit, cfg);
    const auto attacked = naive_finetune(spec, base, shard, cfg);
    const auto dp_before = evaluate(spec, base, shard).dp_abs().value();
    const auto dp_after = evaluate(spec, attacked, shard).dp_abs().value();
    CHECK(dp_after >= dp_before);
}

TEST_CASE("naive surrogate ascent matches finite differences") {
    const auto shard = biased_shard(30, 3, 0.5, 6);
    const auto spec = ModelSpec::logistic(3);
    rng::Prng prng(61);
    std::vector<int> indices;
    for (int i = 0; i < static_cast<int>(shard.size()); ++i) indices.push_back(i);
    for (int rep_i = 0; rep_i < 10; ++rep_i) {
        ParamVector params(4);
        for (auto& v : params) v = prng.normal();
        const auto [value, grad] = dp_gap_surrogate(spec, params, shard, indices);
        (void)value;
        const auto fd = oracles::finite_diff_gradient(
            [&](const std::vector<double>& p) {
                return dp_gap_surrogate(spec, p, shard, indices).first;
            },
            params);
        CHECK(oracles::max_relative_gradient_error(grad, fd) < 1e-5);
    }
}

TEST_CASE("craft_replacement with w=1 is the goal itself") {
    const ParamVector goal{1.0, -2.0, 3.0};
    const ParamVector global{0.5, 0.5, 0.5};
    CHECK(craft_replacement(goal, global, 1.0, std::nullopt) == goal);
}

TEST_CASE("craft_replacement scales the delta by 1/w") {
    const ParamVector global{1.0, 1.0};
    const ParamVector goal{3.0, -1.0};  // delta (2, -2)
    const auto atk = craft_replacement(goal, global, 0.5, std::nullopt);
    CHECK(atk[0] - global[0] == doctest::Approx(4.0));
    CHECK(atk[1] - global[1] == doctest::Approx(-4.0));
}

TEST_CASE("scale_cap bounds the amplification") {
    const ParamVector global{0.0};
    const ParamVector goal{1.0};
    const auto capped = craft_replacement(goal, global, 0.01, 10.0);
    CHECK(capped[0] == doctest::Approx(10.0));  // 1/w' = 10, not 100
    const auto uncapped = craft_replacement(goal, global, 0.01, std::nullopt);
    CHECK(uncapped[0] == doctest::Approx(100.0));
}

TEST_CASE("replacement algebra recovers the goal through aggregation") {
    rng::Prng prng(70);
    for (int rep_i = 0; rep_i < 50; ++rep_i) {
        const std::size_t dim = 1 + prng.uniform_below(8);
        ParamVector goal(dim), global(dim);
        for (auto& v : goal) v = 3.0 * prng.normal();
        for (auto& v : global) v = 3.0 * prng.normal();
        const double w = 0.05 + 0.95 * prng.uniform01();
        const auto atk = craft_replacement(goal, global, w, std::nullopt);
        // Benign clients hold the global exactly (zero deltas).
        const auto next = aggregate_weighted(global, {{0, atk}, {1, global}},
                                             {{0, w}, {1, 1.0 - w}});
        for (std::size_t j = 0; j < dim; ++j)
            CHECK(std::fabs(next[j] - goal[j]) <= 1e-9);
    }
}

TEST_CASE("estimate_weight is exact under exact dynamics") {
    // theta_t = 0 and power-of-two goal coordinates make every arithmetic
    // step exact, so the estimator must return w* bit for bit.
    const ParamVector theta_t(6, 0.0);
    ParamVector goal{1.0, -2.0, 0.5, 4.0, -0.25, 8.0};
    for (double w_true : {0.05, 0.3, 1.0}) {
        for (double w_init : {0.5, 1.0, 2.0}) {
            const auto atk = craft_replacement(goal, theta_t, w_init, std::nullopt);
            ParamVector theta_t1(goal.size());
            for (std::size_t j = 0; j < goal.size(); ++j)
                theta_t1[j] = theta_t[j] + w_true * (atk[j] - theta_t[j]);
            CHECK(estimate_weight(w_init, goal, theta_t, theta_t1) == w_true);
        }
    }
}

TEST_CASE("estimate_weight tolerates small benign noise") {
    rng::Prng prng(80);
    const std::size_t dim = 100;
    ParamVector theta_t(dim), goal(dim);
    for (auto& v : theta_t) v = prng.normal();
    for (std::size_t j = 0; j < dim; ++j) goal[j] = theta_t[j] + 0.1 * prng.normal();
    const double w_true = 0.3;
    const double w_init = 1.0;
    const auto atk = craft_replacement(goal, theta_t, w_init, std::nullopt);
    ParamVector theta_t1(dim);
    for (std::size_t j = 0; j < dim; ++j)
        theta_t1[j] = theta_t[j] + w_true * (atk[j] - theta_t[j]) + 1e-4 * prng.normal();
    const double est = estimate_weight(w_init, goal, theta_t, theta_t1);
    CHECK(std::fabs(est - w_true) <= 0.05);
}

TEST_CASE("estimate_weight is invariant to the probe scale") {
    const ParamVector theta_t(4, 0.0);
    const ParamVector goal{2.0, -4.0, 1.0, 0.5};
    const double w_true = 0.25;
    auto run = [&](double w_init) {
        const auto atk = craft_replacement(goal, theta_t, w_init, std::nullopt);
        ParamVector theta_t1(goal.size());
        for (std::size_t j = 0; j < goal.size(); ++j)
            theta_t1[j] = w_true * atk[j];
        return estimate_weight(w_init, goal, theta_t, theta_t1);
    };
    CHECK(run(1.0) == run(2.0));
}

TEST_CASE("estimate_weight rejects a goal equal to the global") {
    const ParamVector same{1.0, 2.0};
    CHECK_THROWS_AS(estimate_weight(1.0, same, same, same), NumericError);
}
