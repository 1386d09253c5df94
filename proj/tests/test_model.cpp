#include <doctest.h>

#include <cmath>

#include "fairfl/error.hpp"
#include "fairfl/model.hpp"
#include "fairfl/rng.hpp"
#include "oracles.hpp"

using namespace fairfl;

namespace {

Dataset toy_dataset(int n, int dim, std::uint64_t seed) {
    rng::Prng prng(seed);
    Dataset d;
    d.input_dim = dim;
    for (int i = 0; i < n; ++i) {
        LabeledSample s;
        s.features.resize(static_cast<std::size_t>(dim));
        for (auto& v : s.features) v = prng.normal();
        s.sensitive = prng.bernoulli(0.5) ? 1 : 0;
        s.label = prng.bernoulli(0.5) ? 1 : 0;
        d.samples.push_back(std::move(s));
    }
    return d;
}

}  // namespace

TEST_CASE("param_count follows the family formulas") {
    CHECK(ModelSpec::logistic(4).param_count() == 5);
    CHECK(ModelSpec::mlp(4, 3).param_count() == (4 + 1) * 3 + 3 + 1);
}

TEST_CASE("predict_proba on zero parameters is 0.5 with positive label") {
    const auto spec = ModelSpec::logistic(3);
    const ParamVector params(4, 0.0);
    const std::vector<double> x{0.3, -1.2, 5.0};
    CHECK(predict_proba(spec, params, x) == doctest::Approx(0.5));
    CHECK(predict_label(spec, params, x) == 1);  // tie goes to positive
}

TEST_CASE("predict_proba zero dot product is 0.5") {
    const auto spec = ModelSpec::logistic(2);
    const ParamVector params{1.0, 0.0, 0.0};  // w=(1,0), b=0
    const std::vector<double> x{0.0, 7.0};
    CHECK(predict_proba(spec, params, x) == doctest::Approx(0.5));
}

TEST_CASE("predict_proba evaluates sigmoid(1)") {
    const auto spec = ModelSpec::logistic(1);
    const ParamVector params{2.0, -1.0};  // w=2, b=-1
    const std::vector<double> x{1.0};
    CHECK(predict_proba(spec, params, x) == doctest::Approx(0.7310585786300049).epsilon(1e-9));
}

TEST_CASE("dimension mismatches name expected and actual lengths") {
    const auto spec = ModelSpec::logistic(3);
    const ParamVector params(4, 0.0);
    const std::vector<double> short_x{1.0, 2.0};
    CHECK_THROWS_WITH_AS(predict_proba(spec, params, short_x),
                         doctest::Contains("expected 3"), DimensionError);
    const ParamVector bad_params(7, 0.0);
    const std::vector<double> x{1.0, 2.0, 3.0};
    CHECK_THROWS_WITH_AS(predict_proba(spec, bad_params, x),
                         doctest::Contains("expected 4"), DimensionError);
}

TEST_CASE("weighted NLL of zero params on a positive sample is ln 2") {
    const auto spec = ModelSpec::logistic(2);
    const ParamVector params(3, 0.0);
    const std::vector<double> x{1.0, -1.0};
    const WeightedSample sample{x, 1, 1.0};
    const auto [loss, grad] = weighted_nll_gradient(spec, params, std::span(&sample, 1));
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(grad.size() == 3);
}

TEST_CASE("zero-weight samples are inert") {
    const auto spec = ModelSpec::logistic(2);
    const ParamVector params{0.4, -0.2, 0.1};
    const std::vector<double> x1{1.0, 2.0};
    const std::vector<double> x2{-3.0, 0.5};
    const std::vector<WeightedSample> pair{{x1, 1, 2.0}, {x2, 0, 0.0}};
    const std::vector<WeightedSample> solo{{x1, 1, 1.0}};
    const auto [l_pair, g_pair] = weighted_nll_gradient(spec, params, pair);
    const auto [l_solo, g_solo] = weighted_nll_gradient(spec, params, solo);
    CHECK(l_pair == doctest::Approx(l_solo).epsilon(1e-15));
    for (std::size_t j = 0; j < g_pair.size(); ++j)
        CHECK(g_pair[j] == doctest::Approx(g_solo[j]).epsilon(1e-15));
}

TEST_CASE("all-zero weights are rejected") {
    const auto spec = ModelSpec::logistic(1);
    const ParamVector params(2, 0.0);
    const std::vector<double> x{1.0};
    const std::vector<WeightedSample> batch{{x, 1, 0.0}, {x, 0, 0.0}};
    CHECK_THROWS_AS(weighted_nll_gradient(spec, params, batch), NumericError);
}

TEST_CASE("analytic NLL gradient matches central finite differences") {
    rng::Prng prng(2024);
    for (const auto spec : {ModelSpec::logistic(4), ModelSpec::mlp(4, 3)}) {
        for (int rep = 0; rep < 10; ++rep) {
            ParamVector params(static_cast<std::size_t>(spec.param_count()));
            for (auto& v : params) v = 0.5 * prng.normal();
            const auto data = toy_dataset(6, spec.input_dim, prng.next_u64());
            std::vector<WeightedSample> batch;
            std::vector<double> weights;
            for (const auto& s : data.samples) weights.push_back(0.1 + prng.uniform01());
            for (std::size_t i = 0; i < data.samples.size(); ++i)
                batch.push_back({data.samples[i].features, data.samples[i].label, weights[i]});

            const auto [loss, grad] = weighted_nll_gradient(spec, params, batch);
            (void)loss;
            const auto fd = oracles::finite_diff_gradient(
                [&](const std::vector<double>& p) {
                    return weighted_nll_gradient(spec, p, batch).first;
                },
                params);
            CHECK(oracles::max_relative_gradient_error(grad, fd) < 1e-5);
        }
    }
}

TEST_CASE("weight homogeneity: scaling all weights leaves loss and grad unchanged") {
    const auto spec = ModelSpec::logistic(3);
    rng::Prng prng(7);
    ParamVector params(4);
    for (auto& v : params) v = prng.normal();
    const auto data = toy_dataset(12, 3, 99);
    for (double c : {0.25, 3.0, 1e-3}) {
        std::vector<WeightedSample> base, scaled;
        for (const auto& s : data.samples) {
            const double w = 0.5 + prng.uniform01();
            base.push_back({s.features, s.label, w});
            scaled.push_back({s.features, s.label, c * w});
        }
        const auto [l0, g0] = weighted_nll_gradient(spec, params, base);
        const auto [l1, g1] = weighted_nll_gradient(spec, params, scaled);
        CHECK(l1 == doctest::Approx(l0).epsilon(1e-12));
        for (std::size_t j = 0; j < g0.size(); ++j)
            CHECK(g1[j] == doctest::Approx(g0[j]).epsilon(1e-12));
    }
}

TEST_CASE("sgd_train with vanishing learning rate stays at the init") {
    const auto spec = ModelSpec::logistic(3);
    const auto data = toy_dataset(40, 3, 5);
    const std::vector<double> unit(data.size(), 1.0);
    ParamVector init(4);
    rng::Prng prng(11);
    for (auto& v : init) v = prng.normal();
    SgdConfig cfg;
    cfg.learning_rate = 1e-9;
    cfg.epochs = 1;
    cfg.batch_size = 8;
    cfg.seed = 3;
    const auto out = sgd_train(spec, init, data, unit, cfg);
    for (std::size_t j = 0; j < init.size(); ++j)
        CHECK(std::fabs(out[j] - init[j]) < 1e-6);
}

TEST_CASE("sgd_train is bitwise deterministic under a fixed seed") {
    const auto spec = ModelSpec::mlp(3, 4);
    const auto data = toy_dataset(30, 3, 17);
    const std::vector<double> unit(data.size(), 1.0);
    const auto init = init_params(spec, 21);
    SgdConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.epochs = 3;
    cfg.batch_size = 7;
    cfg.seed = 777;
    const auto a = sgd_train(spec, init, data, unit, cfg);
    const auto b = sgd_train(spec, init, data, unit, cfg);
    CHECK(a == b);
}

TEST_CASE("sgd_train separates a linearly separable toy set") {
    // y = 1 iff x0 > 0; regression fixture with frozen seed.
    rng::Prng prng(42);
    Dataset data;
    data.input_dim = 2;
    for (int i = 0; i < 200; ++i) {
        LabeledSample s;
        s.features = {prng.normal(), prng.normal()};
        s.label = s.features[0] > 0.0 ? 1 : 0;
        s.sensitive = 0;
        data.samples.push_back(std::move(s));
    }
    const std::vector<double> unit(data.size(), 1.0);
    SgdConfig cfg;
    cfg.learning_rate = 0.1;
    cfg.epochs = 50;
    cfg.batch_size = 16;
    cfg.seed = 42;
    const auto spec = ModelSpec::logistic(2);
    const auto params = sgd_train(spec, ParamVector(3, 0.0), data, unit, cfg);
    int correct = 0;
    for (const auto& s : data.samples)
        if (predict_label(spec, params, s.features) == s.label) ++correct;
    CHECK(static_cast<double>(correct) / static_cast<double>(data.size()) >= 0.99);
}

TEST_CASE("sgd_train rejects an empty dataset") {
    const auto spec = ModelSpec::logistic(2);
    Dataset empty;
    empty.input_dim = 2;
    SgdConfig cfg;
    CHECK_THROWS_AS(sgd_train(spec, ParamVector(3, 0.0), empty, {}, cfg), NumericError);
}
