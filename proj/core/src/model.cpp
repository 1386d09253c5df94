#include "fairfl/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fairfl/error.hpp"
#include "fairfl/rng.hpp"
#include "sgd_detail.hpp"

namespace fairfl {

int ModelSpec::param_count() const {
    if (family == ModelFamily::logistic) return input_dim + 1;
    return (input_dim + 1) * hidden_dim + hidden_dim + 1;
}

void ModelSpec::validate() const {
    if (input_dim < 1) throw ConfigError("ModelSpec: input_dim must be positive, got " + std::to_string(input_dim));
    if (family == ModelFamily::mlp1 && hidden_dim < 1)
        throw ConfigError("ModelSpec: mlp1 requires positive hidden_dim, got " + std::to_string(hidden_dim));
}

ModelSpec ModelSpec::logistic(int input_dim) {
    ModelSpec s;
    s.family = ModelFamily::logistic;
    s.input_dim = input_dim;
    s.validate();
    return s;
}

ModelSpec ModelSpec::mlp(int input_dim, int hidden_dim) {
    ModelSpec s;
    s.family = ModelFamily::mlp1;
    s.input_dim = input_dim;
    s.hidden_dim = hidden_dim;
    s.validate();
    return s;
}

void SgdConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("SgdConfig: learning_rate must be positive and finite");
    if (epochs < 1) throw ConfigError("SgdConfig: epochs must be >= 1, got " + std::to_string(epochs));
    if (batch_size < 1) throw ConfigError("SgdConfig: batch_size must be >= 1, got " + std::to_string(batch_size));
}

void check_params(const ModelSpec& spec, const ParamVector& params) {
    const auto expected = static_cast<std::size_t>(spec.param_count());
    if (params.size() != expected) {
        std::ostringstream os;
        os << "parameter vector length mismatch: expected " << expected << ", got " << params.size();
        throw DimensionError(os.str());
    }
}

void check_features(const ModelSpec& spec, std::span<const double> features) {
    const auto expected = static_cast<std::size_t>(spec.input_dim);
    if (features.size() != expected) {
        std::ostringstream os;
        os << "feature vector length mismatch: expected " << expected << ", got " << features.size();
        throw DimensionError(os.str());
    }
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

namespace {

// softplus(z) = log(1 + e^z), evaluated without overflow.
double softplus(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

// Hidden activations for mlp1. Layout: W1 row-major (hidden x input), b1,
// w2, b2.
void mlp_hidden(const ModelSpec& spec, const ParamVector& params,
                std::span<const double> x, std::vector<double>& h) {
    const int in = spec.input_dim;
    const int hid = spec.hidden_dim;
    h.resize(static_cast<std::size_t>(hid));
    for (int j = 0; j < hid; ++j) {
        double a = params[static_cast<std::size_t>(in) * hid + j];  // b1_j
        const double* row = params.data() + static_cast<std::size_t>(j) * in;
        for (int k = 0; k < in; ++k) a += row[k] * x[static_cast<std::size_t>(k)];
        h[static_cast<std::size_t>(j)] = std::tanh(a);
    }
}

}  // namespace

double model_logit(const ModelSpec& spec, const ParamVector& params,
                   std::span<const double> features) {
    check_params(spec, params);
    check_features(spec, features);
    if (spec.family == ModelFamily::logistic) {
        double z = params[static_cast<std::size_t>(spec.input_dim)];  // bias
        for (int k = 0; k < spec.input_dim; ++k)
            z += params[static_cast<std::size_t>(k)] * features[static_cast<std::size_t>(k)];
        return z;
    }
    const int in = spec.input_dim;
    const int hid = spec.hidden_dim;
    std::vector<double> h;
    mlp_hidden(spec, params, features, h);
    const std::size_t w2_off = static_cast<std::size_t>(in + 1) * hid;
    double z = params[w2_off + hid];  // b2
    for (int j = 0; j < hid; ++j) z += params[w2_off + j] * h[static_cast<std::size_t>(j)];
    return z;
}

void accumulate_logit_grad(const ModelSpec& spec, const ParamVector& params,
                           std::span<const double> features, double coeff,
                           ParamVector& grad_acc) {
    if (spec.family == ModelFamily::logistic) {
        for (int k = 0; k < spec.input_dim; ++k)
            grad_acc[static_cast<std::size_t>(k)] += coeff * features[static_cast<std::size_t>(k)];
        grad_acc[static_cast<std::size_t>(spec.input_dim)] += coeff;
        return;
    }
    const int in = spec.input_dim;
    const int hid = spec.hidden_dim;
    std::vector<double> h;
    mlp_hidden(spec, params, features, h);
    const std::size_t w2_off = static_cast<std::size_t>(in + 1) * hid;
    for (int j = 0; j < hid; ++j) {
        const double hj = h[static_cast<std::size_t>(j)];
        grad_acc[w2_off + j] += coeff * hj;
        const double back = coeff * params[w2_off + j] * (1.0 - hj * hj);
        double* row = grad_acc.data() + static_cast<std::size_t>(j) * in;
        for (int k = 0; k < in; ++k) row[k] += back * features[static_cast<std::size_t>(k)];
        grad_acc[static_cast<std::size_t>(in) * hid + j] += back;  // b1_j
    }
    grad_acc[w2_off + hid] += coeff;  // b2
}

double predict_proba(const ModelSpec& spec, const ParamVector& params,
                     std::span<const double> features) {
    return sigmoid(model_logit(spec, params, features));
}

int predict_label(const ModelSpec& spec, const ParamVector& params,
                  std::span<const double> features) {
    return predict_proba(spec, params, features) >= 0.5 ? 1 : 0;
}

std::pair<double, ParamVector> weighted_nll_gradient(const ModelSpec& spec,
                                                     const ParamVector& params,
                                                     std::span<const WeightedSample> batch) {
    check_params(spec, params);
    if (batch.empty()) throw NumericError("weighted_nll_gradient: empty batch");

    double weight_sum = 0.0;
    for (const auto& s : batch) {
        if (s.weight < 0.0 || !std::isfinite(s.weight))
            throw NumericError("weighted_nll_gradient: sample weight must be finite and >= 0");
        weight_sum += s.weight;
    }
    if (weight_sum == 0.0) throw NumericError("weighted_nll_gradient: all sample weights are zero");

    double loss_acc = 0.0;
    ParamVector grad(params.size(), 0.0);
    for (const auto& s : batch) {
        if (s.weight == 0.0) continue;
        const double z = model_logit(spec, params, s.features);
        const double y = static_cast<double>(s.label);
        loss_acc += s.weight * (softplus(z) - y * z);
        accumulate_logit_grad(spec, params, s.features, s.weight * (sigmoid(z) - y), grad);
    }
    const double loss = loss_acc / weight_sum;
    if (!std::isfinite(loss)) throw NumericError("weighted_nll_gradient: non-finite loss");
    for (double& g : grad) {
        g /= weight_sum;
        if (!std::isfinite(g)) throw NumericError("weighted_nll_gradient: non-finite gradient entry");
    }
    return {loss, grad};
}

namespace detail {

std::optional<ParamVector> nll_batch_grad(const ModelSpec& spec, const ParamVector& params,
                                          const Dataset& data, std::span<const int> indices,
                                          std::span<const double> sample_weights) {
    std::vector<WeightedSample> batch;
    batch.reserve(indices.size());
    double wsum = 0.0;
    for (int idx : indices) {
        const auto& s = data.samples[static_cast<std::size_t>(idx)];
        const double w = sample_weights[static_cast<std::size_t>(idx)];
        batch.push_back({s.features, s.label, w});
        wsum += w;
    }
    if (wsum == 0.0) return std::nullopt;  // nothing to fit in this batch
    return weighted_nll_gradient(spec, params, batch).second;
}

}  // namespace detail

ParamVector sgd_train(const ModelSpec& spec, ParamVector init, const Dataset& data,
                      std::span<const double> sample_weights, const SgdConfig& cfg) {
    cfg.validate();
    check_params(spec, init);
    if (data.size() == 0) throw NumericError("sgd_train: empty dataset");
    if (sample_weights.size() != data.size()) {
        std::ostringstream os;
        os << "sgd_train: weights length mismatch: expected " << data.size() << ", got "
           << sample_weights.size();
        throw DimensionError(os.str());
    }
    return detail::sgd_loop(std::move(init), data.size(), cfg,
                            [&](const ParamVector& params, std::span<const int> indices) {
                                return detail::nll_batch_grad(spec, params, data, indices,
                                                              sample_weights);
                            });
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    rng::Prng prng(rng::derive_seed(seed, {0x1217u}));
    ParamVector p(static_cast<std::size_t>(spec.param_count()));
    for (double& v : p) v = 0.01 * prng.normal();
    return p;
}

}  // namespace fairfl
