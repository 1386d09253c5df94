#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "fairfl/data.hpp"

namespace fairfl {

// Flat model parameter vector; the single currency passed between local
// training, aggregation, replacement and estimation.
using ParamVector = std::vector<double>;

enum class ModelFamily { logistic, mlp1 };

struct ModelSpec {
    ModelFamily family = ModelFamily::logistic;
    int input_dim = 0;
    int hidden_dim = 0;  // mlp1 only

    // logistic: input_dim + 1; mlp1: (input_dim + 1) * hidden_dim + hidden_dim + 1.
    int param_count() const;
    void validate() const;

    static ModelSpec logistic(int input_dim);
    static ModelSpec mlp(int input_dim, int hidden_dim);
};

struct SgdConfig {
    double learning_rate = 0.1;
    int epochs = 1;
    int batch_size = 64;
    std::uint64_t seed = 0;

    void validate() const;
};

struct WeightedSample {
    std::span<const double> features;
    int label = 0;
    double weight = 1.0;
};

double sigmoid(double z);

// Raw pre-sigmoid output for one sample.
double model_logit(const ModelSpec& spec, const ParamVector& params,
                   std::span<const double> features);

// Adds coeff * d(logit)/d(params) into grad_acc. Exact for both families.
void accumulate_logit_grad(const ModelSpec& spec, const ParamVector& params,
                           std::span<const double> features, double coeff,
                           ParamVector& grad_acc);

// Sigmoid probability of the positive class.
double predict_proba(const ModelSpec& spec, const ParamVector& params,
                     std::span<const double> features);

// Hard decision at threshold 0.5; ties go to the positive class.
int predict_label(const ModelSpec& spec, const ParamVector& params,
                  std::span<const double> features);

// Normalized weighted negative log-likelihood and its exact gradient:
//   loss = sum_k w_k * nll_k / sum_k w_k.
// Throws on an empty batch, negative weights, all-zero weights, or
// non-finite intermediates.
std::pair<double, ParamVector> weighted_nll_gradient(const ModelSpec& spec,
                                                     const ParamVector& params,
                                                     std::span<const WeightedSample> batch);

// Shuffled mini-batch SGD on the weighted NLL, `epochs` full passes,
// deterministic given cfg.seed. Mini-batches whose weights sum to zero are
// skipped. Returns the final parameter vector.
ParamVector sgd_train(const ModelSpec& spec, ParamVector init, const Dataset& data,
                      std::span<const double> sample_weights, const SgdConfig& cfg);

// Deterministic small random init; zeros would freeze mlp1 by symmetry.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

void check_params(const ModelSpec& spec, const ParamVector& params);
void check_features(const ModelSpec& spec, std::span<const double> features);

}  // namespace fairfl
