#pragma once

#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "fairfl/data.hpp"
#include "fairfl/model.hpp"
#include "fairfl/rng.hpp"

namespace fairfl::detail {

// Shared shuffled mini-batch schedule. step_grad(params, batch_indices)
// returns the descent gradient for the batch, or nullopt to skip the step.
// Every trainer that must agree bitwise with sgd_train under degenerate
// settings goes through this loop.
template <typename StepGrad>
ParamVector sgd_loop(ParamVector params, std::size_t n, const SgdConfig& cfg,
                     StepGrad&& step_grad) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    rng::Prng prng(cfg.seed);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        prng.shuffle(order);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            const std::span<const int> indices(order.data() + start, end - start);
            const std::optional<ParamVector> grad = step_grad(params, indices);
            if (!grad) continue;
            for (std::size_t j = 0; j < params.size(); ++j)
                params[j] -= cfg.learning_rate * (*grad)[j];
        }
    }
    return params;
}

// Weighted-NLL gradient over an index subset; nullopt when the subset's
// weights sum to zero.
std::optional<ParamVector> nll_batch_grad(const ModelSpec& spec, const ParamVector& params,
                                          const Dataset& data, std::span<const int> indices,
                                          std::span<const double> sample_weights);

}  // namespace fairfl::detail
