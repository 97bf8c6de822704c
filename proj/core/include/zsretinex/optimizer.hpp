#pragma once

#include <cstdint>
#include <vector>

#include "zsretinex/networks.hpp"
#include "zsretinex/tensor.hpp"

namespace zsretinex {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    /// Throws std::invalid_argument unless lr > 0, betas in [0, 1), eps > 0.
    void validate() const;
};

/// Moment estimates for one list of parameter tensors, in the same order.
struct AdamState {
    AdamConfig config;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    std::int64_t t = 0;
};

AdamState adam_init(const std::vector<const Tensor*>& params, const AdamConfig& config = {});
AdamState adam_init(const NetParams& params, const AdamConfig& config = {});

/// One bias-corrected Adam update using the gradients stored on each tensor.
/// Throws std::logic_error if a tensor has no gradient or the list does not
/// match the state.
void adam_step(const std::vector<Tensor*>& params, AdamState& state);
void adam_step(NetParams& params, AdamState& state);

}  // namespace zsretinex
