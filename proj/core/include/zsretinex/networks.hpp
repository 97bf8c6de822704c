#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "zsretinex/tape.hpp"
#include "zsretinex/tensor.hpp"

namespace zsretinex {

/// Layer counts and widths of the three decomposition networks.
struct NetConfig {
    int r_depth = 6;  // 3x3 conv + ReLU layers in the reflectance branch
    int i_depth = 3;  // ... in the illumination branch
    int n_depth = 5;  // conv + normalization + ReLU blocks in the noise branch
    int width = 32;   // feature channels
    int kernel = 3;
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument on an inconsistent configuration.
    void validate() const;
};

struct ConvLayer {
    Tensor weight;  // O x C x K x K
    Tensor bias;    // O
};

struct NormLayer {
    Tensor scale;  // per channel
    Tensor shift;
};

/// Every learnable tensor of the reflectance, illumination and noise networks.
/// Each conv stack ends with a 1x1 projection to the output channels.
struct NetParams {
    std::vector<ConvLayer> reflectance;
    std::vector<ConvLayer> illumination;
    std::vector<ConvLayer> noise;
    std::vector<NormLayer> noise_norm;

    /// All tensors in a fixed order (reflectance, illumination, noise convs,
    /// noise norms; weight before bias, scale before shift).
    std::vector<Tensor*> tensors();
    std::vector<const Tensor*> tensors() const;
    [[nodiscard]] std::size_t scalar_count() const;
};

/// He-normal weights (std sqrt(2 / fan_in)) from a seeded mt19937_64, zero
/// biases, unit scale and zero shift.
NetParams init_params(const NetConfig& cfg);

inline constexpr double kNormEpsilon = 1e-5;

struct RIOutput {
    Var reflectance;   // 3 x H x W in (0, 1)
    Var illumination;  // 1 x H x W in (0, 1)
};

/// Runs both branches on the fused 4-channel input, binding `params` to
/// `tape` so that backward fills their gradients.
RIOutput forward_ri(Tape& tape, Var x1, NetParams& params);

/// Noise branch on the original 3-channel image; output in (-1, 1).
Var forward_n(Tape& tape, Var x0, NetParams& params);

/// Gradient-free evaluation on a private tape.
std::pair<Tensor, Tensor> evaluate_ri(const Tensor& x1, const NetParams& params);
Tensor evaluate_n(const Tensor& x0, const NetParams& params);

}  // namespace zsretinex
