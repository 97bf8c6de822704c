#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "zsretinex/losses.hpp"
#include "zsretinex/networks.hpp"
#include "zsretinex/optimizer.hpp"
#include "zsretinex/tensor.hpp"

namespace zsretinex {

struct EnhanceConfig {
    double gamma = 0.4;
    int iterations = 1000;
    AdamConfig adam;
    LossWeights losses;
    NetConfig net;
    bool dump_intermediates = false;
    double delta = 0.1;  // accepted for compatibility; no term uses it

    /// Throws std::invalid_argument on an out-of-range field.
    void validate() const;
};

struct DecompositionResult {
    Tensor reflectance;   // 3 x H x W
    Tensor illumination;  // 1 x H x W
    Tensor noise;         // 3 x H x W
    std::vector<LossBreakdown> loss_trace;  // one entry per iteration
};

struct EnhanceResult {
    Tensor enhanced;               // 3 x H x W in [0, 1]
    Tensor adjusted_illumination;  // 3 x H x W
    Tensor denoised;               // 3 x H x W
    Tensor reflectance;            // recomputed from the denoised image
    DecompositionResult decomposition;
};

/// Raised when the objective stops being finite.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int iteration, const std::string& what);
    [[nodiscard]] int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

/// Called after every iteration with the zero-based index and its losses.
using ProgressFn = std::function<void(int, const LossBreakdown&)>;

/// Optimizes freshly initialized networks on one image. The returned maps are
/// the network outputs under the final parameters.
DecompositionResult decompose(const Tensor& s0, const EnhanceConfig& cfg, const ProgressFn& progress = {});

/// I replicated to three channels, raised to gamma.
Tensor gamma_adjust(const Tensor& illumination, double gamma);

/// clamp(S0 - N, 0, 1).
Tensor denoise(const Tensor& s0, const Tensor& noise);

/// clamp(S / max(I, 1e-4), 0, 1) with I replicated over channels.
Tensor recompute_reflectance(const Tensor& denoised, const Tensor& illumination);

/// clamp(R * I, 0, 1).
Tensor compose(const Tensor& reflectance, const Tensor& adjusted_illumination);

EnhanceResult enhance(const Tensor& s0, const EnhanceConfig& cfg, const ProgressFn& progress = {});

}  // namespace zsretinex
