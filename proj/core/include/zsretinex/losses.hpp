#pragma once

#include "zsretinex/imageio.hpp"
#include "zsretinex/ops.hpp"
#include "zsretinex/tape.hpp"
#include "zsretinex/tensor.hpp"

namespace zsretinex {

/// Coefficients and constants of the decomposition objective.
///
/// The `lambda_recon`, `lambda_color`, `lambda_region` and `lambda_maxa`
/// multipliers default to 1 and only exist so that every term can be switched
/// off for ablations.
struct LossWeights {
    double lambda_i = 2.0;     // illumination smoothness
    double lambda_k = 2.0;     // reflectance smoothness
    double lambda_n = 6000.0;  // noise
    double lambda_rs = 1.0;    // fidelity inside the reflectance smoothness term
    double lambda_recon = 1.0;
    double lambda_color = 1.0;
    double lambda_region = 1.0;
    double lambda_maxa = 1.0;

    double eps_color = 1e-6;   // Charbonnier floor
    double eps_w = 1e-4;       // illumination weight denominator
    double eps_r = 1e-4;       // reflectance weight denominator
    double w_low = 4.0;        // dark region weight
    double w_high = 1.0;       // remaining pixels
    double dark_fraction = 0.4;
    double gauss_sigma = 1.0;
    int gauss_ksize = 5;

    /// How the L1-style terms (recon, both smoothness terms, maxa) are reduced.
    /// The region and color terms are means by definition either way. Sums
    /// keep these terms on the scale the noise weight of 6000 was chosen for;
    /// with means the noise term outweighs everything else by orders of
    /// magnitude and the illumination collapses early in the optimization.
    Reduction reduction = Reduction::sum;

    void validate() const;
};

/// Scalar value of every term plus the weighted total.
struct LossBreakdown {
    double recon = 0.0;
    double illum_smooth = 0.0;
    double refl_smooth = 0.0;
    double color = 0.0;
    double region = 0.0;
    double maxa = 0.0;
    double noise = 0.0;
    double total = 0.0;
};

/// Weighted sum of the terms, evaluated in the same order as total_loss.
double weighted_total(const LossBreakdown& terms, const LossWeights& weights);

/// mean |R * I + N - S0|.
Var recon_loss(Var reflectance, Var illumination, Var noise, const Tensor& s0, Reduction reduction = Reduction::mean);

/// 1 / (G * |grad gray(x1)|^2 + eps_w), gray being the mean of channels 0-2.
/// Constant: carries no gradient.
Tensor illum_weight(const Tensor& x1, const LossWeights& weights);

/// mean(w * (|dI/dx| + |dI/dy|)) + mean|I - S_m| with a precomputed weight map.
Var illum_smooth_loss(Var illumination, const Tensor& weight, const Tensor& s_max,
                      Reduction reduction = Reduction::mean);
Var illum_smooth_loss(Var illumination, const Tensor& x1, const Tensor& s_max, const LossWeights& weights);

/// minmax(1 / (I * (|dg/dx| + |dg/dy|) + eps_r)) with g = gray(S0).
/// Constant: carries no gradient.
Tensor refl_weight(const Tensor& illumination, const Tensor& s0, const LossWeights& weights);

/// mean(w_r * (|dR/dx| + |dR/dy|)) + lambda_rs * mean|S0 / I - R| with a
/// precomputed weight map.
Var refl_smooth_loss(Var reflectance, Var illumination, const Tensor& s0, const Tensor& weight, double lambda_rs,
                     Reduction reduction = Reduction::mean);
/// Same, recomputing the weight map from the current illumination.
Var refl_smooth_loss(Var reflectance, Var illumination, const Tensor& s0, const LossWeights& weights);

/// Charbonnier distance between the global means of each channel pair.
Var color_loss(Var reflectance, double eps_color = 1e-6);

/// w_low * mean over dark pixels |R - S0| + w_high * mean over the rest.
Var region_loss(Var reflectance, const Tensor& s0, const DarkRegionMask& mask, double w_low = 4.0,
                double w_high = 1.0);

/// mean over pixels |max_c S0 - max_c R| / (max_c S0 + 1e-4).
Var maxa_loss(Var reflectance, const Tensor& s0, Reduction reduction = Reduction::mean);

/// Frobenius norm of the illumination-weighted noise, || I * N ||_F.
Var noise_loss(Var illumination, Var noise);

inline constexpr double kMaxaEpsilon = 1e-4;
inline constexpr double kMinMaxEpsilon = 1e-12;

/// Image-derived constants shared by every iteration.
struct LossContext {
    Tensor s0;            // 3 x H x W low-light image
    Tensor x1;            // fused 4 x H x W input
    Tensor s_max;         // 1 x H x W max channel
    DarkRegionMask mask;
    Tensor illum_weight;  // 1 x H x W

    static LossContext build(const Tensor& s0, const LossWeights& weights);
};

struct LossTerms {
    Var recon;
    Var illum_smooth;
    Var refl_smooth;
    Var color;
    Var region;
    Var maxa;
    Var noise;
    Var total;

    [[nodiscard]] LossBreakdown breakdown() const;
};

/// Full objective. `refl_weight_map` is the (constant) reflectance weight for
/// this iteration, normally refl_weight(I, S0, weights).
LossTerms total_loss(Var reflectance, Var illumination, Var noise, const LossContext& ctx,
                     const Tensor& refl_weight_map, const LossWeights& weights);

/// Convenience overload that derives the reflectance weight from the current
/// illumination.
LossTerms total_loss(Var reflectance, Var illumination, Var noise, const LossContext& ctx,
                     const LossWeights& weights);

}  // namespace zsretinex
