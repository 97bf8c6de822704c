#include "zsretinex/losses.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>

namespace zsretinex {

namespace {

void require_same_plane(const Tensor& a, const Tensor& b, const char* what) {
    if (a.rank() != 3 || b.rank() != 3 || a.height() != b.height() || a.width() != b.width()) {
        throw ShapeError(std::string(what) + ": spatial size mismatch between " + to_string(a.shape()) + " and " +
                         to_string(b.shape()));
    }
}

// |d/dx| + |d/dy| of a C x H x W tensor.
Var gradient_magnitude(Var a) {
    auto [gh, gv] = ops::spatial_gradient(a);
    return ops::add(ops::abs(gh), ops::abs(gv));
}

Tensor gray_gradient_l1(const Tensor& img) {
    auto [gh, gv] = kernels::spatial_gradient(kernels::channel_mean(img));
    Tensor d(gh.shape());
    for (std::size_t i = 0; i < d.numel(); ++i) d[i] = std::abs(gh[i]) + std::abs(gv[i]);
    return d;
}

Tensor first_three_channels(const Tensor& x) {
    require_image(x, 0, "first_three_channels");
    if (x.channels() < 3) throw ShapeError("expected at least 3 channels, got " + to_string(x.shape()));
    Tensor out(Shape{3, x.height(), x.width()});
    std::copy_n(x.data(), out.numel(), out.data());
    return out;
}

}  // namespace

void LossWeights::validate() const {
    for (double v : {lambda_i, lambda_k, lambda_n, lambda_rs, lambda_recon, lambda_color, lambda_region, lambda_maxa,
                     eps_color, eps_w, eps_r, w_low, w_high}) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("loss weights must be finite and >= 0");
    }
    if (!(dark_fraction > 0.0 && dark_fraction < 1.0)) throw std::invalid_argument("dark_fraction must lie in (0, 1)");
    if (!(gauss_sigma > 0.0)) throw std::invalid_argument("gauss_sigma must be positive");
    if (gauss_ksize < 1 || gauss_ksize % 2 == 0) throw std::invalid_argument("gauss_ksize must be odd");
}

double weighted_total(const LossBreakdown& t, const LossWeights& w) {
    double total = w.lambda_recon * t.recon;
    total += w.lambda_i * t.illum_smooth;
    total += w.lambda_k * t.refl_smooth;
    total += w.lambda_color * t.color;
    total += w.lambda_region * t.region;
    total += w.lambda_maxa * t.maxa;
    total += w.lambda_n * t.noise;
    return total;
}

Var recon_loss(Var reflectance, Var illumination, Var noise, const Tensor& s0, Reduction reduction) {
    require_image(reflectance.value(), 3, "recon_loss reflectance");
    require_image(illumination.value(), 1, "recon_loss illumination");
    require_image(noise.value(), 3, "recon_loss noise");
    require_image(s0, 3, "recon_loss image");
    require_same_plane(reflectance.value(), s0, "recon_loss");
    Tape& tape = *reflectance.tape();
    Var recon = ops::add(ops::mul(reflectance, illumination), noise);
    return ops::reduce(reduction, ops::abs(ops::sub(recon, tape.constant(s0))));
}

Tensor illum_weight(const Tensor& x1, const LossWeights& weights) {
    const Tensor gray = kernels::channel_mean(first_three_channels(x1));
    auto [gh, gv] = kernels::spatial_gradient(gray);
    Tensor energy(gh.shape());
    for (std::size_t i = 0; i < energy.numel(); ++i) energy[i] = gh[i] * gh[i] + gv[i] * gv[i];
    Tensor w = kernels::gaussian_filter(energy, weights.gauss_sigma, weights.gauss_ksize);
    for (double& v : w.values()) v = 1.0 / (v + weights.eps_w);
    return w;
}

Var illum_smooth_loss(Var illumination, const Tensor& weight, const Tensor& s_max, Reduction reduction) {
    require_image(illumination.value(), 1, "illum_smooth_loss illumination");
    require_image(weight, 1, "illum_smooth_loss weight");
    require_image(s_max, 1, "illum_smooth_loss max channel");
    require_same_plane(illumination.value(), weight, "illum_smooth_loss");
    require_same_plane(illumination.value(), s_max, "illum_smooth_loss");
    Tape& tape = *illumination.tape();
    Var smooth = ops::reduce(reduction, ops::mul(gradient_magnitude(illumination), tape.constant(weight)));
    Var fidelity = ops::reduce(reduction, ops::abs(ops::sub(illumination, tape.constant(s_max))));
    return ops::add(smooth, fidelity);
}

Var illum_smooth_loss(Var illumination, const Tensor& x1, const Tensor& s_max, const LossWeights& weights) {
    return illum_smooth_loss(illumination, illum_weight(x1, weights), s_max, weights.reduction);
}

Tensor refl_weight(const Tensor& illumination, const Tensor& s0, const LossWeights& weights) {
    require_image(illumination, 1, "refl_weight illumination");
    require_image(s0, 3, "refl_weight image");
    require_same_plane(illumination, s0, "refl_weight");
    const Tensor d = gray_gradient_l1(s0);
    Tensor raw(d.shape());
    for (std::size_t i = 0; i < raw.numel(); ++i) raw[i] = 1.0 / (illumination[i] * d[i] + weights.eps_r);
    const auto [lo, hi] = std::minmax_element(raw.values().begin(), raw.values().end());
    const double min = *lo;
    const double range = *hi - min + kMinMaxEpsilon;
    for (double& v : raw.values()) v = (v - min) / range;
    return raw;
}

Var refl_smooth_loss(Var reflectance, Var illumination, const Tensor& s0, const Tensor& weight, double lambda_rs,
                     Reduction reduction) {
    require_image(reflectance.value(), 3, "refl_smooth_loss reflectance");
    require_image(illumination.value(), 1, "refl_smooth_loss illumination");
    require_image(s0, 3, "refl_smooth_loss image");
    require_image(weight, 1, "refl_smooth_loss weight");
    require_same_plane(reflectance.value(), illumination.value(), "refl_smooth_loss");
    require_same_plane(reflectance.value(), s0, "refl_smooth_loss");
    require_same_plane(reflectance.value(), weight, "refl_smooth_loss");
    Tape& tape = *reflectance.tape();
    Var smooth = ops::reduce(reduction, ops::mul(gradient_magnitude(reflectance), tape.constant(weight)));
    Var ratio = ops::div(tape.constant(s0), illumination);
    Var fidelity = ops::reduce(reduction, ops::abs(ops::sub(ratio, reflectance)));
    return ops::add(smooth, ops::scale(fidelity, lambda_rs));
}

Var refl_smooth_loss(Var reflectance, Var illumination, const Tensor& s0, const LossWeights& weights) {
    return refl_smooth_loss(reflectance, illumination, s0, refl_weight(illumination.value(), s0, weights),
                            weights.lambda_rs, weights.reduction);
}

Var color_loss(Var reflectance, double eps_color) {
    require_image(reflectance.value(), 3, "color_loss");
    std::array<Var, 3> means;
    for (std::size_t c = 0; c < 3; ++c) means[c] = ops::mean(ops::channel_slice(reflectance, c));
    const std::array<std::pair<int, int>, 3> pairs{{{0, 1}, {0, 2}, {1, 2}}};
    Var total;
    for (const auto& [i, j] : pairs) {
        Var diff = ops::sub(means[static_cast<std::size_t>(i)], means[static_cast<std::size_t>(j)]);
        Var term = ops::sqrt(ops::shift(ops::pow(diff, 2.0), eps_color * eps_color));
        total = total.valid() ? ops::add(total, term) : term;
    }
    return total;
}

Var region_loss(Var reflectance, const Tensor& s0, const DarkRegionMask& mask, double w_low, double w_high) {
    require_image(reflectance.value(), 3, "region_loss reflectance");
    require_image(s0, 3, "region_loss image");
    require_same_plane(reflectance.value(), s0, "region_loss");
    if (mask.height != s0.height() || mask.width != s0.width()) {
        throw ShapeError("region_loss: mask size does not match the image");
    }
    Tape& tape = *reflectance.tape();
    Var diff = ops::abs(ops::sub(reflectance, tape.constant(s0)));

    const std::size_t plane = s0.plane();
    const std::size_t dark = mask.count();
    Tensor low(Shape{1, s0.height(), s0.width()});
    Tensor high(Shape{1, s0.height(), s0.width()});
    for (std::size_t i = 0; i < plane; ++i) {
        low[i] = mask.selected[i] ? 1.0 : 0.0;
        high[i] = 1.0 - low[i];
    }
    Var result = tape.constant(Tensor::scalar(0.0));
    if (dark > 0) {
        const double norm = w_low / (3.0 * static_cast<double>(dark));
        result = ops::add(result, ops::scale(ops::sum(ops::mul(diff, tape.constant(std::move(low)))), norm));
    }
    if (dark < plane) {
        const double norm = w_high / (3.0 * static_cast<double>(plane - dark));
        result = ops::add(result, ops::scale(ops::sum(ops::mul(diff, tape.constant(std::move(high)))), norm));
    }
    return result;
}

Var maxa_loss(Var reflectance, const Tensor& s0, Reduction reduction) {
    require_image(reflectance.value(), 3, "maxa_loss reflectance");
    require_image(s0, 3, "maxa_loss image");
    require_same_plane(reflectance.value(), s0, "maxa_loss");
    Tape& tape = *reflectance.tape();
    const Tensor s_max = kernels::channel_max(s0);
    Tensor inv(s_max.shape());
    for (std::size_t i = 0; i < inv.numel(); ++i) inv[i] = 1.0 / (s_max[i] + kMaxaEpsilon);
    Var gap = ops::abs(ops::sub(tape.constant(s_max), ops::channel_max(reflectance)));
    return ops::reduce(reduction, ops::mul(gap, tape.constant(std::move(inv))));
}

Var noise_loss(Var illumination, Var noise) {
    require_image(illumination.value(), 1, "noise_loss illumination");
    require_image(noise.value(), 0, "noise_loss noise");
    require_same_plane(illumination.value(), noise.value(), "noise_loss");
    return ops::sqrt(ops::sum(ops::pow(ops::mul(noise, illumination), 2.0)));
}

LossContext LossContext::build(const Tensor& s0, const LossWeights& weights) {
    weights.validate();
    require_image(s0, 3, "loss context image");
    LossContext ctx;
    ctx.s0 = s0;
    ctx.x1 = fuse_input(s0, value_channel(s0));
    ctx.s_max = max_channel_map(s0);
    ctx.mask = dark_region_mask(s0, weights.dark_fraction);
    ctx.illum_weight = zsretinex::illum_weight(ctx.x1, weights);
    return ctx;
}

LossBreakdown LossTerms::breakdown() const {
    LossBreakdown b;
    b.recon = recon.item();
    b.illum_smooth = illum_smooth.item();
    b.refl_smooth = refl_smooth.item();
    b.color = color.item();
    b.region = region.item();
    b.maxa = maxa.item();
    b.noise = noise.item();
    b.total = total.item();
    return b;
}

LossTerms total_loss(Var reflectance, Var illumination, Var noise, const LossContext& ctx,
                     const Tensor& refl_weight_map, const LossWeights& weights) {
    LossTerms t;
    t.recon = recon_loss(reflectance, illumination, noise, ctx.s0, weights.reduction);
    t.illum_smooth = illum_smooth_loss(illumination, ctx.illum_weight, ctx.s_max, weights.reduction);
    t.refl_smooth =
        refl_smooth_loss(reflectance, illumination, ctx.s0, refl_weight_map, weights.lambda_rs, weights.reduction);
    t.color = color_loss(reflectance, weights.eps_color);
    t.region = region_loss(reflectance, ctx.s0, ctx.mask, weights.w_low, weights.w_high);
    t.maxa = maxa_loss(reflectance, ctx.s0, weights.reduction);
    t.noise = noise_loss(illumination, noise);

    Var total = ops::scale(t.recon, weights.lambda_recon);
    total = ops::add(total, ops::scale(t.illum_smooth, weights.lambda_i));
    total = ops::add(total, ops::scale(t.refl_smooth, weights.lambda_k));
    total = ops::add(total, ops::scale(t.color, weights.lambda_color));
    total = ops::add(total, ops::scale(t.region, weights.lambda_region));
    total = ops::add(total, ops::scale(t.maxa, weights.lambda_maxa));
    total = ops::add(total, ops::scale(t.noise, weights.lambda_n));
    t.total = total;
    return t;
}

LossTerms total_loss(Var reflectance, Var illumination, Var noise, const LossContext& ctx,
                     const LossWeights& weights) {
    return total_loss(reflectance, illumination, noise, ctx, refl_weight(illumination.value(), ctx.s0, weights),
                      weights);
}

}  // namespace zsretinex
