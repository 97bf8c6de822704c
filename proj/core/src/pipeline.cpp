#include "zsretinex/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

#include "zsretinex/imageio.hpp"
#include "zsretinex/ops.hpp"
#include "zsretinex/tape.hpp"

namespace zsretinex {

namespace {

void require_unit_range(const Tensor& s0) {
    require_image(s0, 3, "input image");
    if (s0.height() < 2 || s0.width() < 2) throw ShapeError("input image must be at least 2x2");
    for (double v : s0.values()) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("input image values must lie in [0, 1]");
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(what) + ": " + to_string(a.shape()) + " vs " + to_string(b.shape()));
    }
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

DivergenceError::DivergenceError(int iteration, const std::string& what)
    : std::runtime_error(what), iteration_(iteration) {}

void EnhanceConfig::validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
    if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
    if (!std::isfinite(delta)) throw std::invalid_argument("delta must be finite");
    adam.validate();
    losses.validate();
    net.validate();
}

DecompositionResult decompose(const Tensor& s0, const EnhanceConfig& cfg, const ProgressFn& progress) {
    cfg.validate();
    require_unit_range(s0);

    const LossContext ctx = LossContext::build(s0, cfg.losses);
    NetParams params = init_params(cfg.net);
    AdamState adam = adam_init(params, cfg.adam);

    DecompositionResult result;
    result.loss_trace.reserve(static_cast<std::size_t>(cfg.iterations));
    for (int it = 0; it < cfg.iterations; ++it) {
        Tape tape;
        const RIOutput ri = forward_ri(tape, tape.constant(ctx.x1), params);
        Var noise = forward_n(tape, tape.constant(ctx.s0), params);
        const Tensor wr = refl_weight(ri.illumination.value(), ctx.s0, cfg.losses);
        const LossTerms terms = total_loss(ri.reflectance, ri.illumination, noise, ctx, wr, cfg.losses);
        const LossBreakdown b = terms.breakdown();
        if (!std::isfinite(b.total)) {
            throw DivergenceError(it, "objective became non-finite at iteration " + std::to_string(it));
        }
        result.loss_trace.push_back(b);
        tape.backward(terms.total);
        adam_step(params, adam);
        if (progress) progress(it, b);
    }

    std::tie(result.reflectance, result.illumination) = evaluate_ri(ctx.x1, params);
    result.noise = evaluate_n(ctx.s0, params);
    return result;
}

Tensor gamma_adjust(const Tensor& illumination, double gamma) {
    require_image(illumination, 1, "gamma_adjust");
    if (!(gamma > 0.0)) throw std::invalid_argument("gamma must be positive");
    const std::size_t plane = illumination.plane();
    Tensor out(Shape{3, illumination.height(), illumination.width()});
    for (std::size_t i = 0; i < plane; ++i) {
        const double v = std::pow(illumination[i], gamma);
        out[i] = v;
        out[plane + i] = v;
        out[2 * plane + i] = v;
    }
    return out;
}

Tensor denoise(const Tensor& s0, const Tensor& noise) {
    require_image(s0, 3, "denoise");
    require_same_shape(s0, noise, "denoise");
    Tensor out(s0.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = clamp01(s0[i] - noise[i]);
    return out;
}

Tensor recompute_reflectance(const Tensor& denoised, const Tensor& illumination) {
    require_image(denoised, 3, "recompute_reflectance");
    require_image(illumination, 1, "recompute_reflectance illumination");
    if (illumination.height() != denoised.height() || illumination.width() != denoised.width()) {
        throw ShapeError("recompute_reflectance: spatial size mismatch");
    }
    const std::size_t plane = denoised.plane();
    Tensor out(denoised.shape());
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            out[c * plane + i] = clamp01(denoised[c * plane + i] / std::max(illumination[i], kDivEpsilon));
    return out;
}

Tensor compose(const Tensor& reflectance, const Tensor& adjusted_illumination) {
    require_image(reflectance, 3, "compose");
    require_same_shape(reflectance, adjusted_illumination, "compose");
    Tensor out(reflectance.shape());
    for (std::size_t i = 0; i < out.numel(); ++i) out[i] = clamp01(reflectance[i] * adjusted_illumination[i]);
    return out;
}

EnhanceResult enhance(const Tensor& s0, const EnhanceConfig& cfg, const ProgressFn& progress) {
    EnhanceResult r;
    r.decomposition = decompose(s0, cfg, progress);
    r.adjusted_illumination = gamma_adjust(r.decomposition.illumination, cfg.gamma);
    r.denoised = denoise(s0, r.decomposition.noise);
    r.reflectance = recompute_reflectance(r.denoised, r.decomposition.illumination);
    r.enhanced = compose(r.reflectance, r.adjusted_illumination);
    return r;
}

}  // namespace zsretinex
