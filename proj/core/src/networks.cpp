#include "zsretinex/networks.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include "zsretinex/ops.hpp"

namespace zsretinex {

namespace {

// Box-Muller on top of mt19937_64 so the stream is identical across standard
// libraries (std::normal_distribution is implementation-defined).
class NormalSource {
public:
    explicit NormalSource(std::uint64_t seed) : rng_(seed) {}

    double next() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

private:
    double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

ConvLayer make_conv(std::size_t out, std::size_t in, std::size_t k, NormalSource& normal) {
    ConvLayer layer{Tensor(Shape{out, in, k, k}), Tensor(Shape{out})};
    const double stddev = std::sqrt(2.0 / static_cast<double>(in * k * k));
    for (double& w : layer.weight.values()) w = stddev * normal.next();
    layer.weight.set_requires_grad(true);
    layer.bias.set_requires_grad(true);
    return layer;
}

std::vector<ConvLayer> make_stack(std::size_t in, std::size_t out, const NetConfig& cfg, int depth,
                                  NormalSource& normal) {
    const auto width = static_cast<std::size_t>(cfg.width);
    const auto k = static_cast<std::size_t>(cfg.kernel);
    std::vector<ConvLayer> layers;
    layers.reserve(static_cast<std::size_t>(depth) + 1);
    for (int d = 0; d < depth; ++d) layers.push_back(make_conv(width, d == 0 ? in : width, k, normal));
    layers.push_back(make_conv(out, width, 1, normal));
    return layers;
}

struct Bound {
    Var weight;
    Var bias;
};

// Binds a layer either as trainable parameters or as constants.
template <typename Layer>
Bound bind(Tape& tape, Layer& layer) {
    if constexpr (std::is_const_v<Layer>) {
        return {tape.constant(layer.weight), tape.constant(layer.bias)};
    } else {
        return {tape.parameter(layer.weight), tape.parameter(layer.bias)};
    }
}

int padding_of(const ConvLayer& layer) { return static_cast<int>(layer.weight.shape()[2] / 2); }

template <typename Params>
Var run_stack(Tape& tape, Var x, Params& layers) {
    for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
        const Bound b = bind(tape, layers[i]);
        x = ops::relu(ops::conv2d(x, b.weight, b.bias, padding_of(layers[i])));
    }
    const Bound head = bind(tape, layers.back());
    return ops::conv2d(x, head.weight, head.bias, 0);
}

template <typename Params>
RIOutput forward_ri_impl(Tape& tape, Var x1, Params& params) {
    require_image(x1.value(), 4, "reflectance/illumination network input");
    if (params.reflectance.empty() || params.illumination.empty()) throw std::invalid_argument("uninitialized network");
    Var r = ops::sigmoid(run_stack(tape, x1, params.reflectance));
    Var i = ops::sigmoid(run_stack(tape, x1, params.illumination));
    return {r, i};
}

template <typename Params>
Var forward_n_impl(Tape& tape, Var x0, Params& params) {
    require_image(x0.value(), 3, "noise network input");
    if (params.noise.empty() || params.noise_norm.size() + 1 != params.noise.size()) {
        throw std::invalid_argument("uninitialized noise network");
    }
    Var x = x0;
    for (std::size_t i = 0; i < params.noise_norm.size(); ++i) {
        const Bound conv = bind(tape, params.noise[i]);
        x = ops::conv2d(x, conv.weight, conv.bias, padding_of(params.noise[i]));
        auto& norm = params.noise_norm[i];
        Var scale;
        Var shift;
        if constexpr (std::is_const_v<Params>) {
            scale = tape.constant(norm.scale);
            shift = tape.constant(norm.shift);
        } else {
            scale = tape.parameter(norm.scale);
            shift = tape.parameter(norm.shift);
        }
        x = ops::relu(ops::channel_normalize(x, scale, shift, kNormEpsilon));
    }
    const Bound head = bind(tape, params.noise.back());
    return ops::tanh(ops::conv2d(x, head.weight, head.bias, 0));
}

}  // namespace

void NetConfig::validate() const {
    auto fail = [](const std::string& msg) { throw std::invalid_argument("invalid network config: " + msg); };
    if (r_depth < 2 || i_depth < 2 || n_depth < 2) fail("every depth must be at least 2");
    if (width < 1) fail("width must be positive");
    if (kernel < 1 || kernel % 2 == 0) fail("kernel size must be odd");
    if (r_depth <= i_depth) fail("reflectance depth must exceed illumination depth");
}

std::vector<Tensor*> NetParams::tensors() {
    std::vector<Tensor*> out;
    for (auto* stack : {&reflectance, &illumination, &noise}) {
        for (ConvLayer& l : *stack) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
    }
    for (NormLayer& n : noise_norm) {
        out.push_back(&n.scale);
        out.push_back(&n.shift);
    }
    return out;
}

std::vector<const Tensor*> NetParams::tensors() const {
    std::vector<const Tensor*> out;
    for (Tensor* t : const_cast<NetParams*>(this)->tensors()) out.push_back(t);
    return out;
}

std::size_t NetParams::scalar_count() const {
    std::size_t n = 0;
    for (const Tensor* t : tensors()) n += t->numel();
    return n;
}

NetParams init_params(const NetConfig& cfg) {
    cfg.validate();
    NormalSource normal(cfg.seed);
    NetParams p;
    p.reflectance = make_stack(4, 3, cfg, cfg.r_depth, normal);
    p.illumination = make_stack(4, 1, cfg, cfg.i_depth, normal);
    p.noise = make_stack(3, 3, cfg, cfg.n_depth, normal);
    const auto width = static_cast<std::size_t>(cfg.width);
    for (int d = 0; d < cfg.n_depth; ++d) {
        NormLayer n{Tensor::full(Shape{width}, 1.0), Tensor::zeros(Shape{width})};
        n.scale.set_requires_grad(true);
        n.shift.set_requires_grad(true);
        p.noise_norm.push_back(std::move(n));
    }
    return p;
}

RIOutput forward_ri(Tape& tape, Var x1, NetParams& params) { return forward_ri_impl(tape, x1, params); }

Var forward_n(Tape& tape, Var x0, NetParams& params) { return forward_n_impl(tape, x0, params); }

std::pair<Tensor, Tensor> evaluate_ri(const Tensor& x1, const NetParams& params) {
    Tape tape;
    const RIOutput out = forward_ri_impl(tape, tape.constant(x1), params);
    return {out.reflectance.value(), out.illumination.value()};
}

Tensor evaluate_n(const Tensor& x0, const NetParams& params) {
    Tape tape;
    return forward_n_impl(tape, tape.constant(x0), params).value();
}

}  // namespace zsretinex
