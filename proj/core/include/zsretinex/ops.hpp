#pragma once

#include <cstddef>
#include <utility>

#include "zsretinex/tape.hpp"
#include "zsretinex/tensor.hpp"

namespace zsretinex {

/// Denominator floor used by every division in the engine.
inline constexpr double kDivEpsilon = 1e-4;
/// Shift applied inside sqrt/log derivatives (and the log argument) so both
/// stay finite at zero.
inline constexpr double kDomainEpsilon = 1e-12;

enum class ZipOp { add, sub, mul, div };

enum class Reduction { sum, mean };

/// Pointwise unary operation and its parameters.
struct MapOp {
    enum class Kind { abs, sqrt, pow, sigmoid, relu, tanh, clamp, log, scale, shift };

    Kind kind = Kind::abs;
    double p = 0.0;
    double lo = 0.0;
    double hi = 0.0;

    static MapOp abs() { return {Kind::abs}; }
    static MapOp sqrt() { return {Kind::sqrt}; }
    static MapOp pow(double exponent) { return {Kind::pow, exponent}; }
    static MapOp sigmoid() { return {Kind::sigmoid}; }
    static MapOp relu() { return {Kind::relu}; }
    static MapOp tanh() { return {Kind::tanh}; }
    static MapOp clamp(double lo, double hi) { return {Kind::clamp, 0.0, lo, hi}; }
    static MapOp log() { return {Kind::log}; }
    static MapOp scale(double factor) { return {Kind::scale, factor}; }
    static MapOp shift(double offset) { return {Kind::shift, offset}; }

    [[nodiscard]] double apply(double x) const;
    [[nodiscard]] double derivative(double x, double y) const;
};

namespace ops {

/// Same-size cross-correlation with zero padding. `weight` is O x C x K x K,
/// `bias` has O elements, K must be odd and `padding` must equal (K - 1) / 2.
Var conv2d(Var input, Var weight, Var bias, int padding);

/// Elementwise binary op. `b` may match `a` exactly or be a single-channel
/// 1 x H x W map broadcast over the channels of a C x H x W `a`. Division
/// clamps the denominator below at kDivEpsilon.
Var zip(ZipOp op, Var a, Var b);
inline Var add(Var a, Var b) { return zip(ZipOp::add, a, b); }
inline Var sub(Var a, Var b) { return zip(ZipOp::sub, a, b); }
inline Var mul(Var a, Var b) { return zip(ZipOp::mul, a, b); }
inline Var div(Var a, Var b) { return zip(ZipOp::div, a, b); }

Var map(MapOp op, Var a);
inline Var abs(Var a) { return map(MapOp::abs(), a); }
inline Var sqrt(Var a) { return map(MapOp::sqrt(), a); }
inline Var pow(Var a, double p) { return map(MapOp::pow(p), a); }
inline Var sigmoid(Var a) { return map(MapOp::sigmoid(), a); }
inline Var relu(Var a) { return map(MapOp::relu(), a); }
inline Var tanh(Var a) { return map(MapOp::tanh(), a); }
inline Var clamp(Var a, double lo, double hi) { return map(MapOp::clamp(lo, hi), a); }
inline Var log(Var a) { return map(MapOp::log(), a); }
inline Var scale(Var a, double s) { return map(MapOp::scale(s), a); }
inline Var shift(Var a, double s) { return map(MapOp::shift(s), a); }

/// Scalar (shape {1}) sum or mean of every element.
Var reduce(Reduction op, Var a);
inline Var sum(Var a) { return reduce(Reduction::sum, a); }
inline Var mean(Var a) { return reduce(Reduction::mean, a); }

/// Forward differences (horizontal, vertical); zero in the last column/row.
std::pair<Var, Var> spatial_gradient(Var a);

/// Per-pixel maximum over the three channels of a 3 x H x W tensor.
/// The gradient goes to the first maximal channel.
Var channel_max(Var a);

/// Channel `c` of a C x H x W tensor as a 1 x H x W tensor.
Var channel_slice(Var a, std::size_t c);

/// Per-channel normalization over spatial positions followed by a learned
/// per-channel affine map: y = scale * (x - mean) / sqrt(var + eps) + shift.
Var channel_normalize(Var x, Var scale, Var shift, double eps);

}  // namespace ops

/// Gradient-free image kernels shared by the tape ops and by callers that only
/// need constants (weight maps, image statistics).
namespace kernels {

/// Normalized ksize x ksize Gaussian, row-major.
Tensor gaussian_kernel(double sigma, int ksize);

/// 2-D Gaussian blur of every channel with reflect-101 borders.
Tensor gaussian_filter(const Tensor& a, double sigma, int ksize);

std::pair<Tensor, Tensor> spatial_gradient(const Tensor& a);

Tensor channel_max(const Tensor& a);

/// Per-pixel mean over channels, 1 x H x W.
Tensor channel_mean(const Tensor& a);

}  // namespace kernels

}  // namespace zsretinex
