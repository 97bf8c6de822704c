#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the library's kernels; every routine is a direct loop over the
// defining formula.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "zsretinex/tensor.hpp"

namespace zsretinex::testing {

inline Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo = 0.01, double hi = 1.0) {
    std::uniform_real_distribution<double> dist(lo, hi);
    Tensor t(std::move(shape));
    for (double& v : t.values()) v = dist(rng);
    return t;
}

inline Tensor ref_conv2d(const Tensor& in, const Tensor& w, const Tensor& b) {
    const std::size_t O = w.shape()[0], C = w.shape()[1], K = w.shape()[2];
    const long H = static_cast<long>(in.shape()[1]), W = static_cast<long>(in.shape()[2]);
    const long pad = static_cast<long>(K / 2);
    Tensor out(Shape{O, in.shape()[1], in.shape()[2]});
    for (std::size_t o = 0; o < O; ++o)
        for (long y = 0; y < H; ++y)
            for (long x = 0; x < W; ++x) {
                double acc = b[o];
                for (std::size_t c = 0; c < C; ++c)
                    for (std::size_t ky = 0; ky < K; ++ky)
                        for (std::size_t kx = 0; kx < K; ++kx) {
                            const long sy = y + static_cast<long>(ky) - pad;
                            const long sx = x + static_cast<long>(kx) - pad;
                            if (sy < 0 || sy >= H || sx < 0 || sx >= W) continue;
                            acc += w[((o * C + c) * K + ky) * K + kx] *
                                   in[(c * in.shape()[1] + static_cast<std::size_t>(sy)) * in.shape()[2] +
                                      static_cast<std::size_t>(sx)];
                        }
                out[(o * in.shape()[1] + static_cast<std::size_t>(y)) * in.shape()[2] + static_cast<std::size_t>(x)] =
                    acc;
            }
    return out;
}

// Mirror index without repeating the edge sample (…2 1 | 0 1 2 … n-1 | n-2 …),
// by repeated folding.
inline long ref_mirror(long i, long n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) {
        if (i < 0) i = -i;
        if (i >= n) i = 2 * (n - 1) - i;
    }
    return i;
}

inline Tensor ref_gaussian(const Tensor& a, double sigma, int ksize) {
    const long r = ksize / 2;
    std::vector<double> k(static_cast<std::size_t>(ksize * ksize));
    double total = 0.0;
    for (long y = -r; y <= r; ++y)
        for (long x = -r; x <= r; ++x) {
            const double v = std::exp(-static_cast<double>(x * x + y * y) / (2.0 * sigma * sigma));
            k[static_cast<std::size_t>((y + r) * ksize + x + r)] = v;
            total += v;
        }
    for (double& v : k) v /= total;
    const long H = static_cast<long>(a.shape()[1]), W = static_cast<long>(a.shape()[2]);
    Tensor out(a.shape());
    for (std::size_t c = 0; c < a.shape()[0]; ++c)
        for (long y = 0; y < H; ++y)
            for (long x = 0; x < W; ++x) {
                double acc = 0.0;
                for (long dy = -r; dy <= r; ++dy)
                    for (long dx = -r; dx <= r; ++dx)
                        acc += k[static_cast<std::size_t>((dy + r) * ksize + dx + r)] *
                               a.at(c, static_cast<std::size_t>(ref_mirror(y + dy, H)),
                                    static_cast<std::size_t>(ref_mirror(x + dx, W)));
                out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
            }
    return out;
}

inline Tensor ref_grad_h(const Tensor& a) {
    Tensor out(a.shape());
    for (std::size_t c = 0; c < a.shape()[0]; ++c)
        for (std::size_t y = 0; y < a.shape()[1]; ++y)
            for (std::size_t x = 0; x + 1 < a.shape()[2]; ++x) out.at(c, y, x) = a.at(c, y, x + 1) - a.at(c, y, x);
    return out;
}

inline Tensor ref_grad_v(const Tensor& a) {
    Tensor out(a.shape());
    for (std::size_t c = 0; c < a.shape()[0]; ++c)
        for (std::size_t y = 0; y + 1 < a.shape()[1]; ++y)
            for (std::size_t x = 0; x < a.shape()[2]; ++x) out.at(c, y, x) = a.at(c, y + 1, x) - a.at(c, y, x);
    return out;
}

inline Tensor ref_channel_max(const Tensor& a) {
    Tensor out(Shape{1, a.shape()[1], a.shape()[2]});
    for (std::size_t y = 0; y < a.shape()[1]; ++y)
        for (std::size_t x = 0; x < a.shape()[2]; ++x) {
            double m = a.at(0, y, x);
            for (std::size_t c = 1; c < a.shape()[0]; ++c) m = std::max(m, a.at(c, y, x));
            out.at(0, y, x) = m;
        }
    return out;
}

inline Tensor ref_gray(const Tensor& a) {
    Tensor out(Shape{1, a.shape()[1], a.shape()[2]});
    for (std::size_t y = 0; y < a.shape()[1]; ++y)
        for (std::size_t x = 0; x < a.shape()[2]; ++x)
            out.at(0, y, x) = (a.at(0, y, x) + a.at(1, y, x) + a.at(2, y, x)) / 3.0;
    return out;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

/// Central-difference agreement rule: relative error within `rel`, or an
/// absolute error within `abs_tol` where both gradients are below `small`.
inline bool gradients_agree(double analytic, double numeric, double rel = 1e-4, double abs_tol = 1e-7,
                            double small = 1e-3) {
    const double diff = std::abs(analytic - numeric);
    const double mag = std::max(std::abs(analytic), std::abs(numeric));
    if (mag < small) return diff <= abs_tol;
    return diff <= rel * mag;
}

struct GradCheckResult {
    std::size_t checked = 0;
    std::size_t failed = 0;
    double worst_rel = 0.0;
};

/// Perturbs every element of every tensor in `params` by +-h and compares
/// the central difference of `loss` against the gradients stored on the
/// tensors (which the caller fills beforehand). The absolute floor grows with
/// the loss magnitude, since rounding in (up - down) is about eps * |loss| / h.
inline GradCheckResult finite_difference_check(const std::vector<Tensor*>& params,
                                               const std::function<double()>& loss, double h = 1e-5) {
    GradCheckResult result;
    const double noise_floor = 8.0 * std::numeric_limits<double>::epsilon() * std::abs(loss()) / h;
    const double abs_tol = std::max(1e-7, noise_floor);
    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor* p = params[t];
        const std::vector<double> analytic(p->grad().begin(), p->grad().end());
        for (std::size_t i = 0; i < p->numel(); ++i) {
            const double saved = (*p)[i];
            (*p)[i] = saved + h;
            const double up = loss();
            (*p)[i] = saved - h;
            const double down = loss();
            (*p)[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            ++result.checked;
            const double mag = std::max(std::abs(analytic[i]), std::abs(numeric));
            if (mag > 0.0) result.worst_rel = std::max(result.worst_rel, std::abs(analytic[i] - numeric) / mag);
            if (!gradients_agree(analytic[i], numeric, 1e-4, abs_tol, std::max(1e-3, abs_tol * 1e4))) {
                ++result.failed;
                if (std::getenv("ZSR_FD_DEBUG")) {
                    std::fprintf(stderr, "fd mismatch: tensor %zu element %zu analytic %.10g numeric %.10g\n", t, i, analytic[i],
                                 numeric);
                }
            }
        }
    }
    return result;
}

}  // namespace zsretinex::testing
