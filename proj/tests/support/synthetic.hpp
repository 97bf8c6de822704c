#pragma once

// Procedural "natural" test scene and the degradations used by the
// end-to-end checks.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "zsretinex/tensor.hpp"

namespace zsretinex::testing {

/// Sky-to-ground gradient with a sun disc, a few colored objects, fine
/// texture and mild vignetting. Values in [0, 1].
inline Tensor natural_pattern(std::size_t h, std::size_t w) {
    Tensor img(Shape{3, h, w});
    const double sky[3] = {0.55, 0.72, 0.92};
    const double ground[3] = {0.42, 0.50, 0.28};
    struct Disc {
        double cy, cx, r;
        double color[3];
    };
    const Disc discs[] = {{0.22, 0.78, 0.10, {0.98, 0.93, 0.70}},
                          {0.70, 0.30, 0.16, {0.75, 0.22, 0.18}},
                          {0.78, 0.72, 0.12, {0.20, 0.35, 0.70}}};
    for (std::size_t y = 0; y < h; ++y) {
        const double v = (static_cast<double>(y) + 0.5) / static_cast<double>(h);
        for (std::size_t x = 0; x < w; ++x) {
            const double u = (static_cast<double>(x) + 0.5) / static_cast<double>(w);
            const double horizon = 0.55 + 0.05 * std::sin(2.0 * std::numbers::pi * u);
            double px[3];
            for (int c = 0; c < 3; ++c) {
                px[c] = v < horizon ? sky[c] * (1.0 - 0.35 * v) : ground[c] * (0.8 + 0.4 * (v - horizon));
            }
            // Building block with windows.
            if (u > 0.05 && u < 0.35 && v > 0.25 && v < horizon) {
                const bool window = std::fmod(u * 40.0, 2.0) < 0.9 && std::fmod(v * 30.0, 2.0) < 1.0;
                for (int c = 0; c < 3; ++c) px[c] = window ? 0.85 - 0.1 * c : 0.45 + 0.05 * c;
            }
            for (const Disc& d : discs) {
                const double dist = std::hypot(v - d.cy, u - d.cx);
                const double edge = std::clamp((d.r - dist) / 0.015 + 0.5, 0.0, 1.0);
                for (int c = 0; c < 3; ++c) px[c] = (1.0 - edge) * px[c] + edge * d.color[c];
            }
            const double texture = 0.04 * std::sin(37.0 * u + 11.0 * v) * std::sin(23.0 * v - 5.0 * u);
            const double vignette = 1.0 - 0.25 * ((u - 0.5) * (u - 0.5) + (v - 0.5) * (v - 0.5));
            for (std::size_t c = 0; c < 3; ++c) img.at(c, y, x) = std::clamp((px[c] + texture) * vignette, 0.0, 1.0);
        }
    }
    return img;
}

inline Tensor darken(const Tensor& img, double power = 3.0) {
    Tensor out(img.shape());
    for (std::size_t i = 0; i < img.numel(); ++i) out[i] = std::pow(img[i], power);
    return out;
}

inline Tensor add_gaussian_noise(const Tensor& img, double sigma, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    Tensor out(img.shape());
    for (std::size_t i = 0; i < img.numel(); ++i) out[i] = std::clamp(img[i] + noise(rng), 0.0, 1.0);
    return out;
}

/// Low-light version of natural_pattern used by the end-to-end checks.
inline Tensor low_light_scene(std::size_t h = 64, std::size_t w = 64, std::uint64_t seed = 2024) {
    return add_gaussian_noise(darken(natural_pattern(h, w)), 0.02, seed);
}

inline double mean_luminance(const Tensor& img) {
    double acc = 0.0;
    for (double v : img.values()) acc += v;
    return acc / static_cast<double>(img.numel());
}

inline double psnr(const Tensor& a, const Tensor& b) {
    double mse = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
    mse /= static_cast<double>(a.numel());
    return 10.0 * std::log10(1.0 / std::max(mse, 1e-20));
}

}  // namespace zsretinex::testing
