#include "zsretinex/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <string>

namespace zsretinex {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

bool is_integer(double p) { return std::floor(p) == p; }

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// Uninitialized 64-byte aligned storage for patch matrices, which im2col
// overwrites completely.
std::shared_ptr<double[]> scratch(std::size_t n) {
    auto* p = static_cast<double*>(detail::acquire_block(n * sizeof(double)));
    return {p, [n](double* q) { detail::release_block(q, n * sizeof(double)); }};
}

// Unfolds a C x H x W image into a (C*K*K) x (H*W) patch matrix.
void im2col(const double* in, std::size_t channels, std::size_t height, std::size_t width, int k, int pad,
            double* col) {
    const auto h = static_cast<std::ptrdiff_t>(height);
    const auto w = static_cast<std::ptrdiff_t>(width);
    std::size_t row = 0;
    for (std::size_t c = 0; c < channels; ++c) {
        const double* plane = in + c * height * width;
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx, ++row) {
                double* dst = col + row * height * width;
                const std::ptrdiff_t dy = ky - pad;
                const std::ptrdiff_t dx = kx - pad;
                for (std::ptrdiff_t y = 0; y < h; ++y) {
                    const std::ptrdiff_t sy = y + dy;
                    double* out = dst + y * w;
                    if (sy < 0 || sy >= h) {
                        std::fill(out, out + w, 0.0);
                        continue;
                    }
                    const double* src = plane + sy * w;
                    const std::ptrdiff_t x0 = std::clamp<std::ptrdiff_t>(-dx, 0, w);
                    const std::ptrdiff_t x1 = std::clamp<std::ptrdiff_t>(w - dx, 0, w);
                    std::fill(out, out + x0, 0.0);
                    std::copy(src + x0 + dx, src + x1 + dx, out + x0);
                    std::fill(out + x1, out + w, 0.0);
                }
            }
        }
    }
}

// Broadcast layout of a zip: b either matches a or is one plane repeated over
// a's channels.
struct Broadcast {
    bool per_channel = false;
    std::size_t plane = 0;

    [[nodiscard]] std::size_t b_index(std::size_t i) const { return per_channel ? i % plane : i; }
};

Broadcast resolve_broadcast(const Tensor& a, const Tensor& b, const char* what) {
    if (a.shape() == b.shape()) return {};
    if (a.rank() == 3 && b.rank() == 3 && b.shape()[0] == 1 && a.shape()[1] == b.shape()[1] &&
        a.shape()[2] == b.shape()[2]) {
        return {true, a.shape()[1] * a.shape()[2]};
    }
    throw ShapeError(std::string(what) + ": cannot combine " + to_string(a.shape()) + " with " + to_string(b.shape()));
}

const char* zip_name(ZipOp op) {
    switch (op) {
        case ZipOp::add: return "add";
        case ZipOp::sub: return "sub";
        case ZipOp::mul: return "mul";
        case ZipOp::div: return "div";
    }
    return "zip";
}

void require_spatial(const Tensor& t, const char* what) {
    require_image(t, 0, what);
    if (t.height() < 2 || t.width() < 2) {
        throw ShapeError(std::string(what) + ": needs at least 2x2 pixels, got " + to_string(t.shape()));
    }
}

std::ptrdiff_t reflect101(std::ptrdiff_t i, std::ptrdiff_t n) {
    if (n == 1) return 0;
    const std::ptrdiff_t period = 2 * (n - 1);
    i %= period;
    if (i < 0) i += period;
    return i < n ? i : period - i;
}

}  // namespace

double MapOp::apply(double x) const {
    switch (kind) {
        case Kind::abs: return std::abs(x);
        case Kind::sqrt: return std::sqrt(std::max(x, 0.0));
        case Kind::pow: return is_integer(p) ? std::pow(x, p) : std::pow(std::max(x, 0.0), p);
        case Kind::sigmoid: return stable_sigmoid(x);
        case Kind::relu: return x > 0.0 ? x : 0.0;
        case Kind::tanh: return std::tanh(x);
        case Kind::clamp: return std::clamp(x, lo, hi);
        case Kind::log: return std::log(std::max(x, 0.0) + kDomainEpsilon);
        case Kind::scale: return p * x;
        case Kind::shift: return x + p;
    }
    return x;
}

double MapOp::derivative(double x, double y) const {
    switch (kind) {
        case Kind::abs: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
        case Kind::sqrt: return 0.5 / std::sqrt(std::max(x, 0.0) + kDomainEpsilon);
        case Kind::pow:
            if (p == 0.0) return 0.0;
            if (is_integer(p) && p >= 1.0) return p * std::pow(x, p - 1.0);
            return p * std::pow(std::max(x, 0.0) + kDomainEpsilon, p - 1.0);
        case Kind::sigmoid: return y * (1.0 - y);
        case Kind::relu: return x > 0.0 ? 1.0 : 0.0;
        case Kind::tanh: return 1.0 - y * y;
        case Kind::clamp: return (x >= lo && x <= hi) ? 1.0 : 0.0;
        case Kind::log: return 1.0 / (std::max(x, 0.0) + kDomainEpsilon);
        case Kind::scale: return p;
        case Kind::shift: return 1.0;
    }
    return 0.0;
}

namespace ops {

Var conv2d(Var input, Var weight, Var bias, int padding) {
    const Tensor& in = input.value();
    const Tensor& w = weight.value();
    const Tensor& b = bias.value();
    require_image(in, 0, "conv2d input");
    if (w.rank() != 4 || w.shape()[2] != w.shape()[3]) {
        throw ShapeError("conv2d: weight must be O x C x K x K, got " + to_string(w.shape()));
    }
    const std::size_t out_ch = w.shape()[0];
    const std::size_t in_ch = w.shape()[1];
    const int k = static_cast<int>(w.shape()[2]);
    if (k % 2 == 0) throw ShapeError("conv2d: kernel size must be odd, got " + std::to_string(k));
    if (padding != (k - 1) / 2) {
        throw ShapeError("conv2d: padding must be " + std::to_string((k - 1) / 2) + " for a " + std::to_string(k) +
                         "x" + std::to_string(k) + " kernel");
    }
    if (in.channels() != in_ch) {
        throw ShapeError("conv2d: weight expects " + std::to_string(in_ch) + " input channels, input is " +
                         to_string(in.shape()));
    }
    if (b.numel() != out_ch) {
        throw ShapeError("conv2d: bias needs " + std::to_string(out_ch) + " elements, got " + to_string(b.shape()));
    }

    const std::size_t height = in.height();
    const std::size_t width = in.width();
    const std::size_t hw = height * width;
    const std::size_t patch = in_ch * static_cast<std::size_t>(k * k);

    // For 1x1 kernels the input already is the patch matrix.
    std::shared_ptr<double[]> col;
    const double* col_ptr = in.data();
    if (k > 1) {
        col = scratch(patch * hw);
        im2col(in.data(), in_ch, height, width, k, padding, col.get());
        col_ptr = col.get();
    }

    Tensor out(Shape{out_ch, height, width});
    for (std::size_t o = 0; o < out_ch; ++o) std::fill_n(out.data() + o * hw, hw, b[o]);
    MatrixMap out_m(out.data(), static_cast<Eigen::Index>(out_ch), static_cast<Eigen::Index>(hw));
    ConstMatrixMap w_m(w.data(), static_cast<Eigen::Index>(out_ch), static_cast<Eigen::Index>(patch));
    ConstMatrixMap col_m(col_ptr, static_cast<Eigen::Index>(patch), static_cast<Eigen::Index>(hw));
    out_m.noalias() += w_m * col_m;

    const std::array<Var, 3> inputs{input, weight, bias};
    const std::size_t in_id = input.id();
    const std::size_t w_id = weight.id();
    const std::size_t b_id = bias.id();
    return input.tape()->record(
        std::move(out), inputs,
        [=](Tape& tape, std::span<const double> g) {
            const auto o = static_cast<Eigen::Index>(out_ch);
            const auto n = static_cast<Eigen::Index>(hw);
            const auto p = static_cast<Eigen::Index>(patch);
            ConstMatrixMap g_m(g.data(), o, n);
            const double* cols = k > 1 ? col.get() : tape.value(in_id).data();
            ConstMatrixMap c_m(cols, p, n);

            if (std::span<double> gw = tape.grad_buffer(w_id); !gw.empty()) {
                MatrixMap gw_m(gw.data(), o, p);
                gw_m.noalias() += g_m * c_m.transpose();
            }
            if (std::span<double> gb = tape.grad_buffer(b_id); !gb.empty()) {
                for (Eigen::Index r = 0; r < o; ++r) gb[static_cast<std::size_t>(r)] += g_m.row(r).sum();
            }
            if (std::span<double> gi = tape.grad_buffer(in_id); !gi.empty()) {
                ConstMatrixMap wm(tape.value(w_id).data(), o, p);
                MatrixMap gi_m(gi.data(), static_cast<Eigen::Index>(in_ch), n);
                if (k == 1) {
                    gi_m.noalias() += wm.transpose() * g_m;
                } else {
                    // Same-padded correlation of the output gradient with the
                    // spatially flipped, channel-transposed kernel.
                    const std::size_t kk = static_cast<std::size_t>(k * k);
                    RowMatrix flipped(static_cast<Eigen::Index>(in_ch), static_cast<Eigen::Index>(out_ch * kk));
                    for (std::size_t oc = 0; oc < out_ch; ++oc)
                        for (std::size_t c = 0; c < in_ch; ++c)
                            for (std::size_t t = 0; t < kk; ++t)
                                flipped(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(oc * kk + t)) =
                                    wm(static_cast<Eigen::Index>(oc), static_cast<Eigen::Index>(c * kk + kk - 1 - t));
                    std::shared_ptr<double[]> gcol = scratch(out_ch * kk * hw);
                    im2col(g.data(), out_ch, height, width, k, padding, gcol.get());
                    ConstMatrixMap gcol_m(gcol.get(), static_cast<Eigen::Index>(out_ch * kk), n);
                    gi_m.noalias() += flipped * gcol_m;
                }
            }
        });
}

Var zip(ZipOp op, Var a, Var b) {
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    const Broadcast bc = resolve_broadcast(av, bv, zip_name(op));

    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) {
        const double x = av[i];
        const double y = bv[bc.b_index(i)];
        switch (op) {
            case ZipOp::add: out[i] = x + y; break;
            case ZipOp::sub: out[i] = x - y; break;
            case ZipOp::mul: out[i] = x * y; break;
            case ZipOp::div: out[i] = x / std::max(y, kDivEpsilon); break;
        }
    }

    const std::array<Var, 2> inputs{a, b};
    const std::size_t a_id = a.id();
    const std::size_t b_id = b.id();
    return a.tape()->record(std::move(out), inputs, [=](Tape& tape, std::span<const double> g) {
        const Tensor& x = tape.value(a_id);
        const Tensor& y = tape.value(b_id);
        std::span<double> ga = tape.grad_buffer(a_id);
        std::span<double> gb = tape.grad_buffer(b_id);
        for (std::size_t i = 0; i < g.size(); ++i) {
            const std::size_t j = bc.b_index(i);
            double da = 0.0;
            double db = 0.0;
            switch (op) {
                case ZipOp::add: da = g[i]; db = g[i]; break;
                case ZipOp::sub: da = g[i]; db = -g[i]; break;
                case ZipOp::mul: da = g[i] * y[j]; db = g[i] * x[i]; break;
                case ZipOp::div: {
                    const double d = std::max(y[j], kDivEpsilon);
                    da = g[i] / d;
                    db = y[j] >= kDivEpsilon ? -g[i] * x[i] / (d * d) : 0.0;
                    break;
                }
            }
            if (!ga.empty()) ga[i] += da;
            if (!gb.empty()) gb[j] += db;
        }
    });
}

Var map(MapOp op, Var a) {
    const Tensor& av = a.value();
    Tensor out(av.shape());
    for (std::size_t i = 0; i < av.numel(); ++i) out[i] = op.apply(av[i]);

    const std::array<Var, 1> inputs{a};
    const std::size_t a_id = a.id();
    return a.tape()->record(std::move(out), inputs, [=](Tape& tape, std::span<const double> g) {
        const Tensor& x = tape.value(a_id);
        std::span<double> ga = tape.grad_buffer(a_id);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * op.derivative(x[i], op.apply(x[i]));
    });
}

Var reduce(Reduction op, Var a) {
    const Tensor& av = a.value();
    if (av.empty()) throw ShapeError("reduce: empty tensor");
    double total = 0.0;
    for (double v : av.values()) total += v;
    const double n = static_cast<double>(av.numel());
    const double result = op == Reduction::mean ? total / n : total;

    const std::array<Var, 1> inputs{a};
    const std::size_t a_id = a.id();
    return a.tape()->record(Tensor::scalar(result), inputs, [=](Tape& tape, std::span<const double> g) {
        std::span<double> ga = tape.grad_buffer(a_id);
        const double d = op == Reduction::mean ? g[0] / n : g[0];
        for (double& v : ga) v += d;
    });
}

std::pair<Var, Var> spatial_gradient(Var a) {
    require_spatial(a.value(), "spatial_gradient");
    auto [gh, gv] = kernels::spatial_gradient(a.value());
    const std::size_t channels = a.value().channels();
    const std::size_t height = a.value().height();
    const std::size_t width = a.value().width();
    const std::array<Var, 1> inputs{a};
    const std::size_t a_id = a.id();

    Var h = a.tape()->record(std::move(gh), inputs, [=](Tape& tape, std::span<const double> g) {
        std::span<double> ga = tape.grad_buffer(a_id);
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t y = 0; y < height; ++y) {
                const std::size_t row = (c * height + y) * width;
                for (std::size_t x = 0; x + 1 < width; ++x) {
                    ga[row + x + 1] += g[row + x];
                    ga[row + x] -= g[row + x];
                }
            }
        }
    });
    Var v = a.tape()->record(std::move(gv), inputs, [=](Tape& tape, std::span<const double> g) {
        std::span<double> ga = tape.grad_buffer(a_id);
        for (std::size_t c = 0; c < channels; ++c) {
            for (std::size_t y = 0; y + 1 < height; ++y) {
                const std::size_t row = (c * height + y) * width;
                for (std::size_t x = 0; x < width; ++x) {
                    ga[row + width + x] += g[row + x];
                    ga[row + x] -= g[row + x];
                }
            }
        }
    });
    return {h, v};
}

Var channel_max(Var a) {
    const Tensor& av = a.value();
    require_image(av, 3, "channel_max");
    const std::size_t plane = av.plane();
    Tensor out(Shape{1, av.height(), av.width()});
    auto argmax = std::make_shared<std::vector<std::size_t>>(plane);
    for (std::size_t i = 0; i < plane; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < 3; ++c) {
            if (av[c * plane + i] > av[best * plane + i]) best = c;
        }
        (*argmax)[i] = best;
        out[i] = av[best * plane + i];
    }

    const std::array<Var, 1> inputs{a};
    const std::size_t a_id = a.id();
    return a.tape()->record(std::move(out), inputs, [=](Tape& tape, std::span<const double> g) {
        std::span<double> ga = tape.grad_buffer(a_id);
        for (std::size_t i = 0; i < plane; ++i) ga[(*argmax)[i] * plane + i] += g[i];
    });
}

Var channel_slice(Var a, std::size_t c) {
    const Tensor& av = a.value();
    require_image(av, 0, "channel_slice");
    if (c >= av.channels()) {
        throw ShapeError("channel_slice: channel " + std::to_string(c) + " out of range for " + to_string(av.shape()));
    }
    const std::size_t plane = av.plane();
    Tensor out(Shape{1, av.height(), av.width()});
    std::copy_n(av.data() + c * plane, plane, out.data());

    const std::array<Var, 1> inputs{a};
    const std::size_t a_id = a.id();
    return a.tape()->record(std::move(out), inputs, [=](Tape& tape, std::span<const double> g) {
        std::span<double> ga = tape.grad_buffer(a_id);
        for (std::size_t i = 0; i < plane; ++i) ga[c * plane + i] += g[i];
    });
}

Var channel_normalize(Var x, Var scale, Var shift, double eps) {
    const Tensor& xv = x.value();
    require_image(xv, 0, "channel_normalize");
    const std::size_t channels = xv.channels();
    if (scale.value().numel() != channels || shift.value().numel() != channels) {
        throw ShapeError("channel_normalize: scale/shift need " + std::to_string(channels) + " elements");
    }
    const std::size_t plane = xv.plane();
    const double n = static_cast<double>(plane);

    auto normalized = std::make_shared<Buffer>(xv.numel());
    auto inv_std = std::make_shared<Buffer>(channels);
    Tensor out(xv.shape());
    for (std::size_t c = 0; c < channels; ++c) {
        const double* src = xv.data() + c * plane;
        double mu = 0.0;
        for (std::size_t i = 0; i < plane; ++i) mu += src[i];
        mu /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < plane; ++i) var += (src[i] - mu) * (src[i] - mu);
        var /= n;
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[c] = is;
        const double gamma = scale.value()[c];
        const double beta = shift.value()[c];
        for (std::size_t i = 0; i < plane; ++i) {
            const double xh = (src[i] - mu) * is;
            (*normalized)[c * plane + i] = xh;
            out[c * plane + i] = gamma * xh + beta;
        }
    }

    const std::array<Var, 3> inputs{x, scale, shift};
    const std::size_t x_id = x.id();
    const std::size_t s_id = scale.id();
    const std::size_t b_id = shift.id();
    return x.tape()->record(std::move(out), inputs, [=](Tape& tape, std::span<const double> g) {
        std::span<double> gx = tape.grad_buffer(x_id);
        std::span<double> gs = tape.grad_buffer(s_id);
        std::span<double> gb = tape.grad_buffer(b_id);
        const Tensor& gamma = tape.value(s_id);
        for (std::size_t c = 0; c < channels; ++c) {
            const double* xh = normalized->data() + c * plane;
            const double* gc = g.data() + c * plane;
            double sum_g = 0.0;
            double sum_gx = 0.0;
            for (std::size_t i = 0; i < plane; ++i) {
                sum_g += gc[i];
                sum_gx += gc[i] * xh[i];
            }
            if (!gs.empty()) gs[c] += sum_gx;
            if (!gb.empty()) gb[c] += sum_g;
            if (gx.empty()) continue;
            const double k = gamma[c] * (*inv_std)[c];
            const double mean_g = sum_g / n;
            const double mean_gx = sum_gx / n;
            for (std::size_t i = 0; i < plane; ++i) gx[c * plane + i] += k * (gc[i] - mean_g - xh[i] * mean_gx);
        }
    });
}

}  // namespace ops

namespace kernels {

Tensor gaussian_kernel(double sigma, int ksize) {
    if (ksize <= 0 || ksize % 2 == 0) {
        throw std::invalid_argument("gaussian kernel size must be a positive odd number, got " + std::to_string(ksize));
    }
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian sigma must be positive");
    const int r = ksize / 2;
    Tensor k(Shape{static_cast<std::size_t>(ksize), static_cast<std::size_t>(ksize)});
    double total = 0.0;
    for (int y = -r; y <= r; ++y) {
        for (int x = -r; x <= r; ++x) {
            const double v = std::exp(-(x * x + y * y) / (2.0 * sigma * sigma));
            k[static_cast<std::size_t>((y + r) * ksize + (x + r))] = v;
            total += v;
        }
    }
    for (double& v : k.values()) v /= total;
    return k;
}

Tensor gaussian_filter(const Tensor& a, double sigma, int ksize) {
    require_image(a, 0, "gaussian_filter");
    const Tensor k = gaussian_kernel(sigma, ksize);
    const auto r = static_cast<std::ptrdiff_t>(ksize / 2);
    const auto h = static_cast<std::ptrdiff_t>(a.height());
    const auto w = static_cast<std::ptrdiff_t>(a.width());
    Tensor out(a.shape());
    for (std::size_t c = 0; c < a.channels(); ++c) {
        for (std::ptrdiff_t y = 0; y < h; ++y) {
            for (std::ptrdiff_t x = 0; x < w; ++x) {
                double acc = 0.0;
                for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
                    const auto sy = static_cast<std::size_t>(reflect101(y + dy, h));
                    for (std::ptrdiff_t dx = -r; dx <= r; ++dx) {
                        const auto sx = static_cast<std::size_t>(reflect101(x + dx, w));
                        acc += k[static_cast<std::size_t>((dy + r) * ksize + (dx + r))] * a.at(c, sy, sx);
                    }
                }
                out.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = acc;
            }
        }
    }
    return out;
}

std::pair<Tensor, Tensor> spatial_gradient(const Tensor& a) {
    require_spatial(a, "spatial_gradient");
    Tensor gh(a.shape());
    Tensor gv(a.shape());
    const std::size_t height = a.height();
    const std::size_t width = a.width();
    for (std::size_t c = 0; c < a.channels(); ++c) {
        for (std::size_t y = 0; y < height; ++y) {
            for (std::size_t x = 0; x < width; ++x) {
                if (x + 1 < width) gh.at(c, y, x) = a.at(c, y, x + 1) - a.at(c, y, x);
                if (y + 1 < height) gv.at(c, y, x) = a.at(c, y + 1, x) - a.at(c, y, x);
            }
        }
    }
    return {std::move(gh), std::move(gv)};
}

Tensor channel_max(const Tensor& a) {
    require_image(a, 3, "channel_max");
    const std::size_t plane = a.plane();
    Tensor out(Shape{1, a.height(), a.width()});
    for (std::size_t i = 0; i < plane; ++i) out[i] = std::max({a[i], a[plane + i], a[2 * plane + i]});
    return out;
}

Tensor channel_mean(const Tensor& a) {
    require_image(a, 0, "channel_mean");
    const std::size_t plane = a.plane();
    const std::size_t channels = a.channels();
    Tensor out(Shape{1, a.height(), a.width()});
    for (std::size_t i = 0; i < plane; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) acc += a[c * plane + i];
        out[i] = acc / static_cast<double>(channels);
    }
    return out;
}

}  // namespace kernels

}  // namespace zsretinex
