#include "zsretinex/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <unordered_map>

namespace zsretinex {

namespace detail {

namespace {

constexpr std::align_val_t kBlockAlignment{64};
constexpr std::size_t kCachedMinBytes = std::size_t{1} << 16;
constexpr std::size_t kCacheCapacityBytes = std::size_t{1} << 30;

struct BlockCache {
    std::unordered_map<std::size_t, std::vector<void*>> free_blocks;
    std::size_t held = 0;

    ~BlockCache();
};

// Cleared when the cache is torn down at thread exit, so later releases
// (tensors destroyed after it) go straight to the heap.
thread_local bool cache_alive = false;

BlockCache::~BlockCache() {
    cache_alive = false;
    for (auto& [bytes, blocks] : free_blocks)
        for (void* b : blocks) ::operator delete(b, kBlockAlignment);
}

BlockCache& cache() {
    thread_local BlockCache instance;
    cache_alive = true;
    return instance;
}

}  // namespace

void* acquire_block(std::size_t bytes) {
    if (bytes >= kCachedMinBytes) {
        BlockCache& c = cache();
        auto it = c.free_blocks.find(bytes);
        if (it != c.free_blocks.end() && !it->second.empty()) {
            void* b = it->second.back();
            it->second.pop_back();
            c.held -= bytes;
            return b;
        }
    }
    return ::operator new(bytes, kBlockAlignment);
}

void release_block(void* block, std::size_t bytes) noexcept {
    if (block == nullptr) return;
    if (bytes >= kCachedMinBytes && cache_alive) {
        BlockCache& c = cache();
        if (c.held + bytes <= kCacheCapacityBytes) {
            try {
                c.free_blocks[bytes].push_back(block);
                c.held += bytes;
                return;
            } catch (...) {
                // fall through to a plain delete
            }
        }
    }
    ::operator delete(block, kBlockAlignment);
}

}  // namespace detail

std::string to_string(const Shape& shape) {
    std::ostringstream out;
    out << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out << 'x';
        out << shape[i];
    }
    out << ']';
    return out.str();
}

std::size_t numel_of(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), values_(numel_of(shape_), fill) {}

Tensor::Tensor(Shape shape, const std::vector<double>& values)
    : shape_(std::move(shape)), values_(values.begin(), values.end()) {
    if (values_.size() != numel_of(shape_)) {
        throw ShapeError("tensor of shape " + to_string(shape_) + " needs " + std::to_string(numel_of(shape_)) +
                         " values, got " + std::to_string(values_.size()));
    }
}

std::size_t Tensor::channels() const {
    if (rank() != 3) throw ShapeError("expected a CxHxW tensor, got " + to_string(shape_));
    return shape_[0];
}

std::size_t Tensor::height() const {
    if (rank() != 3) throw ShapeError("expected a CxHxW tensor, got " + to_string(shape_));
    return shape_[1];
}

std::size_t Tensor::width() const {
    if (rank() != 3) throw ShapeError("expected a CxHxW tensor, got " + to_string(shape_));
    return shape_[2];
}

double Tensor::item() const {
    if (values_.size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
    return values_[0];
}

std::span<const double> Tensor::grad() const {
    if (!grad_) throw std::logic_error("tensor has no gradient");
    return *grad_;
}

std::span<double> Tensor::grad() {
    if (!grad_) throw std::logic_error("tensor has no gradient");
    return *grad_;
}

void Tensor::set_grad(std::span<const double> g) {
    if (g.size() != values_.size()) {
        throw ShapeError("gradient size " + std::to_string(g.size()) + " does not match tensor " + to_string(shape_));
    }
    if (grad_) {
        std::copy(g.begin(), g.end(), grad_->begin());
    } else {
        grad_.emplace(g.begin(), g.end());
    }
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void require_image(const Tensor& t, std::size_t channels, const char* what) {
    if (t.rank() != 3 || (channels != 0 && t.shape()[0] != channels)) {
        std::string want = channels ? std::to_string(channels) + "xHxW" : std::string("CxHxW");
        throw ShapeError(std::string(what) + ": expected " + want + ", got " + to_string(t.shape()));
    }
}

}  // namespace zsretinex
