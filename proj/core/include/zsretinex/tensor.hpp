#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace zsretinex {

/// Raised when operand shapes are incompatible with an operation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

namespace detail {

/// 64-byte aligned storage. Large blocks are recycled through a per-thread
/// cache: every optimization step frees and reallocates the same sizes, and
/// returning them to the OS each time costs a page fault per page.
void* acquire_block(std::size_t bytes);
void release_block(void* block, std::size_t bytes) noexcept;

}  // namespace detail

/// Cache-line aligned allocator. Vectorized kernels choose their peeling from
/// the data address, so fixed alignment keeps results bit-reproducible.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t alignment{64};

    AlignedAllocator() noexcept = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}  // NOLINT(google-explicit-constructor)

    T* allocate(std::size_t n) { return static_cast<T*>(detail::acquire_block(n * sizeof(T))); }
    void deallocate(T* p, std::size_t n) noexcept { detail::release_block(p, n * sizeof(T)); }

    template <typename U>
    bool operator==(const AlignedAllocator<U>&) const noexcept {
        return true;
    }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

std::string to_string(const Shape& shape);
std::size_t numel_of(const Shape& shape);

/// Dense row-major array of doubles.
///
/// Images and feature maps use a channels x height x width layout; parameters
/// use whatever shape their layer needs (O x C x K x K for convolution
/// weights, O for biases). A tensor is a plain value: copying it copies the
/// data. When `requires_grad` is set, a Tape bound to it writes the gradient
/// of the differentiated scalar into `grad` on backward.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, double fill = 0.0);
    Tensor(Shape shape, const std::vector<double>& values);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
    static Tensor full(Shape shape, double value) { return Tensor(std::move(shape), value); }
    static Tensor scalar(double value) { return Tensor(Shape{1}, value); }

    [[nodiscard]] const Shape& shape() const noexcept { return shape_; }
    [[nodiscard]] std::size_t rank() const noexcept { return shape_.size(); }
    [[nodiscard]] std::size_t numel() const noexcept { return values_.size(); }
    [[nodiscard]] bool empty() const noexcept { return values_.empty(); }

    // Image accessors; only valid for rank-3 tensors.
    [[nodiscard]] std::size_t channels() const;
    [[nodiscard]] std::size_t height() const;
    [[nodiscard]] std::size_t width() const;
    [[nodiscard]] std::size_t plane() const { return height() * width(); }

    [[nodiscard]] std::span<double> values() noexcept { return values_; }
    [[nodiscard]] std::span<const double> values() const noexcept { return values_; }
    [[nodiscard]] double* data() noexcept { return values_.data(); }
    [[nodiscard]] const double* data() const noexcept { return values_.data(); }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }

    double& at(std::size_t c, std::size_t y, std::size_t x) {
        return values_[(c * shape_[1] + y) * shape_[2] + x];
    }
    [[nodiscard]] double at(std::size_t c, std::size_t y, std::size_t x) const {
        return values_[(c * shape_[1] + y) * shape_[2] + x];
    }

    /// Value of a single-element tensor.
    [[nodiscard]] double item() const;

    [[nodiscard]] bool requires_grad() const noexcept { return requires_grad_; }
    void set_requires_grad(bool on) noexcept { requires_grad_ = on; }

    [[nodiscard]] bool has_grad() const noexcept { return grad_.has_value(); }
    [[nodiscard]] std::span<const double> grad() const;
    [[nodiscard]] std::span<double> grad();
    void set_grad(std::span<const double> g);
    void set_grad(std::initializer_list<double> g) { set_grad(std::span<const double>(g.begin(), g.size())); }
    void clear_grad() noexcept { grad_.reset(); }

    [[nodiscard]] bool all_finite() const noexcept;

private:
    Shape shape_;
    Buffer values_;
    bool requires_grad_ = false;
    std::optional<Buffer> grad_;
};

/// Throws ShapeError unless `t` is C x H x W with the given channel count
/// (any count when `channels` is 0).
void require_image(const Tensor& t, std::size_t channels, const char* what);

}  // namespace zsretinex
