#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "zsretinex/tensor.hpp"

namespace zsretinex {

class ImageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ImageNotFoundError : public ImageError {
public:
    using ImageError::ImageError;
};

class UnsupportedFormatError : public ImageError {
public:
    using ImageError::ImageError;
};

class EmptyImageError : public ImageError {
public:
    using ImageError::ImageError;
};

/// The file claims a supported format but could not be decoded.
class CorruptImageError : public ImageError {
public:
    using ImageError::ImageError;
};

class ImageWriteError : public ImageError {
public:
    using ImageError::ImageError;
};

/// Interleaved 8-bit image as stored on disk.
struct ImageBuffer {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 0;  // 1 or 3
    std::vector<std::uint8_t> samples;
};

ImageBuffer decode_image(const std::filesystem::path& path);
void encode_png(const ImageBuffer& image, const std::filesystem::path& path);

/// Converts to a planar C x H x W tensor in [0, 1] (samples / 255).
Tensor to_tensor(const ImageBuffer& image);

/// Clamps to [0, 1] and quantizes with round-half-away-from-zero on v * 255.
/// Accepts 1- or 3-channel tensors.
ImageBuffer to_buffer(const Tensor& t);

/// Loads a PNG or JPEG as a 3 x H x W tensor; grayscale is replicated.
Tensor load_image(const std::filesystem::path& path);

/// Writes an 8-bit PNG (RGB for 3 channels, gray for 1).
void save_image(const Tensor& t, const std::filesystem::path& path);

/// HSV value: per-pixel maximum of R, G, B.
Tensor value_channel(const Tensor& img);

/// Maximum channel of the low-light image used as the illumination target.
/// Identical to value_channel.
Tensor max_channel_map(const Tensor& img);

/// Network input for the reflectance/illumination branches: [R, G, B, V].
Tensor fuse_input(const Tensor& img, const Tensor& v);

struct DarkRegionMask {
    std::size_t height = 0;
    std::size_t width = 0;
    double fraction = 0.4;
    double threshold = 0.0;
    std::vector<std::uint8_t> selected;  // 1 where the pixel is in the dark region

    [[nodiscard]] std::size_t count() const;
    [[nodiscard]] bool at(std::size_t y, std::size_t x) const { return selected[y * width + x] != 0; }
};

/// Pixels whose channel-mean luminance is at or below the nearest-rank
/// `fraction` quantile.
DarkRegionMask dark_region_mask(const Tensor& img, double fraction);

}  // namespace zsretinex
