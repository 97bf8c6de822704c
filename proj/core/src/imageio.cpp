#include "zsretinex/imageio.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <memory>
#include <string>

#include <jpeglib.h>
#include <png.h>

#include "zsretinex/ops.hpp"

namespace zsretinex {

namespace {

enum class Format { png, jpeg, unknown };

Format sniff(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::array<unsigned char, 8> magic{};
    in.read(reinterpret_cast<char*>(magic.data()), magic.size());
    const auto got = static_cast<std::size_t>(in.gcount());
    static constexpr std::array<unsigned char, 8> kPng{0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (got >= 8 && std::equal(kPng.begin(), kPng.end(), magic.begin())) return Format::png;
    if (got >= 3 && magic[0] == 0xFF && magic[1] == 0xD8 && magic[2] == 0xFF) return Format::jpeg;
    return Format::unknown;
}

ImageBuffer decode_png(const std::filesystem::path& path) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str())) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw CorruptImageError("cannot decode PNG " + path.string() + ": " + msg);
    }
    const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
    image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    ImageBuffer out;
    out.width = image.width;
    out.height = image.height;
    out.channels = gray ? 1 : 3;
    if (out.width == 0 || out.height == 0) {
        png_image_free(&image);
        throw EmptyImageError("image has zero width or height: " + path.string());
    }
    out.samples.resize(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, out.samples.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        throw CorruptImageError("cannot decode PNG " + path.string() + ": " + msg);
    }
    return out;
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    std::array<char, JMSG_LENGTH_MAX> message;
};

void on_jpeg_error(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message.data());
    std::longjmp(err->jump, 1);
}

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};

ImageBuffer decode_jpeg(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
    if (!file) throw ImageNotFoundError("cannot open " + path.string());

    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = on_jpeg_error;
    // Nothing with a destructor may be created between setjmp and the last
    // libjpeg call, so the output buffer is declared up front.
    ImageBuffer out;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw CorruptImageError("cannot decode JPEG " + path.string() + ": " + err.message.data());
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    out.width = cinfo.output_width;
    out.height = cinfo.output_height;
    out.channels = static_cast<std::size_t>(cinfo.output_components);
    out.samples.resize(out.width * out.height * out.channels);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = out.samples.data() + static_cast<std::size_t>(cinfo.output_scanline) * out.width * out.channels;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    if (out.width == 0 || out.height == 0) throw EmptyImageError("image has zero width or height: " + path.string());
    return out;
}

}  // namespace

ImageBuffer decode_image(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(path, ec)) throw ImageNotFoundError("no such image file: " + path.string());
    if (std::filesystem::file_size(path, ec) == 0) throw EmptyImageError("empty image file: " + path.string());
    switch (sniff(path)) {
        case Format::png: return decode_png(path);
        case Format::jpeg: return decode_jpeg(path);
        case Format::unknown: break;
    }
    throw UnsupportedFormatError("not a PNG or JPEG file: " + path.string());
}

void encode_png(const ImageBuffer& image, const std::filesystem::path& path) {
    if (image.channels != 1 && image.channels != 3) throw ImageWriteError("PNG output needs 1 or 3 channels");
    if (image.samples.size() != image.width * image.height * image.channels) {
        throw ImageWriteError("sample count does not match image dimensions");
    }
    png_image out{};
    out.version = PNG_IMAGE_VERSION;
    out.width = static_cast<png_uint_32>(image.width);
    out.height = static_cast<png_uint_32>(image.height);
    out.format = image.channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&out, path.c_str(), 0, image.samples.data(), 0, nullptr)) {
        const std::string msg = out.message;
        png_image_free(&out);
        throw ImageWriteError("cannot write " + path.string() + ": " + msg);
    }
}

Tensor to_tensor(const ImageBuffer& image) {
    const std::size_t plane = image.width * image.height;
    Tensor t(Shape{image.channels, image.height, image.width});
    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < image.channels; ++c) {
            t[c * plane + i] = static_cast<double>(image.samples[i * image.channels + c]) / 255.0;
        }
    }
    return t;
}

ImageBuffer to_buffer(const Tensor& t) {
    require_image(t, 0, "to_buffer");
    if (t.channels() != 1 && t.channels() != 3) throw ImageWriteError("image output needs 1 or 3 channels");
    ImageBuffer out;
    out.width = t.width();
    out.height = t.height();
    out.channels = t.channels();
    const std::size_t plane = t.plane();
    out.samples.resize(plane * out.channels);
    for (std::size_t i = 0; i < plane; ++i) {
        for (std::size_t c = 0; c < out.channels; ++c) {
            const double v = std::clamp(t[c * plane + i], 0.0, 1.0) * 255.0;
            out.samples[i * out.channels + c] = static_cast<std::uint8_t>(std::round(v));
        }
    }
    return out;
}

Tensor load_image(const std::filesystem::path& path) {
    const ImageBuffer buffer = decode_image(path);
    Tensor t = to_tensor(buffer);
    if (buffer.channels == 3) return t;
    Tensor rgb(Shape{3, buffer.height, buffer.width});
    for (std::size_t c = 0; c < 3; ++c) std::copy(t.values().begin(), t.values().end(), rgb.data() + c * t.numel());
    return rgb;
}

void save_image(const Tensor& t, const std::filesystem::path& path) { encode_png(to_buffer(t), path); }

Tensor value_channel(const Tensor& img) { return kernels::channel_max(img); }

Tensor max_channel_map(const Tensor& img) { return value_channel(img); }

Tensor fuse_input(const Tensor& img, const Tensor& v) {
    require_image(img, 3, "fuse_input image");
    require_image(v, 1, "fuse_input value channel");
    if (img.height() != v.height() || img.width() != v.width()) {
        throw ShapeError("fuse_input: image " + to_string(img.shape()) + " and value channel " +
                         to_string(v.shape()) + " differ in size");
    }
    Tensor out(Shape{4, img.height(), img.width()});
    std::copy(img.values().begin(), img.values().end(), out.data());
    std::copy(v.values().begin(), v.values().end(), out.data() + img.numel());
    return out;
}

std::size_t DarkRegionMask::count() const {
    return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), std::uint8_t{1}));
}

DarkRegionMask dark_region_mask(const Tensor& img, double fraction) {
    require_image(img, 3, "dark_region_mask");
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw std::invalid_argument("dark region fraction must lie in (0, 1), got " + std::to_string(fraction));
    }
    // Channel mean, summed in sorted order so that any channel permutation
    // yields bit-identical luminance.
    const std::size_t plane = img.plane();
    std::vector<double> lum(plane);
    for (std::size_t i = 0; i < plane; ++i) {
        std::array<double, 3> px{img[i], img[plane + i], img[2 * plane + i]};
        std::sort(px.begin(), px.end());
        lum[i] = (px[0] + px[1] + px[2]) / 3.0;
    }
    std::vector<double> sorted = lum;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    // Nearest rank, 1-based; the slack keeps 0.4 * 10 from rounding up to 5.
    auto rank = static_cast<std::size_t>(std::ceil(fraction * n - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());

    DarkRegionMask mask;
    mask.height = img.height();
    mask.width = img.width();
    mask.fraction = fraction;
    mask.threshold = sorted[rank - 1];
    mask.selected.resize(plane);
    for (std::size_t i = 0; i < plane; ++i) mask.selected[i] = lum[i] <= mask.threshold ? 1 : 0;
    return mask;
}

}  // namespace zsretinex
