#include "dcgan/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

#include "dcgan/errors.hpp"

namespace dcgan {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void fail(const std::filesystem::path& path, const std::string& why) {
    throw IoError("cannot decode image '" + path.string() + "': " + why);
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// ---- PGM -------------------------------------------------------------------

class PgmReader {
public:
    PgmReader(const std::vector<unsigned char>& bytes, const std::filesystem::path& path)
        : bytes_(bytes), path_(path) {}

    GrayImage read() {
        if (bytes_.size() < 2 || bytes_[0] != 'P' || (bytes_[1] != '2' && bytes_[1] != '5'))
            fail(path_, "not a PGM file");
        const bool binary = bytes_[1] == '5';
        pos_ = 2;
        GrayImage img;
        img.width = header_number();
        img.height = header_number();
        const std::size_t maxval = header_number();
        if (img.width == 0 || img.height == 0) fail(path_, "zero image dimension");
        if (maxval == 0 || maxval > 65535) fail(path_, "PGM maxval out of range");
        const std::size_t count = img.width * img.height;
        img.pixels.resize(count);
        if (binary) {
            if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail(path_, "malformed PGM header");
            ++pos_;
            const std::size_t bpp = maxval > 255 ? 2 : 1;
            if (bytes_.size() - pos_ < count * bpp) fail(path_, "truncated PGM pixel data");
            for (std::size_t i = 0; i < count; ++i) {
                std::size_t v = bytes_[pos_ + i * bpp];
                if (bpp == 2) v = (v << 8) | bytes_[pos_ + i * bpp + 1];
                if (v > maxval) fail(path_, "PGM sample exceeds maxval");
                img.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
            }
        } else {
            for (std::size_t i = 0; i < count; ++i) {
                const std::size_t v = header_number();
                if (v > maxval) fail(path_, "PGM sample exceeds maxval");
                img.pixels[i] = static_cast<double>(v) / static_cast<double>(maxval);
            }
        }
        return img;
    }

private:
    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    std::size_t header_number() {
        skip_space_and_comments();
        if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) fail(path_, "malformed PGM header");
        std::size_t v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
            if (v > (std::size_t{1} << 31)) fail(path_, "PGM number too large");
            ++pos_;
        }
        return v;
    }

    const std::vector<unsigned char>& bytes_;
    const std::filesystem::path& path_;
    std::size_t pos_ = 0;
};

// ---- PNG -------------------------------------------------------------------

struct PngReadState {
    png_structp png = nullptr;
    png_infop info = nullptr;
    const std::vector<unsigned char>* bytes = nullptr;
    std::size_t offset = 0;
    char message[256] = {};
};

void png_error_handler(png_structp png, png_const_charp msg) {
    auto* state = static_cast<PngReadState*>(png_get_error_ptr(png));
    std::snprintf(state->message, sizeof state->message, "%s", msg);
    png_longjmp(png, 1);
}

void png_warning_handler(png_structp, png_const_charp) {}

void png_read_from_memory(png_structp png, png_bytep out, png_size_t length) {
    auto* state = static_cast<PngReadState*>(png_get_io_ptr(png));
    if (state->bytes->size() - state->offset < length) png_error(png, "unexpected end of file");
    std::copy_n(state->bytes->data() + state->offset, length, out);
    state->offset += length;
}

// Decodes into 8- or 16-bit samples. Returns false on libpng error; no C++
// objects are constructed between setjmp and any longjmp.
bool decode_png(PngReadState& state, png_bytepp rows, png_uint_32 expected_height, png_size_t row_capacity,
                png_uint_32& width, png_uint_32& height, int& channels, int& bit_depth) {
    if (setjmp(png_jmpbuf(state.png))) return false;
    png_set_read_fn(state.png, &state, png_read_from_memory);
    png_read_info(state.png, state.info);
    int color_type = 0;
    png_get_IHDR(state.png, state.info, &width, &height, &bit_depth, &color_type, nullptr, nullptr, nullptr);
    if (height != expected_height) png_error(state.png, "inconsistent IHDR");
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(state.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(state.png);
    if (png_get_valid(state.png, state.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(state.png);
    png_set_interlace_handling(state.png);
    png_read_update_info(state.png, state.info);
    channels = png_get_channels(state.png, state.info);
    bit_depth = png_get_bit_depth(state.png, state.info);
    if (png_get_rowbytes(state.png, state.info) > row_capacity) png_error(state.png, "row buffer too small");
    png_read_image(state.png, rows);
    png_read_end(state.png, nullptr);
    return true;
}

GrayImage read_png(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
    PngReadState state;
    state.bytes = &bytes;
    state.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &state, png_error_handler, png_warning_handler);
    if (!state.png) fail(path, "libpng initialisation failed");
    state.info = png_create_info_struct(state.png);
    struct Cleanup {
        PngReadState& s;
        ~Cleanup() { png_destroy_read_struct(&s.png, &s.info, nullptr); }
    } cleanup{state};
    if (!state.info) fail(path, "libpng initialisation failed");

    // Peek at the header to size the buffer before entering the setjmp region.
    if (bytes.size() < 24) fail(path, "truncated PNG header");
    const auto be32 = [&](std::size_t at) {
        return (png_uint_32(bytes[at]) << 24) | (png_uint_32(bytes[at + 1]) << 16) | (png_uint_32(bytes[at + 2]) << 8) |
               png_uint_32(bytes[at + 3]);
    };
    const std::size_t w = be32(16), h = be32(20);
    if (w == 0 || h == 0 || w > (1u << 16) || h > (1u << 16)) fail(path, "implausible PNG dimensions");
    // Largest decoded pixel is RGBA at 16 bits.
    const std::size_t stride = w * 8;
    std::vector<unsigned char> raw(stride * h);
    std::vector<png_bytep> rows(h);
    for (std::size_t y = 0; y < h; ++y) rows[y] = raw.data() + y * stride;

    png_uint_32 width = 0, height = 0;
    int channels = 0, bit_depth = 0;
    if (!decode_png(state, rows.data(), static_cast<png_uint_32>(h), stride, width, height, channels, bit_depth))
        fail(path, state.message[0] ? state.message : "corrupt PNG data");

    GrayImage img;
    img.width = width;
    img.height = height;
    img.pixels.resize(std::size_t{width} * height);
    const double maxval = bit_depth == 16 ? 65535.0 : 255.0;
    const std::size_t bps = bit_depth == 16 ? 2 : 1;
    auto sample = [&](std::size_t y, std::size_t x, int c) {
        const unsigned char* p = raw.data() + y * stride + (x * channels + c) * bps;
        const unsigned v = bps == 2 ? (unsigned(p[0]) << 8) | p[1] : p[0];
        return static_cast<double>(v) / maxval;
    };
    for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
            double v;
            if (channels <= 2) {
                v = sample(y, x, 0);
            } else {
                v = rec601_luma(sample(y, x, 0), sample(y, x, 1), sample(y, x, 2));
            }
            img.pixels[y * width + x] = std::clamp(v, 0.0, 1.0);
        }
    return img;
}

}  // namespace

double rec601_luma(double r, double g, double b) { return 0.299 * r + 0.587 * g + 0.114 * b; }

GrayImage read_gray_image(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = read_all(path);
    static constexpr unsigned char png_magic[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::equal(std::begin(png_magic), std::end(png_magic), bytes.begin()))
        return read_png(bytes, path);
    if (bytes.size() >= 2 && bytes[0] == 'P' && (bytes[1] == '2' || bytes[1] == '5'))
        return PgmReader(bytes, path).read();
    fail(path, "unrecognized format (expected PNG or PGM)");
}

std::vector<std::uint8_t> quantize_8bit(std::span<const double> values) {
    std::vector<std::uint8_t> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i)
        out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
    return out;
}

namespace {

struct PngWriteState {
    char message[256] = {};
};

void png_write_error(png_structp png, png_const_charp msg) {
    auto* state = static_cast<PngWriteState*>(png_get_error_ptr(png));
    std::snprintf(state->message, sizeof state->message, "%s", msg);
    png_longjmp(png, 1);
}

bool encode_png(png_structp png, png_infop info, std::FILE* file, png_uint_32 width, png_uint_32 height,
                png_bytepp rows) {
    if (setjmp(png_jmpbuf(png))) return false;
    png_init_io(png, file);
    png_set_IHDR(png, info, width, height, 8, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_set_filter(png, PNG_FILTER_TYPE_BASE, PNG_FILTER_NONE);
    png_write_info(png, info);
    png_write_image(png, rows);
    png_write_end(png, nullptr);
    return true;
}

}  // namespace

void write_png_gray8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                     std::span<const std::uint8_t> pixels) {
    if (width == 0 || height == 0 || pixels.size() != width * height)
        throw DimensionError("write_png_gray8: pixel count does not match dimensions");
    FilePtr file(std::fopen(path.string().c_str(), "wb"));
    if (!file) throw IoError("cannot write '" + path.string() + "'");

    PngWriteState state;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &state, png_write_error, png_warning_handler);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng initialisation failed");
    }
    std::vector<png_bytep> rows(height);
    for (std::size_t y = 0; y < height; ++y) rows[y] = const_cast<png_bytep>(pixels.data() + y * width);
    const bool ok = encode_png(png, info, file.get(), static_cast<png_uint_32>(width),
                               static_cast<png_uint_32>(height), rows.data());
    png_destroy_write_struct(&png, &info);
    if (!ok) throw IoError("PNG encoding of '" + path.string() + "' failed: " + state.message);
    if (std::fflush(file.get()) != 0) throw IoError("cannot write '" + path.string() + "'");
}

void write_pgm_gray8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                     std::span<const std::uint8_t> pixels) {
    if (width == 0 || height == 0 || pixels.size() != width * height)
        throw DimensionError("write_pgm_gray8: pixel count does not match dimensions");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << "P5\n" << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
    if (!out) throw IoError("cannot write '" + path.string() + "'");
}

}  // namespace dcgan
