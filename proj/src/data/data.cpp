#include "dcgan/data.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numbers>
#include <numeric>

#include "dcgan/errors.hpp"
#include "dcgan/image_io.hpp"
#include "dcgan/rng.hpp"

namespace dcgan {

namespace {

constexpr double kRangeSlack = 1e-9;

}  // namespace

const Shape& ImageDataset::item_shape() const {
    if (items.empty()) throw ValidationError("dataset is empty");
    return items.front().pixels.shape();
}

Tensor ImageDataset::gather(std::span<const std::size_t> indices) const {
    const Shape& shape = item_shape();
    const std::size_t per_item = shape_product(shape);
    Tensor out({indices.size(), shape[0], shape[1], shape[2]});
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const Tensor& src = items.at(indices[b]).pixels;
        if (src.shape() != shape) throw DimensionError("dataset items have inconsistent shapes");
        std::copy(src.data(), src.data() + per_item, out.data() + b * per_item);
    }
    return out;
}

Tensor ImageDataset::gather_all() const {
    std::vector<std::size_t> all(items.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return gather(all);
}

ImageDataset load_image_directory(const std::filesystem::path& dir, std::size_t target_size) {
    return Preprocessor(target_size).load_directory(dir);
}

Tensor resize_bilinear(const Tensor& pixels, std::size_t target) {
    require_rank(pixels, 3, "resize_bilinear input");
    if (target == 0) throw DimensionError("resize target must be positive");
    const std::size_t c = pixels.dim(0), h = pixels.dim(1), w = pixels.dim(2);
    if (h == target && w == target) return pixels;

    struct Tap {
        std::size_t i0, i1;
        double frac;
    };
    auto taps = [target](std::size_t extent) {
        std::vector<Tap> out(target);
        const double scale = static_cast<double>(extent) / static_cast<double>(target);
        for (std::size_t x = 0; x < target; ++x) {
            double src = (static_cast<double>(x) + 0.5) * scale - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(extent - 1));
            const auto i0 = static_cast<std::size_t>(std::floor(src));
            out[x] = {i0, std::min(i0 + 1, extent - 1), src - static_cast<double>(i0)};
        }
        return out;
    };
    const std::vector<Tap> ty = taps(h);
    const std::vector<Tap> tx = taps(w);

    Tensor out({c, target, target});
    for (std::size_t ch = 0; ch < c; ++ch) {
        const double* src = pixels.data() + ch * h * w;
        double* dst = out.data() + ch * target * target;
        for (std::size_t y = 0; y < target; ++y) {
            const Tap& a = ty[y];
            for (std::size_t x = 0; x < target; ++x) {
                const Tap& b = tx[x];
                const double top = src[a.i0 * w + b.i0] * (1.0 - b.frac) + src[a.i0 * w + b.i1] * b.frac;
                const double bottom = src[a.i1 * w + b.i0] * (1.0 - b.frac) + src[a.i1 * w + b.i1] * b.frac;
                dst[y * target + x] = top * (1.0 - a.frac) + bottom * a.frac;
            }
        }
    }
    return out;
}

Tensor scale_to_tanh_range(const Tensor& pixels) {
    Tensor out(pixels.shape());
    for (std::size_t i = 0; i < pixels.size(); ++i) {
        const double v = pixels[i];
        if (!(v >= -kRangeSlack && v <= 1.0 + kRangeSlack))
            throw ValidationError("pixel value " + std::to_string(v) + " outside [0, 1]");
        out[i] = 2.0 * v - 1.0;
    }
    return out;
}

Tensor scale_from_tanh_range(const Tensor& values) {
    Tensor out(values.shape());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::clamp((values[i] + 1.0) / 2.0, 0.0, 1.0);
    out.require_finite("scale_from_tanh_range");
    return out;
}

Preprocessor::Preprocessor(std::size_t target_size) : target_size_(target_size) {
    if (target_size == 0) throw ValidationError("target image size must be positive");
}

Tensor Preprocessor::apply(const Tensor& pixels) const {
    require_rank(pixels, 3, "image");
    for (double v : pixels.values())
        if (!(v >= -kRangeSlack && v <= 1.0 + kRangeSlack))
            throw ValidationError("pixel value " + std::to_string(v) + " outside [0, 1]");
    return resize_bilinear(pixels, target_size_);
}

ImageDataset Preprocessor::load_directory(const std::filesystem::path& dir) const {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("'" + dir.string() + "' is not a directory");

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string name = entry.path().filename().string();
        if (name.empty() || name.front() == '.') continue;
        if (!entry.is_regular_file()) continue;
        files.push_back(entry.path());
    }
    if (files.empty()) throw IoError("'" + dir.string() + "' contains no image files");
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

    ImageDataset ds;
    ds.source = dir.string();
    const fs::path normalized = dir.lexically_normal();
    const std::string label =
        (normalized.has_filename() ? normalized.filename() : normalized.parent_path().filename()).string();
    if (!label.empty()) ds.class_label = label;
    for (const auto& file : files) {
        GrayImage img = read_gray_image(file);
        Tensor pixels({1, img.height, img.width}, std::move(img.pixels));
        ds.items.push_back({file.filename().string(), apply(pixels)});
    }
    return ds;
}

ImageDataset Preprocessor::from_generator_output(const Tensor& images, std::string_view source) const {
    require_rank(images, 4, "generated images");
    const Tensor unit = scale_from_tanh_range(images);
    const std::size_t n = images.dim(0);
    const Shape item{images.dim(1), images.dim(2), images.dim(3)};
    const std::size_t per_item = shape_product(item);
    ImageDataset ds;
    ds.source = std::string(source);
    ds.items.reserve(n);
    char id[32];
    for (std::size_t i = 0; i < n; ++i) {
        std::snprintf(id, sizeof id, "generated_%06zu", i);
        Tensor pixels(item, std::vector<double>(unit.data() + i * per_item, unit.data() + (i + 1) * per_item));
        ds.items.push_back({id, apply(pixels)});
    }
    return ds;
}

std::vector<std::vector<std::size_t>> batch_indices(std::size_t dataset_size, const BatchPlan& plan,
                                                    std::uint64_t epoch) {
    if (plan.batch_size == 0) throw ValidationError("batch_size must be positive");
    if (dataset_size == 0) throw ValidationError("cannot batch an empty dataset");
    if (plan.drop_last && plan.batch_size > dataset_size)
        throw ValidationError("batch_size " + std::to_string(plan.batch_size) + " exceeds dataset size " +
                              std::to_string(dataset_size) + " with drop_last set");

    std::vector<std::size_t> order(dataset_size);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(mix_seed(plan.shuffle_seed, 0xba7c4, epoch));
    for (std::size_t i = dataset_size - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

    std::vector<std::vector<std::size_t>> batches;
    for (std::size_t start = 0; start < dataset_size; start += plan.batch_size) {
        const std::size_t end = std::min(start + plan.batch_size, dataset_size);
        if (plan.drop_last && end - start < plan.batch_size) break;
        batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                             order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return batches;
}

std::vector<Tensor> make_batches(const ImageDataset& dataset, const BatchPlan& plan, std::uint64_t epoch) {
    std::vector<Tensor> out;
    for (const auto& idx : batch_indices(dataset.size(), plan, epoch)) out.push_back(dataset.gather(idx));
    return out;
}

std::string_view blob_class_name(BlobClass cls) { return cls == BlobClass::normal ? "normal" : "anomalous"; }

std::optional<BlobClass> parse_blob_class(std::string_view name) {
    if (name == "normal") return BlobClass::normal;
    if (name == "anomalous") return BlobClass::anomalous;
    return std::nullopt;
}

AnomalyRegion anomaly_region(std::size_t size) {
    const double s = static_cast<double>(size);
    return {0.8 * s, 0.2 * s, std::max(1.0, 0.07 * s)};
}

namespace {

struct Blob {
    double cx, cy;
    double sx, sy;
    double theta;
    double amplitude;
};

void render_blob(const Blob& b, std::size_t size, double* pixels) {
    const double c = std::cos(b.theta), s = std::sin(b.theta);
    for (std::size_t y = 0; y < size; ++y)
        for (std::size_t x = 0; x < size; ++x) {
            const double dx = static_cast<double>(x) + 0.5 - b.cx;
            const double dy = static_cast<double>(y) + 0.5 - b.cy;
            const double u = (c * dx + s * dy) / b.sx;
            const double v = (-s * dx + c * dy) / b.sy;
            pixels[y * size + x] += b.amplitude * std::exp(-0.5 * (u * u + v * v));
        }
}

}  // namespace

ImageDataset synth_blob_dataset(std::size_t n, std::size_t size, std::uint64_t seed, BlobClass cls) {
    if (n == 0) throw ValidationError("synthetic dataset needs n >= 1");
    if (size < 16) throw ValidationError("synthetic image size must be >= 16");

    const double s = static_cast<double>(size);
    const std::string name(blob_class_name(cls));
    ImageDataset ds;
    ds.source = "synthetic";
    ds.class_label = name;
    ds.items.reserve(n);
    char id[48];
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(mix_seed(seed, static_cast<std::uint64_t>(cls) + 0x5b10b, i));
        Tensor pixels({1, size, size});
        const std::size_t blobs = 1 + rng.below(3);
        for (std::size_t k = 0; k < blobs; ++k) {
            Blob b;
            b.cx = rng.uniform(0.3, 0.7) * s;
            b.cy = rng.uniform(0.3, 0.7) * s;
            b.sx = rng.uniform(0.08, 0.18) * s;
            b.sy = rng.uniform(0.08, 0.18) * s;
            b.theta = rng.uniform(0.0, std::numbers::pi);
            b.amplitude = rng.uniform(0.5, 0.9);
            render_blob(b, size, pixels.data());
        }
        if (cls == BlobClass::anomalous) {
            const AnomalyRegion r = anomaly_region(size);
            Blob b;
            b.cx = r.cx + rng.uniform(-0.04, 0.04) * s;
            b.cy = r.cy + rng.uniform(-0.04, 0.04) * s;
            b.sx = b.sy = r.radius;
            b.theta = 0.0;
            b.amplitude = 0.9;
            render_blob(b, size, pixels.data());
        }
        for (double& v : pixels.values()) v = std::clamp(v, 0.0, 1.0);
        std::snprintf(id, sizeof id, "%s_%05zu", name.c_str(), i);
        ds.items.push_back({id, std::move(pixels)});
    }
    return ds;
}

void write_dataset_png(const ImageDataset& dataset, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& item : dataset.items) {
        const Tensor& p = item.pixels;
        if (p.dim(0) != 1) throw ValidationError("only single-channel datasets can be written as PNG");
        write_png_gray8(dir / (item.id + ".png"), p.dim(2), p.dim(1), quantize_8bit(p.values()));
    }
}

}  // namespace dcgan
