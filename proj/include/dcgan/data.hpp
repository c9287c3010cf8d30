#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcgan/tensor.hpp"

namespace dcgan {

struct ImageItem {
    std::string id;
    Tensor pixels;  // [C, H, W], values in [0, 1]
};

/// Items share one [C, H, W] shape and are sorted by id.
struct ImageDataset {
    std::vector<ImageItem> items;
    std::string source;                      // directory path or "synthetic"
    std::optional<std::string> class_label;

    std::size_t size() const { return items.size(); }
    bool empty() const { return items.empty(); }
    /// Shape of one item; throws ValidationError on an empty dataset.
    const Shape& item_shape() const;
    /// Copies the selected items into one [B, C, H, W] tensor.
    Tensor gather(std::span<const std::size_t> indices) const;
    Tensor gather_all() const;
};

/// Decodes every non-hidden regular file in `dir` (PNG or PGM), converts to
/// luminance and resizes to target_size x target_size. Aspect ratio is not
/// preserved. Any undecodable file is an error naming that file.
ImageDataset load_image_directory(const std::filesystem::path& dir, std::size_t target_size);

/// Bilinear resampling with half-pixel centers: output pixel x samples the
/// source at (x + 0.5) * in / out - 0.5, clamped to the image.
Tensor resize_bilinear(const Tensor& pixels, std::size_t target);

/// [0, 1] -> [-1, 1] via 2x - 1. Inputs outside [0, 1] by more than 1e-9 are rejected.
Tensor scale_to_tanh_range(const Tensor& pixels);
/// [-1, 1] -> [0, 1] via (y + 1) / 2, clamped.
Tensor scale_from_tanh_range(const Tensor& values);

/// Resize + [0,1] check shared by every consumer of image data (training,
/// FID on real and generated images), so all sources see identical conventions.
class Preprocessor {
public:
    explicit Preprocessor(std::size_t target_size);
    std::size_t target_size() const { return target_size_; }
    /// [C, H, W] in [0, 1] -> [C, s, s].
    Tensor apply(const Tensor& pixels) const;
    ImageDataset load_directory(const std::filesystem::path& dir) const;
    /// Generator output [N, C, h, w] in [-1, 1] -> dataset items in [0, 1].
    ImageDataset from_generator_output(const Tensor& images, std::string_view source) const;

private:
    std::size_t target_size_;
};

struct BatchPlan {
    std::size_t batch_size = 64;
    std::uint64_t shuffle_seed = 0;
    bool drop_last = false;
};

/// Item indices per batch for one epoch: a permutation seeded by
/// (shuffle_seed, epoch), cut into consecutive batches.
std::vector<std::vector<std::size_t>> batch_indices(std::size_t dataset_size, const BatchPlan& plan,
                                                    std::uint64_t epoch);

std::vector<Tensor> make_batches(const ImageDataset& dataset, const BatchPlan& plan, std::uint64_t epoch);

enum class BlobClass { normal, anomalous };

std::string_view blob_class_name(BlobClass cls);
std::optional<BlobClass> parse_blob_class(std::string_view name);

/// Centre and radius (in pixels) of the extra bright blob that marks the anomalous class.
struct AnomalyRegion {
    double cx;
    double cy;
    double radius;
};
AnomalyRegion anomaly_region(std::size_t size);

/// Grayscale images of 1-3 soft, rotated elliptical Gaussian blobs. The
/// anomalous class adds a bright blob near the top-right corner.
ImageDataset synth_blob_dataset(std::size_t n, std::size_t size, std::uint64_t seed, BlobClass cls);

/// Writes `<dir>/<id>.png` for every item (8-bit grayscale), creating `dir`.
void write_dataset_png(const ImageDataset& dataset, const std::filesystem::path& dir);

}  // namespace dcgan
