#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <variant>

#include "dcgan/data.hpp"
#include "dcgan/models.hpp"
#include "dcgan/tensor.hpp"

namespace dcgan {

/// n samples (rows) by d features; n >= 2, all finite.
struct EmbeddingMatrix {
    Tensor data;  // [n, d]

    explicit EmbeddingMatrix(Tensor data);
    std::size_t rows() const { return data.dim(0); }
    std::size_t cols() const { return data.dim(1); }
};

struct GaussianStats {
    Tensor mu;     // [d]
    Tensor sigma;  // [d, d], symmetric

    std::size_t dim() const { return mu.size(); }
};

/// Column means and unbiased (n - 1) covariance, symmetrized.
/// Throws SampleCountTooSmall when n <= d.
GaussianStats gaussian_stats(const EmbeddingMatrix& embeddings);

/// Principal square root of a symmetric positive semi-definite matrix by
/// eigendecomposition. Eigenvalues in [-1e-10 * trace, 0) are treated as
/// rounding noise and clamped to 0; anything more negative throws
/// NumericalError. A not symmetric to 1e-10 (relative) throws ValidationError.
Tensor sqrtm_psd(const Tensor& a);

/// ||mu_x - mu_g||^2 + Tr(S_x + S_g - 2 (S_x^1/2 S_g S_x^1/2)^1/2).
/// Results in [-1e-9 * max(1, Tr S_x + Tr S_g), 0) are clamped to 0.
double frechet_distance(const GaussianStats& x, const GaussianStats& g);

/// Maps images [N, C, s, s] in [-1, 1] to feature vectors.
class Embedder {
public:
    virtual ~Embedder() = default;
    /// The "name:param:..." form accepted by make_embedder.
    virtual std::string describe() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual EmbeddingMatrix embed(const Tensor& images) const = 0;
};

/// Flattens each image and multiplies by a fixed [C*s*s, d] matrix with
/// Normal(0, 1/d) entries determined by (d, seed, C*s*s).
class RandomProjectionEmbedder final : public Embedder {
public:
    RandomProjectionEmbedder(std::size_t d, std::uint64_t seed);

    std::string describe() const override;
    std::size_t dimension() const override { return d_; }
    EmbeddingMatrix embed(const Tensor& images) const override;
    /// The projection for inputs of `input_dim` features; built once, then cached.
    const Tensor& projection(std::size_t input_dim) const;

private:
    std::size_t d_;
    std::uint64_t seed_;
    mutable std::mutex mutex_;
    mutable std::map<std::size_t, std::unique_ptr<Tensor>> cache_;
};

/// Penultimate discriminator activations (width 8*base*(s/16)^2).
class DiscriminatorFeatureEmbedder final : public Embedder {
public:
    DiscriminatorFeatureEmbedder(Discriminator discriminator, std::string source);
    static std::unique_ptr<DiscriminatorFeatureEmbedder> from_checkpoint(const std::filesystem::path& path);

    std::string describe() const override;
    std::size_t dimension() const override { return discriminator_.spec.feature_dim(); }
    std::size_t image_size() const { return discriminator_.spec.img_size; }
    EmbeddingMatrix embed(const Tensor& images) const override;

private:
    Discriminator discriminator_;
    std::string source_;
};

inline constexpr std::size_t kDefaultProjectionDim = 32;
inline constexpr std::uint64_t kDefaultProjectionSeed = 42;

/// "random_projection[:d[:seed]]" (defaults 32 and 42) or
/// "discriminator_features:<checkpoint path>". Throws ValidationError.
std::unique_ptr<Embedder> make_embedder(std::string_view spec);

/// Where FID images come from.
struct DirectorySource {
    std::filesystem::path dir;
};
struct GeneratorSource {
    std::filesystem::path checkpoint;
    std::size_t count = 0;
    std::uint64_t seed = 0;
};
using ImageSource = std::variant<DirectorySource, GeneratorSource>;

std::string describe_source(const ImageSource& source);

struct FidReport {
    double fid = 0.0;
    std::size_t n_real = 0;
    std::size_t n_fake = 0;
    std::size_t d = 0;
    std::string embedder;
    std::size_t image_size = 0;
    std::string real_source;
    std::string fake_source;

    /// FID=<value> n_real=<n> n_fake=<n> d=<d> embedder=<kind>
    std::string line() const;
    std::string json() const;
};

/// Both datasets pass through `pre` before embedding, so they always share
/// one resize convention. Items are [C, h, w] in [0, 1].
FidReport fid_score(const ImageDataset& real, const ImageDataset& fake, const Embedder& embedder,
                    const Preprocessor& pre);

/// image_size 0 picks the discriminator's size for discriminator_features,
/// else the generator's size when either source is a generator, else 64.
FidReport fid_score(const ImageSource& real, const ImageSource& fake, const Embedder& embedder,
                    std::size_t image_size = 0);

void write_fid_json(const FidReport& report, const std::filesystem::path& path);

}  // namespace dcgan
