#include "dcgan/fid.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "dcgan/errors.hpp"
#include "dcgan/rng.hpp"
#include "dcgan/simd.hpp"
#include "dcgan/train.hpp"

namespace dcgan {

namespace {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr double kSymmetryTolerance = 1e-10;
constexpr double kEigenClamp = 1e-10;
constexpr double kDistanceClamp = 1e-9;
constexpr std::size_t kEmbedBatch = 256;

Matrix to_matrix(const Tensor& t) {
    require_rank(t, 2, "matrix");
    return Eigen::Map<const Matrix>(t.data(), static_cast<Eigen::Index>(t.dim(0)), static_cast<Eigen::Index>(t.dim(1)));
}

Tensor to_tensor(const Matrix& m) {
    Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
    Eigen::Map<Matrix>(t.data(), m.rows(), m.cols()) = m;
    return t;
}

Matrix square_matrix(const Tensor& a, const char* what) {
    require_rank(a, 2, what);
    if (a.dim(0) != a.dim(1)) throw DimensionError(std::string(what) + " must be square, got " + shape_to_string(a.shape()));
    a.require_finite(what);
    return to_matrix(a);
}

struct PsdSpectrum {
    Eigen::VectorXd values;  // clamped, >= 0
    Matrix vectors;
};

// Eigendecomposition of a symmetric matrix with the near-zero clamp applied.
PsdSpectrum psd_spectrum(const Matrix& a, bool want_vectors) {
    const double scale = a.norm();
    if ((a - a.transpose()).cwiseAbs().maxCoeff() > kSymmetryTolerance * std::max(scale, 1e-300) && scale > 0)
        throw ValidationError("sqrtm_psd: matrix is not symmetric");
    const Matrix sym = 0.5 * (a + a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, want_vectors ? Eigen::ComputeEigenvectors : Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw NumericalError("sqrtm_psd: eigendecomposition did not converge");
    const double threshold = -kEigenClamp * std::max(sym.trace(), 0.0);
    PsdSpectrum out;
    out.values = solver.eigenvalues();
    for (Eigen::Index i = 0; i < out.values.size(); ++i) {
        double& v = out.values[i];
        if (v < 0.0) {
            if (v < threshold) {
                char buf[160];
                std::snprintf(buf, sizeof buf, "matrix is not positive semi-definite (eigenvalue %.6g, trace %.6g)", v,
                              sym.trace());
                throw NumericalError(buf);
            }
            v = 0.0;
        }
    }
    if (want_vectors) out.vectors = solver.eigenvectors();
    return out;
}

Matrix sqrtm_matrix(const Matrix& a) {
    const PsdSpectrum s = psd_spectrum(a, true);
    const Matrix root = s.vectors * s.values.cwiseSqrt().asDiagonal() * s.vectors.transpose();
    return 0.5 * (root + root.transpose());
}

}  // namespace

EmbeddingMatrix::EmbeddingMatrix(Tensor t) : data(std::move(t)) {
    require_rank(data, 2, "embedding matrix");
    if (data.dim(0) < 2) throw ValidationError("embedding matrix needs at least 2 rows, got " + std::to_string(data.dim(0)));
    data.require_finite("embedding matrix");
}

GaussianStats gaussian_stats(const EmbeddingMatrix& embeddings) {
    const std::size_t n = embeddings.rows();
    const std::size_t d = embeddings.cols();
    if (n <= d) throw SampleCountTooSmall(n, d);
    const Matrix x = to_matrix(embeddings.data);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Matrix centered = x.rowwise() - mean;
    Matrix cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
    cov = (0.5 * (cov + cov.transpose())).eval();

    GaussianStats stats;
    stats.mu = Tensor({d});
    for (std::size_t i = 0; i < d; ++i) stats.mu[i] = mean[static_cast<Eigen::Index>(i)];
    stats.sigma = to_tensor(cov);
    return stats;
}

Tensor sqrtm_psd(const Tensor& a) {
    Tensor out = to_tensor(sqrtm_matrix(square_matrix(a, "sqrtm_psd input")));
    out.require_finite("sqrtm_psd result");
    return out;
}

double frechet_distance(const GaussianStats& x, const GaussianStats& g) {
    const std::size_t d = x.dim();
    if (g.dim() != d) throw DimensionError("frechet_distance: dimensions differ (" + std::to_string(d) + " vs " +
                                           std::to_string(g.dim()) + ")");
    const Matrix sx = square_matrix(x.sigma, "frechet_distance sigma_x");
    const Matrix sg = square_matrix(g.sigma, "frechet_distance sigma_g");
    if (static_cast<std::size_t>(sx.rows()) != d || static_cast<std::size_t>(sg.rows()) != d)
        throw DimensionError("frechet_distance: covariance and mean dimensions differ");

    double mean_term = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        const double diff = x.mu[i] - g.mu[i];
        mean_term += diff * diff;
    }
    const Matrix root_x = sqrtm_matrix(sx);
    Matrix cross = root_x * sg * root_x;
    cross = (0.5 * (cross + cross.transpose())).eval();
    const double cross_trace = psd_spectrum(cross, false).values.cwiseSqrt().sum();
    const double traces = sx.trace() + sg.trace();
    const double result = mean_term + traces - 2.0 * cross_trace;
    if (!std::isfinite(result)) throw NumericalError("frechet_distance is not finite");
    if (result < 0.0) {
        if (result < -kDistanceClamp * std::max(1.0, traces)) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "frechet_distance is significantly negative (%.6g)", result);
            throw NumericalError(buf);
        }
        return 0.0;
    }
    return result;
}

RandomProjectionEmbedder::RandomProjectionEmbedder(std::size_t d, std::uint64_t seed) : d_(d), seed_(seed) {
    if (d == 0) throw ValidationError("random_projection: d must be positive");
}

std::string RandomProjectionEmbedder::describe() const {
    return "random_projection:" + std::to_string(d_) + ":" + std::to_string(seed_);
}

const Tensor& RandomProjectionEmbedder::projection(std::size_t input_dim) const {
    std::lock_guard lock(mutex_);
    auto& slot = cache_[input_dim];
    if (!slot) {
        auto p = std::make_unique<Tensor>(Shape{input_dim, d_});
        Rng rng(mix_seed(seed_, d_, input_dim));
        rng.fill_normal(p->values(), 0.0, 1.0 / std::sqrt(static_cast<double>(d_)));
        slot = std::move(p);
    }
    return *slot;
}

EmbeddingMatrix RandomProjectionEmbedder::embed(const Tensor& images) const {
    require_rank(images, 4, "random_projection input");
    const std::size_t n = images.dim(0);
    const std::size_t features = images.size() / n;
    const Tensor& p = projection(features);
    Tensor out({n, d_});
    simd::gemm(n, d_, features, simd::MatrixRef::row_major(images.data(), features),
               simd::MatrixRef::row_major(p.data(), d_), out.data(), d_, false);
    return EmbeddingMatrix(std::move(out));
}

DiscriminatorFeatureEmbedder::DiscriminatorFeatureEmbedder(Discriminator discriminator, std::string source)
    : discriminator_(std::move(discriminator)), source_(std::move(source)) {}

std::unique_ptr<DiscriminatorFeatureEmbedder> DiscriminatorFeatureEmbedder::from_checkpoint(
    const std::filesystem::path& path) {
    Checkpoint c = load_checkpoint(path);
    return std::make_unique<DiscriminatorFeatureEmbedder>(std::move(c.discriminator), path.string());
}

std::string DiscriminatorFeatureEmbedder::describe() const { return "discriminator_features:" + source_; }

EmbeddingMatrix DiscriminatorFeatureEmbedder::embed(const Tensor& images) const {
    require_rank(images, 4, "discriminator_features input");
    const auto& s = discriminator_.spec;
    if (images.dim(2) != s.img_size || images.dim(3) != s.img_size)
        throw DimensionError("discriminator_features: checkpoint expects " + std::to_string(s.img_size) + "x" +
                             std::to_string(s.img_size) + " images, got " + shape_to_string(images.shape()));
    const std::size_t n = images.dim(0);
    const std::size_t per_image = images.size() / n;
    const std::size_t d = dimension();
    Tensor out({n, d});
    for (std::size_t start = 0; start < n; start += kEmbedBatch) {
        const std::size_t count = std::min(kEmbedBatch, n - start);
        Shape shape = images.shape();
        shape[0] = count;
        Tensor batch(shape, std::vector<double>(images.data() + start * per_image,
                                                images.data() + (start + count) * per_image));
        const DiscriminatorOutput result = discriminator_forward(discriminator_, batch);
        std::copy(result.features.values().begin(), result.features.values().end(), out.data() + start * d);
    }
    return EmbeddingMatrix(std::move(out));
}

std::unique_ptr<Embedder> make_embedder(std::string_view spec) {
    const auto colon = spec.find(':');
    const std::string_view name = spec.substr(0, colon);
    const std::string_view rest = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);
    if (name == "random_projection") {
        std::size_t d = kDefaultProjectionDim;
        std::uint64_t seed = kDefaultProjectionSeed;
        if (!rest.empty()) {
            std::vector<std::string> parts;
            std::stringstream ss{std::string(rest)};
            for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
            if (parts.size() > 2) throw ValidationError("random_projection takes at most two parameters: d and seed");
            try {
                std::size_t used = 0;
                d = std::stoull(parts[0], &used);
                if (used != parts[0].size()) throw std::invalid_argument("d");
                if (parts.size() == 2) {
                    seed = std::stoull(parts[1], &used);
                    if (used != parts[1].size()) throw std::invalid_argument("seed");
                }
            } catch (const std::logic_error&) {
                throw ValidationError("embedder '" + std::string(spec) + "': d and seed must be non-negative integers");
            }
        }
        return std::make_unique<RandomProjectionEmbedder>(d, seed);
    }
    if (name == "discriminator_features") {
        if (rest.empty()) throw ValidationError("discriminator_features needs a checkpoint path: discriminator_features:<path>");
        return DiscriminatorFeatureEmbedder::from_checkpoint(std::string(rest));
    }
    throw ValidationError("unknown embedder '" + std::string(name) +
                          "'; expected random_projection[:d[:seed]] or discriminator_features:<checkpoint>");
}

std::string describe_source(const ImageSource& source) {
    if (const auto* dir = std::get_if<DirectorySource>(&source)) return dir->dir.string();
    const auto& gen = std::get<GeneratorSource>(source);
    return "generator:" + gen.checkpoint.string() + ":" + std::to_string(gen.count) + ":" + std::to_string(gen.seed);
}

std::string FidReport::line() const {
    char value[64];
    std::snprintf(value, sizeof value, "%.6f", fid);
    return std::string("FID=") + value + " n_real=" + std::to_string(n_real) + " n_fake=" + std::to_string(n_fake) +
           " d=" + std::to_string(d) + " embedder=" + embedder;
}

std::string FidReport::json() const {
    nlohmann::ordered_json j;
    j["fid"] = fid;
    j["n_real"] = n_real;
    j["n_fake"] = n_fake;
    j["d"] = d;
    j["embedder"] = embedder;
    j["image_size"] = image_size;
    j["real_source"] = real_source;
    j["fake_source"] = fake_source;
    return j.dump(2);
}

namespace {

Tensor model_range_batch(const ImageDataset& dataset, const Preprocessor& pre) {
    if (dataset.empty()) throw ValidationError("FID source '" + dataset.source + "' has no images");
    const Tensor first = pre.apply(dataset.items.front().pixels);
    const std::size_t per_item = first.size();
    Shape shape = first.shape();
    shape.insert(shape.begin(), dataset.size());
    Tensor out(shape);
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        const Tensor item = i == 0 ? first : pre.apply(dataset.items[i].pixels);
        if (item.size() != per_item)
            throw DimensionError("FID source '" + dataset.source + "' mixes channel counts (item " + dataset.items[i].id + ")");
        std::copy(item.values().begin(), item.values().end(), out.data() + i * per_item);
    }
    return scale_to_tanh_range(out);
}

ImageDataset load_source(const ImageSource& source, const Preprocessor& pre) {
    if (const auto* dir = std::get_if<DirectorySource>(&source)) return pre.load_directory(dir->dir);
    const auto& gen = std::get<GeneratorSource>(source);
    if (gen.count == 0) throw ValidationError("generator source needs a positive sample count");
    const Checkpoint c = load_checkpoint(gen.checkpoint);
    return pre.from_generator_output(generate_images(c.generator, gen.count, gen.seed), describe_source(source));
}

std::size_t source_image_size(const ImageSource& source) {
    if (const auto* gen = std::get_if<GeneratorSource>(&source)) return load_checkpoint(gen->checkpoint).generator.spec.img_size;
    return 0;
}

}  // namespace

FidReport fid_score(const ImageDataset& real, const ImageDataset& fake, const Embedder& embedder,
                    const Preprocessor& pre) {
    const EmbeddingMatrix real_emb = embedder.embed(model_range_batch(real, pre));
    const EmbeddingMatrix fake_emb = embedder.embed(model_range_batch(fake, pre));
    FidReport report;
    report.n_real = real_emb.rows();
    report.n_fake = fake_emb.rows();
    report.d = real_emb.cols();
    report.embedder = embedder.describe();
    report.image_size = pre.target_size();
    report.real_source = real.source;
    report.fake_source = fake.source;
    report.fid = frechet_distance(gaussian_stats(real_emb), gaussian_stats(fake_emb));
    return report;
}

FidReport fid_score(const ImageSource& real, const ImageSource& fake, const Embedder& embedder,
                    std::size_t image_size) {
    if (image_size == 0) {
        if (const auto* df = dynamic_cast<const DiscriminatorFeatureEmbedder*>(&embedder)) image_size = df->image_size();
        if (image_size == 0) image_size = source_image_size(fake);
        if (image_size == 0) image_size = source_image_size(real);
        if (image_size == 0) image_size = 64;
    }
    const Preprocessor pre(image_size);
    FidReport report = fid_score(load_source(real, pre), load_source(fake, pre), embedder, pre);
    report.real_source = describe_source(real);
    report.fake_source = describe_source(fake);
    return report;
}

void write_fid_json(const FidReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << report.json() << '\n';
    if (!out) throw IoError("cannot write FID report '" + path.string() + "'");
}

}  // namespace dcgan
