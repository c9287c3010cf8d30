#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <fstream>

#include "dcgan/errors.hpp"
#include "dcgan/fid.hpp"
#include "dcgan/train.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace dcgan;

namespace {

Tensor noise_images(std::size_t n, std::size_t s, Rng& rng) {
    Tensor t({n, 1, s, s});
    for (auto& v : t.values()) v = std::clamp(rng.normal() * 0.5, -1.0, 1.0);
    return t;
}

ImageDataset as_dataset(const Tensor& images) { return Preprocessor(images.dim(2)).from_generator_output(images, "test"); }

ImageDataset subset(const ImageDataset& ds, std::size_t begin, std::size_t end) {
    ImageDataset out;
    out.source = ds.source;
    out.items.assign(ds.items.begin() + begin, ds.items.begin() + end);
    return out;
}

}  // namespace

TEST(GaussianStats, TwoPointVariance) {
    const GaussianStats s = gaussian_stats(EmbeddingMatrix(Tensor::from({2, 1}, {0, 2})));
    EXPECT_EQ(s.mu[0], 1.0);
    EXPECT_EQ(s.sigma[0], 2.0);
}

TEST(GaussianStats, IdenticalRowsGiveZeroCovariance) {
    Tensor t({5, 3});
    for (std::size_t i = 0; i < 5; ++i) t[i * 3] = 1, t[i * 3 + 1] = -2, t[i * 3 + 2] = 0.5;
    const GaussianStats s = gaussian_stats(EmbeddingMatrix(t));
    for (double v : s.sigma.values()) EXPECT_EQ(v, 0.0);
}

TEST(GaussianStats, MatchesEigenCovariance) {
    Rng rng(1);
    const Tensor t = oracle::random_tensor({50, 6}, rng);
    const GaussianStats s = gaussian_stats(EmbeddingMatrix(t));
    const Eigen::MatrixXd m = oracle::to_eigen(t);
    const Eigen::RowVectorXd mean = m.colwise().mean();
    const Eigen::MatrixXd centered = m.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / 49.0;
    EXPECT_LT((oracle::to_eigen(s.sigma) - cov).norm(), 1e-12);
    EXPECT_EQ(oracle::to_eigen(s.sigma), oracle::to_eigen(s.sigma).transpose());
}

TEST(GaussianStats, RankGuard) {
    Rng rng(2);
    try {
        (void)gaussian_stats(EmbeddingMatrix(oracle::random_tensor({10, 16}, rng)));
        FAIL();
    } catch (const SampleCountTooSmall& e) {
        EXPECT_EQ(e.samples(), 10u);
        EXPECT_EQ(e.dimension(), 16u);
        EXPECT_NE(std::string(e.what()).find("reduce d or add samples"), std::string::npos);
    }
    EXPECT_THROW((void)gaussian_stats(EmbeddingMatrix(oracle::random_tensor({16, 16}, rng))), SampleCountTooSmall);
    EXPECT_NO_THROW((void)gaussian_stats(EmbeddingMatrix(oracle::random_tensor({17, 16}, rng))));
}

TEST(EmbeddingMatrix, Invariants) {
    EXPECT_THROW(EmbeddingMatrix(Tensor({1, 3})), ValidationError);
    EXPECT_THROW(EmbeddingMatrix(Tensor({3})), ValidationError);
    Tensor t({3, 2});
    t[4] = std::nan("");
    EXPECT_THROW(EmbeddingMatrix{t}, Error);
}

TEST(Sqrtm, HandExamples) {
    EXPECT_EQ(sqrtm_psd(Tensor::from({2, 2}, {1, 0, 0, 1})), Tensor::from({2, 2}, {1, 0, 0, 1}));
    const Tensor r = sqrtm_psd(Tensor::from({2, 2}, {4, 0, 0, 9}));
    EXPECT_NEAR(r[0], 2.0, 1e-15);
    EXPECT_NEAR(r[3], 3.0, 1e-15);
    EXPECT_NEAR(r[1], 0.0, 1e-15);
}

TEST(Sqrtm, DenmanBeaversOracle32) {
    Rng rng(3);
    const Eigen::MatrixXd a = oracle::random_spd(32, rng);
    const Eigen::MatrixXd s = oracle::to_eigen(sqrtm_psd(oracle::from_eigen(a)));
    EXPECT_LT((s - oracle::denman_beavers_sqrt(a)).norm(), 1e-7);
    EXPECT_LT((s * s - a).norm() / a.norm(), 1e-8);
}

TEST(Sqrtm, SemidefiniteClampAndIndefiniteError) {
    // Rank-one PSD matrix: zero eigenvalue is accepted.
    const Tensor r = sqrtm_psd(Tensor::from({2, 2}, {1, 1, 1, 1}));
    const Eigen::MatrixXd m = oracle::to_eigen(r);
    EXPECT_LT((m * m - Eigen::MatrixXd::Ones(2, 2)).norm(), 1e-12);
    EXPECT_THROW(sqrtm_psd(Tensor::from({2, 2}, {1, 0, 0, -0.5})), NumericalError);
    EXPECT_THROW(sqrtm_psd(Tensor::from({2, 2}, {1, 0.5, 0.4, 1})), ValidationError);
}

TEST(Frechet, AnalyticCases) {
    Rng rng(4);
    const Eigen::MatrixXd s = oracle::random_spd(5, rng);
    const GaussianStats a = oracle::make_stats(Eigen::VectorXd::Ones(5), s);
    EXPECT_NEAR(frechet_distance(a, a), 0.0, 1e-9);
    GaussianStats x{Tensor::from({1}, {0.0}), Tensor::from({1, 1}, {1.0})};
    GaussianStats g{Tensor::from({1}, {3.0}), Tensor::from({1, 1}, {1.0})};
    EXPECT_NEAR(frechet_distance(x, g), 9.0, 1e-9);
    GaussianStats x2{Tensor::from({2}, {0, 0}), Tensor::from({2, 2}, {1, 0, 0, 1})};
    GaussianStats g2{Tensor::from({2}, {1, 1}), Tensor::from({2, 2}, {4, 0, 0, 4})};
    EXPECT_NEAR(frechet_distance(x2, g2), 4.0, 1e-9);
    EXPECT_THROW(frechet_distance(x, x2), DimensionError);
}

TEST(Frechet, MatchesNaiveNonSymmetricOracle) {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::MatrixXd sx = oracle::random_spd(8, rng), sg = oracle::random_spd(8, rng);
        Eigen::VectorXd mx(8), mg(8);
        for (int i = 0; i < 8; ++i) mx(i) = rng.normal(), mg(i) = rng.normal();
        const double expected = oracle::naive_frechet_distance(mx, sx, mg, sg);
        EXPECT_NEAR(frechet_distance(oracle::make_stats(mx, sx), oracle::make_stats(mg, sg)), expected, 1e-6);
    }
}

TEST(Frechet, Symmetric) {
    Rng rng(6);
    const GaussianStats a = oracle::make_stats(Eigen::VectorXd::Zero(6), oracle::random_spd(6, rng));
    const GaussianStats b = oracle::make_stats(Eigen::VectorXd::Ones(6), oracle::random_spd(6, rng));
    EXPECT_NEAR(frechet_distance(a, b), frechet_distance(b, a), 1e-9);
}

TEST(RandomProjection, LinearFrozenAndShaped) {
    Rng rng(7);
    const Tensor x = noise_images(40, 16, rng);
    const RandomProjectionEmbedder e(32, 42), again(32, 42), other(32, 43);
    const EmbeddingMatrix a = e.embed(x);
    EXPECT_EQ(a.data.shape(), (Shape{40, 32}));
    Tensor scaled = x;
    for (auto& v : scaled.values()) v *= 0.5;
    const EmbeddingMatrix b = e.embed(scaled);
    for (std::size_t i = 0; i < a.data.size(); ++i) EXPECT_NEAR(b.data[i], 0.5 * a.data[i], 1e-12);
    EXPECT_TRUE(bit_identical(a.data, again.embed(x).data));
    EXPECT_FALSE(bit_identical(a.data, other.embed(x).data));
    EXPECT_EQ(&e.projection(256), &e.projection(256));
    EXPECT_EQ(e.describe(), "random_projection:32:42");
}

TEST(RandomProjection, EntriesHaveVarianceOneOverD) {
    const RandomProjectionEmbedder e(32, 42);
    const Tensor& p = e.projection(4096);
    EXPECT_EQ(p.shape(), (Shape{4096, 32}));
    double s = 0.0, s2 = 0.0;
    for (double v : p.values()) s += v, s2 += v * v;
    const double n = static_cast<double>(p.size());
    EXPECT_NEAR(s / n, 0.0, 4.0 * std::sqrt(1.0 / 32.0 / n));
    EXPECT_NEAR(s2 / n, 1.0 / 32.0, 0.02 / 32.0);
}

TEST(RandomProjection, NoiseHalvesCloserThanNoiseVsBlobs) {
    Rng rng(8);
    const ImageDataset noise = as_dataset(noise_images(500, 16, rng));
    const ImageDataset blobs = synth_blob_dataset(250, 16, 1, BlobClass::normal);
    const RandomProjectionEmbedder e(32, 42);
    const Preprocessor pre(16);
    const double halves = fid_score(subset(noise, 0, 250), subset(noise, 250, 500), e, pre).fid;
    const double across = fid_score(subset(noise, 0, 250), blobs, e, pre).fid;
    EXPECT_LT(halves, across);
}

TEST(FidScore, IdenticalSetsAreZeroAndReportsCounts) {
    const ImageDataset ds = synth_blob_dataset(80, 16, 2, BlobClass::normal);
    const FidReport r = fid_score(ds, ds, RandomProjectionEmbedder(32, 42), Preprocessor(16));
    EXPECT_NEAR(r.fid, 0.0, 1e-9);
    EXPECT_EQ(r.n_real, 80u);
    EXPECT_EQ(r.n_fake, 80u);
    EXPECT_EQ(r.d, 32u);
    EXPECT_EQ(r.line().rfind("FID=0.000000 n_real=80 n_fake=80 d=32 embedder=random_projection:32:42", 0), 0u)
        << r.line();
}

TEST(FidScore, UntrainedGeneratorIsWorseThanRealSplit) {
    const ImageDataset real = synth_blob_dataset(400, 16, 3, BlobClass::normal);
    GeneratorSpec spec;
    spec.img_size = 16;
    spec.base_channels = 8;
    const Generator g = build_generator(spec, 1);
    const ImageDataset fake = as_dataset(generate_images(g, 200, 9));
    const RandomProjectionEmbedder e(32, 42);
    const Preprocessor pre(16);
    const double split = fid_score(subset(real, 0, 200), subset(real, 200, 400), e, pre).fid;
    EXPECT_GT(fid_score(subset(real, 0, 200), fake, e, pre).fid, split);
}

TEST(FidScore, SourcesAndJsonReport) {
    const fs::path dir = fs::temp_directory_path() / "dcgan_fid_sources";
    fs::remove_all(dir);
    write_dataset_png(synth_blob_dataset(60, 16, 4, BlobClass::normal), dir / "real");
    const FidReport same = fid_score(DirectorySource{dir / "real"}, DirectorySource{dir / "real"},
                                     RandomProjectionEmbedder(16, 1), 16);
    EXPECT_NEAR(same.fid, 0.0, 1e-9);
    EXPECT_EQ(same.image_size, 16u);
    write_fid_json(same, dir / "fid.json");
    std::ifstream in(dir / "fid.json");
    const auto j = nlohmann::json::parse(in);
    EXPECT_EQ(j.at("n_real").get<std::size_t>(), 60u);
    EXPECT_EQ(j.at("d").get<std::size_t>(), 16u);
    EXPECT_EQ(j.at("embedder").get<std::string>(), "random_projection:16:1");
    EXPECT_NEAR(j.at("fid").get<double>(), same.fid, 0.0);
    fs::remove_all(dir);
}

TEST(FidScore, DiscriminatorFeatureEmbedder) {
    DiscriminatorSpec spec;
    spec.img_size = 16;
    spec.base_channels = 2;
    DiscriminatorFeatureEmbedder e(build_discriminator(spec, 3), "test");
    EXPECT_EQ(e.dimension(), 16u);
    const ImageDataset a = synth_blob_dataset(40, 16, 1, BlobClass::normal);
    const ImageDataset b = synth_blob_dataset(40, 16, 2, BlobClass::anomalous);
    const FidReport r = fid_score(a, b, e, Preprocessor(16));
    EXPECT_GT(r.fid, 0.0);
    EXPECT_EQ(r.d, 16u);
    EXPECT_THROW((void)e.embed(Tensor({2, 1, 32, 32})), DimensionError);
}

TEST(MakeEmbedder, Parsing) {
    EXPECT_EQ(make_embedder("random_projection")->describe(), "random_projection:32:42");
    EXPECT_EQ(make_embedder("random_projection:8")->dimension(), 8u);
    EXPECT_EQ(make_embedder("random_projection:8:3")->describe(), "random_projection:8:3");
    EXPECT_THROW(make_embedder("inception"), ValidationError);
    EXPECT_THROW(make_embedder("random_projection:0"), ValidationError);
    EXPECT_THROW(make_embedder("random_projection:x"), ValidationError);
    EXPECT_THROW(make_embedder("discriminator_features:/nonexistent.gfc"), ValidationError);
}
