// Acceptance checks. Prints one PASS/FAIL line per criterion; exit code 0
// only if every selected criterion passes. `--only 2,3` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dcgan/data.hpp"
#include "dcgan/errors.hpp"
#include "dcgan/fid.hpp"
#include "dcgan/gradcheck_suite.hpp"
#include "dcgan/image_io.hpp"
#include "dcgan/models.hpp"
#include "dcgan/train.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace dcgan;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            if (!detail.empty()) detail += "; ";
            detail += what;
        }
    }
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, format, a, b, c);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("dcgan_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// 1. Gradient correctness.
Outcome criterion_gradcheck() {
    Outcome out;
    GradcheckSuiteOptions options;
    options.tolerance = 1e-4;
    options.step = 1e-5;
    options.img_size = 16;
    options.batch = 2;
    const auto start = std::chrono::steady_clock::now();
    const GradcheckSuiteReport report = run_gradcheck_suite(options);
    const double elapsed = seconds_since(start);
    double worst = 0.0;
    std::set<std::string> subjects;
    for (const auto& row : report.rows) {
        worst = std::max(worst, row.entry.max_relative_error);
        subjects.insert(row.subject);
        out.require(row.entry.pass && row.entry.max_relative_error < 1e-4,
                    row.subject + " " + row.entry.name + " failed");
    }
    out.require(subjects.count("generator") == 1 && subjects.count("discriminator") == 1,
                "both full networks must be checked");
    out.require(elapsed < 120.0, "runtime over 2 minutes");
    out.detail = fmt("%.0f tensors in ", static_cast<double>(report.rows.size())) +
                 std::to_string(subjects.size()) + " subjects, worst rel err " + fmt("%.3e, %.1fs", worst, elapsed) +
                 (out.detail.empty() ? "" : " | " + out.detail);
    if (!report.all_pass()) std::cerr << report.table();
    return out;
}

// 2. FID analytic suite.
Outcome criterion_fid_analytic() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    Rng rng(2024);

    {
        const Eigen::MatrixXd s = oracle::random_spd(8, rng);
        Eigen::VectorXd mu(8);
        for (Eigen::Index i = 0; i < 8; ++i) mu(i) = rng.normal();
        const GaussianStats a = oracle::make_stats(mu, s);
        const double fid = frechet_distance(a, a);
        out.require(std::abs(fid) <= 1e-9, fmt("identity gave %.3e", fid));
    }
    {
        GaussianStats x{Tensor::from({1}, {0.0}), Tensor::from({1, 1}, {1.0})};
        GaussianStats g{Tensor::from({1}, {3.0}), Tensor::from({1, 1}, {1.0})};
        const double fid = frechet_distance(x, g);
        out.require(std::abs(fid - 9.0) <= 1e-9, fmt("1-D case gave %.17g", fid));
    }
    {
        GaussianStats x{Tensor::from({2}, {0.0, 0.0}), Tensor::from({2, 2}, {1.0, 0.0, 0.0, 1.0})};
        GaussianStats g{Tensor::from({2}, {1.0, 1.0}), Tensor::from({2, 2}, {4.0, 0.0, 0.0, 4.0})};
        const double fid = frechet_distance(x, g);
        out.require(std::abs(fid - 4.0) <= 1e-9, fmt("2-D diagonal case gave %.17g", fid));
    }
    double worst_shift = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Eigen::MatrixXd s = oracle::random_spd(16, rng, 0.1 + rng.uniform());
        Eigen::VectorXd mu(16), delta(16);
        for (Eigen::Index i = 0; i < 16; ++i) {
            mu(i) = 3.0 * rng.normal();
            delta(i) = rng.normal();
        }
        const double expected = delta.squaredNorm();
        const double fid = frechet_distance(oracle::make_stats(mu, s), oracle::make_stats(mu + delta, s));
        worst_shift = std::max(worst_shift, std::abs(fid - expected) / expected);
    }
    out.require(worst_shift <= 1e-9, fmt("mean shift rel err %.3e", worst_shift));
    out.detail = fmt("mean-shift worst rel err %.2e over 100 16-D trials, %.2fs", worst_shift, seconds_since(start)) +
                 (out.detail.empty() ? "" : " | " + out.detail);
    return out;
}

// 3. Matrix square root.
Outcome criterion_sqrtm() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    Rng rng(77);
    double worst_oracle = 0.0, worst_square = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d = 1 + rng.below(64);
        const Eigen::MatrixXd a = oracle::random_spd(d, rng);
        const Eigen::MatrixXd db = oracle::denman_beavers_sqrt(a);
        const Eigen::MatrixXd s = oracle::to_eigen(sqrtm_psd(oracle::from_eigen(a)));
        worst_oracle = std::max(worst_oracle, (s - db).norm());

        const Eigen::MatrixXd root = oracle::random_spd(d, rng);
        const Eigen::MatrixXd squared = root * root;
        const Eigen::MatrixXd symmetric = 0.5 * (squared + squared.transpose());
        const Eigen::MatrixXd recovered = oracle::to_eigen(sqrtm_psd(oracle::from_eigen(symmetric)));
        worst_square = std::max(worst_square, (recovered - root).norm() / root.norm());
    }
    // 64 is always included.
    {
        const Eigen::MatrixXd a = oracle::random_spd(64, rng);
        const Eigen::MatrixXd s = oracle::to_eigen(sqrtm_psd(oracle::from_eigen(a)));
        worst_oracle = std::max(worst_oracle, (s - oracle::denman_beavers_sqrt(a)).norm());
    }
    out.require(worst_oracle <= 1e-7, fmt("oracle Frobenius diff %.3e", worst_oracle));
    out.require(worst_square <= 1e-7, fmt("sqrtm(S*S) relative Frobenius diff %.3e", worst_square));
    out.detail = fmt("vs Denman-Beavers %.2e, sqrtm(S*S) vs S %.2e, %.2fs", worst_oracle, worst_square,
                     seconds_since(start)) +
                 (out.detail.empty() ? "" : " | " + out.detail);
    return out;
}

// 4. Desk-scale training efficacy.
double generator_fid(const Generator& g, const ImageDataset& real, const Embedder& embedder) {
    const Preprocessor pre(real.item_shape()[1]);
    const ImageDataset fake = pre.from_generator_output(generate_images(g, real.size(), 4242), "generator");
    return fid_score(real, fake, embedder, pre).fid;
}

Outcome criterion_training() {
    Outcome out;
    const auto start = std::chrono::steady_clock::now();
    const ImageDataset data = synth_blob_dataset(2000, 16, 7, BlobClass::normal);
    const RandomProjectionEmbedder embedder(32, 42);

    std::vector<double> ratios;
    std::string per_seed;
    double acc_min = 1.0, acc_max = 0.0;
    bool finite = true;
    for (std::uint64_t seed : {7u, 8u, 9u}) {
        TrainConfig config;
        config.epochs = 30;
        config.img_size = 16;
        config.seed = seed;
        Trainer trainer(config, data);
        const double fid0 = generator_fid(trainer.generator(), data, embedder);
        for (std::size_t e = 1; e <= config.epochs; ++e) {
            const EpochMetrics m = trainer.run_epoch();
            finite = finite && std::isfinite(m.d_loss) && std::isfinite(m.g_loss) && std::isfinite(m.d_accuracy);
            acc_min = std::min(acc_min, m.d_accuracy);
            acc_max = std::max(acc_max, m.d_accuracy);
            std::cerr << "  seed " << seed << " " << format_metrics_row(m) << '\n';
        }
        const double fid30 = generator_fid(trainer.generator(), data, embedder);
        ratios.push_back(fid30 / fid0);
        per_seed += fmt("seed %.0f: FID %.3f -> %.3f; ", static_cast<double>(seed), fid0, fid30);
        std::cerr << "  seed " << seed << fmt(" FID epoch 0 = %.4f, epoch 30 = %.4f, ratio %.4f\n", fid0, fid30,
                                              fid30 / fid0);
    }
    std::sort(ratios.begin(), ratios.end());
    const double median = ratios[1];
    const double elapsed = seconds_since(start);
    out.require(median <= 0.5, fmt("median FID ratio %.4f > 0.5", median));
    out.require(acc_min >= 0.2 && acc_max <= 1.0, fmt("d_accuracy left [0.2, 1]: [%.4f, %.4f]", acc_min, acc_max));
    out.require(finite, "non-finite metric");
    out.detail = per_seed + fmt("median ratio %.4f, d_accuracy in [%.4f, %.4f], ", median, acc_min, acc_max) +
                 fmt("%.1f min", elapsed / 60.0) + (elapsed > 1800.0 ? " (over 30 min target)" : "") +
                 (out.detail.empty() ? "" : " | " + out.detail);
    return out;
}

// 5. Rank guard.
Outcome criterion_rank_guard() {
    Outcome out;
    Rng rng(5);
    int guarded = 0, accepted = 0;
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t d = 1 + rng.below(80);
        const std::size_t n = 2 + rng.below(2 * d + 4);
        const EmbeddingMatrix emb(oracle::random_tensor({n, d}, rng));
        bool threw = false;
        try {
            (void)gaussian_stats(emb);
        } catch (const SampleCountTooSmall& e) {
            threw = true;
            out.require(e.samples() == n && e.dimension() == d, "error reports wrong n or d");
        }
        if (n <= d) {
            ++guarded;
            out.require(threw, "n=" + std::to_string(n) + " d=" + std::to_string(d) + " not rejected");
        } else {
            ++accepted;
            out.require(!threw, "n=" + std::to_string(n) + " d=" + std::to_string(d) + " wrongly rejected");
        }
    }
    // End to end through fid_score with either side short of samples.
    const Preprocessor pre(16);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t d = 2 + rng.below(40);
        const std::size_t small = 2 + rng.below(d - 1);
        const std::size_t large = d + 1 + rng.below(20);
        const bool real_small = rng.below(2) == 0;
        const ImageDataset real = synth_blob_dataset(real_small ? small : large, 16, 1 + trial, BlobClass::normal);
        const ImageDataset fake = synth_blob_dataset(real_small ? large : small, 16, 100 + trial, BlobClass::normal);
        const RandomProjectionEmbedder embedder(d, 42);
        bool threw = false;
        try {
            (void)fid_score(real, fake, embedder, pre);
        } catch (const SampleCountTooSmall& e) {
            threw = e.samples() == small && e.dimension() == d;
        }
        ++guarded;
        out.require(threw, "fid_score with n=" + std::to_string(small) + " d=" + std::to_string(d) + " not rejected");
    }
    out.detail = std::to_string(guarded) + " n<=d cases rejected, " + std::to_string(accepted) + " n>d cases accepted" +
                 (out.detail.empty() ? "" : " | " + out.detail);
    return out;
}

// 6. Determinism and checkpointing.
Outcome criterion_determinism() {
    Outcome out;
    const ImageDataset data = synth_blob_dataset(256, 16, 7, BlobClass::normal);
    TrainConfig config;
    config.epochs = 2;
    config.img_size = 16;
    config.seed = 11;
    config.checkpoint_every = 1;
    config.sample_grid_every = 0;

    const fs::path a = scratch_dir("run_a"), b = scratch_dir("run_b"), r = scratch_dir("run_resume");
    config.output_dir = a.string();
    train(config, data);
    config.output_dir = b.string();
    train(config, data);
    const std::string csv_a = read_bytes(a / "metrics.csv");
    const std::string csv_b = read_bytes(b / "metrics.csv");
    out.require(!csv_a.empty() && csv_a == csv_b, "metrics CSVs of identical runs differ");
    out.require(read_bytes(a / "ckpt_2.gfc") == read_bytes(b / "ckpt_2.gfc"), "final checkpoints differ");

    TrainConfig first = config;
    first.epochs = 1;
    first.output_dir = r.string();
    train(first, data);
    config.output_dir = r.string();
    const Checkpoint ckpt = load_checkpoint(r / "ckpt_1.gfc", config.fingerprint());
    train(config, data, ckpt);
    const std::string csv_r = read_bytes(r / "metrics.csv");
    out.require(csv_r == csv_a, "resumed metrics differ from the uninterrupted run");
    out.require(read_bytes(r / "ckpt_2.gfc") == read_bytes(a / "ckpt_2.gfc"), "resumed final checkpoint differs");

    out.detail = std::string("two runs ") + (csv_a == csv_b ? "byte-identical" : "differ") + ", resume at epoch 1 " +
                 (csv_r == csv_a ? "reproduces" : "does not reproduce") + " epoch 2" +
                 (out.detail.empty() ? "" : " | " + out.detail);
    for (const auto& dir : {a, b, r}) fs::remove_all(dir);
    return out;
}

// 7. Output contracts.
Outcome criterion_outputs() {
    Outcome out;
    Rng rng(99);

    // Generator range, including weights scaled up to drive tanh into saturation.
    double lo = 0.0, hi = 0.0;
    std::size_t latents = 0;
    for (double weight_scale : {1.0, 50.0}) {
        GeneratorSpec spec;
        spec.img_size = 16;
        Generator g = build_generator(spec, 3);
        for (auto& t : g.params.tensors)
            for (auto& v : t.value.values()) v *= weight_scale;
        const Tensor z = oracle::random_tensor({500, spec.z_dim}, rng, weight_scale);
        const Tensor images = generator_forward(g, z);
        latents += z.dim(0);
        for (double v : images.values()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            if (!(v >= -1.0 && v <= 1.0)) out.pass = false;
        }
    }
    out.require(out.pass && latents == 1000, fmt("generator range [%.17g, %.17g]", lo, hi));

    // Grid dimensions: k*s + (k-1)*2 on both axes, checked on the decoded PNG.
    const fs::path dir = scratch_dir("grids");
    int grids = 0;
    for (std::size_t k : {1u, 2u, 3u, 8u}) {
        for (std::size_t s : {16u, 32u}) {
            GeneratorSpec spec;
            spec.img_size = s;
            spec.base_channels = 4;
            const Generator g = build_generator(spec, 1);
            const fs::path path = dir / ("grid_" + std::to_string(k) + "_" + std::to_string(s) + ".png");
            sample_grid(g, k * k, 5, path);
            const GrayImage img = read_gray_image(path);
            const std::size_t expected = k * s + (k - 1) * kGridSeparator;
            out.require(img.width == expected && img.height == expected,
                        "grid k=" + std::to_string(k) + " s=" + std::to_string(s) + " is " +
                            std::to_string(img.width) + "x" + std::to_string(img.height));
            ++grids;
        }
    }
    fs::remove_all(dir);

    // Preprocessing roundtrip.
    std::size_t checked = 0;
    bool dyadic_exact = true;
    Tensor x({1, 16, 16});
    for (int trial = 0; trial < 200; ++trial) {
        for (auto& v : x.values()) v = static_cast<double>(rng.below((1ull << 53) + 1)) * 0x1p-53;
        x[0] = 0.0;
        x[1] = 1.0;
        const Tensor processed = Preprocessor(16).apply(x);
        const Tensor back = scale_from_tanh_range(scale_to_tanh_range(processed));
        dyadic_exact = dyadic_exact && bit_identical(processed, x) && bit_identical(back, x);
        checked += x.size();
    }
    out.require(dyadic_exact, "scale/inverse or identity resize not exact");
    Tensor bytes({1, 16, 16});
    for (std::size_t i = 0; i < 256; ++i) bytes[i] = static_cast<double>(i) / 255.0;
    const auto q0 = quantize_8bit(bytes.values());
    const auto q1 = quantize_8bit(scale_from_tanh_range(scale_to_tanh_range(Preprocessor(16).apply(bytes))).values());
    out.require(q0 == q1, "8-bit pixel values do not survive the roundtrip");
    for (std::size_t i = 0; i < 256; ++i) out.require(q0[i] == i, "quantization is not the identity on k/255");

    out.detail = fmt("1000 latents in [%.6f, %.6f], ", lo, hi) + std::to_string(grids) +
                 " grid sizes exact, roundtrip exact on " + std::to_string(checked) +
                 " values and all 256 8-bit levels" + (out.detail.empty() ? "" : " | " + out.detail);
    return out;
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg == "--only" && i + 1 < argc) {
            std::stringstream ss(argv[++i]);
            std::string item;
            while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
        } else {
            std::cerr << "usage: " << argv[0] << " [--only 1,2,...]\n";
            return 2;
        }
    }

    const std::vector<Criterion> criteria = {
        {1, "gradient correctness", criterion_gradcheck},
        {2, "FID analytic suite", criterion_fid_analytic},
        {3, "matrix square root", criterion_sqrtm},
        {4, "desk-scale training efficacy", criterion_training},
        {5, "rank guard", criterion_rank_guard},
        {6, "determinism and checkpointing", criterion_determinism},
        {7, "output contracts", criterion_outputs},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        if (!only.empty() && !only.count(c.id)) continue;
        Outcome result;
        try {
            result = c.run();
        } catch (const std::exception& e) {
            result.pass = false;
            result.detail = std::string("exception: ") + e.what();
        }
        if (!result.pass) ++failures;
        std::cout << (result.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name
                  << "): " << result.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
