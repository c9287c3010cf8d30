#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dcgan/cli.hpp"
#include "dcgan/config.hpp"
#include "dcgan/data.hpp"
#include "dcgan/image_io.hpp"
#include "dcgan/train.hpp"

namespace fs = std::filesystem;
using namespace dcgan;

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "dcgan");
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("dcgan_cli_test_" + name)) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& leaf) const { return (path / leaf).string(); }
};

std::string read_bytes(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST(Cli, SynthDataIsDeterministic) {
    TempDir dir("synth");
    ASSERT_EQ(run({"synth-data", "--n", "100", "--size", "16", "--seed", "7", "--out", dir / "a"}).code, 0);
    ASSERT_EQ(run({"synth-data", "--n", "100", "--size", "16", "--seed", "7", "--out", dir / "b"}).code, 0);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(dir.path / "a")) {
        EXPECT_EQ(read_bytes(e.path()), read_bytes(dir.path / "b" / e.path().filename()));
        ++files;
    }
    EXPECT_EQ(files, 100u);
    EXPECT_EQ(run({"synth-data", "--n", "3", "--size", "16", "--class", "weird", "--out", dir / "c"}).code, 1);
}

TEST(Cli, FidOfIdenticalSourcesIsZero) {
    TempDir dir("fid");
    ASSERT_EQ(run({"synth-data", "--n", "100", "--size", "16", "--seed", "7", "--out", dir / "d"}).code, 0);
    const CliResult r =
        run({"fid", "--real", dir / "d", "--fake", dir / "d", "--embedder", "random_projection:32:42", "--json",
             dir / "fid.json"});
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("FID=0.000000 n_real=100 n_fake=100 d=32 embedder=random_projection:32:42", 0), 0u)
        << r.out;
    EXPECT_TRUE(fs::exists(dir.path / "fid.json"));
    EXPECT_NE(r.err.find("embedder = random_projection:32:42"), std::string::npos);
}

TEST(Cli, FidRankGuardExitsOne) {
    TempDir dir("fid_small");
    ASSERT_EQ(run({"synth-data", "--n", "10", "--size", "16", "--out", dir / "d"}).code, 0);
    const CliResult r = run({"fid", "--real", dir / "d", "--fake", dir / "d", "--embedder", "random_projection:32"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("SampleCountTooSmall"), std::string::npos) << r.err;
}

TEST(Cli, GradcheckPasses) {
    const CliResult r = run({"gradcheck"});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("ALL PASS"), std::string::npos);
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, GradcheckFailureExitsTwo) {
    const CliResult r = run({"gradcheck", "--tolerance", "1e-300"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({"train", "--no-such-flag", "1"}).code, 1);
    EXPECT_EQ(run({"train", "--set", "bogus=1"}).code, 1);
    EXPECT_EQ(run({"train", "--epochs", "0", "--data-path", "synthetic:10:1", "--img-size", "16"}).code, 1);
    EXPECT_EQ(run({"generate", "--checkpoint", "/nonexistent", "--out", "x.png"}).code, 1);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, TrainEchoesReproducibleConfigAndResumes) {
    TempDir dir("train");
    const std::vector<std::string> common = {"--data-path", "synthetic:32:7", "--img_size", "16", "--batch-size",
                                             "16", "--g-base-channels", "4", "--d_base_channels", "4",
                                             "--checkpoint-every", "1", "--sample-grid-every", "1",
                                             "--grid-samples", "4", "--seed", "5"};
    std::vector<std::string> a = {"train", "--epochs", "2", "--output-dir", dir / "a"};
    a.insert(a.end(), common.begin(), common.end());
    const CliResult ra = run(a);
    ASSERT_EQ(ra.code, 0) << ra.err;
    EXPECT_NE(ra.err.find("# effective configuration"), std::string::npos);
    EXPECT_EQ(ra.out, read_bytes(dir.path / "a" / "metrics.csv"));

    // Feeding the echoed config back reproduces the run.
    std::string config = read_bytes(dir.path / "a" / "config.txt");
    config += "output_dir = " + (dir / "b") + "\n";
    std::ofstream(dir.path / "b.cfg") << config;
    ASSERT_EQ(run({"train", "--config", dir / "b.cfg"}).code, 0);
    EXPECT_EQ(read_bytes(dir.path / "a" / "metrics.csv"), read_bytes(dir.path / "b" / "metrics.csv"));

    // Resume from epoch 1 into a fresh directory that holds the epoch-1 prefix.
    fs::create_directories(dir.path / "c");
    const std::string csv = read_bytes(dir.path / "a" / "metrics.csv");
    std::ofstream(dir.path / "c" / "metrics.csv") << csv.substr(0, csv.find('\n', csv.find('\n') + 1) + 1);
    std::vector<std::string> c = {"train", "--epochs", "2", "--output-dir", dir / "c", "--resume",
                                  dir / "a/ckpt_1.gfc"};
    c.insert(c.end(), common.begin(), common.end());
    ASSERT_EQ(run(c).code, 0);
    EXPECT_EQ(read_bytes(dir.path / "c" / "metrics.csv"), csv);

    // Mismatched architecture on resume.
    std::vector<std::string> bad = c;
    bad.push_back("--img-size");
    bad.push_back("32");
    EXPECT_EQ(run(bad).code, 1);

    const CliResult g = run({"generate", "--checkpoint", dir / "a/ckpt_2.gfc", "--n", "9", "--out", dir / "g.png"});
    ASSERT_EQ(g.code, 0) << g.err;
    const GrayImage img = read_gray_image(dir.path / "g.png");
    EXPECT_EQ(img.width, 3u * 16u + 2u * 2u);

    ASSERT_EQ(run({"synth-data", "--n", "40", "--size", "16", "--out", dir / "real"}).code, 0);
    const CliResult f = run({"fid", "--real", dir / "real", "--checkpoint", dir / "a/ckpt_2.gfc", "--n-fake", "40",
                             "--embedder", "random_projection:8:1"});
    EXPECT_EQ(f.code, 0) << f.err;
    EXPECT_NE(f.out.find("n_fake=40 d=8"), std::string::npos);
}
