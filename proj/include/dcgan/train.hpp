#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcgan/adam.hpp"
#include "dcgan/data.hpp"
#include "dcgan/models.hpp"
#include "dcgan/rng.hpp"

namespace dcgan {

enum class GeneratorLoss {
    minimax,         // descend log(1 - D(G(z)))
    non_saturating,  // descend -log D(G(z))
};

std::string_view generator_loss_name(GeneratorLoss mode);
std::optional<GeneratorLoss> parse_generator_loss(std::string_view name);

struct TrainConfig {
    std::size_t epochs = 500;
    std::size_t batch_size = 64;
    double lr = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::size_t z_dim = 100;
    std::size_t img_size = 128;
    std::size_t channels = 1;
    std::size_t g_base_channels = 64;
    std::size_t d_base_channels = 64;
    double leaky_alpha = 0.2;
    bool batch_norm = false;  // reserved; rejected by validate()
    std::uint64_t seed = 0;
    GeneratorLoss generator_loss = GeneratorLoss::non_saturating;
    std::size_t d_steps = 1;  // discriminator updates per generator update
    bool drop_last = false;
    /// Directory of images, or "synthetic:<n>:<seed>[:normal|anomalous]".
    std::string data_path;
    /// Empty disables all file output.
    std::string output_dir;
    std::size_t checkpoint_every = 10;   // 0: final checkpoint only
    std::size_t sample_grid_every = 10;  // 0: final grid only
    std::size_t grid_samples = 64;
    /// Wall-clock time makes the metrics log non-reproducible, so it is opt-in;
    /// otherwise the wall_time_s column is written as 0.
    bool record_wall_time = false;

    /// Throws ValidationError on out-of-range values.
    void validate() const;

    GeneratorSpec generator_spec() const;
    DiscriminatorSpec discriminator_spec() const;
    AdamConfig adam() const;
    /// Hash of the architecture fields; checkpoints refuse to load across a mismatch.
    std::uint64_t fingerprint() const;
};

/// Fingerprint of a (generator, discriminator) topology pair.
std::uint64_t architecture_fingerprint(const GeneratorSpec& g, const DiscriminatorSpec& d);

struct EpochMetrics {
    std::uint64_t epoch = 0;
    double d_loss = 0.0;
    double g_loss = 0.0;
    double d_accuracy = 0.0;  // real with D(x) > 0.5 plus fake with D(G(z)) <= 0.5, over all samples seen
    double wall_time_s = 0.0;
};

/// Running tallies behind EpochMetrics.
class MetricsAccumulator {
public:
    void add_outputs(std::span<const double> d_real, std::span<const double> d_fake);
    void add_losses(double d_loss, double g_loss);
    EpochMetrics finish(std::uint64_t epoch, double wall_time_s) const;

private:
    std::size_t correct_ = 0;
    std::size_t seen_ = 0;
    double d_loss_sum_ = 0.0;
    double g_loss_sum_ = 0.0;
    std::size_t loss_count_ = 0;
};

EpochMetrics compute_metrics(std::uint64_t epoch, std::span<const double> d_real, std::span<const double> d_fake,
                             std::span<const double> d_losses, std::span<const double> g_losses,
                             double wall_time_s = 0.0);

inline constexpr std::string_view kMetricsHeader = "epoch,d_loss,g_loss,d_accuracy,wall_time_s";
std::string format_metrics_row(const EpochMetrics& m);

/// Everything needed to resume training bit-exactly.
struct Checkpoint {
    std::uint64_t epoch = 0;
    Generator generator;
    Discriminator discriminator;
    AdamState generator_adam;
    AdamState discriminator_adam;
    std::string rng_state;
    std::uint64_t config_fingerprint = 0;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws ParseError on truncated or corrupt files.
Checkpoint load_checkpoint(const std::filesystem::path& path);
/// Additionally throws IncompatibleCheckpoint if the stored fingerprint differs.
Checkpoint load_checkpoint(const std::filesystem::path& path, std::uint64_t expected_fingerprint);

/// Generator samples [n, C, s, s] in [-1, 1] from z drawn with Rng(seed).
Tensor generate_images(const Generator& g, std::size_t n, std::uint64_t seed, std::size_t batch = 64);

struct GridImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;  // [0, 1], row-major
};

inline constexpr std::size_t kGridSeparator = 2;

/// Tiles n = k*k single-channel images in [0, 1] row-major into a k x k grid
/// with 2-pixel white separators.
GridImage tile_grid(const Tensor& images);
void write_image_grid(const Tensor& images, const std::filesystem::path& path);

/// Writes n generated samples (fixed seeded z) as one PNG grid.
void sample_grid(const Generator& g, std::size_t n, std::uint64_t seed, const std::filesystem::path& path);

/// Loads the dataset named by config.data_path at config.img_size.
ImageDataset load_training_data(const TrainConfig& config);

/// Observation hook for tests: D and G parameters around each update.
struct StepObserver {
    virtual ~StepObserver() = default;
    virtual void before_discriminator_step(const Generator&, const Discriminator&) {}
    virtual void after_discriminator_step(const Generator&, const Discriminator&, const ParameterSet& /*d_grads*/) {}
    virtual void before_generator_step(const Generator&, const Discriminator&) {}
    virtual void after_generator_step(const Generator&, const Discriminator&, const ParameterSet& /*g_grads*/) {}
};

/// Alternating minimax optimization. One thread owns all parameter updates.
class Trainer {
public:
    Trainer(TrainConfig config, ImageDataset dataset);
    /// Resumes from `checkpoint`; its fingerprint must match the config.
    Trainer(TrainConfig config, ImageDataset dataset, const Checkpoint& checkpoint);

    /// Runs epoch `epoch() + 1` and returns its metrics.
    EpochMetrics run_epoch();
    /// One batch: d_steps discriminator updates, then one generator update.
    void train_batch(const Tensor& real, MetricsAccumulator& metrics);

    std::uint64_t epoch() const { return epoch_; }
    const TrainConfig& config() const { return config_; }
    const Generator& generator() const { return generator_; }
    const Discriminator& discriminator() const { return discriminator_; }
    const ImageDataset& dataset() const { return dataset_; }
    Checkpoint checkpoint() const;

    void set_observer(StepObserver* observer) { observer_ = observer; }

private:
    TrainConfig config_;
    ImageDataset dataset_;  // pixels already scaled to [-1, 1]
    Generator generator_;
    Discriminator discriminator_;
    AdamState g_adam_;
    AdamState d_adam_;
    Rng rng_;
    std::uint64_t epoch_ = 0;
    StepObserver* observer_ = nullptr;
};

struct TrainResult {
    Checkpoint final_checkpoint;
    std::vector<EpochMetrics> metrics;
};

using EpochCallback = std::function<void(const Trainer&, const EpochMetrics&)>;

/// Runs training to config.epochs, writing metrics.csv, ckpt_<epoch>.gfc and
/// samples_<epoch>.png into config.output_dir on schedule (if set).
TrainResult train(const TrainConfig& config, const ImageDataset& dataset,
                  const std::optional<Checkpoint>& resume = std::nullopt, const EpochCallback& on_epoch = {});
TrainResult train(const TrainConfig& config, const std::optional<Checkpoint>& resume = std::nullopt,
                  const EpochCallback& on_epoch = {});

}  // namespace dcgan
