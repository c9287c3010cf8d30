#include "dcgan/train.hpp"

#include <chrono>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dcgan/errors.hpp"
#include "dcgan/image_io.hpp"
#include "dcgan/ops.hpp"

namespace dcgan {

namespace {

// Independent random streams derived from the run seed.
constexpr std::uint64_t kStreamGeneratorInit = 1;
constexpr std::uint64_t kStreamDiscriminatorInit = 2;
constexpr std::uint64_t kStreamShuffle = 3;
constexpr std::uint64_t kStreamLatent = 4;
constexpr std::uint64_t kStreamGrid = 5;

std::size_t exact_sqrt(std::size_t n) {
    auto k = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
    while (k * k > n) --k;
    while ((k + 1) * (k + 1) <= n) ++k;
    return k;
}

Tensor sample_latent(Rng& rng, std::size_t n, std::size_t z_dim) {
    Tensor z({n, z_dim});
    rng.fill_normal(z.values());
    return z;
}

Tensor concat_batch(const Tensor& a, const Tensor& b) {
    Shape shape = a.shape();
    shape[0] += b.dim(0);
    Tensor out(shape);
    std::copy(a.values().begin(), a.values().end(), out.data());
    std::copy(b.values().begin(), b.values().end(), out.data() + a.size());
    return out;
}

bool on_schedule(std::uint64_t epoch, std::size_t every, std::size_t last) {
    return epoch == last || (every != 0 && epoch % every == 0);
}

}  // namespace

std::string_view generator_loss_name(GeneratorLoss mode) {
    return mode == GeneratorLoss::minimax ? "minimax" : "non_saturating";
}

std::optional<GeneratorLoss> parse_generator_loss(std::string_view name) {
    if (name == "minimax") return GeneratorLoss::minimax;
    if (name == "non_saturating") return GeneratorLoss::non_saturating;
    return std::nullopt;
}

void TrainConfig::validate() const {
    if (epochs == 0) throw ValidationError("epochs must be at least 1");
    if (batch_size == 0) throw ValidationError("batch_size must be at least 1");
    if (!(lr > 0.0) || !std::isfinite(lr)) throw ValidationError("lr must be a positive finite number");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ValidationError("beta2 must lie in [0, 1)");
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ValidationError("eps must be a positive finite number");
    if (batch_norm) throw ValidationError("batch_norm is not supported; set batch_norm = false");
    if (channels != 1) throw ValidationError("only single-channel (grayscale) images are supported, got channels=" +
                                             std::to_string(channels));
    if (d_steps == 0) throw ValidationError("d_steps must be at least 1");
    if (grid_samples == 0 || exact_sqrt(grid_samples) * exact_sqrt(grid_samples) != grid_samples)
        throw ValidationError("grid_samples must be a perfect square, got " + std::to_string(grid_samples));
    generator_spec().validate();
    discriminator_spec().validate();
}

GeneratorSpec TrainConfig::generator_spec() const {
    return GeneratorSpec{z_dim, g_base_channels, img_size, channels, leaky_alpha};
}

DiscriminatorSpec TrainConfig::discriminator_spec() const {
    return DiscriminatorSpec{d_base_channels, img_size, channels, leaky_alpha};
}

AdamConfig TrainConfig::adam() const { return AdamConfig{lr, beta1, beta2, eps}; }

std::uint64_t TrainConfig::fingerprint() const {
    return architecture_fingerprint(generator_spec(), discriminator_spec());
}

std::uint64_t architecture_fingerprint(const GeneratorSpec& g, const DiscriminatorSpec& d) {
    return fingerprint_of(g.describe() + "|" + d.describe());
}

void MetricsAccumulator::add_outputs(std::span<const double> d_real, std::span<const double> d_fake) {
    for (double p : d_real) correct_ += p > 0.5 ? 1 : 0;
    for (double p : d_fake) correct_ += p <= 0.5 ? 1 : 0;
    seen_ += d_real.size() + d_fake.size();
}

void MetricsAccumulator::add_losses(double d_loss, double g_loss) {
    d_loss_sum_ += d_loss;
    g_loss_sum_ += g_loss;
    ++loss_count_;
}

EpochMetrics MetricsAccumulator::finish(std::uint64_t epoch, double wall_time_s) const {
    EpochMetrics m;
    m.epoch = epoch;
    if (loss_count_ > 0) {
        m.d_loss = d_loss_sum_ / static_cast<double>(loss_count_);
        m.g_loss = g_loss_sum_ / static_cast<double>(loss_count_);
    }
    if (seen_ > 0) m.d_accuracy = static_cast<double>(correct_) / static_cast<double>(seen_);
    m.wall_time_s = wall_time_s;
    return m;
}

EpochMetrics compute_metrics(std::uint64_t epoch, std::span<const double> d_real, std::span<const double> d_fake,
                             std::span<const double> d_losses, std::span<const double> g_losses,
                             double wall_time_s) {
    if (d_losses.size() != g_losses.size())
        throw DimensionError("compute_metrics: d_losses and g_losses differ in length");
    MetricsAccumulator acc;
    acc.add_outputs(d_real, d_fake);
    for (std::size_t i = 0; i < d_losses.size(); ++i) acc.add_losses(d_losses[i], g_losses[i]);
    return acc.finish(epoch, wall_time_s);
}

std::string format_metrics_row(const EpochMetrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%llu,%.17g,%.17g,%.17g,%.3f", static_cast<unsigned long long>(m.epoch),
                  m.d_loss, m.g_loss, m.d_accuracy, m.wall_time_s);
    return buf;
}

Tensor generate_images(const Generator& g, std::size_t n, std::uint64_t seed, std::size_t batch) {
    if (n == 0) throw ValidationError("generate_images: n must be positive");
    if (batch == 0) throw ValidationError("generate_images: batch must be positive");
    const auto& s = g.spec;
    Tensor out({n, s.out_channels, s.img_size, s.img_size});
    const std::size_t per_item = s.out_channels * s.img_size * s.img_size;
    Rng rng(seed);
    for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t count = std::min(batch, n - start);
        const Tensor images = generator_forward(g, sample_latent(rng, count, s.z_dim));
        std::copy(images.values().begin(), images.values().end(), out.data() + start * per_item);
    }
    return out;
}

GridImage tile_grid(const Tensor& images) {
    require_rank(images, 4, "tile_grid");
    if (images.dim(1) != 1) throw DimensionError("tile_grid: expected single-channel images, got " +
                                                 shape_to_string(images.shape()));
    const std::size_t n = images.dim(0);
    const std::size_t k = exact_sqrt(n);
    if (k * k != n) throw ValidationError("tile_grid: image count " + std::to_string(n) + " is not a perfect square");
    const std::size_t h = images.dim(2);
    const std::size_t w = images.dim(3);
    GridImage grid;
    grid.width = k * w + (k - 1) * kGridSeparator;
    grid.height = k * h + (k - 1) * kGridSeparator;
    grid.pixels.assign(grid.width * grid.height, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t y0 = (i / k) * (h + kGridSeparator);
        const std::size_t x0 = (i % k) * (w + kGridSeparator);
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x) grid.pixels[(y0 + y) * grid.width + x0 + x] = images.at(i, 0, y, x);
    }
    return grid;
}

void write_image_grid(const Tensor& images, const std::filesystem::path& path) {
    const GridImage grid = tile_grid(images);
    write_png_gray8(path, grid.width, grid.height, quantize_8bit(grid.pixels));
}

void sample_grid(const Generator& g, std::size_t n, std::uint64_t seed, const std::filesystem::path& path) {
    write_image_grid(scale_from_tanh_range(generate_images(g, n, seed)), path);
}

ImageDataset load_training_data(const TrainConfig& config) {
    const std::string& path = config.data_path;
    if (path.empty()) throw ValidationError("data_path is not set");
    constexpr std::string_view prefix = "synthetic:";
    if (path.rfind(prefix, 0) == 0) {
        std::vector<std::string> parts;
        std::stringstream ss(path.substr(prefix.size()));
        for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
        if (parts.size() < 2 || parts.size() > 3)
            throw ValidationError("data_path '" + path + "': expected synthetic:<n>:<seed>[:normal|anomalous]");
        std::size_t n = 0;
        std::uint64_t seed = 0;
        try {
            std::size_t used = 0;
            n = std::stoull(parts[0], &used);
            if (used != parts[0].size()) throw std::invalid_argument("n");
            seed = std::stoull(parts[1], &used);
            if (used != parts[1].size()) throw std::invalid_argument("seed");
        } catch (const std::logic_error&) {
            throw ValidationError("data_path '" + path + "': n and seed must be non-negative integers");
        }
        BlobClass cls = BlobClass::normal;
        if (parts.size() == 3) {
            auto parsed = parse_blob_class(parts[2]);
            if (!parsed) throw ValidationError("data_path '" + path + "': unknown class '" + parts[2] + "'");
            cls = *parsed;
        }
        return synth_blob_dataset(n, config.img_size, seed, cls);
    }
    return Preprocessor(config.img_size).load_directory(path);
}

namespace {

ImageDataset to_tanh_range(ImageDataset dataset, const TrainConfig& config) {
    if (dataset.empty()) throw ValidationError("training dataset is empty");
    const Shape expected{config.channels, config.img_size, config.img_size};
    if (dataset.item_shape() != expected)
        throw DimensionError("training images have shape " + shape_to_string(dataset.item_shape()) + ", expected " +
                             shape_to_string(expected));
    for (auto& item : dataset.items) item.pixels = scale_to_tanh_range(item.pixels);
    return dataset;
}

}  // namespace

Trainer::Trainer(TrainConfig config, ImageDataset dataset)
    : config_((config.validate(), std::move(config))),
      dataset_(to_tanh_range(std::move(dataset), config_)),
      generator_(build_generator(config_.generator_spec(), mix_seed(config_.seed, kStreamGeneratorInit))),
      discriminator_(
          build_discriminator(config_.discriminator_spec(), mix_seed(config_.seed, kStreamDiscriminatorInit))),
      g_adam_(AdamState::for_params(generator_.params.tensors)),
      d_adam_(AdamState::for_params(discriminator_.params.tensors)),
      rng_(mix_seed(config_.seed, kStreamLatent)) {}

Trainer::Trainer(TrainConfig config, ImageDataset dataset, const Checkpoint& checkpoint)
    : config_((config.validate(), std::move(config))),
      dataset_(to_tanh_range(std::move(dataset), config_)),
      generator_(checkpoint.generator),
      discriminator_(checkpoint.discriminator),
      g_adam_(checkpoint.generator_adam),
      d_adam_(checkpoint.discriminator_adam),
      epoch_(checkpoint.epoch) {
    if (checkpoint.config_fingerprint != config_.fingerprint())
        throw IncompatibleCheckpoint("checkpoint architecture does not match the configuration (checkpoint " +
                                     generator_.spec.describe() + " / " + discriminator_.spec.describe() + ")");
    generator_.params.tensors.require_same_layout(g_adam_.m, "generator adam m");
    generator_.params.tensors.require_same_layout(g_adam_.v, "generator adam v");
    discriminator_.params.tensors.require_same_layout(d_adam_.m, "discriminator adam m");
    discriminator_.params.tensors.require_same_layout(d_adam_.v, "discriminator adam v");
    rng_.restore(checkpoint.rng_state);
}

void Trainer::train_batch(const Tensor& real, MetricsAccumulator& metrics) {
    const std::size_t b = real.dim(0);
    const Tensor ones({b, 1}, 1.0);
    Tensor real_fake_targets({2 * b, 1}, 0.0);
    std::fill(real_fake_targets.data(), real_fake_targets.data() + b, 1.0);
    const AdamConfig adam = config_.adam();

    GeneratorTape g_tape;
    Tensor fake;
    double d_loss = 0.0;
    for (std::size_t step = 0; step < config_.d_steps; ++step) {
        if (observer_) observer_->before_discriminator_step(generator_, discriminator_);
        fake = generator_forward(generator_, sample_latent(rng_, b, config_.z_dim), &g_tape);

        // Real and fake pass through D as one batch; the loss is the sum of the
        // two per-half means, i.e. twice the mean over the joint batch.
        const Tensor joint = concat_batch(real, fake);
        DiscriminatorTape d_tape;
        const DiscriminatorOutput d_out = discriminator_forward(discriminator_, joint, &d_tape);
        LossResult loss = bce_with_logits(d_out.logits, real_fake_targets);
        for (double& v : loss.grad.values()) v *= 2.0;
        const ParameterSet grads =
            discriminator_backward(discriminator_, d_tape, d_out, loss.grad, true, false).params;

        const auto probs = d_out.probabilities.values();
        metrics.add_outputs(probs.first(b), probs.subspan(b));
        d_loss += 2.0 * loss.loss;
        adam_step(discriminator_.params.tensors, grads, d_adam_, adam);
        if (observer_) observer_->after_discriminator_step(generator_, discriminator_, grads);
    }

    // The generator has not moved since the last sample, so its tape is reused.
    if (observer_) observer_->before_generator_step(generator_, discriminator_);
    DiscriminatorTape tape;
    const DiscriminatorOutput out = discriminator_forward(discriminator_, fake, &tape);
    double g_loss = 0.0;
    Tensor grad_logits;
    if (config_.generator_loss == GeneratorLoss::non_saturating) {
        LossResult r = bce_with_logits(out.logits, ones);
        g_loss = r.loss;
        grad_logits = std::move(r.grad);
    } else {
        grad_logits = Tensor({b, 1});
        const double inv_b = 1.0 / static_cast<double>(b);
        double sum = 0.0;
        for (std::size_t i = 0; i < b; ++i) {
            const double l = out.logits[i];
            sum += softplus(l);
            grad_logits[i] = -sigmoid(l) * inv_b;
        }
        g_loss = -sum * inv_b;
    }
    if (!std::isfinite(g_loss)) throw NumericalError("generator loss is not finite");
    const Tensor grad_images = discriminator_backward(discriminator_, tape, out, grad_logits, false, true).input;
    const ParameterSet g_grads = generator_backward(generator_, g_tape, grad_images);
    adam_step(generator_.params.tensors, g_grads, g_adam_, adam);
    if (observer_) observer_->after_generator_step(generator_, discriminator_, g_grads);

    metrics.add_losses(d_loss / static_cast<double>(config_.d_steps), g_loss);
}

EpochMetrics Trainer::run_epoch() {
    const std::uint64_t epoch = epoch_ + 1;
    const BatchPlan plan{config_.batch_size, mix_seed(config_.seed, kStreamShuffle), config_.drop_last};
    const auto batches = batch_indices(dataset_.size(), plan, epoch);
    if (batches.empty())
        throw ValidationError("dataset of " + std::to_string(dataset_.size()) + " images yields no batch of size " +
                              std::to_string(config_.batch_size) + " with drop_last");
    MetricsAccumulator metrics;
    for (std::size_t i = 0; i < batches.size(); ++i) {
        try {
            train_batch(dataset_.gather(batches[i]), metrics);
        } catch (const NumericalError& e) {
            throw NumericalError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(i + 1) + ": " +
                                 e.what());
        }
    }
    epoch_ = epoch;
    return metrics.finish(epoch, 0.0);
}

Checkpoint Trainer::checkpoint() const {
    return Checkpoint{epoch_, generator_, discriminator_, g_adam_, d_adam_, rng_.state(), config_.fingerprint()};
}

namespace {

// Keeps the header and rows up to `last_epoch` of an existing log so a resumed
// run continues the same file.
void prepare_metrics_log(const std::filesystem::path& path, std::uint64_t last_epoch) {
    std::vector<std::string> kept{std::string(kMetricsHeader)};
    if (last_epoch > 0) {
        std::ifstream in(path);
        std::string line;
        bool first = true;
        while (std::getline(in, line)) {
            if (first) {
                first = false;
                continue;
            }
            const auto comma = line.find(',');
            if (comma == std::string::npos) continue;
            try {
                if (std::stoull(line.substr(0, comma)) <= last_epoch) kept.push_back(line);
            } catch (const std::logic_error&) {
            }
        }
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write metrics log '" + path.string() + "'");
    for (const auto& line : kept) out << line << '\n';
}

}  // namespace

TrainResult train(const TrainConfig& config, const ImageDataset& dataset, const std::optional<Checkpoint>& resume,
                  const EpochCallback& on_epoch) {
    Trainer trainer = resume ? Trainer(config, dataset, *resume) : Trainer(config, dataset);
    if (trainer.epoch() > config.epochs)
        throw ValidationError("checkpoint epoch " + std::to_string(trainer.epoch()) + " is beyond epochs=" +
                              std::to_string(config.epochs));

    const bool write_files = !config.output_dir.empty();
    const std::filesystem::path out_dir = config.output_dir;
    const std::filesystem::path metrics_path = out_dir / "metrics.csv";
    if (write_files) {
        std::error_code ec;
        std::filesystem::create_directories(out_dir, ec);
        if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message());
        prepare_metrics_log(metrics_path, trainer.epoch());
    }

    const auto start = std::chrono::steady_clock::now();
    TrainResult result;
    while (trainer.epoch() < config.epochs) {
        EpochMetrics m = trainer.run_epoch();
        if (config.record_wall_time)
            m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result.metrics.push_back(m);
        if (write_files) {
            std::ofstream log(metrics_path, std::ios::binary | std::ios::app);
            log << format_metrics_row(m) << '\n';
            if (!log) throw IoError("cannot append to metrics log '" + metrics_path.string() + "'");
            const std::string tag = std::to_string(m.epoch);
            if (on_schedule(m.epoch, config.checkpoint_every, config.epochs))
                save_checkpoint(trainer.checkpoint(), out_dir / ("ckpt_" + tag + ".gfc"));
            if (on_schedule(m.epoch, config.sample_grid_every, config.epochs))
                sample_grid(trainer.generator(), config.grid_samples, mix_seed(config.seed, kStreamGrid),
                            out_dir / ("samples_" + tag + ".png"));
        }
        if (on_epoch) on_epoch(trainer, m);
    }
    result.final_checkpoint = trainer.checkpoint();
    return result;
}

TrainResult train(const TrainConfig& config, const std::optional<Checkpoint>& resume,
                  const EpochCallback& on_epoch) {
    config.validate();
    return train(config, load_training_data(config), resume, on_epoch);
}

}  // namespace dcgan
