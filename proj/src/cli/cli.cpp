#include "dcgan/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <map>
#include <ostream>

#include "dcgan/config.hpp"
#include "dcgan/errors.hpp"
#include "dcgan/fid.hpp"
#include "dcgan/gradcheck_suite.hpp"
#include "dcgan/train.hpp"

namespace dcgan {

namespace {

constexpr const char* kEmbedderHelp =
    "Embedding for FID, as name:param:param. random_projection[:d[:seed]] projects flattened images with a "
    "fixed Normal(0, 1/d) matrix (default random_projection:32:42); discriminator_features:<checkpoint> uses "
    "the penultimate discriminator activations of a checkpoint.";

void echo(std::ostream& err, const std::vector<std::pair<std::string, std::string>>& settings) {
    err << "# effective configuration\n";
    for (const auto& [key, value] : settings) err << key << " = " << value << '\n';
}

struct TrainArgs {
    std::string config_path;
    std::string resume;
    std::map<std::string, std::string> overrides;
    std::string seed;
};

int run_train(const TrainArgs& args, std::ostream& out, std::ostream& err) {
    TrainConfig config;
    if (!args.config_path.empty()) config = train_config_from_entries(read_config_file(args.config_path));
    for (const auto& key : train_config_keys()) {
        auto it = args.overrides.find(key);
        if (it != args.overrides.end()) apply_config_entry(config, key, it->second);
    }
    if (!args.seed.empty()) apply_config_entry(config, "seed", args.seed);
    config.validate();

    const std::string rendered = render_config(config);
    err << "# effective configuration\n" << rendered;
    if (!args.resume.empty()) err << "# resuming from " << args.resume << '\n';
    if (!config.output_dir.empty()) {
        std::filesystem::create_directories(config.output_dir);
        std::ofstream cfg(std::filesystem::path(config.output_dir) / "config.txt", std::ios::binary | std::ios::trunc);
        cfg << rendered;
    }

    std::optional<Checkpoint> resume;
    if (!args.resume.empty()) resume = load_checkpoint(args.resume, config.fingerprint());
    const TrainResult result = train(config, resume, [&](const Trainer&, const EpochMetrics& m) {
        err << "epoch " << m.epoch << "/" << config.epochs << "  " << format_metrics_row(m) << '\n';
    });
    out << std::string(kMetricsHeader) << '\n';
    for (const auto& m : result.metrics) out << format_metrics_row(m) << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"DCGAN training, sampling and FID evaluation on grayscale images", "dcgan"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Help for every subcommand");

    // train
    TrainArgs train_args;
    auto* train_cmd = app.add_subcommand("train", "Train a generator/discriminator pair");
    train_cmd->add_option("--config", train_args.config_path, "Config file of 'key = value' lines")->check(CLI::ExistingFile);
    train_cmd->add_option("--resume", train_args.resume, "Checkpoint (.gfc) to continue from")->check(CLI::ExistingFile);
    train_cmd->add_option("--seed", train_args.seed, "Run seed (same as --set seed=...)");
    std::vector<std::string> sets;
    train_cmd->add_option("--set", sets, "Override one config key: --set key=value (repeatable)");
    for (const auto& key : train_config_keys()) {
        if (key == "seed") continue;
        std::string dashed = key;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        std::string names = "--" + key;
        if (dashed != key) names += ",--" + dashed;
        train_cmd->add_option_function<std::string>(
            names, [&train_args, key](const std::string& v) { train_args.overrides[key] = v; },
            "Override config key " + key);
    }

    // generate
    std::string gen_checkpoint, gen_out;
    std::size_t gen_n = 64;
    std::uint64_t gen_seed = 0;
    auto* gen_cmd = app.add_subcommand("generate", "Write a grid of generated samples as PNG");
    gen_cmd->add_option("--checkpoint", gen_checkpoint, "Checkpoint (.gfc)")->required()->check(CLI::ExistingFile);
    gen_cmd->add_option("--n", gen_n, "Number of samples (a perfect square)")->capture_default_str();
    gen_cmd->add_option("--out", gen_out, "Output PNG path")->required();
    gen_cmd->add_option("--seed", gen_seed, "Latent seed")->capture_default_str();

    // fid
    std::string fid_real, fid_fake, fid_checkpoint, fid_embedder = "random_projection:32:42", fid_json;
    std::size_t fid_n_fake = 0, fid_size = 0;
    std::uint64_t fid_seed = 0;
    auto* fid_cmd = app.add_subcommand("fid", "Frechet distance between real and generated images");
    fid_cmd->add_option("--real", fid_real, "Directory of real images")->required()->check(CLI::ExistingDirectory);
    auto* fake_opt = fid_cmd->add_option("--fake", fid_fake, "Directory of generated images")->check(CLI::ExistingDirectory);
    auto* ckpt_opt =
        fid_cmd->add_option("--checkpoint", fid_checkpoint, "Sample the generator of this checkpoint instead of --fake")
            ->check(CLI::ExistingFile);
    fake_opt->excludes(ckpt_opt);
    fid_cmd->add_option("--n-fake", fid_n_fake, "Samples drawn with --checkpoint (default: as many as real images)");
    fid_cmd->add_option("--seed", fid_seed, "Latent seed for --checkpoint sampling")->capture_default_str();
    fid_cmd->add_option("--embedder", fid_embedder, kEmbedderHelp)->capture_default_str();
    fid_cmd->add_option("--size", fid_size, "Image size both sources are resized to (default: automatic)");
    fid_cmd->add_option("--json", fid_json, "Also write a JSON report here");

    // gradcheck
    GradcheckSuiteOptions gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every operation and both networks");
    gc_cmd->add_option("--tolerance", gc.tolerance, "Maximum relative error")->capture_default_str();
    gc_cmd->add_option("--step", gc.step, "Central-difference step")->capture_default_str();
    gc_cmd->add_option("--seed", gc.seed, "Seed for inputs and parameters")->capture_default_str();

    // synth-data
    std::size_t syn_n = 0, syn_size = 0;
    std::string syn_class = "normal", syn_out;
    std::uint64_t syn_seed = 0;
    auto* syn_cmd = app.add_subcommand("synth-data", "Write a synthetic blob dataset as PNG files");
    syn_cmd->add_option("--n", syn_n, "Number of images")->required();
    syn_cmd->add_option("--size", syn_size, "Image size in pixels")->required();
    syn_cmd->add_option("--class", syn_class, "normal or anomalous")->capture_default_str();
    syn_cmd->add_option("--seed", syn_seed, "Dataset seed")->capture_default_str();
    syn_cmd->add_option("--out", syn_out, "Output directory")->required();

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    if (!argv_rev.empty()) argv_rev.pop_back();
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        if (*train_cmd) {
            for (const auto& s : sets) {
                const auto eq = s.find('=');
                if (eq == std::string::npos) throw ValidationError("--set expects key=value, got '" + s + "'");
                train_args.overrides[s.substr(0, eq)] = s.substr(eq + 1);
            }
            for (const auto& [key, value] : train_args.overrides) {
                TrainConfig probe;
                apply_config_entry(probe, key, value);  // rejects unknown keys early
            }
            return run_train(train_args, out, err);
        }
        if (*gen_cmd) {
            echo(err, {{"checkpoint", gen_checkpoint}, {"n", std::to_string(gen_n)}, {"seed", std::to_string(gen_seed)},
                       {"out", gen_out}});
            const Checkpoint c = load_checkpoint(gen_checkpoint);
            sample_grid(c.generator, gen_n, gen_seed, gen_out);
            out << "wrote " << gen_out << '\n';
            return kExitOk;
        }
        if (*fid_cmd) {
            if (fid_fake.empty() && fid_checkpoint.empty()) throw ValidationError("fid needs --fake or --checkpoint");
            const auto embedder = make_embedder(fid_embedder);
            ImageSource fake;
            if (!fid_checkpoint.empty()) {
                std::size_t n = fid_n_fake;
                if (n == 0) n = Preprocessor(16).load_directory(fid_real).size();
                fake = GeneratorSource{fid_checkpoint, n, fid_seed};
            } else {
                fake = DirectorySource{fid_fake};
            }
            const ImageSource real = DirectorySource{fid_real};
            echo(err, {{"real", describe_source(real)},
                       {"fake", describe_source(fake)},
                       {"embedder", embedder->describe()},
                       {"size", fid_size == 0 ? std::string("auto") : std::to_string(fid_size)}});
            const FidReport report = fid_score(real, fake, *embedder, fid_size);
            out << report.line() << '\n';
            if (!fid_json.empty()) write_fid_json(report, fid_json);
            return kExitOk;
        }
        if (*gc_cmd) {
            echo(err, {{"tolerance", std::to_string(gc.tolerance)}, {"step", std::to_string(gc.step)},
                       {"img_size", std::to_string(gc.img_size)}, {"batch", std::to_string(gc.batch)},
                       {"seed", std::to_string(gc.seed)}});
            const GradcheckSuiteReport report = run_gradcheck_suite(gc);
            out << report.table();
            return report.all_pass() ? kExitOk : kExitNumerical;
        }
        if (*syn_cmd) {
            const auto cls = parse_blob_class(syn_class);
            if (!cls) throw ValidationError("--class must be normal or anomalous, got '" + syn_class + "'");
            echo(err, {{"n", std::to_string(syn_n)}, {"size", std::to_string(syn_size)}, {"class", syn_class},
                       {"seed", std::to_string(syn_seed)}, {"out", syn_out}});
            write_dataset_png(synth_blob_dataset(syn_n, syn_size, syn_seed, *cls), syn_out);
            out << "wrote " << syn_n << " images to " << syn_out << '\n';
            return kExitOk;
        }
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return kExitValidation;
}

}  // namespace dcgan
