#include "dcgan/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dcgan/errors.hpp"

namespace dcgan {

namespace {

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::size_t parse_size(const std::string& key, const std::string& value) {
    std::size_t out = 0;
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ValidationError("config key '" + key + "' expects a non-negative integer, got '" + value + "'");
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) throw ValidationError("config key '" + key + "' expects a non-negative integer, got '" + value + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& value) {
    // strtod accepts hex floats and keeps full precision of %.17g output.
    char* end = nullptr;
    const double out = std::strtod(value.c_str(), &end);
    if (value.empty() || end != value.c_str() + value.size())
        throw ValidationError("config key '" + key + "' expects a number, got '" + value + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ValidationError("config key '" + key + "' expects true or false, got '" + value + "'");
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

ConfigEntries parse_config_text(std::string_view text) {
    ConfigEntries entries;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        line = trim(line);
        if (line.empty() || line.front() == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ParseError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        const std::string key(trim(line.substr(0, eq)));
        const std::string value(trim(line.substr(eq + 1)));
        if (key.empty()) throw ParseError("config line " + std::to_string(line_no) + ": empty key");
        entries.emplace_back(key, value);
    }
    return entries;
}

ConfigEntries read_config_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config file '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str());
}

const std::vector<std::string>& train_config_keys() {
    static const std::vector<std::string> keys = {
        "epochs",           "batch_size",        "lr",           "beta1",          "beta2",
        "eps",              "z_dim",             "img_size",     "channels",       "g_base_channels",
        "d_base_channels",  "leaky_alpha",       "batch_norm",   "seed",           "generator_loss_mode",
        "d_steps",          "drop_last",         "data_path",    "output_dir",     "checkpoint_every",
        "sample_grid_every", "grid_samples",     "record_wall_time",
    };
    return keys;
}

void apply_config_entry(TrainConfig& c, const std::string& key, const std::string& value) {
    if (key == "epochs") c.epochs = parse_size(key, value);
    else if (key == "batch_size") c.batch_size = parse_size(key, value);
    else if (key == "lr") c.lr = parse_double(key, value);
    else if (key == "beta1") c.beta1 = parse_double(key, value);
    else if (key == "beta2") c.beta2 = parse_double(key, value);
    else if (key == "eps") c.eps = parse_double(key, value);
    else if (key == "z_dim") c.z_dim = parse_size(key, value);
    else if (key == "img_size") c.img_size = parse_size(key, value);
    else if (key == "channels") c.channels = parse_size(key, value);
    else if (key == "g_base_channels") c.g_base_channels = parse_size(key, value);
    else if (key == "d_base_channels") c.d_base_channels = parse_size(key, value);
    else if (key == "leaky_alpha") c.leaky_alpha = parse_double(key, value);
    else if (key == "batch_norm") c.batch_norm = parse_bool(key, value);
    else if (key == "seed") c.seed = parse_u64(key, value);
    else if (key == "generator_loss_mode") {
        auto mode = parse_generator_loss(value);
        if (!mode) throw ValidationError("generator_loss_mode must be minimax or non_saturating, got '" + value + "'");
        c.generator_loss = *mode;
    } else if (key == "d_steps") c.d_steps = parse_size(key, value);
    else if (key == "drop_last") c.drop_last = parse_bool(key, value);
    else if (key == "data_path") c.data_path = value;
    else if (key == "output_dir") c.output_dir = value;
    else if (key == "checkpoint_every") c.checkpoint_every = parse_size(key, value);
    else if (key == "sample_grid_every") c.sample_grid_every = parse_size(key, value);
    else if (key == "grid_samples") c.grid_samples = parse_size(key, value);
    else if (key == "record_wall_time") c.record_wall_time = parse_bool(key, value);
    else throw ValidationError("unknown config key '" + key + "'");
}

TrainConfig train_config_from_entries(const ConfigEntries& entries, TrainConfig base) {
    for (const auto& [key, value] : entries) apply_config_entry(base, key, value);
    return base;
}

std::string render_config(const TrainConfig& c) {
    std::ostringstream os;
    auto line = [&os](const char* key, const std::string& value) { os << key << " = " << value << '\n'; };
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    line("epochs", std::to_string(c.epochs));
    line("batch_size", std::to_string(c.batch_size));
    line("lr", fmt_double(c.lr));
    line("beta1", fmt_double(c.beta1));
    line("beta2", fmt_double(c.beta2));
    line("eps", fmt_double(c.eps));
    line("z_dim", std::to_string(c.z_dim));
    line("img_size", std::to_string(c.img_size));
    line("channels", std::to_string(c.channels));
    line("g_base_channels", std::to_string(c.g_base_channels));
    line("d_base_channels", std::to_string(c.d_base_channels));
    line("leaky_alpha", fmt_double(c.leaky_alpha));
    line("batch_norm", b(c.batch_norm));
    line("seed", std::to_string(c.seed));
    line("generator_loss_mode", std::string(generator_loss_name(c.generator_loss)));
    line("d_steps", std::to_string(c.d_steps));
    line("drop_last", b(c.drop_last));
    line("data_path", c.data_path);
    line("output_dir", c.output_dir);
    line("checkpoint_every", std::to_string(c.checkpoint_every));
    line("sample_grid_every", std::to_string(c.sample_grid_every));
    line("grid_samples", std::to_string(c.grid_samples));
    line("record_wall_time", b(c.record_wall_time));
    return os.str();
}

}  // namespace dcgan
