#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "dcgan/errors.hpp"
#include "dcgan/train.hpp"

// Binary layout is documented in docs/checkpoint_format.md. All integers and
// doubles are little-endian regardless of host byte order.

namespace dcgan {

namespace {

constexpr char kMagic[8] = {'D', 'C', 'G', 'A', 'N', 'C', 'K', 'P'};

enum Group : std::uint8_t {
    kGeneratorParams = 0,
    kGeneratorAdamM = 1,
    kGeneratorAdamV = 2,
    kDiscriminatorParams = 3,
    kDiscriminatorAdamM = 4,
    kDiscriminatorAdamV = 5,
};
constexpr std::uint8_t kGroupCount = 6;

std::uint64_t fnv1a(const std::uint8_t* data, std::size_t n) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Writer {
public:
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes_.insert(bytes_.end(), b, b + n);
    }
    std::vector<std::uint8_t>& bytes() { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class Reader {
public:
    Reader(const std::uint8_t* data, std::size_t size, const std::string& file) : p_(data), end_(data + size), file_(file) {}

    std::uint8_t u8() { return *take(1); }
    std::uint32_t u32() {
        const auto* b = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        const auto* b = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str(std::size_t n) {
        const auto* b = take(n);
        return std::string(reinterpret_cast<const char*>(b), n);
    }
    std::size_t remaining() const { return static_cast<std::size_t>(end_ - p_); }

private:
    const std::uint8_t* take(std::size_t n) {
        if (remaining() < n) throw ParseError("checkpoint '" + file_ + "' is truncated");
        const auto* b = p_;
        p_ += n;
        return b;
    }

    const std::uint8_t* p_;
    const std::uint8_t* end_;
    const std::string& file_;
};

struct Entry {
    std::uint8_t group;
    std::string name;
    Shape shape;
};

void add_group(std::vector<std::pair<std::uint8_t, const ParameterSet*>>& groups, std::uint8_t g,
               const ParameterSet& set) {
    groups.emplace_back(g, &set);
}

}  // namespace

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
    const auto& gs = c.generator.spec;
    const auto& ds = c.discriminator.spec;
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.u32(kCheckpointVersion);
    w.u32(0);
    w.u64(c.config_fingerprint);
    w.u64(c.epoch);
    w.u64(gs.z_dim);
    w.u64(gs.base_channels);
    w.u64(gs.img_size);
    w.u64(gs.out_channels);
    w.f64(gs.leaky_alpha);
    w.u64(ds.base_channels);
    w.u64(ds.img_size);
    w.u64(ds.in_channels);
    w.f64(ds.leaky_alpha);
    w.u64(c.generator_adam.t);
    w.u64(c.discriminator_adam.t);
    w.u64(c.rng_state.size());
    w.raw(c.rng_state.data(), c.rng_state.size());

    std::vector<std::pair<std::uint8_t, const ParameterSet*>> groups;
    add_group(groups, kGeneratorParams, c.generator.params.tensors);
    add_group(groups, kGeneratorAdamM, c.generator_adam.m);
    add_group(groups, kGeneratorAdamV, c.generator_adam.v);
    add_group(groups, kDiscriminatorParams, c.discriminator.params.tensors);
    add_group(groups, kDiscriminatorAdamM, c.discriminator_adam.m);
    add_group(groups, kDiscriminatorAdamV, c.discriminator_adam.v);

    std::uint64_t count = 0;
    std::uint64_t payload = 0;
    for (const auto& [g, set] : groups) {
        count += set->size();
        payload += set->element_count();
    }
    w.u64(count);
    for (const auto& [g, set] : groups) {
        for (const auto& t : *set) {
            w.u8(g);
            w.u32(static_cast<std::uint32_t>(t.name.size()));
            w.raw(t.name.data(), t.name.size());
            w.u32(static_cast<std::uint32_t>(t.value.rank()));
            for (std::size_t d : t.value.shape()) w.u64(d);
        }
    }
    w.u64(payload);
    for (const auto& [g, set] : groups)
        for (const auto& t : *set)
            for (double v : t.value.values()) w.f64(v);
    w.u64(fnv1a(w.bytes().data(), w.bytes().size()));

    // Write-then-rename so an interrupted save never leaves a torn checkpoint.
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(w.bytes().data()), static_cast<std::streamsize>(w.bytes().size()));
        if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot write checkpoint '" + path.string() + "': " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    const std::string file = path.string();
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read checkpoint '" + file + "'");
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof kMagic + 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0)
        throw ParseError("'" + file + "' is not a checkpoint file");

    Reader header(bytes.data() + sizeof kMagic, bytes.size() - sizeof kMagic, file);
    const std::uint32_t version = header.u32();
    if (version != kCheckpointVersion)
        throw IncompatibleCheckpoint("checkpoint '" + file + "' has format version " + std::to_string(version) +
                                     ", this build reads version " + std::to_string(kCheckpointVersion));
    const std::size_t body = bytes.size() - 8;
    Reader tail(bytes.data() + body, 8, file);
    if (tail.u64() != fnv1a(bytes.data(), body)) throw ParseError("checkpoint '" + file + "' is corrupt (checksum mismatch)");

    Reader r(bytes.data() + sizeof kMagic + 4, body - sizeof kMagic - 4, file);
    if (r.u32() != 0) throw ParseError("checkpoint '" + file + "': reserved field is not zero");
    Checkpoint c;
    c.config_fingerprint = r.u64();
    c.epoch = r.u64();
    GeneratorSpec gs;
    gs.z_dim = r.u64();
    gs.base_channels = r.u64();
    gs.img_size = r.u64();
    gs.out_channels = r.u64();
    gs.leaky_alpha = r.f64();
    DiscriminatorSpec ds;
    ds.base_channels = r.u64();
    ds.img_size = r.u64();
    ds.in_channels = r.u64();
    ds.leaky_alpha = r.f64();
    try {
        gs.validate();
        ds.validate();
    } catch (const SpecError& e) {
        throw ParseError("checkpoint '" + file + "': " + e.what());
    }
    const std::uint64_t t_g = r.u64();
    const std::uint64_t t_d = r.u64();
    const std::uint64_t rng_len = r.u64();
    if (rng_len > r.remaining()) throw ParseError("checkpoint '" + file + "' is truncated");
    c.rng_state = r.str(rng_len);

    const std::uint64_t count = r.u64();
    if (count > r.remaining()) throw ParseError("checkpoint '" + file + "': implausible tensor count");
    std::vector<Entry> entries;
    entries.reserve(count);
    std::uint64_t expected_payload = 0;
    for (std::uint64_t i = 0; i < count; ++i) {
        Entry e;
        e.group = r.u8();
        if (e.group >= kGroupCount) throw ParseError("checkpoint '" + file + "': unknown tensor group");
        const std::uint32_t name_len = r.u32();
        e.name = r.str(name_len);
        const std::uint32_t rank = r.u32();
        if (rank == 0 || rank > 8) throw ParseError("checkpoint '" + file + "': bad tensor rank for " + e.name);
        std::uint64_t elements = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            const std::uint64_t d = r.u64();
            if (d == 0 || d > r.remaining()) throw ParseError("checkpoint '" + file + "': bad dimension for " + e.name);
            e.shape.push_back(d);
            elements *= d;
            if (elements > r.remaining()) throw ParseError("checkpoint '" + file + "' is truncated");
        }
        expected_payload += elements;
        entries.push_back(std::move(e));
    }
    if (r.u64() != expected_payload) throw ParseError("checkpoint '" + file + "': payload size mismatch");
    if (expected_payload * 8 != r.remaining()) throw ParseError("checkpoint '" + file + "' is truncated");

    ParameterSet sets[kGroupCount];
    for (auto& e : entries) {
        const std::size_t n = shape_product(e.shape);
        std::vector<double> values(n);
        for (auto& v : values) v = r.f64();
        try {
            sets[e.group].add(e.name, Tensor(std::move(e.shape), std::move(values)));
        } catch (const ValidationError& err) {
            throw ParseError("checkpoint '" + file + "': " + err.what());
        }
    }

    try {
        c.generator = make_generator(gs, std::move(sets[kGeneratorParams]));
        c.discriminator = make_discriminator(ds, std::move(sets[kDiscriminatorParams]));
        c.generator.params.tensors.require_same_layout(sets[kGeneratorAdamM], "generator adam m");
        c.generator.params.tensors.require_same_layout(sets[kGeneratorAdamV], "generator adam v");
        c.discriminator.params.tensors.require_same_layout(sets[kDiscriminatorAdamM], "discriminator adam m");
        c.discriminator.params.tensors.require_same_layout(sets[kDiscriminatorAdamV], "discriminator adam v");
    } catch (const ValidationError& err) {
        throw ParseError("checkpoint '" + file + "': " + err.what());
    }
    c.generator_adam = AdamState{std::move(sets[kGeneratorAdamM]), std::move(sets[kGeneratorAdamV]), t_g};
    c.discriminator_adam = AdamState{std::move(sets[kDiscriminatorAdamM]), std::move(sets[kDiscriminatorAdamV]), t_d};
    if (c.config_fingerprint != architecture_fingerprint(gs, ds))
        throw ParseError("checkpoint '" + file + "': fingerprint does not match the stored architecture");
    return c;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::uint64_t expected_fingerprint) {
    Checkpoint c = load_checkpoint(path);
    if (c.config_fingerprint != expected_fingerprint)
        throw IncompatibleCheckpoint("checkpoint '" + path.string() + "' was written for a different architecture (" +
                                     c.generator.spec.describe() + " / " + c.discriminator.spec.describe() + ")");
    return c;
}

}  // namespace dcgan
