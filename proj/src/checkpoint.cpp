#include "fedup/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "fedup/errors.hpp"

namespace fedup {

namespace {

constexpr char kMagic[4] = {'F', 'U', 'P', 'M'};
constexpr std::uint16_t kVersion = 1;

void put_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
}

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T v) {
    static_assert(std::endian::native == std::endian::little,
                  "big-endian hosts need byte swaps here");
    put_bytes(out, &v, sizeof(T));
}

void put_f32_le(std::vector<std::uint8_t>& out, const std::vector<float>& v) {
    put_bytes(out, v.data(), v.size() * sizeof(float));
}

struct Reader {
    const std::uint8_t* p;
    std::size_t left;

    void take(void* dst, std::size_t n) {
        if (n > left) throw IntegrityError("checkpoint: truncated data");
        std::memcpy(dst, p, n);
        p += n;
        left -= n;
    }
    template <typename T>
    T take_le() {
        T v{};
        take(&v, sizeof(T));
        return v;
    }
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const ModelParams& m) {
    validate_model(m);
    std::vector<std::uint8_t> out;
    out.reserve(checkpoint_bytes(m));
    put_bytes(out, kMagic, 4);
    put_le<std::uint16_t>(out, kVersion);
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.layers.size()));
    for (const auto& l : m.layers) {
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(l.kind));
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(l.shape.size()));
        for (auto d : l.shape) put_le<std::uint32_t>(out, d);
        put_le<std::uint64_t>(out, static_cast<std::uint64_t>(l.weights.size()));
        put_f32_le(out, l.weights);
        put_le<std::uint64_t>(out, static_cast<std::uint64_t>(l.biases.size()));
        put_f32_le(out, l.biases);
    }
    return out;
}

ModelParams deserialize_model(const std::uint8_t* data, std::size_t size) {
    Reader r{data, size};
    char magic[4];
    r.take(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0) throw IntegrityError("checkpoint: bad magic");
    const auto version = r.take_le<std::uint16_t>();
    if (version != kVersion) throw IntegrityError("checkpoint: unsupported version");
    const auto n_layers = r.take_le<std::uint32_t>();
    ModelParams m;
    m.layers.resize(n_layers);
    for (auto& l : m.layers) {
        const auto kind = r.take_le<std::uint8_t>();
        if (kind > 2) throw IntegrityError("checkpoint: unknown layer kind");
        l.kind = static_cast<LayerKind>(kind);
        const auto rank = r.take_le<std::uint8_t>();
        l.shape.resize(rank);
        for (auto& d : l.shape) d = r.take_le<std::uint32_t>();
        const auto wn = r.take_le<std::uint64_t>();
        l.weights.resize(wn);
        r.take(l.weights.data(), wn * sizeof(float));
        const auto bn = r.take_le<std::uint64_t>();
        l.biases.resize(bn);
        r.take(l.biases.data(), bn * sizeof(float));
    }
    if (r.left != 0) throw IntegrityError("checkpoint: trailing bytes");
    validate_model(m);
    return m;
}

void save_model(const std::string& path, const ModelParams& m) {
    const auto bytes = serialize_model(m);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("checkpoint: cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("checkpoint: write failed: " + path);
}

ModelParams load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open for read: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return deserialize_model(bytes.data(), bytes.size());
}

std::size_t checkpoint_bytes(const ModelParams& m) {
    std::size_t n = 4 + 2 + 4;
    for (const auto& l : m.layers) {
        n += 1 + 1 + 4 * l.shape.size();
        n += 8 + 4 * l.weights.size();
        n += 8 + 4 * l.biases.size();
    }
    return n;
}

}  // namespace fedup
