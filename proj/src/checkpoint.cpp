#include "maskd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <set>

namespace maskd {
namespace {

constexpr char kMagic[4] = {'M', 'K', 'D', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxRank = 8;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 24));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

struct Cursor {
    const std::uint8_t* p;
    std::size_t size;
    std::size_t pos = 0;

    void need(std::size_t n, const std::string& what) const {
        if (size - pos < n)
            throw CheckpointError("truncated checkpoint while reading " + what, pos);
    }
    std::uint32_t u32(const std::string& what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint8_t u8(const std::string& what) {
        need(1, what);
        return p[pos++];
    }
    std::uint64_t u64(const std::string& what) {
        need(8, what);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[pos + i]) << (8 * i);
        pos += 8;
        return v;
    }
};

}  // namespace

void save_checkpoint(const std::vector<CheckpointEntry>& entries, const std::string& path,
                     bool as_f32) {
    std::set<std::string> seen;
    std::vector<std::uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u32(out, kVersion);
    for (const auto& e : entries) {
        if (!seen.insert(e.name).second)
            throw std::invalid_argument("save_checkpoint: duplicate entry name '" + e.name + "'");
        put_u32(out, static_cast<std::uint32_t>(e.name.size()));
        out.insert(out.end(), e.name.begin(), e.name.end());
        const Shape& s = e.tensor.shape();
        put_u32(out, static_cast<std::uint32_t>(s.size()));
        for (const int d : s) put_u32(out, static_cast<std::uint32_t>(d));
        out.push_back(as_f32 ? 0 : 1);
        if (as_f32) {
            for (const double v : e.tensor.values()) {
                const float f = static_cast<float>(v);
                std::uint32_t bits;
                std::memcpy(&bits, &f, 4);
                put_u32(out, bits);
            }
        } else {
            for (const double v : e.tensor.values()) {
                std::uint64_t bits;
                std::memcpy(&bits, &v, 8);
                put_u64(out, bits);
            }
        }
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open '" + path + "' for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw std::runtime_error("save_checkpoint: write failed for '" + path + "'");
}

std::vector<CheckpointEntry> parse_checkpoint(const std::uint8_t* bytes, std::size_t size) {
    Cursor c{bytes, size};
    c.need(4, "magic");
    if (std::memcmp(bytes, kMagic, 4) != 0) throw CheckpointError("bad checkpoint magic", 0);
    c.pos = 4;
    const std::uint32_t version = c.u32("version");
    if (version != kVersion)
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version), 4);

    std::vector<CheckpointEntry> entries;
    std::set<std::string> seen;
    while (c.pos < c.size) {
        const std::size_t entry_start = c.pos;
        const std::uint32_t name_len = c.u32("entry name length");
        if (name_len > c.size - c.pos)
            throw CheckpointError("entry name length " + std::to_string(name_len) +
                                      " exceeds remaining bytes",
                                  entry_start);
        std::string name(reinterpret_cast<const char*>(c.p + c.pos), name_len);
        c.pos += name_len;
        if (!seen.insert(name).second)
            throw CheckpointError("duplicate entry name '" + name + "'", entry_start);

        const std::uint32_t rank = c.u32("rank of '" + name + "'");
        if (rank > kMaxRank)
            throw CheckpointError("entry '" + name + "' has implausible rank " + std::to_string(rank),
                                  entry_start);
        Shape shape;
        std::uint64_t count = 1;
        for (std::uint32_t i = 0; i < rank; ++i) {
            const std::uint32_t d = c.u32("dims of '" + name + "'");
            if (d == 0 || d > (1u << 28))
                throw CheckpointError("entry '" + name + "' has invalid extent " + std::to_string(d),
                                      entry_start);
            shape.push_back(static_cast<int>(d));
            count *= d;
            if (count > (1ull << 32))
                throw CheckpointError("entry '" + name + "' payload is implausibly large", entry_start);
        }
        const std::uint8_t dtype = c.u8("dtype of '" + name + "'");
        if (dtype > 1)
            throw CheckpointError("entry '" + name + "' has unknown dtype tag " + std::to_string(dtype),
                                  entry_start);
        const std::size_t elem = dtype == 0 ? 4 : 8;
        c.need(count * elem, "payload of '" + name + "'");

        std::vector<double> data(count);
        if (dtype == 0) {
            for (std::uint64_t i = 0; i < count; ++i) {
                std::uint32_t bits = 0;
                for (int b = 0; b < 4; ++b)
                    bits |= static_cast<std::uint32_t>(c.p[c.pos + i * 4 + b]) << (8 * b);
                float f;
                std::memcpy(&f, &bits, 4);
                data[i] = static_cast<double>(f);
            }
        } else {
            for (std::uint64_t i = 0; i < count; ++i) {
                std::uint64_t bits = 0;
                for (int b = 0; b < 8; ++b)
                    bits |= static_cast<std::uint64_t>(c.p[c.pos + i * 8 + b]) << (8 * b);
                double v;
                std::memcpy(&v, &bits, 8);
                data[i] = v;
            }
        }
        c.pos += count * elem;
        entries.push_back({std::move(name), Tensor::from(std::move(shape), std::move(data))});
    }
    return entries;
}

std::vector<CheckpointEntry> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open '" + path + "'");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    return parse_checkpoint(bytes.data(), bytes.size());
}

const Tensor* find_entry(const std::vector<CheckpointEntry>& entries, const std::string& name) {
    for (const auto& e : entries)
        if (e.name == name) return &e.tensor;
    return nullptr;
}

std::uint64_t hash_tensors(const std::vector<Tensor>& tensors) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& t : tensors) {
        for (const int d : t.shape()) mix(&d, sizeof(d));
        mix(t.data(), t.values().size() * sizeof(double));
    }
    return h;
}

}  // namespace maskd
