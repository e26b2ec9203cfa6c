#include "sung/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace sung {

namespace {

constexpr char kMagic[8] = {'S', 'U', 'N', 'G', 'C', 'K', '1', '\0'};

void write_u32(std::ostream& os, std::uint32_t x) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& os, std::uint64_t x) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double x) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, 8);
    write_u64(os, bits);
}

std::uint32_t read_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    check(is.good(), "checkpoint: truncated file");
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return x;
}

std::uint64_t read_u64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    check(is.good(), "checkpoint: truncated file");
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return x;
}

double read_f64(std::istream& is) {
    std::uint64_t bits = read_u64(is);
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
}

}  // namespace

void save_checkpoint(const ParamTree& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    check(os.good(), "checkpoint: cannot open '" + path + "' for writing");
    os.write(kMagic, 8);
    write_u64(os, params.size());
    for (const auto& [name, p] : params) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(p.value.rank()));
        for (auto d : p.value.shape) write_u64(os, d);
        for (double x : p.value.v) write_f64(os, x);
    }
    check(os.good(), "checkpoint: write failed for '" + path + "'");
}

ParamTree load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check(is.good(), "checkpoint: cannot open '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    check(is.good() && std::memcmp(magic, kMagic, 8) == 0, "checkpoint: bad magic in '" + path + "'");
    const std::uint64_t count = read_u64(is);
    ParamTree params;
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint32_t len = read_u32(is);
        std::string name(len, '\0');
        is.read(name.data(), len);
        check(is.good(), "checkpoint: truncated file");
        const std::uint32_t rank = read_u32(is);
        std::vector<std::size_t> shape(rank);
        for (auto& d : shape) d = read_u64(is);
        Tensor value = Tensor::zeros(shape);
        for (double& x : value.v) x = read_f64(is);
        params.add(name, std::move(value));
    }
    return params;
}

void load_checkpoint_into(ParamTree& params, const std::string& path) {
    ParamTree loaded = load_checkpoint(path);
    check(loaded.size() == params.size(),
          "checkpoint: parameter count mismatch (checkpoint written for a different configuration?)");
    for (auto& [name, p] : params) {
        check(loaded.has(name), "checkpoint: missing parameter '" + name + "'");
        const Param& src = loaded.at(name);
        check(src.value.same_shape(p.value), "checkpoint: shape mismatch for '" + name + "'");
        p.value = src.value;
    }
}

}  // namespace sung
