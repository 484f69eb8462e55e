#include "gapnet/params.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "gapnet/errors.hpp"

namespace gapnet {
namespace {

constexpr std::array<char, 8> kMagic = {'G', 'A', 'P', 'N', 'E', 'T', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void put(std::ostream& os, T value) {
    os.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T get(std::istream& is) {
    T value{};
    if (!is.read(reinterpret_cast<char*>(&value), sizeof(T))) throw DataError("checkpoint truncated");
    return value;
}

}  // namespace

Tensor uniform_fan_in(const Shape& shape, std::size_t fan_in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Tensor t(shape, 0.0);
    for (double& v : t.mutable_data()) v = dist(rng);
    return t;
}

std::mt19937_64 module_rng(std::uint64_t seed, const std::string& module) {
    // FNV-1a over the module name, mixed with the seed.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : module) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

void save_checkpoint(const std::filesystem::path& path, const ParameterMap& entries) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write checkpoint " + path.string());
    os.write(kMagic.data(), kMagic.size());
    put<std::uint32_t>(os, kVersion);
    put<std::uint64_t>(os, entries.size());
    for (const auto& [name, t] : entries) {
        put<std::uint32_t>(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) put<std::uint64_t>(os, d);
        for (double v : t.data()) put<double>(os, v);
    }
    if (!os) throw DataError("failed writing checkpoint " + path.string());
}

ParameterMap load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open checkpoint " + path.string());
    std::array<char, 8> magic{};
    if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw DataError("not a checkpoint: " + path.string());
    if (get<std::uint32_t>(is) != kVersion) throw DataError("unsupported checkpoint version in " + path.string());
    const auto count = get<std::uint64_t>(is);
    ParameterMap entries;
    for (std::uint64_t e = 0; e < count; ++e) {
        std::string name(get<std::uint32_t>(is), '\0');
        if (!is.read(name.data(), static_cast<std::streamsize>(name.size()))) throw DataError("checkpoint truncated");
        Shape shape(get<std::uint32_t>(is));
        for (auto& d : shape) d = get<std::uint64_t>(is);
        std::vector<double> data(shape_size(shape));
        for (double& v : data) v = get<double>(is);
        entries.emplace(std::move(name), Tensor(std::move(shape), std::move(data)));
    }
    return entries;
}

}  // namespace gapnet
