#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "gapnet/tensor.hpp"

namespace gapnet {

/// Uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)].
Tensor uniform_fan_in(const Shape& shape, std::size_t fan_in, std::mt19937_64& rng);

/// Independent RNG stream per module so adding a module never shifts another's draws.
std::mt19937_64 module_rng(std::uint64_t seed, const std::string& module);

// Typed parameter structs expose `visit(self, fn)` calling fn(name, tensor&) for
// every learnable tensor in a fixed order. These helpers build on that.

template <class P>
ParameterMap to_map(const P& params) {
    ParameterMap map;
    P::visit(params, [&](const std::string& name, const Tensor& t) { map.emplace(name, t.detach()); });
    return map;
}

/// Overwrites every tensor of `params` from `map`; missing names or shape changes throw.
template <class P>
void assign_from(P& params, const ParameterMap& map) {
    P::visit(params, [&](const std::string& name, Tensor& t) {
        auto it = map.find(name);
        if (it == map.end()) throw std::invalid_argument("missing parameter " + name);
        if (it->second.shape() != t.shape()) {
            throw ShapeError("parameter " + name + " has shape " + shape_str(it->second.shape()) + ", expected " +
                             shape_str(t.shape()));
        }
        t = it->second.detach();
    });
}

/// Copy of `params` whose tensors are registered as named leaves on `tape`.
template <class P>
P track(Tape& tape, const P& params) {
    P tracked = params;
    P::visit(tracked, [&](const std::string& name, Tensor& t) { t = tape.parameter(name, t); });
    return tracked;
}

template <class P>
P detached(const P& params) {
    P copy = params;
    P::visit(copy, [](const std::string&, Tensor& t) { t = t.detach(); });
    return copy;
}

/// Flat binary checkpoint:
///   magic "GAPNETCK", u32 version, u64 entry count, then per entry
///   u32 name length, name bytes, u32 rank, u64 per axis, float64 payload.
/// All integers and floats little-endian.
void save_checkpoint(const std::filesystem::path& path, const ParameterMap& entries);
ParameterMap load_checkpoint(const std::filesystem::path& path);

}  // namespace gapnet
