#pragma once

#include <cstdint>
#include <random>

namespace mpvesd {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer; used to derive independent substream seeds.
std::uint64_t mix64(std::uint64_t x);

/// Seed of the substream identified by (root, a, b). Order-independent of how
/// substreams are consumed, so parallel trials reproduce serial runs.
std::uint64_t substream_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0);

Engine make_engine(std::uint64_t seed);

} // namespace mpvesd
