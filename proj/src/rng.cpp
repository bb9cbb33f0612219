#include "mpvesd/rng.hpp"

namespace mpvesd {

std::uint64_t mix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t substream_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b)
{
    return mix64(mix64(mix64(root) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

Engine make_engine(std::uint64_t seed)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Engine(seq);
}

} // namespace mpvesd
