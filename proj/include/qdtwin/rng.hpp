#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace qdtwin {

using Rng = std::mt19937_64;

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t& state);

/// Seed of an independent substream, keyed by (root seed, label, index).
///
/// Every random consumer in a run draws from its own substream, so the order
/// in which threads execute cannot change any result.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label, std::uint64_t index = 0);

inline Rng make_rng(std::uint64_t root, std::string_view label, std::uint64_t index = 0)
{
    return Rng(derive_seed(root, label, index));
}

}  // namespace qdtwin
