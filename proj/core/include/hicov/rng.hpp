#pragma once

#include <cstdint>
#include <random>

namespace hicov {

using Rng = std::mt19937_64;

/// Independent stream for realization `index` of a run seeded with `base_seed`.
inline Rng substream(std::uint64_t base_seed, std::uint64_t index) {
    return Rng(base_seed ^ index);
}

}  // namespace hicov
