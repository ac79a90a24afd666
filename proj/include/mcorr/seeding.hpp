#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace mcorr {

/// Independent 64-bit stream seed derived from a base seed and a key path,
/// e.g. derive_seed(run_seed, {replication}) or derive_seed(run_seed, {cell, rep}).
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
    std::vector<std::uint32_t> words{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32)};
    for (std::uint64_t k : keys) {
        words.push_back(static_cast<std::uint32_t>(k));
        words.push_back(static_cast<std::uint32_t>(k >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace mcorr
