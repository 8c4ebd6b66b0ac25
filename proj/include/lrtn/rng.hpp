#pragma once

#include <cstdint>
#include <string>

#include "lrtn/matrix.hpp"

namespace lrtn {

/// Seeded random stream (xoshiro256++ with splitmix64 seeding).
/// Identical (seed, label) gives an identical draw sequence on every platform.
/// Single-owner: never share one stream mutably across threads.
class RngStream {
public:
    RngStream(std::uint64_t seed, const std::string& label);

    std::uint64_t next_u64();
    /// Uniform in [0, 1).
    double uniform();
    /// Standard normal via Box-Muller (second draw of each pair is cached).
    double normal();
    /// Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n);
    /// Random sign, +1 or -1.
    double sign();

    std::uint64_t seed() const { return seed_; }
    const std::string& label() const { return label_; }

private:
    std::uint64_t seed_;
    std::string label_;
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// FNV-1a hash of a string, used to derive stream state from labels.
std::uint64_t hash_label(const std::string& label);

/// Mix of integers for deterministic per-cell seed derivation.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

/// i.i.d. N(0,1) entries filled in column-major order.
DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, RngStream& rng);

/// Rank-exactly-r matrix as a product of two Gaussian factors.
/// Redraws once on (measure-zero) rank deficiency, then fails.
DenseMatrix random_rank_r(std::size_t d1, std::size_t d2, std::size_t r, RngStream& rng);

}  // namespace lrtn
