#include "lrtn/rng.hpp"

#include <cmath>

#include "lrtn/svd.hpp"

namespace lrtn {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

std::uint64_t hash_label(const std::string& label) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : label) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t x = a ^ rotl(b, 17) ^ rotl(c, 37);
    splitmix64(x);
    std::uint64_t y = x;
    return splitmix64(y);
}

RngStream::RngStream(std::uint64_t seed, const std::string& label) : seed_(seed), label_(label) {
    std::uint64_t x = seed ^ hash_label(label);
    for (auto& si : s_) si = splitmix64(x);
}

std::uint64_t RngStream::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double RngStream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1 = 0.0;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
    if (n == 0) throw Error("uniform_index: n must be positive");
    // rejection sampling to avoid modulo bias
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double RngStream::sign() { return (next_u64() & 1ULL) ? 1.0 : -1.0; }

DenseMatrix gaussian_matrix(std::size_t rows, std::size_t cols, RngStream& rng) {
    if (rows < 1 || cols < 1) throw Error("gaussian_matrix: dimensions must be positive");
    DenseMatrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

DenseMatrix random_rank_r(std::size_t d1, std::size_t d2, std::size_t r, RngStream& rng) {
    if (r < 1 || r > std::min(d1, d2)) throw Error("random_rank_r: need 1 <= r <= min(d1,d2)");
    for (int attempt = 0; attempt < 2; ++attempt) {
        DenseMatrix u = gaussian_matrix(d1, r, rng);
        DenseMatrix v = gaussian_matrix(d2, r, rng);
        DenseMatrix m = matmul_nt(u, v);
        // smallest retained singular value must clear the rank threshold
        if (svd_rank(m, 1e-8) == r) return m;
    }
    throw Error("random_rank_r: rank-deficient after redraw");
}

}  // namespace lrtn
