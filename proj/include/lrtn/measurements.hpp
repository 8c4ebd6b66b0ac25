#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrtn/matrix.hpp"

namespace lrtn {

enum class EnsembleKind { Sketching, Completion };

/// A set of n rank-one measurement functionals, stored structurally:
///   Sketching:  A_k = L^{-1/2} b_k e_{j_k}^T, j_k = k mod d2, n = L*d2,
///               b_k i.i.d. N(0, I_{d1}) re-derived from `seed` (stream "b").
///   Completion: A_k = sqrt(d1*d2) e_{i_k} e_{j_k}^T, (i_k, j_k) i.i.d.
///               uniform with replacement (isotropic: E A_k <A_k, M> = M).
/// Dense A_k matrices are never materialized.
struct MeasurementEnsemble {
    EnsembleKind kind = EnsembleKind::Sketching;
    std::size_t d1 = 0, d2 = 0, n = 0;
    std::uint64_t seed = 0;
    std::vector<std::uint32_t> row_index;  // i_k (Completion only)
    std::vector<std::uint32_t> col_index;  // j_k (both kinds)
    DenseMatrix b;                         // d1 x n sketch vectors (Sketching only)
    bool full_coverage_debug = false;      // Completion sampled without replacement

    double scale() const;                  // L^{-1/2} or sqrt(d1*d2)
    std::size_t sketch_rounds() const;     // L = n / d2 (Sketching only)
    void validate() const;
};

MeasurementEnsemble build_sketching(std::size_t d1, std::size_t d2, std::size_t rounds,
                                    std::uint64_t seed);

/// With-replacement uniform cell sampling. With full_coverage_debug the first
/// d1*d2 draws enumerate every cell once (seeded shuffle); this mode is a
/// testing aid, not part of the measurement model.
MeasurementEnsemble build_completion(std::size_t d1, std::size_t d2, std::size_t n,
                                     std::uint64_t seed, bool full_coverage_debug = false);

/// y_k = scale * <A_k, M> without forming A_k.
std::vector<double> apply(const MeasurementEnsemble& ens, const DenseMatrix& m);

/// Exact transpose map: sum_k z_k * scale * A_k.
DenseMatrix adjoint(const MeasurementEnsemble& ens, const std::vector<double>& z);

struct NoiseSpec {
    double sigma = 0.0;
    std::uint64_t seed = 0;
};

/// y + eta, eta_k i.i.d. N(0, sigma^2) from the "eta" stream; sigma=0 is identity.
std::vector<double> add_noise(const std::vector<double>& y, const NoiseSpec& spec);

/// Serialization: kind, dims, seed and index schedule; sketch vectors are
/// re-derived from the seed on load, reconstructing the ensemble byte-identically.
std::string ensemble_to_json(const MeasurementEnsemble& ens);
MeasurementEnsemble ensemble_from_json(const std::string& text);

/// Per-measurement expected signal power over noise power:
/// ||M0||_F^2 / (L d2 sigma^2) for sketching, ||M0||_F^2 / sigma^2 for completion.
double measurement_snr(const MeasurementEnsemble& ens, const DenseMatrix& m0, double sigma);

}  // namespace lrtn
