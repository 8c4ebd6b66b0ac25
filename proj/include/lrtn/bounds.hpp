#pragma once

#include <cstdint>
#include <vector>

#include "lrtn/matrix.hpp"
#include "lrtn/measurements.hpp"
#include "lrtn/norms.hpp"
#include "lrtn/rng.hpp"

namespace lrtn {

/// Monte-Carlo estimates of the geometric quantities entering the generic
/// error bound. theta_hat and gamma_hat are certified LOWER estimates (maxima
/// over evaluated feasible points), never the true supremum/expectation.
struct GeometryEstimate {
    double theta_hat = 0.0;
    double gamma_hat = 0.0;
    double gamma_se = 0.0;  // standard error over trials
    double r_lower = 0.0;   // attained Frobenius radius of the unit ball
    double r_upper = 0.0;   // closed-form cap
    std::size_t samples = 0;
    std::size_t restarts = 0;
    std::uint64_t seed = 0;
};

/// Frobenius radius of the unit-tnorm ball: certified lower bound (attained
/// by an explicit feasible matrix) and closed-form upper cap.
struct RadiusEstimate {
    double lower = 0.0;
    double upper = 0.0;
};

/// Generic recovery error bound
///   4 a^2 theta + 4 a sigma gamma + 2 pi a sigma sqrt(2 ln(2/zeta) (theta + R^2)),
/// evaluated exactly as written. Requires zeta in (0,1) and the rest >= 0.
double eval_recovery_bound(double alpha, double sigma, double theta, double gamma_cap,
                        double R, double zeta);

/// Lower estimate of sup_{|||M||| <= 1} | sum_k tr(A_k^T M)^2 - ||M||_F^2 |
/// by random feasible rank-<=r candidates plus projected-ascent polish.
double estimate_theta(const MeasurementEnsemble& ens, const NormBallSpec& spec,
                      std::size_t samples, int ascent_iters, RngStream& rng);

/// Lower estimate of the dual norm |||X|||_* = sup_{|||M||| <= 1} <X, M>:
/// the max of <X, M> over random feasible candidates, the SVD-aligned
/// candidate, and an ascent polish. Dominates <X, M> for every candidate it
/// evaluates by construction.
double dual_norm_estimate(const DenseMatrix& x, const NormBallSpec& spec,
                          std::size_t candidates, int ascent_iters, RngStream& rng);

struct GammaEstimate {
    double mean = 0.0;
    double std_error = 0.0;
};

/// Lower estimate of E ||| sum_k g_k A_k |||_* with g_k iid standard normal.
/// The dual norm is evaluated through its variational form
/// sup_{|||M||| <= 1} <X, M> with the same candidate machinery; the reported
/// mean is over fresh Gaussian draws for the fixed ensemble.
GammaEstimate estimate_gamma(const MeasurementEnsemble& ens, const NormBallSpec& spec,
                             std::size_t trials, RngStream& rng);

/// Frobenius radius sup_{|||M||| <= 1} ||M||_F of the unit ball.
RadiusEstimate estimate_R(const NormBallSpec& spec, std::size_t d1, std::size_t d2);

/// Sketching error-rate display
///   c * (a^2/d1) * max(1, sigma sqrt(L log(L d2))/a)
///     * sqrt(r (d1+d2) log^4(d1+d2) / (L d2))
/// with natural logs and absorbed absolute constant c (default 1).
double eval_sketch_rate(double alpha, double sigma, std::size_t d1, std::size_t d2,
                      std::size_t L, std::size_t r, double constant = 1.0);

/// Same rate with the two log terms frozen to caller-supplied values
/// (log_ld2 for log(L d2), log_d for log(d1+d2)); isolates the algebraic
/// scaling in L for tests.
double eval_sketch_rate_frozen(double alpha, double sigma, std::size_t d1, std::size_t d2,
                             std::size_t L, std::size_t r, double log_ld2, double log_d,
                             double constant = 1.0);

struct MinimaxLower {
    double value = 0.0;      // (a^2/(16 d1)) (1 ^ (sigma sqrt(L)/a) sqrt(r(d1+d2)/(L d2)))
    double value_alt = 0.0;  // (a^2/(16 d1)) sqrt(r(d1+d2)/(L d2)) (1 ^ sigma sqrt(L)/a)
    bool alt_applicable = false;  // L d2 > r (d1 + d2)
    bool conditions_met = false;  // 48 a^2/(d1 v d2) <= a^2 r <= sigma^2 d1 d2 / 128
};

/// Minimax Frobenius-risk lower bound display. The value is always computed;
/// conditions_met flags whether the bound's parameter gate holds.
MinimaxLower eval_minimax_lower(double alpha, double sigma, std::size_t L, std::size_t d1,
                                std::size_t d2, std::size_t r);

/// Sign-block packing of the constraint set used for the minimax argument.
struct PackingSet {
    std::vector<DenseMatrix> matrices;
    double gamma = 0.0;
    double alpha = 0.0;
    std::size_t r = 0;
    std::size_t block_rows = 0;            // B = r / gamma^2
    double cardinality_target = 0.0;       // ceil(exp(r (d1 v d2) / (16 gamma^2)))
    double log_cardinality_target = 0.0;   // ln of the target (overflow-safe)
    double min_separation_sq = 0.0;        // achieved min pairwise ||Mi - Mj||_F^2
};

/// Draw `count` random sign-block matrices with entries +-(gamma alpha/sqrt(d1)),
/// rows repeating with period B = r/gamma^2. Redraws (<= 10 times) until the
/// minimum pairwise squared separation reaches gamma^2 alpha^2 d2 / 2.
PackingSet build_packing(std::size_t d1, std::size_t d2, std::size_t r, double gamma,
                         double alpha, std::size_t count, RngStream& rng);

/// KL divergence between the Gaussian observation laws at Mj and Mj2:
/// (1/(2 sigma^2)) ||apply(ens, Mj - Mj2)||_2^2.
double kl_divergence(const MeasurementEnsemble& ens, const DenseMatrix& mj,
                     const DenseMatrix& mj2, double sigma);

/// Fano error-probability lower bound
///   max(0, 1 - (mean pairwise expected KL + ln 2)/ln(cardinality target))
/// with the closed-form expected KL ||Mi - Mj||_F^2/(2 sigma^2) and the target
/// cardinality (not the materialized count) in the denominator.
double fano_lower(const PackingSet& packing, const MeasurementEnsemble& ens, double sigma);

}  // namespace lrtn
