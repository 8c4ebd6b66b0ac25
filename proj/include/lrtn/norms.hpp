#pragma once

#include <cstddef>

#include "lrtn/matrix.hpp"
#include "lrtn/rng.hpp"

namespace lrtn {

/// Which norm-ball regularizer: max(||M||_{1->2}, ||M||_mixed / sqrt(r))
/// or max(||M||_inf, ||M||_max / sqrt(r)).
enum class NormKind { MixedRegime, MaxRegime };

struct NormBallSpec {
    NormKind kind = NormKind::MixedRegime;
    double alpha = 1.0;          // ball radius
    std::size_t rank_param = 1;  // r

    void validate() const {
        if (alpha <= 0.0) throw Error("NormBallSpec: alpha must be positive");
        if (rank_param < 1) throw Error("NormBallSpec: rank_param must be >= 1");
    }
};

/// Solution of the norm SDP. The stacked block [[W1, M], [M^T, W2]] is PSD
/// (certified by an explicit eigenvalue shift) and value is recomputed from
/// the returned blocks.
struct SdpSolution {
    double value = 0.0;
    DenseMatrix w1;  // d1 x d1
    DenseMatrix w2;  // d2 x d2
    double gap = 0.0;
    int iterations = 0;
};

/// Maximum column l2 norm (operator norm l1 -> l2).
double op_norm_1to2(const DenseMatrix& m);

/// Largest entry magnitude (operator norm l1 -> linf).
double inf_norm(const DenseMatrix& m);

/// Mixed norm inf{ ||U||_F ||V^T||_{1->2} : UV^T = M } by ADMM on its SDP
/// form: minimize max(trace(W1), ||diag(W2)||_inf) over PSD completions.
SdpSolution mixed_norm_sdp(const DenseMatrix& m, double tol = 1e-7);

/// Max norm inf{ ||U^T||_{1->2} ||V^T||_{1->2} : UV^T = M }, same solver with
/// the objective max(||diag(W1)||_inf, ||diag(W2)||_inf).
SdpSolution max_norm_sdp(const DenseMatrix& m, double tol = 1e-7);

/// Locally optimized factorization upper bound on the mixed norm.
double mixed_norm_factored(const DenseMatrix& m, std::size_t rank_cap, int restarts,
                           RngStream& rng);

/// Locally optimized factorization upper bound on the max norm.
double max_norm_factored(const DenseMatrix& m, std::size_t rank_cap, int restarts,
                         RngStream& rng);

/// Rebalance an exact factorization m = u * vt (u: d1 x k, vt: k x d2) toward
/// the minimal factor-product surrogate (||U||_F for MixedRegime or max row
/// norm of U for MaxRegime, times max column norm of V^T), keeping the product
/// fixed. Factors are updated only when the surrogate improves; returns the
/// best surrogate achieved.
double improve_factorization(const DenseMatrix& m, DenseMatrix& u, DenseMatrix& vt,
                             NormKind kind, int iters, RngStream& rng);

struct TnormResult {
    double value = 0.0;
    double branch_operator = 0.0;       // ||.||_{1->2} or ||.||_inf
    double branch_factorization = 0.0;  // mixed or max norm (before /sqrt(r))
    bool upper_bound_only = false;      // factored path used (dims above threshold)
};

/// Dimension above which tnorm switches from the SDP to the factored path.
inline constexpr std::size_t kSdpDimensionThreshold = 64;

TnormResult tnorm_detail(const DenseMatrix& m, const NormBallSpec& spec, double tol = 1e-7);
double tnorm(const DenseMatrix& m, const NormBallSpec& spec, double tol = 1e-7);

/// Rank-sandwich checks for a rank-<=r matrix (caller-asserted).
struct SandwichReport {
    bool mixed_lower = false;  // op_1to2 <= mixed + tol
    bool mixed_upper = false;  // mixed <= sqrt(r) * op_1to2 + tol
    bool max_lower = false;    // inf <= max_norm + tol
    bool max_upper = false;    // max_norm <= sqrt(r) * inf + tol
    double op_1to2 = 0.0, mixed = 0.0, entry_inf = 0.0, max_norm = 0.0;
    bool all() const { return mixed_lower && mixed_upper && max_lower && max_upper; }
};

SandwichReport check_rank_sandwich(const DenseMatrix& m, std::size_t r, double tol = 1e-6);

}  // namespace lrtn
