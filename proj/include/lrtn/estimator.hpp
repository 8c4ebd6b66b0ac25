#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrtn/matrix.hpp"
#include "lrtn/measurements.hpp"
#include "lrtn/norms.hpp"

namespace lrtn {

enum class StepRule { Fixed, Backtracking };

struct SolverConfig {
    std::size_t max_outer_iters = 2000;
    StepRule step_rule = StepRule::Backtracking;
    double feasibility_tol = 1e-5;
    std::size_t factor_rank = 0;  // 0 = auto: rank_param + 2, clamped to min(d1,d2)
    int restarts = 1;
    std::uint64_t seed = 0;

    void validate() const {
        if (feasibility_tol <= 0.0) throw Error("SolverConfig: feasibility_tol must be positive");
        if (max_outer_iters == 0) throw Error("SolverConfig: max_outer_iters must be >= 1");
        if (restarts < 1) throw Error("SolverConfig: restarts must be >= 1");
    }
};

struct SolveReport {
    DenseMatrix m_hat;
    std::vector<double> objective_trace;   // non-increasing over accepted steps
    std::vector<double> feasibility_trace; // per-iteration surrogate bound / alpha
    double final_feasibility = 0.0;        // tnorm(m_hat) / alpha
    std::size_t iterations = 0;
    double wall_time_s = 0.0;
    std::uint64_t seed = 0;

    double objective() const { return objective_trace.empty() ? 0.0 : objective_trace.back(); }
};

/// Minimize ||y - A(M)||_2^2 subject to tnorm(M, spec) <= alpha, by projected
/// gradient descent on the factored parameterization M = U V^T. Feasibility is
/// enforced every iteration through exact shrink-only maps (column scaling or
/// global scaling for the operator branch, factor-budget rebalancing for the
/// factorization branch), so every reported iterate is feasible.
SolveReport solve_lasso(const MeasurementEnsemble& ens, const std::vector<double>& y,
                        const NormBallSpec& spec, const SolverConfig& cfg);

/// Exact Euclidean projection onto { max column l2 norm <= alpha }.
DenseMatrix project_column_ball(const DenseMatrix& m, double alpha);

/// Exact Euclidean projection onto { max |entry| <= alpha }.
DenseMatrix clip_entries(const DenseMatrix& m, double alpha);

/// Bring the factor-product surrogate norm (||U||_F or ||U^T||_{1->2}, times
/// ||V^T||_{1->2}) under `budget`: first product-preserving rebalancing
/// (scalar and per-component scaling, U V^T unchanged), then, only if still
/// over budget, a global shrink of the product. The surrogate dominates the
/// corresponding factorization norm of U V^T, so the result is certified.
void enforce_factor_budget(DenseMatrix& u, DenseMatrix& v, double budget, NormKind kind);

/// Surrogate norm of the factor pair (upper bound on mixed/max norm of U V^T).
double factor_surrogate(const DenseMatrix& u, const DenseMatrix& v, NormKind kind);

std::string report_to_json(const SolveReport& rep);
std::string trace_to_csv(const SolveReport& rep);  // iter,objective,feasibility

}  // namespace lrtn
