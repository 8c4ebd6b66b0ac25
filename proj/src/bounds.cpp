#include "lrtn/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lrtn/estimator.hpp"
#include "lrtn/svd.hpp"

namespace lrtn {

namespace {

constexpr double kPi = 3.14159265358979323846;

double fdot(const DenseMatrix& a, const DenseMatrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

double sqfro(const DenseMatrix& a) {
    const double f = frobenius_norm(a);
    return f * f;
}

double sumsq(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

// Certified point of the unit tnorm ball from a factor pair: scale the pair
// so the factor surrogate meets the budget sqrt(r) (surrogate dominates the
// factorization norm), then project the product into the operator branch.
DenseMatrix feasible_unit(DenseMatrix u, const DenseMatrix& v, const NormBallSpec& spec) {
    const double budget = std::sqrt(static_cast<double>(spec.rank_param));
    const double sur = factor_surrogate(u, v, spec.kind);
    if (sur > budget) u *= budget / sur;
    DenseMatrix m = matmul_nt(u, v);
    if (spec.kind == NormKind::MixedRegime) return project_column_ball(m, 1.0);
    const double mx = max_abs(m);
    if (mx > 1.0) m *= 1.0 / mx;
    return m;
}

// Same certification applied to a dense matrix through its SVD factors.
DenseMatrix feasible_unit_dense(const DenseMatrix& m, const NormBallSpec& spec) {
    SvdResult sv = svd(m);
    const std::size_t k = sv.s.size();
    DenseMatrix u(m.rows(), k), v(m.cols(), k);
    for (std::size_t kk = 0; kk < k; ++kk) {
        const double w = std::sqrt(std::max(sv.s[kk], 0.0));
        for (std::size_t i = 0; i < m.rows(); ++i) u(i, kk) = w * sv.u(i, kk);
        for (std::size_t j = 0; j < m.cols(); ++j) v(j, kk) = w * sv.v(j, kk);
    }
    return feasible_unit(std::move(u), v, spec);
}

}  // namespace

double eval_recovery_bound(double alpha, double sigma, double theta, double gamma_cap,
                        double R, double zeta) {
    if (alpha < 0.0 || sigma < 0.0 || theta < 0.0 || gamma_cap < 0.0 || R < 0.0)
        throw Error("eval_recovery_bound: inputs must be nonnegative");
    if (!(zeta > 0.0 && zeta < 1.0)) throw Error("eval_recovery_bound: zeta must be in (0,1)");
    return 4.0 * alpha * alpha * theta + 4.0 * alpha * sigma * gamma_cap +
           2.0 * kPi * alpha * sigma *
               std::sqrt(2.0 * std::log(2.0 / zeta) * (theta + R * R));
}

double estimate_theta(const MeasurementEnsemble& ens, const NormBallSpec& spec,
                      std::size_t samples, int ascent_iters, RngStream& rng) {
    spec.validate();
    NormBallSpec unit = spec;
    unit.alpha = 1.0;  // the quantity is defined over the unit ball
    const std::size_t k =
        std::min<std::size_t>(std::max<std::size_t>(spec.rank_param, 1),
                              std::min(ens.d1, ens.d2));
    auto value = [&](const DenseMatrix& m) {
        return std::abs(sumsq(apply(ens, m)) - sqfro(m));
    };
    double best = 0.0;  // M = 0 attains 0
    for (std::size_t s = 0; s < samples; ++s) {
        DenseMatrix u = gaussian_matrix(ens.d1, k, rng);
        DenseMatrix v = gaussian_matrix(ens.d2, k, rng);
        DenseMatrix m = feasible_unit(std::move(u), v, unit);
        double val = value(m);
        // Projected ascent on the signed quadratic form; gradient of
        // ||A(M)||^2 - ||M||_F^2 is 2 (A* A(M) - M).
        double step = 0.5;
        for (int it = 0; it < ascent_iters; ++it) {
            const double signed_val = sumsq(apply(ens, m)) - sqfro(m);
            const double dir = signed_val >= 0.0 ? 1.0 : -1.0;
            DenseMatrix g = adjoint(ens, apply(ens, m));
            g -= m;
            g *= 2.0 * dir;
            const double gn = frobenius_norm(g);
            if (gn <= 1e-14) break;
            DenseMatrix trial = m + (step / gn) * g;
            trial = feasible_unit_dense(trial, unit);
            const double tv = value(trial);
            if (tv > val) {
                val = tv;
                m = std::move(trial);
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        best = std::max(best, val);
    }
    return best;
}

double dual_norm_estimate(const DenseMatrix& x, const NormBallSpec& spec,
                          std::size_t candidates, int ascent_iters, RngStream& rng) {
    spec.validate();
    NormBallSpec unit = spec;
    unit.alpha = 1.0;
    const std::size_t k =
        std::min<std::size_t>(std::max<std::size_t>(spec.rank_param, 1),
                              std::min(x.rows(), x.cols()));
    if (frobenius_norm(x) == 0.0) return 0.0;
    // Max of <X, M> over evaluated unit-ball points, starting from the
    // SVD-aligned candidate.
    DenseMatrix best = feasible_unit_dense(x, unit);
    double dual = fdot(x, best);
    for (std::size_t c = 0; c < candidates; ++c) {
        DenseMatrix u = gaussian_matrix(x.rows(), k, rng);
        DenseMatrix v = gaussian_matrix(x.cols(), k, rng);
        DenseMatrix m = feasible_unit(std::move(u), v, unit);
        const double d = fdot(x, m);
        if (d > dual) {
            dual = d;
            best = std::move(m);
        }
    }
    // Ascent on the linear functional: move along X and re-certify.
    double step = 0.5;
    const double xn = frobenius_norm(x);
    for (int it = 0; it < ascent_iters; ++it) {
        DenseMatrix trial = best + (step / xn) * x;
        trial = feasible_unit_dense(trial, unit);
        const double d = fdot(x, trial);
        if (d > dual) {
            dual = d;
            best = std::move(trial);
            step *= 1.5;
        } else {
            step *= 0.5;
        }
    }
    return std::max(dual, 0.0);  // M = 0 is always feasible
}

GammaEstimate estimate_gamma(const MeasurementEnsemble& ens, const NormBallSpec& spec,
                             std::size_t trials, RngStream& rng) {
    if (trials < 1) throw Error("estimate_gamma: trials must be >= 1");
    spec.validate();
    std::vector<double> vals;
    vals.reserve(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        std::vector<double> g(ens.n);
        for (double& gi : g) gi = rng.normal();
        vals.push_back(dual_norm_estimate(adjoint(ens, g), spec, 16, 30, rng));
    }
    GammaEstimate out;
    for (double v : vals) out.mean += v;
    out.mean /= static_cast<double>(trials);
    if (trials > 1) {
        double s2 = 0.0;
        for (double v : vals) s2 += (v - out.mean) * (v - out.mean);
        out.std_error = std::sqrt(s2 / static_cast<double>(trials - 1) /
                                  static_cast<double>(trials));
    }
    return out;
}

RadiusEstimate estimate_R(const NormBallSpec& spec, std::size_t d1, std::size_t d2) {
    spec.validate();
    if (d1 == 0 || d2 == 0) throw Error("estimate_R: dimensions must be positive");
    RadiusEstimate out;
    if (spec.kind == NormKind::MixedRegime) {
        // Witness: alpha * u e_1^T-style matrix with every column equal to a
        // fixed unit vector. Both branches evaluate to alpha exactly (the
        // factorization u, 1^T has unit factor surrogate), so the witness is
        // feasible and attains the cap ||M||_F <= sqrt(d2) ||M||_{1->2}.
        out.lower = spec.alpha * std::sqrt(static_cast<double>(d2));
        out.upper = spec.alpha * std::sqrt(static_cast<double>(d2));
    } else {
        // Witness: all-entries-alpha matrix; entry norm and max norm both
        // equal alpha, attaining ||M||_F <= sqrt(d1 d2) ||M||_inf.
        out.lower = spec.alpha * std::sqrt(static_cast<double>(d1 * d2));
        out.upper = out.lower;
    }
    return out;
}

double eval_sketch_rate_frozen(double alpha, double sigma, std::size_t d1, std::size_t d2,
                             std::size_t L, std::size_t r, double log_ld2, double log_d,
                             double constant) {
    if (alpha <= 0.0 || sigma < 0.0 || d1 == 0 || d2 == 0 || L == 0 || r == 0)
        throw Error("eval_sketch_rate: invalid parameters");
    const double dl = static_cast<double>(L), dd2 = static_cast<double>(d2);
    const double noise = std::max(1.0, sigma * std::sqrt(dl * log_ld2) / alpha);
    const double tail = std::sqrt(static_cast<double>(r) *
                                  static_cast<double>(d1 + d2) * std::pow(log_d, 4.0) /
                                  (dl * dd2));
    return constant * (alpha * alpha / static_cast<double>(d1)) * noise * tail;
}

double eval_sketch_rate(double alpha, double sigma, std::size_t d1, std::size_t d2,
                      std::size_t L, std::size_t r, double constant) {
    return eval_sketch_rate_frozen(alpha, sigma, d1, d2, L, r,
                                 std::log(static_cast<double>(L * d2)),
                                 std::log(static_cast<double>(d1 + d2)), constant);
}

MinimaxLower eval_minimax_lower(double alpha, double sigma, std::size_t L, std::size_t d1,
                                std::size_t d2, std::size_t r) {
    if (alpha <= 0.0 || sigma <= 0.0 || L == 0 || d1 == 0 || d2 == 0 || r == 0)
        throw Error("eval_minimax_lower: parameters must be positive");
    MinimaxLower out;
    const double dl = static_cast<double>(L);
    const double dd1 = static_cast<double>(d1), dd2 = static_cast<double>(d2);
    const double base = alpha * alpha / (16.0 * dd1);
    const double ratio =
        sigma * std::sqrt(dl) / alpha * std::sqrt(static_cast<double>(r) * (dd1 + dd2) / (dl * dd2));
    out.value = base * std::min(1.0, ratio);
    out.alt_applicable = dl * dd2 > static_cast<double>(r) * (dd1 + dd2);
    out.value_alt = base * std::sqrt(static_cast<double>(r) * (dd1 + dd2) / (dl * dd2)) *
                    std::min(1.0, sigma * std::sqrt(dl) / alpha);
    const double lo = 48.0 * alpha * alpha / std::max(dd1, dd2);
    const double mid = alpha * alpha * static_cast<double>(r);
    const double hi = sigma * sigma * dd1 * dd2 / 128.0;
    out.conditions_met = lo <= mid && mid <= hi;
    return out;
}

PackingSet build_packing(std::size_t d1, std::size_t d2, std::size_t r, double gamma,
                         double alpha, std::size_t count, RngStream& rng) {
    if (gamma <= 0.0 || alpha <= 0.0) throw Error("build_packing: gamma, alpha must be positive");
    if (count < 1) throw Error("build_packing: count must be >= 1");
    const double braw = static_cast<double>(r) / (gamma * gamma);
    const double brounded = std::round(braw);
    if (std::abs(braw - brounded) > 1e-9 || brounded < 1.0)
        throw Error("build_packing: r/gamma^2 must be a positive integer");
    const std::size_t B = static_cast<std::size_t>(brounded);
    if (static_cast<double>(r) > gamma * gamma * static_cast<double>(std::min(d1, d2)) + 1e-9)
        throw Error("build_packing: requires r <= gamma^2 * min(d1, d2)");

    PackingSet out;
    out.gamma = gamma;
    out.alpha = alpha;
    out.r = r;
    out.block_rows = B;
    const double log_target =
        static_cast<double>(r) * static_cast<double>(std::max(d1, d2)) / (16.0 * gamma * gamma);
    if (log_target < 600.0) {
        out.cardinality_target = std::ceil(std::exp(log_target));
        out.log_cardinality_target = std::log(out.cardinality_target);
    } else {
        out.cardinality_target = std::numeric_limits<double>::infinity();
        out.log_cardinality_target = log_target;
    }
    if (static_cast<double>(count) > out.cardinality_target)
        throw Error("build_packing: count exceeds the target cardinality");

    const double entry = gamma * alpha / std::sqrt(static_cast<double>(d1));
    const double sep_needed = gamma * gamma * alpha * alpha * static_cast<double>(d2) / 2.0;
    double achieved = 0.0;
    for (int attempt = 0; attempt < 10; ++attempt) {
        std::vector<DenseMatrix> mats;
        mats.reserve(count);
        for (std::size_t c = 0; c < count; ++c) {
            DenseMatrix block(B, d2);
            for (std::size_t i = 0; i < block.size(); ++i)
                block.data()[i] = rng.sign() * entry;
            DenseMatrix m(d1, d2);
            for (std::size_t i = 0; i < d1; ++i)
                for (std::size_t j = 0; j < d2; ++j) m(i, j) = block(i % B, j);
            mats.push_back(std::move(m));
        }
        double min_sep = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < count; ++i)
            for (std::size_t j = i + 1; j < count; ++j)
                min_sep = std::min(min_sep, sqfro(mats[i] - mats[j]));
        if (count < 2) min_sep = std::numeric_limits<double>::infinity();
        achieved = std::max(achieved, count < 2 ? sep_needed : min_sep);
        if (min_sep >= sep_needed) {
            out.matrices = std::move(mats);
            out.min_separation_sq = min_sep;
            return out;
        }
    }
    throw Error("build_packing: separation not achieved after redraws; best " +
                std::to_string(achieved) + " < required " + std::to_string(sep_needed));
}

double kl_divergence(const MeasurementEnsemble& ens, const DenseMatrix& mj,
                     const DenseMatrix& mj2, double sigma) {
    if (sigma <= 0.0) throw Error("kl_divergence: sigma must be positive");
    return sumsq(apply(ens, mj - mj2)) / (2.0 * sigma * sigma);
}

double fano_lower(const PackingSet& packing, const MeasurementEnsemble& ens, double sigma) {
    if (sigma <= 0.0) throw Error("fano_lower: sigma must be positive");
    const std::size_t n = packing.matrices.size();
    if (n < 2) throw Error("fano_lower: packing must contain at least 2 matrices");
    for (const DenseMatrix& m : packing.matrices)
        if (m.rows() != ens.d1 || m.cols() != ens.d2)
            throw Error("fano_lower: packing dimensions do not match the ensemble");
    if (packing.min_separation_sq <= 0.0)
        throw Error("fano_lower: degenerate packing (zero separation)");
    // Closed-form expected KL between hypothesis pairs: ||Mi - Mj||_F^2/(2 sigma^2).
    double mean_kl = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            mean_kl += sqfro(packing.matrices[i] - packing.matrices[j]) /
                       (2.0 * sigma * sigma);
            ++pairs;
        }
    mean_kl /= static_cast<double>(pairs);
    const double val =
        1.0 - (mean_kl + std::log(2.0)) / packing.log_cardinality_target;
    return std::max(0.0, val);
}

}  // namespace lrtn
