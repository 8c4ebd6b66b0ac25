#include "lrtn/norms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lrtn/svd.hpp"

namespace lrtn {

double op_norm_1to2(const DenseMatrix& m) {
    double best = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) best = std::max(best, column_norm(m, j));
    return best;
}

double inf_norm(const DenseMatrix& m) { return max_abs(m); }

namespace {

// Objective of the norm SDP at a block pair.
double sdp_objective(const DenseMatrix& w1, const DenseMatrix& w2, bool max_variant) {
    double t2 = 0.0;
    for (std::size_t j = 0; j < w2.cols(); ++j) t2 = std::max(t2, w2(j, j));
    if (max_variant) {
        double t1 = 0.0;
        for (std::size_t i = 0; i < w1.cols(); ++i) t1 = std::max(t1, w1(i, i));
        return std::max(t1, t2);
    }
    double tr = 0.0;
    for (std::size_t i = 0; i < w1.cols(); ++i) tr += w1(i, i);
    return std::max(tr, t2);
}

// Prox of the epigraph objective restricted to the diagonal entries:
//   min_t  t + (rho/2) ( dist(a, {sum <= t})^2 + dist(b, {b_j <= t})^2 )
// a = diag(W1) (trace group, absent in the max variant where a joins b),
// b = clamped group. phi'(t) is monotone increasing; bisection.
double epigraph_prox_t(const std::vector<double>& a, const std::vector<double>& b, double rho,
                       bool trace_group) {
    const double sum_a = [&] {
        double s = 0.0;
        for (double x : a) s += x;
        return s;
    }();
    auto dphi = [&](double t) {
        double g = 1.0;
        if (trace_group) {
            g -= rho * std::max(0.0, sum_a - t) / static_cast<double>(a.size());
        } else {
            for (double x : a) g -= rho * std::max(0.0, x - t);
        }
        for (double x : b) g -= rho * std::max(0.0, x - t);
        return g;
    };
    double hi = trace_group ? sum_a : *std::max_element(a.begin(), a.end());
    for (double x : b) hi = std::max(hi, x);
    double step = 1.0 + std::fabs(hi);
    double lo = hi - step;
    while (dphi(lo) > 0.0) {
        step *= 2.0;
        lo = hi - step;
        if (step > 1e18) break;
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (dphi(mid) > 0.0)
            hi = mid;
        else
            lo = mid;
        if (hi - lo <= 1e-16 * (1.0 + std::fabs(hi))) break;
    }
    return 0.5 * (lo + hi);
}

SdpSolution zero_solution(std::size_t d1, std::size_t d2) {
    SdpSolution s;
    s.w1 = DenseMatrix(d1, d1);
    s.w2 = DenseMatrix(d2, d2);
    return s;
}

// ADMM on: minimize t s.t. trace/diag constraints <= t, block PSD with the
// off-diagonal block pinned to M. Splitting: X carries the affine constraints
// and epigraph objective, Y the PSD cone.
SdpSolution norm_sdp_impl(const DenseMatrix& m, bool max_variant, double tol) {
    if (!m.all_finite()) throw Error("norm_sdp: non-finite input");
    if (tol <= 1e-10 || tol >= 1e-2) throw Error("norm_sdp: tol out of range");
    const std::size_t d1 = m.rows(), d2 = m.cols(), n = d1 + d2;

    const double lower = max_variant ? inf_norm(m) : op_norm_1to2(m);
    if (lower == 0.0) return zero_solution(d1, d2);

    DenseMatrix mn = (1.0 / lower) * m;

    // feasible warm start from a balanced SVD factorization
    SvdResult sv = svd(mn);
    DenseMatrix y(n, n);
    {
        const std::size_t k = sv.s.size();
        DenseMatrix w1(d1, d1), w2(d2, d2);
        for (std::size_t kk = 0; kk < k; ++kk) {
            for (std::size_t j = 0; j < d1; ++j)
                for (std::size_t i = 0; i < d1; ++i)
                    w1(i, j) += sv.s[kk] * sv.u(i, kk) * sv.u(j, kk);
            for (std::size_t j = 0; j < d2; ++j)
                for (std::size_t i = 0; i < d2; ++i)
                    w2(i, j) += sv.s[kk] * sv.v(i, kk) * sv.v(j, kk);
        }
        // congruence rebalance so the two objective terms start comparable
        const double t1 = max_variant ? sdp_objective(w1, DenseMatrix(1, 1), true)
                                      : sdp_objective(w1, DenseMatrix(1, 1), false);
        double t2 = 0.0;
        for (std::size_t j = 0; j < d2; ++j) t2 = std::max(t2, w2(j, j));
        const double c = (t1 > 0.0 && t2 > 0.0) ? std::sqrt(t2 / t1) : 1.0;
        for (std::size_t j = 0; j < d1; ++j)
            for (std::size_t i = 0; i < d1; ++i) y(i, j) = c * w1(i, j);
        for (std::size_t j = 0; j < d2; ++j)
            for (std::size_t i = 0; i < d2; ++i) y(d1 + i, d1 + j) = w2(i, j) / c;
        for (std::size_t j = 0; j < d2; ++j)
            for (std::size_t i = 0; i < d1; ++i) y(i, d1 + j) = y(d1 + j, i) = mn(i, j);
    }

    DenseMatrix u(n, n);  // scaled dual
    double rho = 1.0;
    const double relax = 1.6;
    const int max_iters = 100000;
    const double eps = tol * std::max(1.0, frobenius_norm(mn));

    std::vector<double> diag_a(max_variant ? 0 : d1), diag_b;
    int iter = 0;
    double prim_res = 0.0, dual_res = 0.0;
    for (; iter < max_iters; ++iter) {
        // X-step: prox of the epigraph objective + affine pinning
        DenseMatrix x(n, n);
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < n; ++i) x(i, j) = y(i, j) - u(i, j);
        for (std::size_t j = 0; j < d2; ++j)
            for (std::size_t i = 0; i < d1; ++i) x(i, d1 + j) = x(d1 + j, i) = mn(i, j);

        std::vector<double> a(d1), b(d2);
        for (std::size_t i = 0; i < d1; ++i) a[i] = x(i, i);
        for (std::size_t j = 0; j < d2; ++j) b[j] = x(d1 + j, d1 + j);
        const double t = epigraph_prox_t(a, b, rho, /*trace_group=*/!max_variant);
        if (max_variant) {
            for (std::size_t i = 0; i < d1; ++i) x(i, i) = std::min(a[i], t);
        } else {
            double sum_a = 0.0;
            for (double v : a) sum_a += v;
            const double shift = std::max(0.0, sum_a - t) / static_cast<double>(d1);
            for (std::size_t i = 0; i < d1; ++i) x(i, i) = a[i] - shift;
        }
        for (std::size_t j = 0; j < d2; ++j) x(d1 + j, d1 + j) = std::min(b[j], t);

        // Y-step with over-relaxation, then dual update
        DenseMatrix xr(n, n);
        for (std::size_t i = 0; i < n * n; ++i)
            xr.data()[i] = relax * x.data()[i] + (1.0 - relax) * y.data()[i];
        DenseMatrix arg = xr;
        arg += u;
        DenseMatrix ynew = psd_project(arg);

        prim_res = 0.0;
        dual_res = 0.0;
        for (std::size_t i = 0; i < n * n; ++i) {
            const double pr = x.data()[i] - ynew.data()[i];
            const double dr = ynew.data()[i] - y.data()[i];
            prim_res += pr * pr;
            dual_res += dr * dr;
            u.data()[i] += xr.data()[i] - ynew.data()[i];
        }
        prim_res = std::sqrt(prim_res);
        dual_res = rho * std::sqrt(dual_res);
        y = ynew;

        if (prim_res <= eps && dual_res <= eps) {
            ++iter;
            break;
        }
        if ((iter + 1) % 20 == 0) {
            if (prim_res > 5.0 * dual_res) {
                rho *= 1.5;
                u *= 1.0 / 1.5;
            } else if (dual_res > 5.0 * prim_res) {
                rho /= 1.5;
                u *= 1.5;
            }
        }
    }
    if (prim_res > eps || dual_res > eps)
        throw Error("norm_sdp: no convergence after " + std::to_string(iter) +
                    " iterations, residual " + std::to_string(std::max(prim_res, dual_res)));

    // certify feasibility: pin the off-diagonal block, shift out any residual
    // negative curvature, recompute the objective from the returned blocks
    DenseMatrix block(n, n);
    for (std::size_t i = 0; i < d1; ++i)
        for (std::size_t j = 0; j < d1; ++j) block(i, j) = y(i, j);
    for (std::size_t i = 0; i < d2; ++i)
        for (std::size_t j = 0; j < d2; ++j) block(d1 + i, d1 + j) = y(d1 + i, d1 + j);
    for (std::size_t j = 0; j < d2; ++j)
        for (std::size_t i = 0; i < d1; ++i) block(i, d1 + j) = block(d1 + j, i) = mn(i, j);
    const double lam = min_eigenvalue(block);
    const double shift = std::max(0.0, -lam) + 1e-14;

    SdpSolution sol;
    sol.w1 = DenseMatrix(d1, d1);
    sol.w2 = DenseMatrix(d2, d2);
    for (std::size_t i = 0; i < d1; ++i)
        for (std::size_t j = 0; j < d1; ++j) sol.w1(i, j) = lower * block(i, j);
    for (std::size_t i = 0; i < d2; ++i)
        for (std::size_t j = 0; j < d2; ++j) sol.w2(i, j) = lower * block(d1 + i, d1 + j);
    for (std::size_t i = 0; i < d1; ++i) sol.w1(i, i) += lower * shift;
    for (std::size_t j = 0; j < d2; ++j) sol.w2(j, j) += lower * shift;
    sol.value = sdp_objective(sol.w1, sol.w2, max_variant);
    sol.gap = std::max(prim_res, dual_res) / std::max(1.0, frobenius_norm(mn));
    sol.iterations = iter;
    return sol;
}

// Row norms of a matrix, squared.
std::vector<double> row_norms_sq(const DenseMatrix& a) {
    std::vector<double> r(a.rows(), 0.0);
    for (std::size_t j = 0; j < a.cols(); ++j)
        for (std::size_t i = 0; i < a.rows(); ++i) r[i] += a(i, j) * a(i, j);
    return r;
}

std::vector<double> col_norms_sq(const DenseMatrix& a) {
    std::vector<double> c(a.cols(), 0.0);
    for (std::size_t j = 0; j < a.cols(); ++j)
        for (std::size_t i = 0; i < a.rows(); ++i) c[j] += a(i, j) * a(i, j);
    return c;
}

// Softmax weights of beta-scaled values (stable log-sum-exp form).
std::vector<double> soft_weights(const std::vector<double>& x, double beta) {
    const double xmax = *std::max_element(x.begin(), x.end());
    std::vector<double> w(x.size());
    double z = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        w[i] = std::exp(beta * (x[i] - xmax));
        z += w[i];
    }
    for (double& wi : w) wi /= z;
    return w;
}

// Projected gradient on V^T alone with U eliminated by the exact min-norm fit
// U = M (V^T)^+. With columns of V^T clipped into the unit ball the objective
//   h = ||M V^+||_F^2                    (mixed)
//   h = softmax_i ||row_i(M V^+)||^2     (max, beta-smoothed)
// is convex in the Gram V^T V, so full-rank descent does not stall in spurious
// minima. Envelope theorem:
//   grad h = -2 V^{+T} M^T W M (V^T V)^+,  W = I or softmax row weights.
// On success u/vt hold an exact factorization and the achieved surrogate value
// is returned; +inf means no certified exact fit was reached.
double surrogate_descent(const DenseMatrix& m, DenseMatrix& u, DenseMatrix& vt,
                         bool max_variant, int iters) {
    const std::size_t k = vt.rows();
    const double fro = frobenius_norm(m);

    auto clip_cols = [](DenseMatrix& a) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            const double nrm = column_norm(a, j);
            if (nrm > 1.0)
                for (std::size_t i = 0; i < a.rows(); ++i) a(i, j) /= nrm;
        }
    };
    {
        double v0 = 0.0;
        for (std::size_t j = 0; j < vt.cols(); ++j) v0 = std::max(v0, column_norm(vt, j));
        if (v0 <= 0.0) return std::numeric_limits<double>::infinity();
        vt *= (1.0 / v0);
    }

    auto smoothed = [&](const DenseMatrix& vtc, double beta, DenseMatrix* grad) {
        // one SVD serves both pinv(vtc) and (vtc^T vtc)^+
        SvdResult vs = svd(vtc);
        const double cut = 1e-12 * (vs.s.empty() ? 1.0 : vs.s[0]);
        DenseMatrix vp(vtc.cols(), vtc.rows());  // pinv, d2 x k
        DenseMatrix gp(vtc.cols(), vtc.cols());  // (V^T V)^+, d2 x d2
        for (std::size_t kk = 0; kk < vs.s.size(); ++kk) {
            if (vs.s[kk] <= cut) continue;
            const double inv = 1.0 / vs.s[kk];
            for (std::size_t j = 0; j < vtc.rows(); ++j)
                for (std::size_t i = 0; i < vtc.cols(); ++i)
                    vp(i, j) += vs.v(i, kk) * inv * vs.u(j, kk);
            for (std::size_t j = 0; j < vtc.cols(); ++j)
                for (std::size_t i = 0; i < vtc.cols(); ++i)
                    gp(i, j) += vs.v(i, kk) * inv * inv * vs.v(j, kk);
        }
        DenseMatrix u2 = matmul(m, vp);  // d1 x k
        double h;
        std::vector<double> w(m.rows(), 1.0);
        if (max_variant) {
            const auto rs2 = row_norms_sq(u2);
            const double rmax = *std::max_element(rs2.begin(), rs2.end());
            w = soft_weights(rs2, beta / (1e-12 + rmax));
            double z = 0.0;  // log-sum-exp value (shifted)
            for (double r2 : rs2) z += std::exp(beta / (1e-12 + rmax) * (r2 - rmax));
            h = rmax + (1e-12 + rmax) / beta * std::log(z);
        } else {
            h = frobenius_norm(u2);
            h *= h;
        }
        if (grad) {
            DenseMatrix wm = m;  // W M
            if (max_variant)
                for (std::size_t j = 0; j < m.cols(); ++j)
                    for (std::size_t i = 0; i < m.rows(); ++i) wm(i, j) *= w[i];
            *grad = (-2.0) * matmul(matmul_tn(u2, wm), gp);
        }
        return h;
    };

    double beta = 24.0;
    DenseMatrix grad(k, m.cols());
    double h = smoothed(vt, beta, &grad);
    if (!grad.all_finite() || !std::isfinite(h))
        return std::numeric_limits<double>::infinity();
    double step = 0.25 / std::max(1e-12, frobenius_norm(grad) / std::max(1.0, std::sqrt(h)));
    for (int it = 0; it < iters; ++it) {
        DenseMatrix trial = vt - step * grad;
        clip_cols(trial);
        if (!trial.all_finite()) {
            step *= 0.5;
            if (step < 1e-14) break;
            continue;
        }
        DenseMatrix tg(k, m.cols());
        const double ht = smoothed(trial, beta, &tg);
        if (std::isfinite(ht) && tg.all_finite() && ht <= h) {
            vt = trial;
            grad = tg;
            h = ht;
            step *= 1.2;
        } else {
            step *= 0.5;
            if (step < 1e-14) break;
        }
        if (it % 50 == 49) beta *= 2.0;
    }
    DenseMatrix uf = matmul(m, pinv(vt));
    if (frobenius_norm(matmul(uf, vt) - m) > 1e-8 * std::max(1.0, fro))
        return std::numeric_limits<double>::infinity();
    double vmax = 0.0;
    for (std::size_t j = 0; j < vt.cols(); ++j) vmax = std::max(vmax, column_norm(vt, j));
    double ufn;
    if (max_variant) {
        const auto rs2 = row_norms_sq(uf);
        ufn = std::sqrt(*std::max_element(rs2.begin(), rs2.end()));
    } else {
        ufn = frobenius_norm(uf);
    }
    u = std::move(uf);
    return ufn * vmax;
}

double factored_norm_impl(const DenseMatrix& m, std::size_t rank_cap, int restarts,
                          RngStream& rng, bool max_variant) {
    const double fro = frobenius_norm(m);
    if (fro == 0.0) return 0.0;
    const std::size_t rank_m = svd_rank(m);
    if (rank_cap < rank_m) throw Error("factored_norm: rank_cap below rank(M)");
    const std::size_t k = rank_cap;

    auto objective = [&](const DenseMatrix& u, const DenseMatrix& vt) {
        const auto vsq = col_norms_sq(vt);
        const double vmax = std::sqrt(*std::max_element(vsq.begin(), vsq.end()));
        if (!max_variant) return frobenius_norm(u) * vmax;
        const auto usq = row_norms_sq(u);
        return std::sqrt(*std::max_element(usq.begin(), usq.end())) * vmax;
    };

    SvdResult sv = svd(m);
    double best = std::numeric_limits<double>::infinity();
    for (int rs = 0; rs < std::max(restarts, 1); ++rs) {
        DenseMatrix vt(k, m.cols());
        if (rs == 0) {
            for (std::size_t kk = 0; kk < std::min(k, sv.s.size()); ++kk)
                for (std::size_t j = 0; j < m.cols(); ++j)
                    vt(kk, j) = std::sqrt(sv.s[kk]) * sv.v(j, kk);
        } else {
            vt = gaussian_matrix(k, m.cols(), rng);
        }
        DenseMatrix u = matmul(m, pinv(vt));

        // phase 1: alternating min-norm refits with a diagonal rebalance
        for (int it = 0; it < 10; ++it) {
            vt = matmul(pinv(u), m);
            u = matmul(m, pinv(vt));
            for (std::size_t kk = 0; kk < k; ++kk) {
                double cu = column_norm(u, kk);
                double cv = 0.0;
                for (std::size_t j = 0; j < vt.cols(); ++j) cv += vt(kk, j) * vt(kk, j);
                cv = std::sqrt(cv);
                if (cu <= 0.0 || cv <= 0.0) continue;
                const double d = std::sqrt(cu / cv);
                for (std::size_t i = 0; i < u.rows(); ++i) u(i, kk) /= d;
                for (std::size_t j = 0; j < vt.cols(); ++j) vt(kk, j) *= d;
            }
        }
        if (frobenius_norm(matmul(u, vt) - m) <= 1e-8 * std::max(1.0, fro))
            best = std::min(best, objective(u, vt));

        // phase 2: projected gradient on V alone, from a fresh random point
        // (phase 1 can leave near-zero singular directions in vt that make the
        // pseudoinverse rank numerically ambiguous and stall descent there).
        {
            vt = gaussian_matrix(k, m.cols(), rng);
            DenseMatrix uf(m.rows(), k);
            const double val = surrogate_descent(m, uf, vt, max_variant, 250);
            if (std::isfinite(val)) best = std::min(best, val);
        }
    }
    if (!std::isfinite(best)) throw Error("factored_norm: no exact-fit factorization found");
    return best;
}

}  // namespace

SdpSolution mixed_norm_sdp(const DenseMatrix& m, double tol) {
    return norm_sdp_impl(m, /*max_variant=*/false, tol);
}

SdpSolution max_norm_sdp(const DenseMatrix& m, double tol) {
    return norm_sdp_impl(m, /*max_variant=*/true, tol);
}

double mixed_norm_factored(const DenseMatrix& m, std::size_t rank_cap, int restarts,
                           RngStream& rng) {
    return factored_norm_impl(m, rank_cap, restarts, rng, /*max_variant=*/false);
}

double max_norm_factored(const DenseMatrix& m, std::size_t rank_cap, int restarts,
                         RngStream& rng) {
    return factored_norm_impl(m, rank_cap, restarts, rng, /*max_variant=*/true);
}

double improve_factorization(const DenseMatrix& m, DenseMatrix& u, DenseMatrix& vt,
                             NormKind kind, int iters, RngStream& rng) {
    if (u.cols() != vt.rows() || u.rows() != m.rows() || vt.cols() != m.cols())
        throw Error("improve_factorization: shape mismatch");
    const bool max_variant = kind == NormKind::MaxRegime;
    auto surrogate = [&](const DenseMatrix& uu, const DenseMatrix& vv) {
        double vmax = 0.0;
        for (std::size_t j = 0; j < vv.cols(); ++j) vmax = std::max(vmax, column_norm(vv, j));
        if (!max_variant) return frobenius_norm(uu) * vmax;
        const auto rs2 = row_norms_sq(uu);
        return std::sqrt(*std::max_element(rs2.begin(), rs2.end())) * vmax;
    };
    double cur = surrogate(u, vt);
    if (frobenius_norm(m) == 0.0) return cur;

    DenseMatrix vtc = vt;
    double v0 = 0.0;
    for (std::size_t j = 0; j < vtc.cols(); ++j) v0 = std::max(v0, column_norm(vtc, j));
    if (v0 > 0.0) vtc *= (1.0 / v0);
    // small full-rank jitter so near-zero singular directions left by previous
    // refits cannot stall the pseudoinverse-based descent
    DenseMatrix jit = gaussian_matrix(vtc.rows(), vtc.cols(), rng);
    jit *= 1e-3;
    vtc += jit;

    DenseMatrix uc(u.rows(), u.cols());
    const double val = surrogate_descent(m, uc, vtc, max_variant, iters);
    if (std::isfinite(val) && val < cur) {
        u = std::move(uc);
        vt = std::move(vtc);
        cur = val;
    }
    return cur;
}

TnormResult tnorm_detail(const DenseMatrix& m, const NormBallSpec& spec, double tol) {
    spec.validate();
    TnormResult res;
    if (frobenius_norm(m) == 0.0) return res;
    const bool max_variant = spec.kind == NormKind::MaxRegime;
    res.branch_operator = max_variant ? inf_norm(m) : op_norm_1to2(m);
    if (std::max(m.rows(), m.cols()) <= kSdpDimensionThreshold) {
        res.branch_factorization =
            max_variant ? max_norm_sdp(m, tol).value : mixed_norm_sdp(m, tol).value;
    } else {
        RngStream rng(mix_seed(0x746e6f726dULL, m.rows(), m.cols()), "tnorm-factored");
        const std::size_t cap = std::min(m.rows(), m.cols());
        res.branch_factorization = max_variant ? max_norm_factored(m, cap, 8, rng)
                                               : mixed_norm_factored(m, cap, 8, rng);
        res.upper_bound_only = true;
    }
    res.value = std::max(res.branch_operator,
                         res.branch_factorization / std::sqrt(static_cast<double>(spec.rank_param)));
    return res;
}

double tnorm(const DenseMatrix& m, const NormBallSpec& spec, double tol) {
    return tnorm_detail(m, spec, tol).value;
}

SandwichReport check_rank_sandwich(const DenseMatrix& m, std::size_t r, double tol) {
    SandwichReport rep;
    rep.op_1to2 = op_norm_1to2(m);
    rep.entry_inf = inf_norm(m);
    // Solve the SDPs a decade tighter than the sandwich tolerance so solver
    // error cannot decide the comparison. The ADMM tail is sublinear on
    // occasional degenerate draws; those stall well inside `tol`, so on a
    // convergence failure retry at the sandwich tolerance itself.
    const double loose = std::clamp(tol, 1e-6, 1e-5);
    const double strict = std::max(1e-7, 0.1 * loose);
    auto solve = [&](bool max_variant) {
        try {
            return max_variant ? max_norm_sdp(m, strict).value : mixed_norm_sdp(m, strict).value;
        } catch (const Error&) {
            return max_variant ? max_norm_sdp(m, loose).value : mixed_norm_sdp(m, loose).value;
        }
    };
    rep.mixed = solve(false);
    rep.max_norm = solve(true);
    const double sq = std::sqrt(static_cast<double>(r));
    const double e1 = tol * std::max(1.0, rep.op_1to2);
    const double e2 = tol * std::max(1.0, rep.entry_inf);
    rep.mixed_lower = rep.op_1to2 <= rep.mixed + e1;
    rep.mixed_upper = rep.mixed <= sq * rep.op_1to2 + e1;
    rep.max_lower = rep.entry_inf <= rep.max_norm + e2;
    rep.max_upper = rep.max_norm <= sq * rep.entry_inf + e2;
    return rep;
}

}  // namespace lrtn
