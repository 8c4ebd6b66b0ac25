#include "lrtn/svd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lrtn {

namespace {

constexpr int kMaxSweeps = 100;
constexpr double kOffDiagTol = 1e-12;

// One-sided Jacobi on a tall matrix (rows >= cols). Orthogonalizes column
// pairs; V accumulates the rotations.
SvdResult svd_tall(const DenseMatrix& m) {
    const std::size_t rows = m.rows(), cols = m.cols();
    DenseMatrix a = m;
    DenseMatrix v = DenseMatrix::identity(cols);

    // columns this far below the dominant one are treated as numerically zero
    double scale2 = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        const double cn = column_norm(a, j);
        scale2 = std::max(scale2, cn * cn);
    }
    const double tiny2 = 1e-260 * std::max(scale2, 1.0);

    int sweeps = 0;
    double worst = 0.0;
    for (; sweeps < kMaxSweeps; ++sweeps) {
        bool rotated = false;
        worst = 0.0;
        for (std::size_t p = 0; p + 1 < cols; ++p) {
            for (std::size_t q = p + 1; q < cols; ++q) {
                double app = 0.0, aqq = 0.0, apq = 0.0;
                const double* cp = a.col(p);
                const double* cq = a.col(q);
                for (std::size_t i = 0; i < rows; ++i) {
                    app += cp[i] * cp[i];
                    aqq += cq[i] * cq[i];
                    apq += cp[i] * cq[i];
                }
                if (app <= tiny2 || aqq <= tiny2 || apq == 0.0) continue;
                worst = std::max(worst, std::fabs(apq) / std::sqrt(app * aqq));
                if (std::fabs(apq) <= kOffDiagTol * std::sqrt(app * aqq)) continue;
                rotated = true;
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                double* wp = a.col(p);
                double* wq = a.col(q);
                for (std::size_t i = 0; i < rows; ++i) {
                    const double xp = wp[i], xq = wq[i];
                    wp[i] = c * xp - s * xq;
                    wq[i] = s * xp + c * xq;
                }
                double* vp = v.col(p);
                double* vq = v.col(q);
                for (std::size_t i = 0; i < cols; ++i) {
                    const double xp = vp[i], xq = vq[i];
                    vp[i] = c * xp - s * xq;
                    vq[i] = s * xp + c * xq;
                }
            }
        }
        if (!rotated) break;
    }
    // Accept a stalled iteration whose remaining coupling is already far below
    // working precision for downstream use (roundoff can keep pairs cycling
    // just above the rotation threshold without ever resolving).
    if (sweeps >= kMaxSweeps && worst > 1e-9)
        throw Error("svd: one-sided Jacobi did not converge in " + std::to_string(kMaxSweeps) +
                    " sweeps");

    std::vector<double> s(cols);
    for (std::size_t j = 0; j < cols; ++j) s[j] = column_norm(a, j);

    std::vector<std::size_t> order(cols);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return s[i] > s[j]; });

    SvdResult r;
    r.sweeps = sweeps;
    r.u = DenseMatrix(rows, cols);
    r.v = DenseMatrix(cols, cols);
    r.s.resize(cols);
    for (std::size_t j = 0; j < cols; ++j) {
        const std::size_t src = order[j];
        r.s[j] = s[src];
        for (std::size_t i = 0; i < cols; ++i) r.v(i, j) = v(i, src);
        if (s[src] > 0.0) {
            const double inv = 1.0 / s[src];
            for (std::size_t i = 0; i < rows; ++i) r.u(i, j) = a(i, src) * inv;
        }
    }
    // complete U's null columns to an orthonormal set (Gram-Schmidt against e_k)
    for (std::size_t j = 0; j < cols; ++j) {
        if (r.s[j] > 0.0) continue;
        for (std::size_t basis = 0; basis < rows; ++basis) {
            DenseMatrix cand(rows, 1);
            cand(basis, 0) = 1.0;
            for (std::size_t k = 0; k < cols; ++k) {
                if (k == j) continue;
                double dot = 0.0;
                for (std::size_t i = 0; i < rows; ++i) dot += r.u(i, k) * cand(i, 0);
                for (std::size_t i = 0; i < rows; ++i) cand(i, 0) -= dot * r.u(i, k);
            }
            const double nrm = column_norm(cand, 0);
            if (nrm > 0.5) {
                for (std::size_t i = 0; i < rows; ++i) r.u(i, j) = cand(i, 0) / nrm;
                break;
            }
        }
    }
    return r;
}

}  // namespace

SvdResult svd(const DenseMatrix& m) {
    if (m.rows() == 0 || m.cols() == 0) throw Error("svd: empty matrix");
    if (!m.all_finite()) throw Error("svd: non-finite input");
    if (m.rows() >= m.cols()) return svd_tall(m);
    SvdResult t = svd_tall(transpose(m));
    std::swap(t.u, t.v);
    return t;
}

std::size_t svd_rank(const DenseMatrix& m, double tol) {
    SvdResult r = svd(m);
    if (r.s.empty() || r.s[0] == 0.0) return 0;
    std::size_t rank = 0;
    for (double sv : r.s)
        if (sv >= tol * r.s[0]) ++rank;
    return rank;
}

EigResult sym_eig(const DenseMatrix& a) {
    if (a.rows() != a.cols()) throw Error("sym_eig: matrix must be square");
    const std::size_t n = a.rows();
    DenseMatrix z(n, n);
    for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < n; ++i) z(i, j) = 0.5 * (a(i, j) + a(j, i));

    std::vector<double> d(n, 0.0), e(n, 0.0);

    // Householder reduction to tridiagonal form (tred2)
    for (std::size_t i = n - 1; i >= 1; --i) {
        const std::size_t l = i - 1;
        double h = 0.0, scale = 0.0;
        if (l > 0) {
            for (std::size_t k = 0; k <= l; ++k) scale += std::fabs(z(i, k));
            if (scale == 0.0) {
                e[i] = z(i, l);
            } else {
                for (std::size_t k = 0; k <= l; ++k) {
                    z(i, k) /= scale;
                    h += z(i, k) * z(i, k);
                }
                double f = z(i, l);
                double g = (f >= 0.0) ? -std::sqrt(h) : std::sqrt(h);
                e[i] = scale * g;
                h -= f * g;
                z(i, l) = f - g;
                f = 0.0;
                for (std::size_t j = 0; j <= l; ++j) {
                    z(j, i) = z(i, j) / h;
                    g = 0.0;
                    for (std::size_t k = 0; k <= j; ++k) g += z(j, k) * z(i, k);
                    for (std::size_t k = j + 1; k <= l; ++k) g += z(k, j) * z(i, k);
                    e[j] = g / h;
                    f += e[j] * z(i, j);
                }
                const double hh = f / (h + h);
                for (std::size_t j = 0; j <= l; ++j) {
                    f = z(i, j);
                    e[j] = g = e[j] - hh * f;
                    for (std::size_t k = 0; k <= j; ++k)
                        z(j, k) -= f * e[k] + g * z(i, k);
                }
            }
        } else {
            e[i] = z(i, l);
        }
        d[i] = h;
    }
    d[0] = 0.0;
    e[0] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (d[i] != 0.0) {
            for (std::size_t j = 0; j < i; ++j) {
                double g = 0.0;
                for (std::size_t k = 0; k < i; ++k) g += z(i, k) * z(k, j);
                for (std::size_t k = 0; k < i; ++k) z(k, j) -= g * z(k, i);
            }
        }
        d[i] = z(i, i);
        z(i, i) = 1.0;
        for (std::size_t j = 0; j < i; ++j) z(j, i) = z(i, j) = 0.0;
    }

    // Implicit QL with shifts (tql2)
    for (std::size_t i = 1; i < n; ++i) e[i - 1] = e[i];
    e[n - 1] = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
        int iter = 0;
        std::size_t m;
        do {
            for (m = l; m + 1 < n; ++m) {
                const double dd = std::fabs(d[m]) + std::fabs(d[m + 1]);
                if (std::fabs(e[m]) <= 1e-300 || std::fabs(e[m]) <= 2.3e-16 * dd) break;
            }
            if (m != l) {
                if (++iter == 50) throw Error("sym_eig: QL iteration did not converge");
                double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                double r = std::hypot(g, 1.0);
                g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::fabs(r) : -std::fabs(r)));
                double s = 1.0, c = 1.0, p = 0.0;
                for (std::size_t i = m; i-- > l;) {
                    double f = s * e[i];
                    const double b = c * e[i];
                    r = std::hypot(f, g);
                    e[i + 1] = r;
                    if (r == 0.0) {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                    for (std::size_t k = 0; k < n; ++k) {
                        f = z(k, i + 1);
                        z(k, i + 1) = s * z(k, i) + c * f;
                        z(k, i) = c * z(k, i) - s * f;
                    }
                }
                if (r == 0.0 && m > l + 1) continue;
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        } while (m != l);
    }

    // sort ascending
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return d[i] < d[j]; });
    EigResult res;
    res.values.resize(n);
    res.vectors = DenseMatrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        res.values[j] = d[order[j]];
        for (std::size_t i = 0; i < n; ++i) res.vectors(i, j) = z(i, order[j]);
    }
    return res;
}

DenseMatrix psd_project(const DenseMatrix& a) {
    EigResult eg = sym_eig(a);
    const std::size_t n = a.rows();
    DenseMatrix out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double lam = eg.values[k];
        if (lam <= 0.0) continue;
        const double* vk = eg.vectors.col(k);
        for (std::size_t j = 0; j < n; ++j) {
            const double w = lam * vk[j];
            double* cj = out.col(j);
            for (std::size_t i = 0; i < n; ++i) cj[i] += w * vk[i];
        }
    }
    return out;
}

double min_eigenvalue(const DenseMatrix& a) {
    EigResult eg = sym_eig(a);
    return eg.values.front();
}

DenseMatrix pinv(const DenseMatrix& m, double tol) {
    SvdResult r = svd(m);
    const double smax = r.s.empty() ? 0.0 : r.s[0];
    const std::size_t k = r.s.size();
    DenseMatrix vs(m.cols(), k);
    for (std::size_t j = 0; j < k; ++j) {
        const double inv = (smax > 0.0 && r.s[j] > tol * smax) ? 1.0 / r.s[j] : 0.0;
        for (std::size_t i = 0; i < m.cols(); ++i) vs(i, j) = r.v(i, j) * inv;
    }
    return matmul_nt(vs, r.u);
}

}  // namespace lrtn
