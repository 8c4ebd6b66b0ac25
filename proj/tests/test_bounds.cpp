#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "lrtn/bounds.hpp"
#include "lrtn/matrix.hpp"
#include "lrtn/measurements.hpp"
#include "lrtn/norms.hpp"
#include "lrtn/rng.hpp"
#include "lrtn/svd.hpp"

using namespace lrtn;

namespace {

MeasurementEnsemble zero_ensemble(std::size_t d1, std::size_t d2, std::size_t n) {
    MeasurementEnsemble ens = build_sketching(d1, d2, n / d2, 3);
    for (std::size_t i = 0; i < ens.b.size(); ++i) ens.b.data()[i] = 0.0;
    return ens;
}

// Dense materialization of A_k for small oracle checks.
DenseMatrix dense_ak(const MeasurementEnsemble& ens, std::size_t k) {
    DenseMatrix a(ens.d1, ens.d2);
    if (ens.kind == EnsembleKind::Sketching) {
        for (std::size_t i = 0; i < ens.d1; ++i) a(i, ens.col_index[k]) = ens.scale() * ens.b(i, k);
    } else {
        a(ens.row_index[k], ens.col_index[k]) = ens.scale();
    }
    return a;
}

}  // namespace

TEST_CASE("eval_recovery_bound: closed forms and spot value") {
    // noise terms vanish
    CHECK(eval_recovery_bound(2.0, 0.0, 3.0, 5.0, 7.0, 0.5) == doctest::Approx(48.0));
    // first two terms vanish
    const double z = 0.25;
    CHECK(eval_recovery_bound(1.5, 2.0, 0.0, 0.0, 3.0, z) ==
          doctest::Approx(2.0 * 3.14159265358979323846 * 1.5 * 2.0 *
                          std::sqrt(2.0 * std::log(2.0 / z) * 9.0)));
    // all-ones spot value with ln(2/zeta) = 1
    const double zeta = 2.0 / std::exp(1.0);
    CHECK(eval_recovery_bound(1.0, 1.0, 1.0, 1.0, 1.0, zeta) ==
          doctest::Approx(8.0 + 4.0 * 3.14159265358979323846).epsilon(1e-12));

    CHECK_THROWS(eval_recovery_bound(1.0, 1.0, 1.0, 1.0, 1.0, 0.0));
    CHECK_THROWS(eval_recovery_bound(1.0, 1.0, 1.0, 1.0, 1.0, 1.0));
    CHECK_THROWS(eval_recovery_bound(-1.0, 1.0, 1.0, 1.0, 1.0, 0.5));
}

TEST_CASE("eval_recovery_bound: monotonicity") {
    const double base = eval_recovery_bound(1.0, 0.5, 1.0, 1.0, 2.0, 0.3);
    CHECK(eval_recovery_bound(1.0, 0.5, 1.5, 1.0, 2.0, 0.3) >= base);
    CHECK(eval_recovery_bound(1.0, 0.5, 1.0, 1.5, 2.0, 0.3) >= base);
    CHECK(eval_recovery_bound(1.0, 0.6, 1.0, 1.0, 2.0, 0.3) >= base);
    CHECK(eval_recovery_bound(1.2, 0.5, 1.0, 1.0, 2.0, 0.3) >= base);
    CHECK(eval_recovery_bound(1.0, 0.5, 1.0, 1.0, 2.0, 0.4) <= base);
}

TEST_CASE("estimate_R: closed forms") {
    NormBallSpec spec;
    spec.kind = NormKind::MixedRegime;
    spec.alpha = 1.0;
    spec.rank_param = 8;  // mixed constraint inactive
    auto r = estimate_R(spec, 5, 8);
    CHECK(r.lower == doctest::Approx(std::sqrt(8.0)).epsilon(1e-14));
    CHECK(r.upper == doctest::Approx(std::sqrt(8.0)).epsilon(1e-14));
    CHECK(r.lower <= r.upper);

    spec.kind = NormKind::MaxRegime;
    spec.rank_param = 5;
    auto rm = estimate_R(spec, 5, 8);
    CHECK(rm.lower == doctest::Approx(std::sqrt(40.0)).epsilon(1e-14));
    CHECK(rm.lower <= rm.upper);

    // the mixed witness really is feasible: tnorm of the all-equal-columns
    // matrix equals alpha, and its Frobenius norm is the reported radius
    DenseMatrix w(5, 8);
    for (std::size_t j = 0; j < 8; ++j) w(0, j) = 1.0;
    NormBallSpec ms;
    ms.kind = NormKind::MixedRegime;
    ms.alpha = 1.0;
    ms.rank_param = 8;
    CHECK(tnorm(w, ms, 1e-6) == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(frobenius_norm(w) == doctest::Approx(std::sqrt(8.0)).epsilon(1e-14));
}

TEST_CASE("estimate_theta: degenerate ensemble, hand oracle, monotone in samples") {
    NormBallSpec spec;
    spec.kind = NormKind::MixedRegime;
    spec.alpha = 1.0;
    spec.rank_param = 1;

    // all-zero measurements: the quantity reduces to ||M||_F^2 <= R^2
    auto ens0 = zero_ensemble(4, 4, 16);
    RngStream rng(70, "theta-zero");
    const double th0 = estimate_theta(ens0, spec, 20, 20, rng);
    const double r2 = estimate_R(spec, 4, 4).upper;
    CHECK(th0 <= r2 * r2 + 1e-8);
    CHECK(th0 >= 0.0);

    // direct quadratic-form oracle at a fixed candidate, d = 2
    auto ens = build_sketching(2, 2, 3, 5);
    DenseMatrix m(2, 2);
    m(0, 0) = 0.6;
    m(1, 1) = -0.3;
    double dense = 0.0;
    for (std::size_t k = 0; k < ens.n; ++k) {
        DenseMatrix ak = dense_ak(ens, k);
        double tr = 0.0;
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j) tr += ak(i, j) * m(i, j);
        dense += tr * tr;
    }
    const double fro = frobenius_norm(m);
    auto yh = apply(ens, m);
    double viaop = 0.0;
    for (double v : yh) viaop += v * v;
    CHECK(std::abs(viaop - fro * fro) == doctest::Approx(std::abs(dense - fro * fro)).epsilon(1e-12));

    // monotone in samples under a fixed seed schedule
    auto ens2 = build_sketching(6, 6, 4, 8);
    RngStream ra(71, "theta-mono");
    const double t_small = estimate_theta(ens2, spec, 5, 10, ra);
    RngStream rb(71, "theta-mono");
    const double t_big = estimate_theta(ens2, spec, 15, 10, rb);
    CHECK(t_big >= t_small);
}

TEST_CASE("estimate_theta: shrinks with more sketching rounds") {
    NormBallSpec spec;
    spec.kind = NormKind::MixedRegime;
    spec.alpha = 1.0;
    spec.rank_param = 2;
    int wins = 0;
    for (int s = 0; s < 10; ++s) {
        auto small = build_sketching(16, 16, 4, 100 + s);
        auto big = build_sketching(16, 16, 64, 200 + s);
        RngStream r1(300 + s, "theta-L");
        RngStream r2(300 + s, "theta-L");
        const double th_small = estimate_theta(small, spec, 12, 15, r1);
        const double th_big = estimate_theta(big, spec, 12, 15, r2);
        if (th_big < th_small) ++wins;
    }
    CHECK(wins >= 8);  // concentration improves with more measurements
}

TEST_CASE("estimate_gamma: zero ensemble, duality sanity, grows with n") {
    NormBallSpec spec;
    spec.kind = NormKind::MixedRegime;
    spec.alpha = 1.0;
    spec.rank_param = 2;

    auto ens0 = zero_ensemble(4, 4, 16);
    RngStream rng(72, "gamma-zero");
    auto g0 = estimate_gamma(ens0, spec, 3, rng);
    CHECK(g0.mean == 0.0);

    // duality sanity: any feasible candidate's pairing is below the estimate
    auto ens = build_sketching(5, 5, 4, 17);
    std::vector<double> g(ens.n);
    RngStream rg(74, "gvec");
    for (double& gi : g) gi = rg.normal();
    const DenseMatrix x = adjoint(ens, g);
    RngStream r1(73, "gamma-dual");
    const double dual = dual_norm_estimate(x, spec, 16, 30, r1);
    for (int c = 0; c < 20; ++c) {
        // the rank-1 top singular direction, certified into the unit ball
        SvdResult sv = svd(x);
        DenseMatrix cand(5, 5);
        RngStream rc(700 + c, "cand");
        DenseMatrix cu = gaussian_matrix(5, 2, rc);
        DenseMatrix cv = gaussian_matrix(5, 2, rc);
        cand = matmul_nt(cu, cv);
        cand *= 1.0 / std::max(tnorm(cand, spec, 1e-6), 1e-12);
        double pair = 0.0;
        for (std::size_t i = 0; i < cand.size(); ++i) pair += cand.data()[i] * x.data()[i];
        CHECK(pair <= dual * (1 + 1e-6) + 1e-9);
    }
    auto ge = estimate_gamma(ens, spec, 6, r1);
    CHECK(ge.mean >= 0.0);
    CHECK(std::isfinite(ge.std_error));

    // growth with the number of measurements
    int wins = 0;
    for (int s = 0; s < 6; ++s) {
        auto small = build_sketching(16, 16, 4, 400 + s);
        auto big = build_sketching(16, 16, 64, 500 + s);
        RngStream ra(600 + s, "gamma-n");
        RngStream rb(600 + s, "gamma-n");
        const double gs = estimate_gamma(small, spec, 4, ra).mean;
        const double gb = estimate_gamma(big, spec, 4, rb).mean;
        if (gb > gs) ++wins;
    }
    CHECK(wins >= 5);
}

TEST_CASE("eval_sketch_rate: closed-form branches and scaling") {
    // sigma = 0: the max branch is 1
    const double v0 = eval_sketch_rate(2.0, 0.0, 32, 32, 16, 2);
    const double expect0 = (4.0 / 32.0) * std::sqrt(2.0 * 64.0 * std::pow(std::log(64.0), 4.0) /
                                                    (16.0 * 32.0));
    CHECK(v0 == doctest::Approx(expect0).epsilon(1e-12));

    // spot numeric, alpha = sigma = 1, d = 32, L = 16, r = 2
    const double logld2 = std::log(16.0 * 32.0), logd = std::log(64.0);
    const double spot = (1.0 / 32.0) * std::max(1.0, std::sqrt(16.0 * logld2)) *
                        std::sqrt(2.0 * 64.0 * std::pow(logd, 4.0) / (16.0 * 32.0));
    CHECK(eval_sketch_rate(1.0, 1.0, 32, 32, 16, 2) == doctest::Approx(spot).epsilon(1e-12));

    // with logs frozen the sigma = 0 branch scales exactly as 1/sqrt(L)
    const double a = eval_sketch_rate_frozen(1.0, 0.0, 32, 32, 16, 2, 3.0, 4.0);
    const double b = eval_sketch_rate_frozen(1.0, 0.0, 32, 32, 64, 2, 3.0, 4.0);
    CHECK(a / b == doctest::Approx(2.0).epsilon(1e-12));

    // constant knob is a plain multiplier
    CHECK(eval_sketch_rate(1.0, 1.0, 32, 32, 16, 2, 3.0) ==
          doctest::Approx(3.0 * eval_sketch_rate(1.0, 1.0, 32, 32, 16, 2)).epsilon(1e-12));
    CHECK_THROWS(eval_sketch_rate(0.0, 1.0, 32, 32, 16, 2));
}

TEST_CASE("eval_minimax_lower: branches, kink continuity, gate, spot value") {
    // min-branch = 1 regime (huge sigma)
    auto big = eval_minimax_lower(1.0, 100.0, 4, 8, 8, 2);
    CHECK(big.value == doctest::Approx(1.0 / (16.0 * 8.0)).epsilon(1e-12));

    // continuity at the kink: pick sigma so the ratio equals exactly 1
    const std::size_t L = 4, d1 = 8, d2 = 8, r = 2;
    const double ratio_unit = std::sqrt(static_cast<double>(r) * (d1 + d2) /
                                        (static_cast<double>(L) * d2));
    const double sigma_k = 1.0 / (std::sqrt(4.0) * ratio_unit);
    auto at_kink = eval_minimax_lower(1.0, sigma_k, L, d1, d2, r);
    CHECK(at_kink.value == doctest::Approx(1.0 / (16.0 * 8.0)).epsilon(1e-9));

    // spot numeric alpha = sigma = 1, L = 4, d = 64, r = 2
    auto spot = eval_minimax_lower(1.0, 1.0, 4, 64, 64, 2);
    const double expect = (1.0 / (16.0 * 64.0)) *
                          std::min(1.0, std::sqrt(4.0) * std::sqrt(2.0 * 128.0 / (4.0 * 64.0)));
    CHECK(spot.value == doctest::Approx(expect).epsilon(1e-12));
    CHECK(spot.alt_applicable == (4 * 64 > 2 * 128));

    // gate: 48 a^2/(d1 v d2) <= a^2 r <= sigma^2 d1 d2/128
    CHECK(eval_minimax_lower(1.0, 1.0, 4, 64, 64, 2).conditions_met);   // 0.75<=2<=32
    CHECK_FALSE(eval_minimax_lower(1.0, 0.01, 4, 64, 64, 2).conditions_met);
    CHECK_FALSE(eval_minimax_lower(1.0, 1.0, 4, 8, 8, 2).conditions_met);  // 6<=2 fails

    // value still computed when the gate fails
    CHECK(eval_minimax_lower(1.0, 0.01, 4, 64, 64, 2).value > 0.0);
    CHECK_THROWS(eval_minimax_lower(1.0, 0.0, 4, 8, 8, 2));

    // non-decreasing in alpha
    CHECK(eval_minimax_lower(2.0, 1.0, 4, 64, 64, 2).value >=
          eval_minimax_lower(1.0, 1.0, 4, 64, 64, 2).value);
}

TEST_CASE("build_packing: invariants") {
    RngStream rng(80, "pack");
    auto p = build_packing(16, 16, 4, 1.0, 2.0, 4, rng);
    CHECK(p.block_rows == 4);
    const double entry = 1.0 * 2.0 / std::sqrt(16.0);
    for (const auto& m : p.matrices) {
        for (std::size_t i = 0; i < m.size(); ++i)
            CHECK(std::abs(std::abs(m.data()[i]) - entry) <= 1e-15);
        CHECK(op_norm_1to2(m) == doctest::Approx(2.0).epsilon(1e-12));
        const double f = frobenius_norm(m);
        CHECK(f * f == doctest::Approx(1.0 * 4.0 * 16.0).epsilon(1e-12));
        // rows repeat with period B
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j)
                CHECK(m(i, j) == m(i % p.block_rows, j));
        // rank <= B via SVD
        SvdResult sv = svd(m);
        std::size_t rank = 0;
        for (double s : sv.s)
            if (s > 1e-9 * sv.s[0]) ++rank;
        CHECK(rank <= p.block_rows);
    }
    CHECK(p.min_separation_sq >= 1.0 * 4.0 * 16.0 / 2.0);
}

TEST_CASE("build_packing: preconditions and separation statistics") {
    RngStream rng(81, "pack-pre");
    CHECK_THROWS(build_packing(16, 16, 3, 0.8, 1.0, 2, rng));   // r/gamma^2 not integer
    CHECK_THROWS(build_packing(2, 2, 4, 1.0, 1.0, 2, rng));     // r > gamma^2 min(d1,d2)
    CHECK_THROWS(build_packing(16, 16, 4, 1.0, 0.0, 2, rng));   // alpha <= 0

    // separation achieved with overwhelming frequency across seeds
    int ok = 0;
    for (int s = 0; s < 100; ++s) {
        RngStream r2(900 + s, "pack-seeds");
        try {
            auto p = build_packing(16, 16, 4, 1.0, 1.0, 2, r2);
            if (p.min_separation_sq >= 16.0 / 2.0) ++ok;
        } catch (const Error&) {
        }
    }
    CHECK(ok == 100);
}

TEST_CASE("kl_divergence: zero at equality, sigma scaling, isotropic mean") {
    auto ens = build_completion(4, 4, 12, 19);
    RngStream rng(82, "kl");
    DenseMatrix a = gaussian_matrix(4, 4, rng);
    DenseMatrix b = gaussian_matrix(4, 4, rng);
    CHECK(kl_divergence(ens, a, a, 0.7) == 0.0);
    CHECK(kl_divergence(ens, a, b, 2.0) ==
          doctest::Approx(kl_divergence(ens, a, b, 1.0) / 4.0).epsilon(1e-12));
    CHECK_THROWS(kl_divergence(ens, a, b, 0.0));

    // Monte-Carlo mean over completion ensembles matches ||a-b||_F^2/(2 s^2)
    const double fro2 = [&] {
        const double f = frobenius_norm(a - b);
        return f * f;
    }();
    double acc = 0.0;
    const int draws = 100000;
    // one random cell per draw equals an n=1 completion ensemble
    RngStream cells(83, "kl-mc");
    const double scale2 = 16.0;  // (sqrt(d1 d2))^2
    DenseMatrix d = a - b;
    for (int t = 0; t < draws; ++t) {
        const std::size_t i = cells.uniform_index(4);
        const std::size_t j = cells.uniform_index(4);
        const double v = std::sqrt(scale2) * d(i, j);
        acc += v * v;
    }
    acc /= draws;
    CHECK(acc / (2.0 * 0.25) == doctest::Approx(fro2 / (2.0 * 0.25)).epsilon(0.03));
}

TEST_CASE("fano_lower: limits and theorem regime") {
    RngStream rng(84, "fano");
    auto p = build_packing(16, 16, 4, 1.0, 1.0, 3, rng);
    auto ens = build_completion(16, 16, 32, 7);

    // enormous sigma: KL -> 0 and the bound approaches 1 - ln2/ln|target|
    const double v = fano_lower(p, ens, 1e9);
    CHECK(v == doctest::Approx(1.0 - std::log(2.0) / p.log_cardinality_target).epsilon(1e-6));

    // degenerate packing rejected
    PackingSet bad = p;
    bad.matrices = {p.matrices[0], p.matrices[0]};
    bad.min_separation_sq = 0.0;
    CHECK_THROWS(fano_lower(bad, ens, 1.0));
    PackingSet tiny = p;
    tiny.matrices = {p.matrices[0]};
    CHECK_THROWS(fano_lower(tiny, ens, 1.0));
    CHECK_THROWS(fano_lower(p, ens, 0.0));

    // theorem parameter regime: gamma chosen so the bound clears 1/2
    // sigma large enough that mean KL is small next to ln(target)
    const double sigma = std::sqrt(1.0 * 1.0 * 16.0);  // ||Mi-Mj||_F^2 scale
    CHECK(fano_lower(p, ens, sigma) >= 0.5);
}
