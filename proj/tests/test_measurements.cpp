#include <cmath>
#include <set>

#include "doctest.h"
#include "lrtn/matrix.hpp"
#include "lrtn/measurements.hpp"
#include "lrtn/rng.hpp"

using namespace lrtn;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
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

TEST_CASE("sketching structure: round-robin schedule, column counts, scale") {
    auto ens = build_sketching(4, 3, 1, 7);
    CHECK(ens.n == 3);
    CHECK(ens.col_index == std::vector<std::uint32_t>{0, 1, 2});
    CHECK(ens.scale() == doctest::Approx(1.0).epsilon(1e-15));

    auto big = build_sketching(4, 5, 6, 7);
    CHECK(big.n == 30);
    std::vector<int> hits(5, 0);
    for (auto j : big.col_index) ++hits[j];
    for (int h : hits) CHECK(h == 6);
    CHECK(big.scale() == doctest::Approx(1.0 / std::sqrt(6.0)).epsilon(1e-15));
}

TEST_CASE("sketching energy: mean of sum_k y_k^2 matches ||M||_F^2") {
    RngStream mr(21, "energy-m");
    DenseMatrix m = gaussian_matrix(5, 4, mr);
    const double target = frobenius_norm(m) * frobenius_norm(m);
    double acc = 0.0;
    const int trials = 500;
    for (int t = 0; t < trials; ++t) {
        auto ens = build_sketching(5, 4, 32, 1000 + static_cast<std::uint64_t>(t));
        auto y = apply(ens, m);
        acc += dot(y, y);
    }
    acc /= trials;
    CHECK(std::fabs(acc - target) <= 0.05 * target);
}

TEST_CASE("completion isotropy: Monte-Carlo mean of A_k <A_k, M> approaches M") {
    RngStream mr(22, "iso-m");
    DenseMatrix m = gaussian_matrix(4, 4, mr);
    const std::size_t n = 100000;
    auto ens = build_completion(4, 4, n, 99);
    auto y = apply(ens, m);
    DenseMatrix mean = adjoint(ens, y);
    mean *= 1.0 / static_cast<double>(n);
    const double tol = 0.03 * max_abs(m);
    for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t i = 0; i < 4; ++i) CHECK(std::fabs(mean(i, j) - m(i, j)) <= tol);
}

TEST_CASE("completion single measurement of e1 e1^T") {
    MeasurementEnsemble ens;
    ens.kind = EnsembleKind::Completion;
    ens.d1 = 3;
    ens.d2 = 5;
    ens.n = 1;
    ens.row_index = {0};
    ens.col_index = {0};
    DenseMatrix m(3, 5);
    m(0, 0) = 1.0;
    auto y = apply(ens, m);
    CHECK(y[0] == doctest::Approx(std::sqrt(15.0)).epsilon(1e-15));
}

TEST_CASE("completion full-coverage debug mode enumerates every cell") {
    auto ens = build_completion(3, 4, 12, 5, /*full_coverage_debug=*/true);
    std::set<std::pair<std::uint32_t, std::uint32_t>> cells;
    for (std::size_t k = 0; k < 12; ++k) cells.insert({ens.row_index[k], ens.col_index[k]});
    CHECK(cells.size() == 12);

    // injective: adjoint(apply(M)) = d1*d2*M exactly when every cell is hit once
    RngStream mr(23, "cover-m");
    DenseMatrix m = gaussian_matrix(3, 4, mr);
    DenseMatrix back = adjoint(ens, apply(ens, m));
    back *= 1.0 / 12.0;
    CHECK(frobenius_norm(back - m) <= 1e-12 * frobenius_norm(m));
}

TEST_CASE("adjoint identity <apply(M), z> = <M, adjoint(z)>") {
    for (int t = 0; t < 50; ++t) {
        RngStream rng(400 + t, "adj");
        const std::size_t d1 = 2 + rng.uniform_index(6);
        const std::size_t d2 = 2 + rng.uniform_index(6);
        MeasurementEnsemble ens =
            (t % 2 == 0) ? build_sketching(d1, d2, 1 + rng.uniform_index(4),
                                           500 + static_cast<std::uint64_t>(t))
                         : build_completion(d1, d2, 1 + rng.uniform_index(3 * d1 * d2),
                                            500 + static_cast<std::uint64_t>(t));
        DenseMatrix m = gaussian_matrix(d1, d2, rng);
        std::vector<double> z(ens.n);
        for (double& v : z) v = rng.normal();
        const double lhs = dot(apply(ens, m), z);
        const double rhs = inner(m, adjoint(ens, z));
        CHECK(std::fabs(lhs - rhs) <= 1e-12 * std::max(1.0, std::fabs(lhs)));
    }
}

TEST_CASE("apply matches dense materialization oracle at small size") {
    RngStream rng(31, "dense");
    DenseMatrix m = gaussian_matrix(6, 4, rng);
    auto sk = build_sketching(6, 4, 3, 77);
    auto y = apply(sk, m);
    for (std::size_t k = 0; k < sk.n; ++k)
        CHECK(y[k] == doctest::Approx(inner(dense_ak(sk, k), m)).epsilon(1e-12));

    auto cm = build_completion(6, 4, 10, 78);
    auto yc = apply(cm, m);
    for (std::size_t k = 0; k < cm.n; ++k)
        CHECK(yc[k] == doctest::Approx(inner(dense_ak(cm, k), m)).epsilon(1e-12));

    CHECK(dot(apply(sk, DenseMatrix(6, 4)), apply(sk, DenseMatrix(6, 4))) == 0.0);
}

TEST_CASE("add_noise: identity at sigma 0, variance, determinism") {
    std::vector<double> y(100000, 1.5);
    NoiseSpec off{0.0, 3};
    CHECK(add_noise(y, off) == y);

    NoiseSpec on{0.7, 3};
    auto z = add_noise(y, on);
    double mean = 0.0;
    for (double v : z) mean += v - 1.5;
    mean /= static_cast<double>(z.size());
    double var = 0.0;
    for (double v : z) var += (v - 1.5 - mean) * (v - 1.5 - mean);
    var /= static_cast<double>(z.size() - 1);
    CHECK(std::fabs(var - 0.49) <= 0.05 * 0.49);

    CHECK(add_noise(y, on) == z);
    NoiseSpec other{0.7, 4};
    CHECK(add_noise(y, other) != z);
}

TEST_CASE("json round trip reconstructs ensembles byte-identically") {
    auto sk = build_sketching(5, 3, 4, 123);
    auto sk2 = ensemble_from_json(ensemble_to_json(sk));
    CHECK(sk2.kind == EnsembleKind::Sketching);
    CHECK(sk2.col_index == sk.col_index);
    CHECK(frobenius_norm(sk2.b - sk.b) == 0.0);
    CHECK(ensemble_to_json(sk2) == ensemble_to_json(sk));

    auto cm = build_completion(4, 6, 17, 321);
    auto cm2 = ensemble_from_json(ensemble_to_json(cm));
    CHECK(cm2.row_index == cm.row_index);
    CHECK(cm2.col_index == cm.col_index);
    CHECK(ensemble_to_json(cm2) == ensemble_to_json(cm));

    RngStream mr(32, "json-m");
    DenseMatrix m = gaussian_matrix(5, 3, mr);
    CHECK(apply(sk, m) == apply(sk2, m));
}

TEST_CASE("snr bookkeeping") {
    RngStream mr(33, "snr-m");
    DenseMatrix m = gaussian_matrix(6, 5, mr);
    const double f2 = frobenius_norm(m) * frobenius_norm(m);
    auto sk = build_sketching(6, 5, 8, 1);
    CHECK(measurement_snr(sk, m, 0.5) == doctest::Approx(f2 / (8.0 * 5.0 * 0.25)).epsilon(1e-12));
    auto cm = build_completion(6, 5, 20, 1);
    CHECK(measurement_snr(cm, m, 2.0) == doctest::Approx(f2 / 4.0).epsilon(1e-12));
    CHECK_THROWS_AS(measurement_snr(sk, m, 0.0), Error);
}
