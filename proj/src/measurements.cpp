#include "lrtn/measurements.hpp"

#include <cmath>
#include <numeric>

#include "json.hpp"
#include "lrtn/rng.hpp"

namespace lrtn {

double MeasurementEnsemble::scale() const {
    if (kind == EnsembleKind::Sketching)
        return 1.0 / std::sqrt(static_cast<double>(sketch_rounds()));
    return std::sqrt(static_cast<double>(d1) * static_cast<double>(d2));
}

std::size_t MeasurementEnsemble::sketch_rounds() const {
    if (kind != EnsembleKind::Sketching) throw Error("sketch_rounds: not a sketching ensemble");
    return n / d2;
}

void MeasurementEnsemble::validate() const {
    if (d1 == 0 || d2 == 0 || n == 0) throw Error("ensemble: empty dimensions");
    if (col_index.size() != n) throw Error("ensemble: column schedule size mismatch");
    if (kind == EnsembleKind::Sketching) {
        if (n % d2 != 0) throw Error("ensemble: sketching needs n = L * d2");
        if (b.rows() != d1 || b.cols() != n) throw Error("ensemble: sketch vector shape");
        for (std::size_t k = 0; k < n; ++k)
            if (col_index[k] != k % d2) throw Error("ensemble: sketching schedule not round-robin");
    } else {
        if (row_index.size() != n) throw Error("ensemble: row schedule size mismatch");
        for (std::size_t k = 0; k < n; ++k)
            if (row_index[k] >= d1 || col_index[k] >= d2)
                throw Error("ensemble: index out of range");
    }
}

MeasurementEnsemble build_sketching(std::size_t d1, std::size_t d2, std::size_t rounds,
                                    std::uint64_t seed) {
    if (d1 == 0 || d2 == 0 || rounds == 0) throw Error("build_sketching: dimensions must be >= 1");
    MeasurementEnsemble ens;
    ens.kind = EnsembleKind::Sketching;
    ens.d1 = d1;
    ens.d2 = d2;
    ens.n = rounds * d2;
    ens.seed = seed;
    ens.col_index.resize(ens.n);
    for (std::size_t k = 0; k < ens.n; ++k) ens.col_index[k] = static_cast<std::uint32_t>(k % d2);
    RngStream rng(seed, "b");
    ens.b = gaussian_matrix(d1, ens.n, rng);
    return ens;
}

MeasurementEnsemble build_completion(std::size_t d1, std::size_t d2, std::size_t n,
                                     std::uint64_t seed, bool full_coverage_debug) {
    if (d1 == 0 || d2 == 0 || n == 0) throw Error("build_completion: dimensions must be >= 1");
    MeasurementEnsemble ens;
    ens.kind = EnsembleKind::Completion;
    ens.d1 = d1;
    ens.d2 = d2;
    ens.n = n;
    ens.seed = seed;
    ens.full_coverage_debug = full_coverage_debug;
    ens.row_index.resize(n);
    ens.col_index.resize(n);
    RngStream rng(seed, "idx");
    if (full_coverage_debug) {
        // enumerate every cell once per block of d1*d2 draws (Fisher-Yates)
        const std::size_t cells = d1 * d2;
        std::vector<std::uint32_t> perm(cells);
        for (std::size_t k = 0; k < n; ++k) {
            const std::size_t off = k % cells;
            if (off == 0) {
                std::iota(perm.begin(), perm.end(), 0u);
                for (std::size_t i = cells; i > 1; --i)
                    std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
            }
            ens.row_index[k] = perm[off] % static_cast<std::uint32_t>(d1);
            ens.col_index[k] = perm[off] / static_cast<std::uint32_t>(d1);
        }
    } else {
        for (std::size_t k = 0; k < n; ++k) {
            ens.row_index[k] = static_cast<std::uint32_t>(rng.uniform_index(d1));
            ens.col_index[k] = static_cast<std::uint32_t>(rng.uniform_index(d2));
        }
    }
    return ens;
}

std::vector<double> apply(const MeasurementEnsemble& ens, const DenseMatrix& m) {
    ens.validate();
    if (m.rows() != ens.d1 || m.cols() != ens.d2) throw Error("apply: shape mismatch");
    std::vector<double> y(ens.n);
    const double sc = ens.scale();
    if (ens.kind == EnsembleKind::Sketching) {
        for (std::size_t k = 0; k < ens.n; ++k) {
            const double* bk = ens.b.col(k);
            const double* mc = m.col(ens.col_index[k]);
            double dot = 0.0;
            for (std::size_t i = 0; i < ens.d1; ++i) dot += bk[i] * mc[i];
            y[k] = sc * dot;
        }
    } else {
        for (std::size_t k = 0; k < ens.n; ++k) y[k] = sc * m(ens.row_index[k], ens.col_index[k]);
    }
    return y;
}

DenseMatrix adjoint(const MeasurementEnsemble& ens, const std::vector<double>& z) {
    ens.validate();
    if (z.size() != ens.n) throw Error("adjoint: shape mismatch");
    DenseMatrix out(ens.d1, ens.d2);
    const double sc = ens.scale();
    if (ens.kind == EnsembleKind::Sketching) {
        for (std::size_t k = 0; k < ens.n; ++k) {
            const double w = sc * z[k];
            const double* bk = ens.b.col(k);
            double* oc = out.col(ens.col_index[k]);
            for (std::size_t i = 0; i < ens.d1; ++i) oc[i] += w * bk[i];
        }
    } else {
        for (std::size_t k = 0; k < ens.n; ++k)
            out(ens.row_index[k], ens.col_index[k]) += sc * z[k];
    }
    return out;
}

std::vector<double> add_noise(const std::vector<double>& y, const NoiseSpec& spec) {
    if (spec.sigma < 0.0) throw Error("add_noise: sigma must be >= 0");
    if (spec.sigma == 0.0) return y;
    RngStream rng(spec.seed, "eta");
    std::vector<double> out(y);
    for (double& v : out) v += spec.sigma * rng.normal();
    return out;
}

std::string ensemble_to_json(const MeasurementEnsemble& ens) {
    ens.validate();
    nlohmann::json j;
    j["kind"] = ens.kind == EnsembleKind::Sketching ? "sketching" : "completion";
    j["d1"] = ens.d1;
    j["d2"] = ens.d2;
    j["n"] = ens.n;
    j["seed"] = ens.seed;
    j["col_index"] = ens.col_index;
    if (ens.kind == EnsembleKind::Completion) {
        j["row_index"] = ens.row_index;
        j["full_coverage_debug"] = ens.full_coverage_debug;
    }
    return j.dump();
}

MeasurementEnsemble ensemble_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    MeasurementEnsemble ens;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "sketching")
        ens.kind = EnsembleKind::Sketching;
    else if (kind == "completion")
        ens.kind = EnsembleKind::Completion;
    else
        throw Error("ensemble_from_json: unknown kind '" + kind + "'");
    ens.d1 = j.at("d1").get<std::size_t>();
    ens.d2 = j.at("d2").get<std::size_t>();
    ens.n = j.at("n").get<std::size_t>();
    ens.seed = j.at("seed").get<std::uint64_t>();
    ens.col_index = j.at("col_index").get<std::vector<std::uint32_t>>();
    if (ens.kind == EnsembleKind::Sketching) {
        RngStream rng(ens.seed, "b");
        ens.b = gaussian_matrix(ens.d1, ens.n, rng);
    } else {
        ens.row_index = j.at("row_index").get<std::vector<std::uint32_t>>();
        ens.full_coverage_debug = j.value("full_coverage_debug", false);
    }
    ens.validate();
    return ens;
}

double measurement_snr(const MeasurementEnsemble& ens, const DenseMatrix& m0, double sigma) {
    if (sigma <= 0.0) throw Error("measurement_snr: sigma must be positive");
    const double f2 = frobenius_norm(m0) * frobenius_norm(m0);
    if (ens.kind == EnsembleKind::Sketching)
        return f2 / (static_cast<double>(ens.n) * sigma * sigma);
    return f2 / (sigma * sigma);
}

}  // namespace lrtn
