#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lrtn/estimator.hpp"
#include "lrtn/matrix.hpp"
#include "lrtn/measurements.hpp"
#include "lrtn/norms.hpp"

namespace lrtn {

enum class ExperimentKind { NormCheck, RecoverySweep, ThetaGamma, Minimax, PackingVerify };

/// Ball-radius rule for each trial: either the exact tnorm of the drawn
/// ground truth, or a fixed explicit value.
struct AlphaRule {
    bool exact = true;
    double value = 1.0;  // used when exact == false
};

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::RecoverySweep;
    EnsembleKind ensemble = EnsembleKind::Sketching;
    NormKind norm_kind = NormKind::MixedRegime;
    std::vector<std::size_t> d1_list, d2_list, r_list;
    std::vector<std::size_t> l_or_n_list;  // sketch rounds L, or sample count n
    std::vector<double> sigma_list;
    AlphaRule alpha_rule;
    double m0_scale = 1.0;   // ground truth is scaled by this factor after drawing
    double target_mu = 0.0;  // 0 disables spikiness control
    std::size_t trials = 1;
    std::uint64_t master_seed = 0;
    std::string out_dir;
    bool full_coverage_debug = false;
    SolverConfig solver;

    void validate() const;
};

struct ExperimentRow {
    std::size_t d1 = 0, d2 = 0, r = 0, l_or_n = 0;
    double sigma = 0.0, alpha = 0.0, mu = 0.0, snr = 0.0;
    std::size_t trial = 0;
    double err_fro_sq = 0.0;  // ||Mhat - M0||_F^2
    double err_norm = 0.0;    // err_fro_sq / ||M0||_F^2
    double rate_sketch = 0.0;   // 0 when not applicable (completion rows)
    double minimax_lb = 0.0;  // 0 when not applicable
    std::uint64_t seed = 0;
    double wall_ms = 0.0;
    bool failed = false;
    std::string error;
};

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
};

struct ExperimentReport {
    std::vector<ExperimentRow> rows;  // sorted by cell index, then trial
    SlopeFit slope;                   // log(mean err) vs log(L d2), when >= 3 cells
    bool slope_valid = false;
    std::size_t failed_rows = 0;
};

/// Execute the experiment grid. Cells run concurrently; every row depends
/// only on (spec, master seed, cell index, trial index), so reruns are
/// byte-identical. Per-row failures are recorded and the run continues.
ExperimentReport run(const ExperimentSpec& spec);

/// Ordinary least squares on (ln x, ln y). Requires >= 3 strictly positive points.
SlopeFit fit_slope(const std::vector<double>& xs, const std::vector<double>& ys);

/// Rescale column norms of a rank-preserving copy of m toward/away from
/// uniform until the spikiness sqrt(d2) ||M||_{1->2} / ||M||_F is within 5%
/// of target (clamped to the attainable [1, sqrt(d2)] range).
DenseMatrix control_spikiness(const DenseMatrix& m, double target);

/// Spikiness mu = sqrt(d2) ||M||_{1->2} / ||M||_F of a nonzero matrix.
double spikiness(const DenseMatrix& m);

/// Serialize the report. Format is one of "csv", "json", "plotdata".
/// csv column order: d1,d2,r,L_or_n,sigma,alpha,mu,snr,trial,err_fro_sq,
/// err_norm,rate_sketch,minimax_lb,seed,wall_ms.
std::string render_report(const ExperimentReport& rep, const std::string& format);

/// Write render_report output to `path` atomically (temp file + rename).
void emit(const ExperimentReport& rep, const std::string& format, const std::string& path);

/// Parse an ExperimentSpec from a flat JSON object (documented keys match the
/// field names; lists may be given as single scalars).
ExperimentSpec spec_from_json(const std::string& text);

}  // namespace lrtn
