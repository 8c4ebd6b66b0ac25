#include "lrtn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "lrtn/bounds.hpp"
#include "lrtn/rng.hpp"

namespace lrtn {

namespace {

// Stream labels for per-trial derived seeds.
constexpr std::uint64_t kEnsembleSalt = 0x656e73ULL;   // "ens"
constexpr std::uint64_t kNoiseSalt = 0x6e6f69ULL;      // "noi"
constexpr std::uint64_t kSolverSalt = 0x736f6cULL;     // "sol"

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Cell {
    std::size_t index;
    std::size_t d1, d2, r, l_or_n;
    double sigma;
};

ExperimentRow run_trial(const ExperimentSpec& spec, const Cell& cell, std::size_t trial) {
    ExperimentRow row;
    row.d1 = cell.d1;
    row.d2 = cell.d2;
    row.r = cell.r;
    row.l_or_n = cell.l_or_n;
    row.sigma = cell.sigma;
    row.trial = trial;
    row.seed = mix_seed(spec.master_seed, cell.index, trial);
    const auto t0 = std::chrono::steady_clock::now();
    try {
        RngStream m0rng(row.seed, "m0");
        DenseMatrix m0 = random_rank_r(cell.d1, cell.d2, cell.r, m0rng);
        if (spec.m0_scale != 1.0) m0 *= spec.m0_scale;
        if (spec.target_mu > 0.0) m0 = control_spikiness(m0, spec.target_mu);
        row.mu = spikiness(m0);

        MeasurementEnsemble ens =
            spec.ensemble == EnsembleKind::Sketching
                ? build_sketching(cell.d1, cell.d2, cell.l_or_n,
                                  mix_seed(row.seed, kEnsembleSalt, 0))
                : build_completion(cell.d1, cell.d2, cell.l_or_n,
                                   mix_seed(row.seed, kEnsembleSalt, 0),
                                   spec.full_coverage_debug);
        std::vector<double> y = apply(ens, m0);
        if (cell.sigma > 0.0)
            y = add_noise(y, NoiseSpec{cell.sigma, mix_seed(row.seed, kNoiseSalt, 0)});

        NormBallSpec ball;
        ball.kind = spec.norm_kind;
        ball.rank_param = cell.r;
        ball.alpha = spec.alpha_rule.exact ? tnorm(m0, ball, 1e-5) : spec.alpha_rule.value;
        row.alpha = ball.alpha;

        const double fro2 = [&] {
            const double f = frobenius_norm(m0);
            return f * f;
        }();
        if (cell.sigma > 0.0) {
            row.snr = spec.ensemble == EnsembleKind::Sketching
                          ? fro2 / (static_cast<double>(ens.n) * cell.sigma * cell.sigma)
                          : fro2 / (cell.sigma * cell.sigma);
        } else {
            row.snr = std::numeric_limits<double>::infinity();
        }

        SolverConfig cfg = spec.solver;
        cfg.seed = mix_seed(row.seed, kSolverSalt, 0);
        SolveReport rep = solve_lasso(ens, y, ball, cfg);

        const double err = frobenius_norm(rep.m_hat - m0);
        row.err_fro_sq = err * err;
        row.err_norm = fro2 > 0.0 ? row.err_fro_sq / fro2 : 0.0;
        if (spec.ensemble == EnsembleKind::Sketching) {
            row.rate_sketch =
                eval_sketch_rate(ball.alpha, cell.sigma, cell.d1, cell.d2, cell.l_or_n, cell.r);
            if (cell.sigma > 0.0)
                row.minimax_lb = eval_minimax_lower(ball.alpha, cell.sigma, cell.l_or_n,
                                                    cell.d1, cell.d2, cell.r)
                                     .value;
        }
    } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return row;
}

}  // namespace

void ExperimentSpec::validate() const {
    auto check_list = [](const auto& lst, const char* name) {
        if (lst.empty()) throw Error(std::string("ExperimentSpec: empty list ") + name);
        for (auto v : lst)
            if (v <= 0) throw Error(std::string("ExperimentSpec: nonpositive entry in ") + name);
    };
    check_list(d1_list, "d1");
    check_list(d2_list, "d2");
    check_list(r_list, "r");
    check_list(l_or_n_list, "l_or_n");
    if (sigma_list.empty()) throw Error("ExperimentSpec: empty sigma list");
    for (double s : sigma_list)
        if (s < 0.0) throw Error("ExperimentSpec: negative sigma");
    if (trials < 1) throw Error("ExperimentSpec: trials must be >= 1");
    if (m0_scale <= 0.0) throw Error("ExperimentSpec: m0_scale must be positive");
    if (!alpha_rule.exact && alpha_rule.value <= 0.0)
        throw Error("ExperimentSpec: explicit alpha must be positive");
    solver.validate();
}

double spikiness(const DenseMatrix& m) {
    const double fro = frobenius_norm(m);
    if (fro == 0.0) throw Error("spikiness: zero matrix");
    return std::sqrt(static_cast<double>(m.cols())) * op_norm_1to2(m) / fro;
}

DenseMatrix control_spikiness(const DenseMatrix& m, double target) {
    const double lo = 1.0, hi = std::sqrt(static_cast<double>(m.cols()));
    target = std::clamp(target, lo, hi);
    const double mu0 = spikiness(m);
    if (std::abs(mu0 - target) <= 0.05 * target) return m;

    // Column scaling preserves rank. Parameter t blends toward uniform column
    // norms (t in [0,1], mu decreasing) or boosts the largest column
    // (t in [1, tmax], mu increasing); mu is continuous in t, so bisect.
    double rms = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        const double c = column_norm(m, j);
        rms += c * c;
    }
    rms = std::sqrt(rms / static_cast<double>(m.cols()));
    std::size_t jmax = 0;
    double cmax = 0.0;
    for (std::size_t j = 0; j < m.cols(); ++j) {
        const double c = column_norm(m, j);
        if (c > cmax) {
            cmax = c;
            jmax = j;
        }
    }
    auto scaled = [&](double t) {
        DenseMatrix out = m;
        if (t <= 1.0) {
            // t = 1: every column rescaled to the rms norm (mu -> 1)
            for (std::size_t j = 0; j < out.cols(); ++j) {
                const double c = column_norm(out, j);
                if (c == 0.0) continue;
                const double s = (1.0 - t) + t * rms / c;
                for (std::size_t i = 0; i < out.rows(); ++i) out(i, j) *= s;
            }
        } else {
            for (std::size_t i = 0; i < out.rows(); ++i) out(i, jmax) *= t;
        }
        return out;
    };
    if (mu0 > target) {
        // mu decreases continuously from mu0 at t = 0 to ~1 at t = 1
        double lo_t = 0.0, hi_t = 1.0;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo_t + hi_t);
            if (spikiness(scaled(mid)) > target)
                lo_t = mid;
            else
                hi_t = mid;
        }
        return scaled(0.5 * (lo_t + hi_t));
    }
    // mu increases continuously in the boost factor t >= 1 toward sqrt(d2)
    double lo_t = 1.0, hi_t = 2.0;
    while (spikiness(scaled(hi_t)) < target && hi_t < 1e6) hi_t *= 2.0;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo_t + hi_t);
        if (spikiness(scaled(mid)) < target)
            lo_t = mid;
        else
            hi_t = mid;
    }
    return scaled(0.5 * (lo_t + hi_t));
}

ExperimentReport run(const ExperimentSpec& spec) {
    spec.validate();
    if (spec.kind != ExperimentKind::RecoverySweep)
        throw Error("run: only recovery-sweep experiments execute the solve loop");

    std::vector<Cell> cells;
    std::size_t idx = 0;
    for (std::size_t d1 : spec.d1_list)
        for (std::size_t d2 : spec.d2_list)
            for (std::size_t r : spec.r_list)
                for (std::size_t ln : spec.l_or_n_list)
                    for (double s : spec.sigma_list) cells.push_back({idx++, d1, d2, r, ln, s});

    ExperimentReport rep;
    rep.rows.resize(cells.size() * spec.trials);
    std::atomic<std::size_t> next{0};
    const unsigned nthreads =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                        static_cast<unsigned>(cells.size())));
    auto worker = [&] {
        for (;;) {
            const std::size_t c = next.fetch_add(1);
            if (c >= cells.size()) return;
            for (std::size_t t = 0; t < spec.trials; ++t)
                rep.rows[c * spec.trials + t] = run_trial(spec, cells[c], t);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned i = 0; i + 1 < nthreads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();

    for (const auto& row : rep.rows)
        if (row.failed) ++rep.failed_rows;

    // Slope of log(mean squared error) vs log(L_or_n * d2) over cells with a
    // common (d1, d2, r, sigma); fitted only when the sweep has >= 3 sizes.
    if (spec.l_or_n_list.size() >= 3) {
        std::vector<double> xs, ys;
        for (const Cell& cell : cells) {
            double mean = 0.0;
            std::size_t cnt = 0;
            for (std::size_t t = 0; t < spec.trials; ++t) {
                const auto& row = rep.rows[cell.index * spec.trials + t];
                if (!row.failed) {
                    mean += row.err_fro_sq;
                    ++cnt;
                }
            }
            if (cnt == 0) continue;
            mean /= static_cast<double>(cnt);
            if (mean <= 0.0) continue;
            xs.push_back(static_cast<double>(cell.l_or_n * cell.d2));
            ys.push_back(mean);
        }
        if (xs.size() >= 3) {
            rep.slope = fit_slope(xs, ys);
            rep.slope_valid = true;
        }
    }
    return rep;
}

SlopeFit fit_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 3)
        throw Error("fit_slope: need >= 3 (x, y) pairs");
    const std::size_t n = xs.size();
    std::vector<double> lx(n), ly(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (xs[i] <= 0.0 || ys[i] <= 0.0) throw Error("fit_slope: values must be positive");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
    }
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (sxx == 0.0) throw Error("fit_slope: x values are all identical");
    SlopeFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

std::string render_report(const ExperimentReport& rep, const std::string& format) {
    if (format == "csv") {
        std::ostringstream os;
        os << "d1,d2,r,L_or_n,sigma,alpha,mu,snr,trial,err_fro_sq,err_norm,rate_sketch,"
              "minimax_lb,seed,wall_ms\n";
        for (const auto& r : rep.rows) {
            os << r.d1 << ',' << r.d2 << ',' << r.r << ',' << r.l_or_n << ','
               << fmt_double(r.sigma) << ',' << fmt_double(r.alpha) << ',' << fmt_double(r.mu)
               << ',' << fmt_double(r.snr) << ',' << r.trial << ',' << fmt_double(r.err_fro_sq)
               << ',' << fmt_double(r.err_norm) << ',' << fmt_double(r.rate_sketch) << ','
               << fmt_double(r.minimax_lb) << ',' << r.seed << ',' << fmt_double(r.wall_ms)
               << '\n';
        }
        return os.str();
    }
    if (format == "json") {
        nlohmann::json j;
        j["rows"] = nlohmann::json::array();
        for (const auto& r : rep.rows) {
            nlohmann::json row = {
                {"d1", r.d1},         {"d2", r.d2},
                {"r", r.r},           {"L_or_n", r.l_or_n},
                {"sigma", r.sigma},   {"alpha", r.alpha},
                {"mu", r.mu},         {"snr", r.snr},
                {"trial", r.trial},   {"err_fro_sq", r.err_fro_sq},
                {"err_norm", r.err_norm}, {"rate_sketch", r.rate_sketch},
                {"minimax_lb", r.minimax_lb}, {"seed", r.seed},
                {"wall_ms", r.wall_ms}, {"failed", r.failed},
            };
            if (r.failed) row["error"] = r.error;
            j["rows"].push_back(std::move(row));
        }
        if (rep.slope_valid)
            j["slope_fit"] = {{"slope", rep.slope.slope},
                              {"intercept", rep.slope.intercept},
                              {"r2", rep.slope.r2}};
        j["failed_rows"] = rep.failed_rows;
        return j.dump(2) + "\n";
    }
    if (format == "plotdata") {
        // mean squared error per cell: x = L_or_n, series keyed by the rest
        std::ostringstream os;
        os << "x,y,series\n";
        // rows arrive cell-sorted; aggregate consecutive rows of one cell
        std::size_t i = 0;
        while (i < rep.rows.size()) {
            const auto& head = rep.rows[i];
            double mean = 0.0;
            std::size_t cnt = 0, j = i;
            for (; j < rep.rows.size(); ++j) {
                const auto& r = rep.rows[j];
                if (r.d1 != head.d1 || r.d2 != head.d2 || r.r != head.r ||
                    r.l_or_n != head.l_or_n || r.sigma != head.sigma)
                    break;
                if (!r.failed) {
                    mean += r.err_fro_sq;
                    ++cnt;
                }
            }
            if (cnt > 0) {
                os << head.l_or_n << ',' << fmt_double(mean / static_cast<double>(cnt)) << ','
                   << "d1=" << head.d1 << ";d2=" << head.d2 << ";r=" << head.r
                   << ";sigma=" << fmt_double(head.sigma) << '\n';
            }
            i = j;
        }
        return os.str();
    }
    throw Error("render_report: unknown format " + format);
}

void emit(const ExperimentReport& rep, const std::string& format, const std::string& path) {
    const std::string body = render_report(rep, format);
    const std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    const std::filesystem::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("emit: cannot write " + tmp.string());
        out << body;
        if (!out.good()) throw Error("emit: write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, target);
}

ExperimentSpec spec_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw Error(std::string("spec_from_json: parse error: ") + e.what());
    }
    ExperimentSpec spec;
    auto kind_str = j.value("kind", std::string("recovery-sweep"));
    if (kind_str == "norm-check")
        spec.kind = ExperimentKind::NormCheck;
    else if (kind_str == "recovery-sweep")
        spec.kind = ExperimentKind::RecoverySweep;
    else if (kind_str == "theta-gamma")
        spec.kind = ExperimentKind::ThetaGamma;
    else if (kind_str == "minimax")
        spec.kind = ExperimentKind::Minimax;
    else if (kind_str == "packing-verify")
        spec.kind = ExperimentKind::PackingVerify;
    else
        throw Error("spec_from_json: unknown kind " + kind_str);

    const auto ens_str = j.value("ensemble", std::string("sketching"));
    if (ens_str == "sketching")
        spec.ensemble = EnsembleKind::Sketching;
    else if (ens_str == "completion")
        spec.ensemble = EnsembleKind::Completion;
    else
        throw Error("spec_from_json: unknown ensemble " + ens_str);

    const auto norm_str = j.value("norm", std::string("mixed"));
    if (norm_str == "mixed")
        spec.norm_kind = NormKind::MixedRegime;
    else if (norm_str == "max")
        spec.norm_kind = NormKind::MaxRegime;
    else
        throw Error("spec_from_json: unknown norm " + norm_str);

    auto size_list = [&](const char* key) {
        std::vector<std::size_t> out;
        if (!j.contains(key)) throw Error(std::string("spec_from_json: missing key ") + key);
        const auto& v = j.at(key);
        if (v.is_array())
            for (const auto& e : v) out.push_back(e.get<std::size_t>());
        else
            out.push_back(v.get<std::size_t>());
        return out;
    };
    spec.d1_list = size_list("d1");
    spec.d2_list = size_list("d2");
    spec.r_list = size_list("r");
    spec.l_or_n_list = size_list("L_or_n");
    if (j.contains("sigma")) {
        const auto& v = j.at("sigma");
        if (v.is_array())
            for (const auto& e : v) spec.sigma_list.push_back(e.get<double>());
        else
            spec.sigma_list.push_back(v.get<double>());
    } else {
        spec.sigma_list = {0.0};
    }

    if (j.contains("alpha")) {
        const auto& a = j.at("alpha");
        if (a.is_string()) {
            if (a.get<std::string>() != "exact")
                throw Error("spec_from_json: alpha must be a number or \"exact\"");
            spec.alpha_rule.exact = true;
        } else {
            spec.alpha_rule.exact = false;
            spec.alpha_rule.value = a.get<double>();
        }
    }
    spec.m0_scale = j.value("m0_scale", 1.0);
    spec.target_mu = j.value("target_mu", 0.0);
    spec.trials = j.value("trials", std::size_t{1});
    spec.master_seed = j.value("master_seed", std::uint64_t{0});
    spec.out_dir = j.value("out_dir", std::string());
    spec.full_coverage_debug = j.value("full_coverage_debug", false);
    if (j.contains("solver")) {
        const auto& s = j.at("solver");
        spec.solver.max_outer_iters = s.value("max_outer_iters", spec.solver.max_outer_iters);
        spec.solver.restarts = s.value("restarts", spec.solver.restarts);
        spec.solver.factor_rank = s.value("factor_rank", spec.solver.factor_rank);
        spec.solver.feasibility_tol = s.value("feasibility_tol", spec.solver.feasibility_tol);
        const auto rule = s.value("step_rule", std::string("backtracking"));
        if (rule == "backtracking")
            spec.solver.step_rule = StepRule::Backtracking;
        else if (rule == "fixed")
            spec.solver.step_rule = StepRule::Fixed;
        else
            throw Error("spec_from_json: unknown step_rule " + rule);
    }
    spec.validate();
    return spec;
}

}  // namespace lrtn
