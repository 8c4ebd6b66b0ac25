// Command-line front end: norm evaluation, single solves, experiment sweeps,
// bound evaluation, and packing construction, all driven by JSON configs.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "lrtn/bounds.hpp"
#include "lrtn/estimator.hpp"
#include "lrtn/harness.hpp"
#include "lrtn/matrix.hpp"
#include "lrtn/measurements.hpp"
#include "lrtn/norms.hpp"
#include "lrtn/rng.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRowFailures = 3;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw lrtn::Error("cannot read config file " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_output(const std::string& body, const std::string& out) {
    if (out.empty()) {
        std::cout << body;
        return;
    }
    std::ofstream f(out + ".tmp", std::ios::binary | std::ios::trunc);
    if (!f) throw lrtn::Error("cannot write " + out);
    f << body;
    f.close();
    std::filesystem::rename(out + ".tmp", out);
}

lrtn::DenseMatrix matrix_from_config(const nlohmann::json& j, std::uint64_t seed) {
    if (j.contains("matrix")) {
        const auto& rows = j.at("matrix");
        const std::size_t d1 = rows.size();
        if (d1 == 0) throw lrtn::Error("matrix: needs at least one row");
        const std::size_t d2 = rows.at(0).size();
        lrtn::DenseMatrix m(d1, d2);
        for (std::size_t i = 0; i < d1; ++i) {
            if (rows.at(i).size() != d2) throw lrtn::Error("matrix: ragged rows");
            for (std::size_t jj = 0; jj < d2; ++jj) m(i, jj) = rows.at(i).at(jj).get<double>();
        }
        return m;
    }
    const std::size_t d1 = j.at("d1").get<std::size_t>();
    const std::size_t d2 = j.at("d2").get<std::size_t>();
    const std::size_t r = j.value("r", std::size_t{1});
    lrtn::RngStream rng(seed, "cli-matrix");
    return lrtn::random_rank_r(d1, d2, r, rng);
}

int cmd_norms(const nlohmann::json& cfg, std::uint64_t seed, const std::string& out) {
    using namespace lrtn;
    DenseMatrix m = matrix_from_config(cfg, seed);
    const std::size_t r = cfg.value("r", std::size_t{1});
    const double tol = cfg.value("tol", 1e-6);
    nlohmann::json res;
    res["d1"] = m.rows();
    res["d2"] = m.cols();
    res["op_norm_1to2"] = op_norm_1to2(m);
    res["inf_norm"] = inf_norm(m);
    for (NormKind kind : {NormKind::MixedRegime, NormKind::MaxRegime}) {
        NormBallSpec spec;
        spec.kind = kind;
        spec.rank_param = r;
        TnormResult t = tnorm_detail(m, spec, tol);
        nlohmann::json entry = {{"value", t.value},
                                {"branch_operator", t.branch_operator},
                                {"branch_factorization", t.branch_factorization},
                                {"upper_bound_only", t.upper_bound_only}};
        res[kind == NormKind::MixedRegime ? "tnorm_mixed" : "tnorm_max"] = entry;
    }
    write_output(res.dump(2) + "\n", out);
    return kExitOk;
}

int cmd_solve(const nlohmann::json& cfg, std::uint64_t seed, const std::string& out) {
    using namespace lrtn;
    const std::size_t d1 = cfg.at("d1").get<std::size_t>();
    const std::size_t d2 = cfg.at("d2").get<std::size_t>();
    const std::size_t r = cfg.value("r", std::size_t{1});
    const std::size_t l_or_n = cfg.at("L_or_n").get<std::size_t>();
    const double sigma = cfg.value("sigma", 0.0);

    RngStream m0rng(seed, "m0");
    DenseMatrix m0 = cfg.contains("matrix") ? matrix_from_config(cfg, seed)
                                            : random_rank_r(d1, d2, r, m0rng);
    const bool sketching = cfg.value("ensemble", std::string("sketching")) == "sketching";
    MeasurementEnsemble ens =
        sketching ? build_sketching(d1, d2, l_or_n, mix_seed(seed, 1, 0))
                  : build_completion(d1, d2, l_or_n, mix_seed(seed, 1, 0),
                                     cfg.value("full_coverage_debug", false));
    std::vector<double> y = apply(ens, m0);
    if (sigma > 0.0) y = add_noise(y, NoiseSpec{sigma, mix_seed(seed, 2, 0)});

    NormBallSpec ball;
    ball.kind = cfg.value("norm", std::string("mixed")) == "max" ? NormKind::MaxRegime
                                                                 : NormKind::MixedRegime;
    ball.rank_param = r;
    if (cfg.contains("alpha") && cfg.at("alpha").is_number())
        ball.alpha = cfg.at("alpha").get<double>();
    else
        ball.alpha = tnorm(m0, ball, 1e-5);

    SolverConfig scfg;
    if (cfg.contains("solver")) {
        const auto& s = cfg.at("solver");
        scfg.max_outer_iters = s.value("max_outer_iters", scfg.max_outer_iters);
        scfg.restarts = s.value("restarts", scfg.restarts);
        scfg.factor_rank = s.value("factor_rank", scfg.factor_rank);
        scfg.feasibility_tol = s.value("feasibility_tol", scfg.feasibility_tol);
    }
    scfg.seed = mix_seed(seed, 3, 0);
    SolveReport rep = solve_lasso(ens, y, ball, scfg);

    nlohmann::json res = nlohmann::json::parse(report_to_json(rep));
    const double err = frobenius_norm(rep.m_hat - m0);
    res["err_fro"] = err;
    const double fro = frobenius_norm(m0);
    res["err_rel"] = fro > 0.0 ? err / fro : 0.0;
    res["alpha"] = ball.alpha;
    write_output(res.dump(2) + "\n", out);
    return kExitOk;
}

int cmd_sweep(const nlohmann::json& cfg, std::optional<std::uint64_t> seed,
              const std::string& out) {
    using namespace lrtn;
    ExperimentSpec spec = spec_from_json(cfg.dump());
    if (seed) spec.master_seed = *seed;
    ExperimentReport rep = run(spec);
    const std::string format = cfg.value("format", std::string("csv"));
    if (!out.empty()) {
        emit(rep, format, out);
    } else if (!spec.out_dir.empty()) {
        emit(rep, "csv", spec.out_dir + "/sweep.csv");
        emit(rep, "json", spec.out_dir + "/sweep.json");
        emit(rep, "plotdata", spec.out_dir + "/sweep_plot.csv");
    } else {
        std::cout << render_report(rep, format);
    }
    if (rep.failed_rows > 0) {
        std::cerr << rep.failed_rows << " of " << rep.rows.size() << " rows failed\n";
        for (const auto& r : rep.rows)
            if (r.failed)
                std::cerr << "  cell d1=" << r.d1 << " d2=" << r.d2 << " r=" << r.r
                          << " L_or_n=" << r.l_or_n << " trial=" << r.trial << ": " << r.error
                          << "\n";
        return kExitRowFailures;
    }
    return kExitOk;
}

int cmd_minimax(const nlohmann::json& cfg, const std::string& out) {
    using namespace lrtn;
    auto list_of = [&](const char* key, double fallback) {
        std::vector<double> v;
        if (!cfg.contains(key)) {
            v.push_back(fallback);
            return v;
        }
        const auto& e = cfg.at(key);
        if (e.is_array())
            for (const auto& x : e) v.push_back(x.get<double>());
        else
            v.push_back(e.get<double>());
        return v;
    };
    const auto alphas = list_of("alpha", 1.0);
    const auto sigmas = list_of("sigma", 1.0);
    const auto ls = list_of("L", 4.0);
    const auto d1s = list_of("d1", 32.0);
    const auto d2s = list_of("d2", 32.0);
    const auto rs = list_of("r", 2.0);
    std::ostringstream os;
    os << "alpha,sigma,L,d1,d2,r,rate_sketch,minimax_lb,minimax_lb_alt,alt_applicable,"
          "conditions_met\n";
    for (double a : alphas)
        for (double s : sigmas)
            for (double l : ls)
                for (double d1 : d1s)
                    for (double d2 : d2s)
                        for (double r : rs) {
                            const auto mm = eval_minimax_lower(
                                a, s, static_cast<std::size_t>(l), static_cast<std::size_t>(d1),
                                static_cast<std::size_t>(d2), static_cast<std::size_t>(r));
                            const double rate = eval_sketch_rate(
                                a, s, static_cast<std::size_t>(d1), static_cast<std::size_t>(d2),
                                static_cast<std::size_t>(l), static_cast<std::size_t>(r));
                            os << a << ',' << s << ',' << l << ',' << d1 << ',' << d2 << ','
                               << r << ',' << rate << ',' << mm.value << ',' << mm.value_alt
                               << ',' << (mm.alt_applicable ? 1 : 0) << ','
                               << (mm.conditions_met ? 1 : 0) << '\n';
                        }
    write_output(os.str(), out);
    return kExitOk;
}

int cmd_packing(const nlohmann::json& cfg, std::uint64_t seed, const std::string& out) {
    using namespace lrtn;
    const std::size_t d1 = cfg.at("d1").get<std::size_t>();
    const std::size_t d2 = cfg.at("d2").get<std::size_t>();
    const std::size_t r = cfg.at("r").get<std::size_t>();
    const double gamma = cfg.value("gamma", 1.0);
    const double alpha = cfg.value("alpha", 1.0);
    const std::size_t count = cfg.value("count", std::size_t{2});
    RngStream rng(seed, "packing");
    PackingSet p = build_packing(d1, d2, r, gamma, alpha, count, rng);
    nlohmann::json res;
    res["count"] = p.matrices.size();
    res["block_rows"] = p.block_rows;
    res["gamma"] = p.gamma;
    res["alpha"] = p.alpha;
    res["cardinality_target"] = p.cardinality_target;
    res["log_cardinality_target"] = p.log_cardinality_target;
    res["min_separation_sq"] = p.min_separation_sq;
    res["required_separation_sq"] = gamma * gamma * alpha * alpha * static_cast<double>(d2) / 2.0;
    if (cfg.contains("sigma")) {
        const double sigma = cfg.at("sigma").get<double>();
        auto ens = build_completion(d1, d2, cfg.value("n", d1 * d2), mix_seed(seed, 9, 0));
        res["fano_lower"] = fano_lower(p, ens, sigma);
    }
    write_output(res.dump(2) + "\n", out);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-rank recovery from local measurements: norms, solves, sweeps, bounds"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    std::optional<std::uint64_t> seed_opt;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        auto* c = sub->add_option("--config", config_path, "JSON config file");
        if (config_required) c->required();
        sub->add_option("--seed", seed_opt, "override the seed");
        sub->add_option("--out", out_path, "output file (default: stdout)");
    };
    add_common(app.add_subcommand("norms", "evaluate all norms of a matrix"), true);
    add_common(app.add_subcommand("solve", "run a single constrained solve"), true);
    add_common(app.add_subcommand("sweep", "run an experiment grid"), true);
    add_common(app.add_subcommand("minimax", "evaluate rate and lower-bound formulas"), false);
    add_common(app.add_subcommand("packing", "construct and verify a packing set"), true);

    CLI11_PARSE(app, argc, argv);
    const std::string verb = app.get_subcommands().front()->get_name();

    nlohmann::json cfg = nlohmann::json::object();
    try {
        if (!config_path.empty()) cfg = nlohmann::json::parse(read_file(config_path));
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    const std::uint64_t seed = seed_opt.value_or(cfg.value("master_seed", std::uint64_t{0}));

    try {
        if (verb == "norms") return cmd_norms(cfg, seed, out_path);
        if (verb == "solve") return cmd_solve(cfg, seed, out_path);
        if (verb == "sweep") return cmd_sweep(cfg, seed_opt, out_path);
        if (verb == "minimax") return cmd_minimax(cfg, out_path);
        if (verb == "packing") return cmd_packing(cfg, seed, out_path);
    } catch (const lrtn::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
