// scfd: experiments on self-conformal measures from a single config file.
// Every subcommand reads one config, writes CSVs plus report.txt into
// out_dir, and exits 0 (ok), 1 (config error), 2 (validation failure) or
// 3 (runtime failure).

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "scfd/cocycle.hpp"
#include "scfd/config.hpp"
#include "scfd/csv.hpp"
#include "scfd/dio.hpp"
#include "scfd/ifs.hpp"
#include "scfd/limits.hpp"
#include "scfd/measure.hpp"
#include "scfd/transfer.hpp"

namespace fs = std::filesystem;
using namespace scfd;

namespace {

struct RunContext {
    std::string subcommand;
    Config cfg;
    Ifs ifs;
    fs::path out_dir;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::vector<std::string> files;
    std::vector<std::string> notes;
    std::chrono::steady_clock::time_point start;

    fs::path out(const std::string& name) {
        files.push_back(name);
        return out_dir / name;
    }
    void note(const std::string& line) { notes.push_back(line); }
};

void write_report(RunContext& ctx) {
    std::ofstream rep(ctx.out_dir / "report.txt", std::ios::binary);
    rep << "subcommand: " << ctx.subcommand << "\n";
    rep << "run-hash: " << sha1_hex(ctx.subcommand + "\n" + ctx.cfg.source())
        << "\n";
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - ctx.start)
                        .count();
    rep << "wall-time-ms: " << ms << "\n";
    for (const auto& n : ctx.notes) rep << n << "\n";
    rep << "files:\n";
    for (const auto& f : ctx.files) rep << "  " << f << "\n";
    rep << "config:\n";
    std::istringstream src(ctx.cfg.source());
    for (std::string line; std::getline(src, line);) rep << "  " << line << "\n";
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// chi and r0^2, exact when possible, derived-seed Monte Carlo otherwise;
// the same derivation the library estimators use internally.
std::pair<double, double> walk_constants(const RunContext& ctx) {
    return scfd::detail::walk_constants(ctx.ifs, ctx.seed, ctx.workers);
}

// ---------------------------------------------------------------------------
// subcommand bodies
// ---------------------------------------------------------------------------
void run_validate(RunContext& ctx, const ValidationReport& rep) {
    CsvWriter csv(ctx.out("validate.csv").string(),
                  {"check", "pass", "witness", "detail"});
    for (const auto& c : rep.checks)
        csv.row() << c.name << (c.pass ? "1" : "0") << c.witness << c.detail;
    ctx.note("rho: " + fmt(rep.rho));
    ctx.note("D: " + fmt(rep.D));
    ctx.note("D-prime: " + fmt(rep.Dprime));
    ctx.note(std::string("valid: ") + (rep.ok() ? "yes" : "no"));
}

void run_fourier(RunContext& ctx) {
    const auto grid = grid_from_config(ctx.cfg, "q");
    const std::string method = ctx.cfg.text_or("method", "mc");
    const auto count = static_cast<std::size_t>(ctx.cfg.integer_or("samples", 100000));
    CsvWriter csv(ctx.out("fourier.csv").string(),
                  {"q", "re", "im", "modulus", "stderr", "depth"});
    for (double q : grid) {
        if (method == "ss") {
            const auto v = fourier_ss(ctx.ifs, q,
                                      ctx.cfg.number_or("tol", 1e-8));
            csv.row() << q << v.real() << v.imag() << std::abs(v) << 0.0 << 0;
        } else {
            int depth = static_cast<int>(ctx.cfg.integer_or("depth", 0));
            if (depth == 0)
                depth = min_depth_for_frequency(ctx.ifs, q) + 2;
            MeasureSampler s{ctx.ifs, depth, ctx.seed, count, ctx.workers};
            const auto est = fourier_mc(s, q);
            csv.row() << q << est.value.real() << est.value.imag()
                      << est.modulus() << est.stderr_bound << est.depth;
        }
    }
}

void run_decay_fit(RunContext& ctx) {
    const auto grid = grid_from_config(ctx.cfg, "q");
    const auto count = static_cast<std::size_t>(ctx.cfg.integer_or("samples", 100000));
    const auto fit = decay_fit(ctx.ifs, grid, count, ctx.seed, ctx.workers);
    {
        CsvWriter pts(ctx.out("fourier.csv").string(),
                      {"q", "re", "im", "modulus", "stderr", "depth"});
        for (const auto& p : fit.points)
            pts.row() << p.q << 0.0 << 0.0 << p.modulus << p.stderr_bound
                      << p.depth;
    }
    CsvWriter csv(ctx.out("decay_fit.csv").string(),
                  {"alpha_hat", "C_hat", "rms", "noise_floor", "n_points"});
    csv.row() << fit.alpha_hat << fit.c_hat << fit.rms << fit.noise_floor
              << fit.n_points_used;
    ctx.note("resolved: " + std::string(fit.resolved ? "yes" : "no"));
    if (!fit.resolved)
        throw std::runtime_error("decay unresolvable at this N");
}

void run_walk(RunContext& ctx) {
    const int steps = static_cast<int>(ctx.cfg.integer_or("walk_steps", 100));
    const int traj = static_cast<int>(ctx.cfg.integer_or("walk_trajectories", 16));
    CsvWriter csv(ctx.out("walk.csv").string(), {"trajectory_id", "n", "S_n"});
    const CategoricalSampler cat(ctx.ifs.p);
    for (int t = 0; t < traj; ++t) {
        Xoshiro256 rng(ctx.seed, static_cast<std::uint64_t>(t));
        const Word w = random_word(ctx.ifs, steps + kDefaultTail, cat, rng);
        const auto s = walk_prefix_sums(ctx.ifs, w);
        for (int n = 1; n <= steps; ++n)
            csv.row() << t << n << s[n - 1];
    }
}

void run_clt(RunContext& ctx) {
    const auto grid = grid_from_config(ctx.cfg, "n");
    std::string method = ctx.cfg.text_or("method", "auto");
    if (method == "auto")
        method = (ctx.ifs.all_affine() && ctx.ifs.alphabet() == 2) ? "exact"
                                                                   : "mc";
    const auto count = static_cast<std::size_t>(ctx.cfg.integer_or("samples", 200000));
    CsvWriter csv(ctx.out("clt.csv").string(),
                  {"n", "kolmogorov_distance", "method"});
    for (double nd : grid) {
        const int n = static_cast<int>(nd);
        const double d =
            method == "exact"
                ? clt_error(ctx.ifs, n, CltMethod::ExactTwoPointAffine, 0, 0)
                : clt_error(ctx.ifs, n, CltMethod::Empirical, count, ctx.seed,
                            ctx.workers);
        csv.row() << n << d << method;
    }
}

void run_llt(RunContext& ctx) {
    const auto grid = grid_from_config(ctx.cfg, "n");
    const auto c = ctx.cfg.numbers("c_interval");
    if (c.size() != 2) throw ConfigError("config: c_interval = [lo, hi]");
    const double v = ctx.cfg.number_or("v", 0.0);
    const double R = ctx.cfg.number_or("R", 2.0);
    const auto count = static_cast<std::size_t>(ctx.cfg.integer_or("samples", 1000000));
    const auto [chi, var] = walk_constants(ctx);
    CsvWriter csv(ctx.out("llt.csv").string(),
                  {"n", "v", "c_lo", "c_hi", "mass", "gn", "ratio", "stderr"});
    for (double nd : grid) {
        const int n = static_cast<int>(nd);
        const auto rep = llt_ratio(ctx.ifs, Word(30, 0), n, c[0], c[1], v,
                                   count, ctx.seed, ctx.workers, R, chi, var);
        csv.row() << n << rep.v << rep.c_lo << rep.c_hi << rep.mass << rep.gn
                  << rep.ratio << rep.stderr_ratio;
        if (rep.lattice_warning)
            ctx.note("lattice-warning: n=" + std::to_string(n) +
                     " interval shorter than 4x lattice span " +
                     fmt(rep.lattice_span));
    }
    ctx.note("chi: " + fmt(chi));
    ctx.note("r0: " + fmt(std::sqrt(var)));
}

void run_smooth_llt(RunContext& ctx) {
    const auto c = ctx.cfg.numbers("c_interval");
    if (c.size() != 2) throw ConfigError("config: c_interval = [lo, hi]");
    const double eps = ctx.cfg.number_or("eps", 0.1);
    const auto grid = grid_from_config(ctx.cfg, "n");
    const auto count = static_cast<std::size_t>(ctx.cfg.integer_or("samples", 400000));
    CsvWriter csv(ctx.out("smooth_llt.csv").string(),
                  {"n", "eps", "c_lo", "c_hi", "lhs", "rhs", "diff", "stderr"});
    for (double nd : grid) {
        const int n = static_cast<int>(nd);
        const auto r = smooth_llt(ctx.ifs, Word(30, 0), n, c[0], c[1], eps,
                                  count, ctx.seed, ctx.workers,
                                  ctx.cfg.flag_or("paper_literal_gaussian", false));
        csv.row() << n << eps << c[0] << c[1] << r.lhs << r.rhs << r.diff
                  << r.stderr_lhs;
    }
}

void run_cllt(RunContext& ctx) {
    const auto kgrid = grid_from_config(ctx.cfg, "k");
    const double h_prime = ctx.cfg.number("h_prime");
    std::vector<double> jfrac{0.0, 0.5};
    if (ctx.cfg.has("j_fraction")) jfrac = ctx.cfg.numbers("j_fraction");
    if (jfrac.size() != 2) throw ConfigError("config: j_fraction = [lo, hi]");
    const auto count = static_cast<std::size_t>(ctx.cfg.integer_or("samples", 1000000));
    const auto min_cell =
        static_cast<std::size_t>(ctx.cfg.integer_or("min_cell_count", 1000));
    const auto gamma_samples =
        static_cast<std::size_t>(ctx.cfg.integer_or("gamma_samples", 40000));
    const double chi = walk_constants(ctx).first;

    CsvWriter csv(ctx.out("cllt.csv").string(),
                  {"k", "h_prime", "cell_label", "count", "emp_prob",
                   "gamma_prob", "abs_err"});
    CsvWriter cells(ctx.out("cells.csv").string(),
                    {"label", "count", "k", "h_prime"});
    for (double k : kgrid) {
        const double j_lo = k * chi + jfrac[0] * ctx.ifs.Dprime;
        const double j_hi = k * chi + jfrac[1] * ctx.ifs.Dprime;
        const auto rep =
            conditional_llt(ctx.ifs, k, h_prime, j_lo, j_hi, count, ctx.seed,
                            ctx.workers, min_cell, gamma_samples, chi);
        for (const auto& cell : rep.cells) {
            const std::string label = format_word(cell.label, ctx.ifs.alphabet());
            csv.row() << k << h_prime << label << cell.count << cell.emp_prob
                      << cell.gamma_prob << cell.abs_err;
            cells.row() << label << cell.count << k << h_prime;
        }
        ctx.note("k=" + fmt(k) + " weighted-error: " + fmt(rep.weighted_error) +
                 " retained-fraction: " + fmt(rep.retained_fraction) +
                 " cells: " + std::to_string(rep.n_cells_retained) + "/" +
                 std::to_string(rep.n_cells_seen));
    }
    ctx.note("chi: " + fmt(chi));
}

void run_operator_eigen(RunContext& ctx) {
    const auto grid = ctx.cfg.numbers("theta_grid");
    const int depth = static_cast<int>(
        ctx.cfg.integer_or("depth", ctx.ifs.alphabet() <= 3 ? 8 : 5));
    const bool recentred = ctx.cfg.flag_or("recentred", false);
    const double chi = recentred ? walk_constants(ctx).first : 0.0;
    CylinderSpace space(ctx.ifs, depth);
    CsvWriter csv(ctx.out("eigen.csv").string(),
                  {"theta", "re_lambda", "im_lambda", "iterations"});
    for (double theta : grid) {
        TransferOperator op(space, theta, recentred, chi);
        const auto eig = leading_eigen(op);
        csv.row() << theta << eig.lambda.real() << eig.lambda.imag()
                  << eig.iterations;
    }
}

void run_dolgopyat(RunContext& ctx) {
    const auto grid = grid_from_config(ctx.cfg, "theta");
    const double beta = ctx.cfg.number_or("beta", 2.0);
    const int depth = static_cast<int>(
        ctx.cfg.integer_or("depth", ctx.ifs.alphabet() <= 3 ? 8 : 5));
    const int probes = static_cast<int>(ctx.cfg.integer_or("probes", 64));
    CylinderSpace space(ctx.ifs, depth);
    const auto cal =
        c6_calibrate(space, grid, static_cast<int>(ctx.cfg.integer_or("c6_n_max", 12)),
                     static_cast<int>(ctx.cfg.integer_or("c6_probes", 16)), ctx.seed);
    ctx.note("c6: " + fmt(cal.c6) + " (start " + fmt(cal.start) + ", doublings " +
             std::to_string(cal.doublings) + ")");
    const auto rep = dolgopyat_check(space, grid, beta, cal.c6, probes, ctx.seed);
    CsvWriter csv(ctx.out("dolgopyat.csv").string(),
                  {"theta", "n_beta_theta", "norm_estimate", "one_minus_norm"});
    for (const auto& row : rep.rows)
        csv.row() << row.theta << row.n << row.norm_estimate
                  << 1.0 - row.norm_estimate;
    if (rep.fit_ok) {
        ctx.note("C_hat: " + fmt(rep.c_hat));
        ctx.note("alpha_hat: " + fmt(rep.alpha_hat));
    } else {
        ctx.note("fit: no usable gap (resonant or homogeneous phases)");
    }
}

void run_dio(RunContext& ctx) {
    const std::string mode = ctx.cfg.text_or("dio_mode", "inf-y");
    std::vector<double> t;
    if (ctx.cfg.has("ratio_logs")) t = ctx.cfg.numbers("ratio_logs");
    else t = ratio_logs(ctx.ifs);
    const double x_min = ctx.cfg.number_or("x_min", 10.0);
    const double x_max = ctx.cfg.number_or("x_max", 1e4);
    const int grid = static_cast<int>(ctx.cfg.integer_or("scan_grid", 256));
    const int bins = static_cast<int>(ctx.cfg.integer_or("scan_bins", 24));
    const auto prof = dio_scan(t, x_min, x_max, grid, bins, mode != "ls");
    CsvWriter csv(ctx.out("dio.csv").string(), {"x", "distance"});
    for (const auto& pt : prof.points) csv.row() << pt.x << pt.distance;
    ctx.note("classification: " + prof.classification +
             " (over scan range [" + fmt(x_min) + ", " + fmt(x_max) + "])");
    if (!prof.non_diophantine) {
        ctx.note("ell_hat: " + fmt(prof.ell_hat));
        ctx.note("C_hat: " + fmt(prof.c_hat));
    }
}

void run_linearity(RunContext& ctx) {
    const int n_max = static_cast<int>(ctx.cfg.integer_or("n_max", 16));
    const auto trend = linearity_trend(
        ctx.ifs, n_max, static_cast<int>(ctx.cfg.integer_or("word_pairs", 48)),
        static_cast<int>(ctx.cfg.integer_or("attractor_points", 48)), ctx.seed);
    CsvWriter csv(ctx.out("linearity.csv").string(), {"n", "sup_value"});
    for (std::size_t i = 0; i < trend.n_values.size(); ++i)
        csv.row() << trend.n_values[i] << trend.sup_values[i];
    ctx.note(std::string("conjugate-to-linear signature: ") +
             (trend.decaying ? "yes (decaying)" : "no"));
}

void run_conjugate(RunContext& ctx) {
    const bool force = ctx.cfg.flag_or("force", false);
    const auto trend = linearity_trend(ctx.ifs, 16, 32, 32, ctx.seed);
    if (!trend.decaying && !force)
        throw std::runtime_error(
            "linearity_sup trend does not decay; the system does not look "
            "conjugate to linear (set force = true to build anyway)");
    const int grid = static_cast<int>(ctx.cfg.integer_or("grid", 1000));
    const auto res = conjugacy_construct(ctx.ifs, grid);
    if (!res.monotone)
        throw std::runtime_error("conjugacy_construct: h is not monotone");
    CsvWriter csv(ctx.out("conjugacy.csv").string(),
                  {"x", "phi1", "h", "residual_g2"});
    for (std::size_t i = 0; i < res.grid_x.size(); ++i)
        csv.row() << res.grid_x[i] << res.phi1[i] << res.h[i]
                  << res.residual_g2[i];
    ctx.note("sup_g2: " + fmt(res.sup_g2));
    for (std::size_t i = 0; i < res.sup_g2_per_map.size(); ++i)
        ctx.note("sup_g2_map_" + std::to_string(i + 1) + ": " +
                 fmt(res.sup_g2_per_map[i]));
}

void run_decay_pipeline(RunContext& ctx) {
    const auto grid = grid_from_config(ctx.cfg, "q");
    const double delta0 = ctx.cfg.number("delta0");
    const double beta = ctx.cfg.number_or("beta", 0.5);
    const auto count = static_cast<std::size_t>(ctx.cfg.integer_or("samples", 100000));
    const double chi = walk_constants(ctx).first;

    // Frostman exponent, one regression up front
    std::vector<double> radii;
    for (int j = 0; j < 8; ++j) radii.push_back(0.1 * std::pow(0.5, j));
    const auto frost = frostman_fit(ctx.ifs, radii,
                                    std::min<std::size_t>(count, 200000),
                                    ctx.seed ^ 0xf205ddULL, ctx.workers);
    ctx.note("frostman_d_hat: " + fmt(frost.d_hat));

    CsvWriter csv(ctx.out("decay_pipeline.csv").string(),
                  {"q", "k", "h_prime", "r", "modulus", "stderr", "depth",
                   "bound_linearization", "bound_llt", "bound_oscillatory"});
    std::vector<double> moduli;
    for (double q : grid) {
        // k solves |q| = k^{delta0/4} e^{(k + sqrt(k)) chi}
        const auto f = [&](double k) {
            return 0.25 * delta0 * std::log(k) + (k + std::sqrt(k)) * chi -
                   std::log(std::abs(q));
        };
        double lo = 1e-9, hi = 1.0;
        while (f(hi) < 0.0 && hi < 1e6) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (f(mid) < 0.0 ? lo : hi) = mid;
        }
        const double k = 0.5 * (lo + hi);
        const double h_prime = std::sqrt(k);
        const double r = std::pow(k, -delta0 / 8.0);

        const int depth = min_depth_for_frequency(ctx.ifs, q) + 2;
        MeasureSampler s{ctx.ifs, depth, ctx.seed, count, ctx.workers};
        const auto est = fourier_mc(s, q);
        moduli.push_back(est.modulus());

        const double qeff = std::abs(q) * std::exp(-(k + h_prime) * chi);
        const double bound_lin = qeff * std::exp(-beta * h_prime * chi);
        const double bound_llt =
            2.0 / qeff + qeff * qeff * std::pow(k, -delta0);
        const double bound_osc =
            1.0 / (r * qeff) + frost.c_hat * std::pow(r, frost.d_hat);
        csv.row() << q << k << h_prime << r << est.modulus() << est.stderr_bound
                  << est.depth << bound_lin << bound_llt << bound_osc;
    }

    // diagnostic fit of the measured moduli in log-log-log coordinates
    const double floor = 3.0 / std::sqrt(static_cast<double>(count));
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (moduli[i] <= floor || grid[i] <= std::exp(1.0)) continue;
        const double x = std::log(std::log(grid[i]));
        const double y = std::log(moduli[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++n;
    }
    if (n >= 2 && std::abs(n * sxx - sx * sx) > 1e-30) {
        const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        ctx.note("alpha_hat: " + fmt(-slope));
        ctx.note("fit_points: " + std::to_string(n));
    } else {
        ctx.note("alpha_hat: unresolved (points at noise floor)");
    }
    ctx.note("chi: " + fmt(chi));
}

int dispatch(RunContext& ctx) {
    const auto rep = validate(ctx.ifs);
    if (ctx.subcommand == "validate") {
        run_validate(ctx, rep);
        write_report(ctx);
        if (!rep.ok()) {
            std::cerr << "validation failed\n";
            return 2;
        }
        return 0;
    }
    if (!rep.ok()) {
        for (const auto& c : rep.checks)
            if (!c.pass)
                std::cerr << "validation: " << c.name << " failed ("
                          << c.detail << ")\n";
        return 2;
    }

    try {
        if (ctx.subcommand == "fourier") run_fourier(ctx);
        else if (ctx.subcommand == "decay-fit") run_decay_fit(ctx);
        else if (ctx.subcommand == "walk") run_walk(ctx);
        else if (ctx.subcommand == "clt") run_clt(ctx);
        else if (ctx.subcommand == "llt") run_llt(ctx);
        else if (ctx.subcommand == "smooth-llt") run_smooth_llt(ctx);
        else if (ctx.subcommand == "cllt") run_cllt(ctx);
        else if (ctx.subcommand == "operator-eigen") run_operator_eigen(ctx);
        else if (ctx.subcommand == "dolgopyat") run_dolgopyat(ctx);
        else if (ctx.subcommand == "dio") run_dio(ctx);
        else if (ctx.subcommand == "linearity") run_linearity(ctx);
        else if (ctx.subcommand == "conjugate") run_conjugate(ctx);
        else if (ctx.subcommand == "decay-pipeline") run_decay_pipeline(ctx);
        else {
            std::cerr << "unknown subcommand " << ctx.subcommand << "\n";
            return 1;
        }
    } catch (const ResolutionError& e) {
        write_report(ctx);
        std::cerr << "runtime: " << e.what() << "\n";
        return 3;
    } catch (const DegenerateVarianceError& e) {
        write_report(ctx);
        std::cerr << "runtime: " << e.what() << "\n";
        return 3;
    } catch (const WordTooShortError& e) {
        write_report(ctx);
        std::cerr << "runtime: " << e.what() << "\n";
        return 3;
    } catch (const std::runtime_error& e) {
        write_report(ctx);
        std::cerr << "runtime: " << e.what() << "\n";
        return 3;
    }
    write_report(ctx);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"numerics for self-conformal measures and their Fourier decay"};
    app.require_subcommand(1);

    const std::vector<std::string> names{
        "validate",  "fourier",   "decay-fit",      "walk",
        "clt",       "llt",       "smooth-llt",     "cllt",
        "operator-eigen", "dolgopyat", "dio",       "linearity",
        "conjugate", "decay-pipeline"};
    std::map<std::string, std::string> config_paths;
    for (const auto& name : names) {
        auto* sub = app.add_subcommand(name, "");
        sub->add_option("config", config_paths[name], "run configuration file")
            ->required()
            ->check(CLI::ExistingFile);
    }

    CLI11_PARSE(app, argc, argv);

    RunContext ctx;
    ctx.start = std::chrono::steady_clock::now();
    ctx.subcommand = app.get_subcommands().front()->get_name();
    const std::string path = config_paths[ctx.subcommand];

    try {
        std::ifstream in(path, std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        ctx.cfg = parse_config(buf.str());
        ctx.ifs = ifs_from_config(ctx.cfg);
        if (!ctx.cfg.has("seed"))
            throw ConfigError("config: 'seed' is mandatory");
        ctx.seed = static_cast<std::uint64_t>(ctx.cfg.integer("seed"));
        ctx.workers = static_cast<unsigned>(
            ctx.cfg.integer_or("workers", default_workers()));
        ctx.out_dir = ctx.cfg.text_or("out_dir", ".");
        fs::create_directories(ctx.out_dir);
    } catch (const ConfigError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "config: " << e.what() << "\n";
        return 1;
    }

    return dispatch(ctx);
}
