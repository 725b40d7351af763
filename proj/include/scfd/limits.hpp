#ifndef SCFD_LIMITS_HPP
#define SCFD_LIMITS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <mutex>
#include <numbers>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cocycle.hpp"
#include "errors.hpp"
#include "ifs.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace scfd {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// ---------------------------------------------------------------------------
// Gaussian reference density for the centred n-step walk.
//
// The standard convention is the density of N(0, n r0^2), consistent with the
// CLT normalization (S_n - n chi)/sqrt(n) -> N(0, r0^2). The paper-literal
// convention e^{-v^2 r0^2 / 2n} / sqrt(2 pi n) is kept behind a flag; the two
// differ unless r0 = 1, and we do not guess which was intended.
// ---------------------------------------------------------------------------
struct GaussianModel {
    int n = 1;
    double r0 = 1.0;
    bool paper_literal = false;
};

inline double gaussian_density(const GaussianModel& g, double v) {
    if (g.n < 1) throw std::invalid_argument("gaussian_density: n >= 1");
    if (g.paper_literal)
        return std::exp(-v * v * g.r0 * g.r0 / (2.0 * g.n)) /
               std::sqrt(2.0 * std::numbers::pi * g.n);
    const double s2 = g.n * g.r0 * g.r0;
    return std::exp(-v * v / (2.0 * s2)) /
           (g.r0 * std::sqrt(2.0 * std::numbers::pi * g.n));
}

// ---------------------------------------------------------------------------
// Walk sampling shared by the estimators below. One sample of S_n for a
// random length-n word prepended to a fixed tail point.
// ---------------------------------------------------------------------------
namespace detail {

inline double sample_sn(const Ifs& ifs, int n, double x_tail,
                        const CategoricalSampler& cat, Xoshiro256& rng) {
    double x = x_tail;
    double prod = 1.0;
    double acc = 0.0;
    for (int j = 0; j < n; ++j) {
        const int s = cat(rng);
        prod *= ifs.maps[s].derivative(x);
        if (prod < 1e-250) { // avoid underflow on long words
            acc += std::log(prod);
            prod = 1.0;
        }
        x = ifs.maps[s](x);
    }
    return -(acc + std::log(prod));
}

// chi and r0^2 for estimators that were not handed them: exact for affine,
// derived-seed Monte Carlo otherwise.
inline std::pair<double, double> walk_constants(const Ifs& ifs,
                                                std::uint64_t seed,
                                                unsigned workers) {
    const McEstimate chi = lyapunov_chi(ifs, 200000, 64, seed ^ 0xc41e5a11ULL,
                                        workers);
    const VarianceEstimate var =
        variance_r0(ifs, 200000, 128, seed ^ 0x0beef5eedULL, workers);
    return {chi.value, var.value};
}

} // namespace detail

// ---------------------------------------------------------------------------
// Effective CLT: Kolmogorov distance between the normalized walk law and
// N(0, r0^2).
// ---------------------------------------------------------------------------
enum class CltMethod { ExactTwoPointAffine, Empirical };

// Exact sup-distance by atom enumeration for a two-map affine system. The
// walk is binomial: S_n = k c_1 + (n-k) c_2 with weight C(n,k) p1^k p2^{n-k}.
inline double clt_error_exact(const Ifs& ifs, int n) {
    if (!ifs.all_affine() || ifs.alphabet() != 2)
        throw std::invalid_argument(
            "clt_error_exact needs exactly two affine maps");
    const double c1 = -std::log(ifs.maps[0].coefficients()[1]);
    const double c2 = -std::log(ifs.maps[1].coefficients()[1]);
    const double p1 = ifs.p[0], p2 = ifs.p[1];
    const double chi = p1 * c1 + p2 * c2;
    const double var = p1 * c1 * c1 + p2 * c2 * c2 - chi * chi;
    if (var < 1e-10)
        throw DegenerateVarianceError("clt_error_exact: degenerate variance");
    const double r0 = std::sqrt(var);

    struct Atom {
        double z;
        double w;
    };
    std::vector<Atom> atoms(n + 1);
    for (int k = 0; k <= n; ++k) {
        const double logw = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                            std::lgamma(n - k + 1.0) + k * std::log(p1) +
                            (n - k) * std::log(p2);
        const double s = k * c1 + (n - k) * c2;
        atoms[k] = {(s - n * chi) / std::sqrt(static_cast<double>(n)),
                    std::exp(logw)};
    }
    std::sort(atoms.begin(), atoms.end(),
              [](const Atom& a, const Atom& b) { return a.z < b.z; });
    double dist = 0.0, cum = 0.0;
    for (const auto& a : atoms) {
        const double g = normal_cdf(a.z / r0);
        dist = std::max(dist, g - cum); // just below the atom
        cum += a.w;
        dist = std::max(dist, cum - g); // at the atom
    }
    return dist;
}

inline double clt_error(const Ifs& ifs, int n, CltMethod method,
                        std::size_t count, std::uint64_t seed,
                        unsigned workers = 1) {
    if (method == CltMethod::ExactTwoPointAffine) return clt_error_exact(ifs, n);
    const auto [chi, var] = detail::walk_constants(ifs, seed, workers);
    if (var < 1e-10)
        throw DegenerateVarianceError("clt_error: degenerate variance");
    const double r0 = std::sqrt(var);

    const CategoricalSampler cat(ifs.p);
    std::vector<double> z(count);
    const std::size_t nb = batch_count(count, kMcBatch);
    parallel_batches(nb, workers, [&](std::size_t b) {
        const BatchRange r = batch_range(count, kMcBatch, b);
        Xoshiro256 rng(seed, b);
        for (std::size_t i = 0; i < r.count; ++i) {
            const Word tail = random_word(ifs, kDefaultTail, cat, rng);
            const double x_tail = coding_point(ifs, tail);
            z[r.begin + i] = (detail::sample_sn(ifs, n, x_tail, cat, rng) -
                              n * chi) /
                             std::sqrt(static_cast<double>(n));
        }
    });
    std::sort(z.begin(), z.end());
    double dist = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double g = normal_cdf(z[i] / r0);
        dist = std::max(dist, std::abs(g - static_cast<double>(i) / z.size()));
        dist = std::max(dist,
                        std::abs(static_cast<double>(i + 1) / z.size() - g));
    }
    return dist;
}

// ---------------------------------------------------------------------------
// Local limit theorem ratio mu_{n,omega}(C + v) / G_n(v) against lambda(C)
// ---------------------------------------------------------------------------
struct LltReport {
    int n = 0;
    std::string omega_label;
    double c_lo = 0.0, c_hi = 0.0;
    double v = 0.0;
    double mass = 0.0;
    double gn = 0.0;
    double ratio = 0.0;
    double lambda_c = 0.0;
    double stderr_mass = 0.0;
    double stderr_ratio = 0.0;
    bool lattice = false;
    double lattice_span = 0.0;
    bool lattice_warning = false;
    double chi = 0.0;
    double r0 = 0.0;
};

namespace detail {

// Step law support: <= 16 distinct values within 1e-9 means lattice. The
// span is the smallest positive gap between distinct step values.
inline std::pair<bool, double> lattice_profile(const Ifs& ifs,
                                               std::uint64_t seed) {
    std::vector<double> vals;
    if (ifs.all_affine()) {
        for (const auto& m : ifs.maps)
            vals.push_back(-std::log(m.coefficients()[1]));
    } else {
        const CategoricalSampler cat(ifs.p);
        Xoshiro256 rng(seed ^ 0x1a77ceULL, 0);
        for (int i = 0; i < 4096; ++i) {
            const Word w = random_word(ifs, kDefaultTail, cat, rng);
            const double x = coding_point(ifs, w);
            vals.push_back(-std::log(ifs.maps[cat(rng)].derivative(x)));
        }
    }
    std::sort(vals.begin(), vals.end());
    std::vector<double> distinct;
    for (double v : vals)
        if (distinct.empty() || v - distinct.back() > 1e-9) distinct.push_back(v);
    if (distinct.size() > 16 || distinct.size() < 2) return {distinct.size() <= 16, 0.0};
    double span = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < distinct.size(); ++i)
        span = std::min(span, distinct[i] - distinct[i - 1]);
    return {true, span};
}

} // namespace detail

inline LltReport llt_ratio(const Ifs& ifs, const Word& omega_tail, int n,
                           double c_lo, double c_hi, double v,
                           std::size_t count, std::uint64_t seed,
                           unsigned workers = 1, double R = 1.0,
                           double chi = std::numeric_limits<double>::quiet_NaN(),
                           double var_r0_in = std::numeric_limits<double>::quiet_NaN()) {
    if (n < 1) throw std::invalid_argument("llt_ratio: n >= 1");
    double var = var_r0_in;
    if (std::isnan(chi) || std::isnan(var)) {
        const auto [c, s2] = detail::walk_constants(ifs, seed, workers);
        if (std::isnan(chi)) chi = c;
        if (std::isnan(var)) var = s2;
    }
    if (var < 1e-10)
        throw DegenerateVarianceError("llt_ratio: degenerate variance");
    const double bound = std::sqrt(R * n * std::max(std::log((double)n), 0.0));
    if (n > 1 && std::abs(v) > bound)
        throw std::domain_error("llt_ratio: |v| exceeds sqrt(R n log n)");

    LltReport rep;
    rep.n = n;
    rep.omega_label = format_word(omega_tail, ifs.alphabet());
    rep.c_lo = c_lo;
    rep.c_hi = c_hi;
    rep.v = v;
    rep.lambda_c = std::max(0.0, c_hi - c_lo);
    rep.chi = chi;
    rep.r0 = std::sqrt(var);
    const auto [lattice, span] = detail::lattice_profile(ifs, seed);
    rep.lattice = lattice;
    rep.lattice_span = span;
    rep.lattice_warning = lattice && span > 0.0 && rep.lambda_c < 4.0 * span;

    rep.gn = gaussian_density({n, rep.r0, false}, v);
    if (rep.lambda_c == 0.0) return rep; // empty interval: mass 0, ratio 0

    const double x_tail = coding_point(ifs, omega_tail);
    const CategoricalSampler cat(ifs.p);
    const std::size_t nb = batch_count(count, kMcBatch);
    std::vector<std::size_t> hits(nb, 0);
    parallel_batches(nb, workers, [&](std::size_t b) {
        const BatchRange r = batch_range(count, kMcBatch, b);
        Xoshiro256 rng(seed, b);
        std::size_t h = 0;
        for (std::size_t i = 0; i < r.count; ++i) {
            const double centred =
                detail::sample_sn(ifs, n, x_tail, cat, rng) - n * chi;
            if (centred >= c_lo + v && centred <= c_hi + v) ++h;
        }
        hits[b] = h;
    });
    std::size_t total = 0;
    for (auto h : hits) total += h;
    rep.mass = static_cast<double>(total) / static_cast<double>(count);
    rep.stderr_mass = std::sqrt(std::max(rep.mass * (1.0 - rep.mass), 1e-300) /
                                static_cast<double>(count));
    rep.ratio = rep.mass / rep.gn;
    rep.stderr_ratio = rep.stderr_mass / rep.gn;
    return rep;
}

// ---------------------------------------------------------------------------
// Smoothed LLT: mu_{n,omega}(psi_{eps,C}) against lambda(psi_{eps,C} G_n),
// with the Gaussian mollifier. psi has the closed form
//   psi(v) = Phi((v - c_lo)/eps) - Phi((v - c_hi)/eps).
// ---------------------------------------------------------------------------
struct SmoothLltResult {
    double lhs = 0.0;       // MC average of psi(S_n - n chi)
    double rhs = 0.0;       // quadrature of psi * G_n
    double diff = 0.0;
    double stderr_lhs = 0.0;
    double chi = 0.0;
    double r0 = 0.0;
};

inline SmoothLltResult smooth_llt(const Ifs& ifs, const Word& omega_tail, int n,
                                  double c_lo, double c_hi, double eps,
                                  std::size_t count, std::uint64_t seed,
                                  unsigned workers = 1,
                                  bool paper_literal = false) {
    if (!(eps > 0.0)) throw std::invalid_argument("smooth_llt: eps > 0");
    const auto [chi, var] = detail::walk_constants(ifs, seed, workers);
    if (var < 1e-10)
        throw DegenerateVarianceError("smooth_llt: degenerate variance");
    const double r0 = std::sqrt(var);
    const auto psi = [&](double u) {
        return normal_cdf((u - c_lo) / eps) - normal_cdf((u - c_hi) / eps);
    };

    const double x_tail = coding_point(ifs, omega_tail);
    const CategoricalSampler cat(ifs.p);
    const std::size_t nb = batch_count(count, kMcBatch);
    std::vector<double> sum(nb, 0.0), sumsq(nb, 0.0);
    parallel_batches(nb, workers, [&](std::size_t b) {
        const BatchRange r = batch_range(count, kMcBatch, b);
        Xoshiro256 rng(seed, b);
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < r.count; ++i) {
            const double u =
                detail::sample_sn(ifs, n, x_tail, cat, rng) - n * chi;
            const double w = psi(u);
            s1 += w;
            s2 += w * w;
        }
        sum[b] = s1;
        sumsq[b] = s2;
    });
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        s1 += sum[b];
        s2 += sumsq[b];
    }

    SmoothLltResult out;
    out.chi = chi;
    out.r0 = r0;
    out.lhs = s1 / count;
    const double varpsi = std::max(0.0, s2 / count - out.lhs * out.lhs);
    out.stderr_lhs = std::sqrt(varpsi / count);

    // Simpson quadrature of psi * G_n over a window covering both factors
    const GaussianModel g{n, r0, paper_literal};
    const double sigma = r0 * std::sqrt(static_cast<double>(n));
    const double lo = std::min(c_lo - 12.0 * eps, -9.0 * sigma);
    const double hi = std::max(c_hi + 12.0 * eps, 9.0 * sigma);
    const int segments = 1 << 15;
    const double h = (hi - lo) / segments;
    double acc = 0.0;
    for (int i = 0; i <= segments; ++i) {
        const double x = lo + h * i;
        const double w = (i == 0 || i == segments) ? 1.0
                         : (i % 2 == 1)            ? 4.0
                                                   : 2.0;
        acc += w * psi(x) * gaussian_density(g, x);
    }
    out.rhs = acc * h / 3.0;
    out.diff = out.lhs - out.rhs;
    return out;
}

// ---------------------------------------------------------------------------
// Conditional LLT over the partitions A_k^{h'}: per-cell empirical law of
// S_{tau_k} against the Gamma overshoot measure.
// ---------------------------------------------------------------------------
struct CllCellStat {
    Word label;
    std::size_t count = 0;
    double emp_prob = 0.0;
    double gamma_prob = 0.0;
    double abs_err = 0.0;
};

struct CllReport {
    double k = 0.0;
    double h_prime = 0.0;
    double j_lo = 0.0, j_hi = 0.0;
    std::vector<CllCellStat> cells; // retained cells, sorted by label
    std::size_t n_trajectories = 0;
    std::size_t n_cells_seen = 0;
    std::size_t n_cells_retained = 0;
    double retained_fraction = 0.0; // trajectories in retained cells
    double weighted_error = 0.0;    // frequency-weighted |emp - Gamma|
    double uncond_prob = 0.0;       // P(S_tau in J) over all trajectories
    double chi = 0.0;
};

// Gamma measure of the interval [t_lo, t_hi] under one tail stream.
inline double gamma_interval(const Ifs& ifs, const PartitionCell& cell,
                             double t_lo, double t_hi, double chi,
                             std::size_t count, std::uint64_t seed,
                             unsigned workers = 1) {
    if (cell.label.empty())
        throw std::invalid_argument("gamma_interval: empty cell label");
    const double off_lo = t_lo - cell.k * chi;
    const double off_hi = t_hi - cell.k * chi;
    const CategoricalSampler cat(ifs.p);
    const std::size_t nb = batch_count(count, kMcBatch);
    std::vector<double> lovec(nb, 0.0), hivec(nb, 0.0), den(nb, 0.0);
    parallel_batches(nb, workers, [&](std::size_t b) {
        const BatchRange r = batch_range(count, kMcBatch, b);
        Xoshiro256 rng(seed, b);
        double alo = 0.0, ahi = 0.0, ad = 0.0;
        for (std::size_t i = 0; i < r.count; ++i) {
            Word shifted(cell.label.begin() + 1, cell.label.end());
            const Word tail = random_word(ifs, kDefaultTail, cat, rng);
            shifted.insert(shifted.end(), tail.begin(), tail.end());
            const double x1 = -std::log(
                ifs.maps[cell.label[0]].derivative(coding_point(ifs, shifted)));
            alo += std::max(0.0, std::min(off_lo, x1));
            ahi += std::max(0.0, std::min(off_hi, x1));
            ad += x1;
        }
        lovec[b] = alo;
        hivec[b] = ahi;
        den[b] = ad;
    });
    double lo = 0.0, hi = 0.0, d = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        lo += lovec[b];
        hi += hivec[b];
        d += den[b];
    }
    return (hi - lo) / d;
}

inline CllReport conditional_llt(const Ifs& ifs, double k, double h_prime,
                                 double j_lo, double j_hi, std::size_t count,
                                 std::uint64_t seed, unsigned workers = 1,
                                 std::size_t min_cell_count = 1000,
                                 std::size_t gamma_samples = 40000,
                                 double chi_in = std::numeric_limits<double>::quiet_NaN()) {
    double chi = chi_in;
    if (std::isnan(chi)) chi = detail::walk_constants(ifs, seed, workers).first;
    if (!(j_hi > j_lo))
        throw std::invalid_argument("conditional_llt: need j_hi > j_lo");

    // word length always sufficient for tau_k plus the label of the shift
    const int length = static_cast<int>(
                           std::ceil((k + h_prime + 2.0) * chi / ifs.D)) +
                       kDefaultTail;

    struct CellAccum {
        std::size_t count = 0;
        std::size_t hits = 0;
    };
    using CellMap = std::map<Word, CellAccum>;

    // shared memo for -log max_x f'_{prefix}(x); values are pure, so the
    // cache only avoids recomputation
    std::unordered_map<std::string, double> contraction_memo;
    std::shared_mutex memo_mutex;
    auto neg_log_max_deriv = [&](const Word& prefix) {
        std::string key(prefix.begin(), prefix.end());
        {
            std::shared_lock lock(memo_mutex);
            if (auto it = contraction_memo.find(key); it != contraction_memo.end())
                return it->second;
        }
        const double v = -std::log(detail::max_word_derivative(ifs, prefix));
        std::unique_lock lock(memo_mutex);
        contraction_memo.emplace(std::move(key), v);
        return v;
    };

    const CategoricalSampler cat(ifs.p);
    const std::size_t nb = batch_count(count, kMcBatch);
    std::vector<CellMap> partials(nb);
    parallel_batches(nb, workers, [&](std::size_t b) {
        const BatchRange r = batch_range(count, kMcBatch, b);
        Xoshiro256 rng(seed, b);
        CellMap local;
        for (std::size_t i = 0; i < r.count; ++i) {
            const Word w = random_word(ifs, length, cat, rng);
            const auto s = walk_prefix_sums(ifs, w);
            const double target = k * chi;
            int tk = -1;
            for (std::size_t m = 0; m < s.size(); ++m)
                if (s[m] >= target) {
                    tk = static_cast<int>(m) + 1;
                    break;
                }
            if (tk < 0) continue; // unreachable with the length above
            const double s_tau = s[tk - 1];
            Word prefix;
            const double h_target = h_prime * chi;
            for (std::size_t m = static_cast<std::size_t>(tk) - 1; m < w.size();
                 ++m) {
                prefix.push_back(w[m]);
                if (neg_log_max_deriv(prefix) >= h_target) break;
            }
            auto& cell = local[prefix];
            ++cell.count;
            if (s_tau >= j_lo && s_tau <= j_hi) ++cell.hits;
        }
        partials[b] = std::move(local);
    });

    CellMap merged;
    for (const auto& local : partials)
        for (const auto& [label, acc] : local) {
            auto& m = merged[label];
            m.count += acc.count;
            m.hits += acc.hits;
        }

    CllReport rep;
    rep.k = k;
    rep.h_prime = h_prime;
    rep.j_lo = j_lo;
    rep.j_hi = j_hi;
    rep.chi = chi;
    rep.n_trajectories = count;
    rep.n_cells_seen = merged.size();

    std::size_t all_hits = 0;
    for (const auto& [label, acc] : merged) all_hits += acc.hits;
    rep.uncond_prob = static_cast<double>(all_hits) / static_cast<double>(count);

    std::size_t retained_traj = 0;
    double werr = 0.0;
    for (const auto& [label, acc] : merged) {
        if (acc.count < min_cell_count) continue;
        CllCellStat stat;
        stat.label = label;
        stat.count = acc.count;
        stat.emp_prob = static_cast<double>(acc.hits) / acc.count;
        PartitionCell cell{k, h_prime, label};
        stat.gamma_prob =
            gamma_interval(ifs, cell, j_lo, j_hi, chi, gamma_samples,
                           seed ^ fnv1a64(label.data(), label.size()), workers);
        stat.abs_err = std::abs(stat.emp_prob - stat.gamma_prob);
        retained_traj += acc.count;
        rep.cells.push_back(std::move(stat));
    }
    if (rep.cells.empty())
        throw std::runtime_error(
            "conditional_llt: no cell reached the sample threshold");
    for (const auto& c : rep.cells)
        werr += (static_cast<double>(c.count) / retained_traj) * c.abs_err;
    rep.n_cells_retained = rep.cells.size();
    rep.retained_fraction =
        static_cast<double>(retained_traj) / static_cast<double>(count);
    rep.weighted_error = werr;
    return rep;
}

} // namespace scfd

#endif
