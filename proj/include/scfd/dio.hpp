#ifndef SCFD_DIO_HPP
#define SCFD_DIO_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_set>
#include <vector>

#include "cocycle.hpp"
#include "errors.hpp"
#include "ifs.hpp"
#include "rng.hpp"

namespace scfd {

// ---------------------------------------------------------------------------
// Diophantine distances
// ---------------------------------------------------------------------------

// inf_y max_i d(t_i x + y, Z), solved exactly as the circular 1-center of
// the points {t_i x mod 1}: half the complement of the largest gap. For two
// points this reduces to d((t_1 - t_2) x, Z)/2.
inline double dio_distance(const std::vector<double>& t, double x) {
    if (t.empty()) throw std::invalid_argument("dio_distance: empty profile");
    if (t.size() == 1) return 0.0;
    // extended precision for the mod-1 reduction: |t x| can be large and the
    // distances are compared near machine epsilon
    std::vector<long double> pts;
    pts.reserve(t.size());
    for (double ti : t) {
        long double f = std::fmod(static_cast<long double>(ti) * x, 1.0L);
        if (f < 0.0L) f += 1.0L;
        pts.push_back(f);
    }
    std::sort(pts.begin(), pts.end());
    long double largest_gap = pts.front() + 1.0L - pts.back();
    for (std::size_t i = 1; i < pts.size(); ++i)
        largest_gap = std::max(largest_gap, pts[i] - pts[i - 1]);
    return static_cast<double>(0.5L * (1.0L - largest_gap));
}

// max_i d(t_i x, Z), the self-similar variant without the inf over y.
inline double dio_distance_ls(const std::vector<double>& t, double x) {
    if (t.empty()) throw std::invalid_argument("dio_distance_ls: empty profile");
    long double m = 0.0L;
    for (double ti : t) {
        long double f = std::fmod(static_cast<long double>(ti) * x, 1.0L);
        if (f < 0.0L) f += 1.0L;
        m = std::max(m, std::min(f, 1.0L - f));
    }
    return static_cast<double>(m);
}

// Ratio logs t_i = -log f'_i(x_i) of an IFS.
inline std::vector<double> ratio_logs(const Ifs& ifs) {
    std::vector<double> t;
    for (const auto& m : ifs.maps)
        t.push_back(-std::log(m.derivative(fixed_point(m, ifs.interval))));
    return t;
}

// ---------------------------------------------------------------------------
// Envelope scan. Classifications are relative to the scanned range: the scan
// is a log-spaced grid whose inter-node windows are swept at a step below a
// quarter period of the fastest oscillation, followed by golden-section
// polish around the window minimum.
// ---------------------------------------------------------------------------
struct DioScanPoint {
    double x = 0.0;        // location of the refined window minimum
    double distance = 0.0; // refined minimum
};

struct DioProfile {
    std::vector<double> t;
    bool inf_over_y = true;
    double x_min = 0.0, x_max = 0.0;
    std::vector<DioScanPoint> points;          // one per scan window
    std::vector<DioScanPoint> envelope;        // per-log-bin minima
    bool non_diophantine = false;
    std::string classification;                // "non-diophantine" | "diophantine"
    double c_hat = 0.0;
    double ell_hat = 0.0;
};

namespace detail {

template <class F>
DioScanPoint window_min(const F& f, double a, double b, double step) {
    const int nodes =
        std::min(4096, std::max(8, static_cast<int>((b - a) / step)));
    DioScanPoint best{a, f(a)};
    for (int i = 1; i <= nodes; ++i) {
        const double x = a + (b - a) * i / nodes;
        const double v = f(x);
        if (v < best.distance) best = {x, v};
    }
    // golden-section polish in the bracketing subinterval
    double lo = std::max(a, best.x - (b - a) / nodes);
    double hi = std::min(b, best.x + (b - a) / nodes);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 80 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
        if (f1 > f2) {
            lo = x1; x1 = x2; f1 = f2;
            x2 = lo + gr * (hi - lo); f2 = f(x2);
        } else {
            hi = x2; x2 = x1; f2 = f1;
            x1 = hi - gr * (hi - lo); f1 = f(x1);
        }
    }
    if (f1 < best.distance) best = {x1, f1};
    if (f2 < best.distance) best = {x2, f2};
    return best;
}

} // namespace detail

inline DioProfile dio_scan(const std::vector<double>& t, double x_min,
                           double x_max, int grid = 256, int bins = 24,
                           bool inf_over_y = true, unsigned workers = 1) {
    if (!(x_min > 0.0) || !(x_max / x_min >= 1e3))
        throw std::invalid_argument(
            "dio_scan: need 0 < x_min and x_max/x_min >= 1e3");
    DioProfile prof;
    prof.t = t;
    prof.inf_over_y = inf_over_y;
    prof.x_min = x_min;
    prof.x_max = x_max;

    // the oscillation rate in x: pairwise differences for the inf_y version
    // (a common drift is absorbed by y), the t_i themselves otherwise
    double tmax = 0.0;
    if (inf_over_y) {
        for (std::size_t i = 0; i < t.size(); ++i)
            for (std::size_t j = i + 1; j < t.size(); ++j)
                tmax = std::max(tmax, std::abs(t[i] - t[j]));
    } else {
        for (double ti : t) tmax = std::max(tmax, std::abs(ti));
    }
    if (tmax == 0.0) {
        // all phases move together: the distance vanishes identically
        prof.non_diophantine = true;
        prof.classification = "non-diophantine";
        return prof;
    }
    const double step = 0.25 / tmax;
    const auto f = [&](double x) {
        return inf_over_y ? dio_distance(t, x) : dio_distance_ls(t, x);
    };

    const double lmin = std::log(x_min), lmax = std::log(x_max);
    prof.points.resize(grid);
    parallel_batches(static_cast<std::size_t>(grid), workers,
                     [&](std::size_t i) {
                         const double a =
                             std::exp(lmin + (lmax - lmin) * i / grid);
                         const double b =
                             std::exp(lmin + (lmax - lmin) * (i + 1) / grid);
                         prof.points[i] = detail::window_min(f, a, b, step);
                     });

    // per-log-bin minima form the lower envelope
    for (int bi = 0; bi < bins; ++bi) {
        const double a = lmin + (lmax - lmin) * bi / bins;
        const double b = lmin + (lmax - lmin) * (bi + 1) / bins;
        DioScanPoint best{0.0, std::numeric_limits<double>::infinity()};
        for (const auto& pt : prof.points) {
            const double lx = std::log(pt.x);
            if (lx >= a && lx <= b && pt.distance < best.distance) best = pt;
        }
        if (std::isfinite(best.distance)) prof.envelope.push_back(best);
    }

    // near-zeros in the large-x half of the scan: no envelope structure
    int zeros_high = 0;
    const double lmid = 0.5 * (lmin + lmax);
    for (const auto& pt : prof.envelope)
        if (std::log(pt.x) >= lmid && pt.distance <= 1e-9) ++zeros_high;
    if (zeros_high >= 2) {
        prof.non_diophantine = true;
        prof.classification = "non-diophantine";
        return prof;
    }

    std::size_t usable = 0;
    for (const auto& pt : prof.envelope)
        if (pt.distance > 0.0) ++usable;
    if (usable < 8)
        throw std::runtime_error("dio_scan: fewer than 8 envelope points");

    // fit log d = log C - ell log x on the envelope
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (const auto& pt : prof.envelope) {
        if (!(pt.distance > 0.0)) continue;
        const double x = std::log(pt.x);
        const double y = std::log(pt.distance);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++n;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double intercept = (sy - slope * sx) / n;
    prof.ell_hat = -slope;
    prof.c_hat = std::exp(intercept);
    prof.classification = "diophantine";
    return prof;
}

inline DioProfile dio_exponent(const Ifs& ifs, double x_min, double x_max,
                               int grid = 256, int bins = 24,
                               unsigned workers = 1) {
    return dio_scan(ratio_logs(ifs), x_min, x_max, grid, bins, true, workers);
}

inline DioProfile dio_condition_ls(const std::vector<double>& t, double x_min,
                                   double x_max, int grid = 256, int bins = 24,
                                   unsigned workers = 1) {
    return dio_scan(t, x_min, x_max, grid, bins, false, workers);
}

// ---------------------------------------------------------------------------
// Temporal distance functions
// ---------------------------------------------------------------------------
struct TemporalDistance {
    double value = 0.0;      // D_n
    double tail_bound = 0.0; // |D - D_n| <= tail_bound
};

inline TemporalDistance temporal_distance(const Ifs& ifs, const Word& xi,
                                          const Word& zeta, const Word& omega,
                                          const Word& eta, int n) {
    if (static_cast<int>(xi.size()) < n || static_cast<int>(zeta.size()) < n)
        throw WordTooShortError("temporal_distance: |xi|, |zeta| >= n required");
    const double x_omega = coding_point(ifs, omega);
    const double x_eta = coding_point(ifs, eta);
    const Word xi_n(xi.begin(), xi.begin() + n);
    const Word zeta_n(zeta.begin(), zeta.begin() + n);
    TemporalDistance out;
    out.value = (log_derivative_word(ifs, xi_n, x_omega) -
                 log_derivative_word(ifs, xi_n, x_eta)) -
                (log_derivative_word(ifs, zeta_n, x_omega) -
                 log_derivative_word(ifs, zeta_n, x_eta));
    out.tail_bound = 2.0 * ifs.slope_bound * ifs.interval.length() *
                     std::pow(ifs.rho, n) / (1.0 - ifs.rho);
    return out;
}

// ---------------------------------------------------------------------------
// Box-counting dimension of a value set over dyadic scales
// ---------------------------------------------------------------------------
inline double box_dim_estimate(const std::vector<double>& values,
                               const std::vector<double>& scales) {
    if (values.empty()) throw std::invalid_argument("box_dim: empty values");
    if (scales.size() < 2)
        throw std::invalid_argument("box_dim: need >= 2 scales");
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double lo = *mn;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (double eps : scales) {
        if (!(eps > 0.0)) throw std::invalid_argument("box_dim: scales > 0");
        std::unordered_set<std::int64_t> boxes;
        for (double v : values)
            boxes.insert(static_cast<std::int64_t>(std::floor((v - lo) / eps)));
        const double x = std::log(1.0 / eps);
        const double y = std::log(static_cast<double>(boxes.size()));
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    const double n = static_cast<double>(scales.size());
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-30) return 0.0;
    (void)mx;
    return (n * sxy - sx * sy) / denom;
}

// ---------------------------------------------------------------------------
// Linearity detection:  sup | d/dx ( log f'_{xi|n} - log f'_{zeta|n} )(x) |
// over sampled word pairs and attractor points. The derivative is the exact
// chain-rule sum of (f''/f')(suffix image) * (suffix derivative).
// ---------------------------------------------------------------------------
inline double log_derivative_slope(const Ifs& ifs, const Word& w, double x) {
    double acc = 0.0;
    double dsuffix = 1.0; // derivative at x of the suffix composition
    for (std::size_t i = w.size(); i-- > 0;) {
        const auto& m = ifs.maps[w[i]];
        acc += m.second_derivative(x) / m.derivative(x) * dsuffix;
        dsuffix *= m.derivative(x);
        x = m(x);
    }
    return acc;
}

inline double linearity_sup(const Ifs& ifs, int n, int word_pairs = 48,
                            int attractor_points = 48,
                            std::uint64_t seed = 1234) {
    if (n < 2) throw std::invalid_argument("linearity_sup: n >= 2");
    const CategoricalSampler cat(ifs.p);
    Xoshiro256 rng(seed, 11);

    std::vector<double> xs;
    for (const auto& m : ifs.maps) xs.push_back(fixed_point(m, ifs.interval));
    for (int i = 0; i < attractor_points; ++i) {
        const Word w = random_word(ifs, 30, cat, rng);
        xs.push_back(coding_point(ifs, w));
    }

    std::vector<std::pair<Word, Word>> pairs;
    for (int i = 0; i < ifs.alphabet(); ++i)
        for (int j = i + 1; j < ifs.alphabet(); ++j)
            pairs.emplace_back(Word(n, static_cast<std::uint8_t>(i)),
                               Word(n, static_cast<std::uint8_t>(j)));
    for (int i = 0; i < word_pairs; ++i)
        pairs.emplace_back(random_word(ifs, n, cat, rng),
                           random_word(ifs, n, cat, rng));

    double best = 0.0;
    for (const auto& [xi, zeta] : pairs)
        for (double x : xs)
            best = std::max(best, std::abs(log_derivative_slope(ifs, xi, x) -
                                           log_derivative_slope(ifs, zeta, x)));
    return best;
}

struct LinearityTrend {
    std::vector<int> n_values;
    std::vector<double> sup_values;
    bool decaying = false; // conjugate-to-linear signature
};

// Trend across n in {2, 4, ..., n_max}; floor 1e-12 treats float residue of
// an exactly-linear family as zero.
inline LinearityTrend linearity_trend(const Ifs& ifs, int n_max,
                                      int word_pairs = 48,
                                      int attractor_points = 48,
                                      std::uint64_t seed = 1234) {
    LinearityTrend tr;
    for (int n = 2; n <= n_max; n *= 2) {
        tr.n_values.push_back(n);
        tr.sup_values.push_back(
            linearity_sup(ifs, n, word_pairs, attractor_points, seed));
    }
    if (tr.sup_values.size() >= 2) {
        const double first = tr.sup_values.front();
        const double last = tr.sup_values.back();
        tr.decaying = last <= std::max(first / 4.0, 1e-12);
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Conjugacy construction (the primitive-of-exp(phi_1) map)
// ---------------------------------------------------------------------------

// phi_1(x) = sum_{j>=0} [ log f'_1(f_1^j(x)) - log f'_1(f_1^j(x_0)) ],
// truncated once increments fall below 1e-14.
inline double phi1_value(const Ifs& ifs, double x) {
    const auto& f = ifs.maps[0];
    double yx = x, y0 = ifs.x0, acc = 0.0;
    for (int j = 0; j < 4000; ++j) {
        const double term = std::log(f.derivative(yx)) - std::log(f.derivative(y0));
        acc += term;
        if (std::abs(term) < 1e-14 && j > 0) break;
        yx = f(yx);
        y0 = f(y0);
    }
    return acc;
}

// phi_1'(x) = sum_j (f''/f')(f_1^j(x)) * (f_1^j)'(x)
inline double phi1_slope(const Ifs& ifs, double x) {
    const auto& f = ifs.maps[0];
    double y = x, dy = 1.0, acc = 0.0;
    for (int j = 0; j < 4000; ++j) {
        const double term = f.second_derivative(y) / f.derivative(y) * dy;
        acc += term;
        if (std::abs(term) < 1e-15 && j > 0) break;
        dy *= f.derivative(y);
        y = f(y);
    }
    return acc;
}

// Monotone tabulated map with exact nodal derivatives; evaluation is cubic
// Hermite, inversion Newton with bisection fallback.
class TabulatedMonotone {
public:
    TabulatedMonotone() = default;
    TabulatedMonotone(std::vector<double> x, std::vector<double> y,
                      std::vector<double> d)
        : x_(std::move(x)), y_(std::move(y)), d_(std::move(d)) {}

    double operator()(double x) const {
        const std::size_t i = segment(x);
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double t2 = t * t, t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * y_[i] + (t3 - 2 * t2 + t) * h * d_[i] +
               (-2 * t3 + 3 * t2) * y_[i + 1] + (t3 - t2) * h * d_[i + 1];
    }

    double derivative(double x) const {
        const std::size_t i = segment(x);
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double t2 = t * t;
        return ((6 * t2 - 6 * t) * y_[i] + (3 * t2 - 4 * t + 1) * h * d_[i] +
                (-6 * t2 + 6 * t) * y_[i + 1] + (3 * t2 - 2 * t) * h * d_[i + 1]) /
               h;
    }

    double inverse(double y) const {
        double a = x_.front(), b = x_.back();
        double x = a + (b - a) * (y - y_.front()) /
                           std::max(y_.back() - y_.front(), 1e-300);
        x = std::clamp(x, a, b);
        for (int it = 0; it < 100; ++it) {
            const double err = (*this)(x)-y;
            if (std::abs(err) < 1e-15 * std::max(1.0, std::abs(y))) break;
            if (err > 0) b = x; else a = x;
            const double d = derivative(x);
            double next = d > 0 ? x - err / d : 0.5 * (a + b);
            if (!(next > a && next < b)) next = 0.5 * (a + b);
            x = next;
        }
        return x;
    }

    double front() const { return y_.front(); }
    double back() const { return y_.back(); }
    bool increasing() const {
        for (std::size_t i = 1; i < y_.size(); ++i)
            if (!(y_[i] > y_[i - 1]) || !std::isfinite(y_[i])) return false;
        return true;
    }

private:
    std::size_t segment(double x) const {
        const auto it = std::upper_bound(x_.begin(), x_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - x_.begin());
        if (i == 0) return 0;
        if (i >= x_.size()) return x_.size() - 2;
        return i - 1;
    }
    std::vector<double> x_, y_, d_;
};

struct ConjugacyResult {
    std::vector<double> grid_x;
    std::vector<double> phi1;        // phi_1 at the grid
    std::vector<double> h;           // primitive of exp(phi_1)
    std::vector<double> residual_g2; // |g''| at h(grid), max over maps
    TabulatedMonotone hmap;
    bool monotone = true;
    double sup_g2 = 0.0;
    std::vector<double> sup_g2_per_map;
};

// Tabulates phi_1 and h = primitive of exp(phi_1) (cumulative trapezoid on a
// 32x refined grid), then measures the second derivative of the conjugated
// maps g_i = h o f_i o h^{-1} by second differences on an attractor sample.
inline ConjugacyResult conjugacy_construct(const Ifs& ifs, int grid_size) {
    if (grid_size < 16) throw std::invalid_argument("conjugacy grid too small");
    const Interval I = ifs.interval;
    const int refine = 32;
    const int fine_n = grid_size * refine;

    std::vector<double> fine_x(fine_n + 1), fine_phi(fine_n + 1);
    for (int i = 0; i <= fine_n; ++i) {
        fine_x[i] = I.lo + I.length() * i / fine_n;
        fine_phi[i] = phi1_value(ifs, fine_x[i]);
    }
    std::vector<double> fine_h(fine_n + 1, 0.0);
    for (int i = 1; i <= fine_n; ++i)
        fine_h[i] = fine_h[i - 1] +
                    0.5 * (std::exp(fine_phi[i - 1]) + std::exp(fine_phi[i])) *
                        (fine_x[i] - fine_x[i - 1]);

    ConjugacyResult out;
    std::vector<double> gx(grid_size + 1), gphi(grid_size + 1), gh(grid_size + 1),
        gd(grid_size + 1);
    for (int i = 0; i <= grid_size; ++i) {
        gx[i] = fine_x[i * refine];
        gphi[i] = fine_phi[i * refine];
        gh[i] = fine_h[i * refine];
        gd[i] = std::exp(gphi[i]);
    }
    out.grid_x = gx;
    out.phi1 = gphi;
    out.h = gh;
    out.hmap = TabulatedMonotone(gx, gh, gd);
    out.monotone = out.hmap.increasing();
    if (!out.monotone) return out;

    // attractor sample: all words of a fixed small depth
    int depth = 1;
    while (std::pow(ifs.alphabet(), depth + 1) <= 1024) ++depth;
    std::vector<double> sample;
    {
        std::vector<double> pts{ifs.x0};
        for (int level = 0; level < depth; ++level) {
            std::vector<double> next;
            next.reserve(pts.size() * ifs.maps.size());
            for (const auto& m : ifs.maps)
                for (double p : pts) next.push_back(m(p));
            pts.swap(next);
        }
        sample = std::move(pts);
    }

    const double y_lo = out.hmap.front(), y_hi = out.hmap.back();
    const double delta = 0.01 * (y_hi - y_lo);
    out.sup_g2_per_map.assign(ifs.maps.size(), 0.0);
    auto g2_at = [&](std::size_t mi, double y) {
        const auto g = [&](double yy) {
            const double x = out.hmap.inverse(yy);
            return out.hmap(ifs.maps[mi](x));
        };
        const double yc = std::clamp(y, y_lo + delta, y_hi - delta);
        return (g(yc + delta) - 2.0 * g(yc) + g(yc - delta)) / (delta * delta);
    };
    for (std::size_t mi = 0; mi < ifs.maps.size(); ++mi) {
        double sup = 0.0;
        for (double x : sample) sup = std::max(sup, std::abs(g2_at(mi, out.hmap(x))));
        out.sup_g2_per_map[mi] = sup;
        out.sup_g2 = std::max(out.sup_g2, sup);
    }
    out.residual_g2.resize(gx.size());
    for (std::size_t i = 0; i < gx.size(); ++i) {
        double r = 0.0;
        for (std::size_t mi = 0; mi < ifs.maps.size(); ++mi)
            r = std::max(r, std::abs(g2_at(mi, gh[i])));
        out.residual_g2[i] = r;
    }
    return out;
}

} // namespace scfd

#endif
