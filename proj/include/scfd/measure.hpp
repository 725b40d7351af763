#ifndef SCFD_MEASURE_HPP
#define SCFD_MEASURE_HPP

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "ifs.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace scfd {

inline constexpr std::size_t kMcBatch = 1 << 13;

// ---------------------------------------------------------------------------
// Sampling the self-conformal measure: N points f_w(x0) with w an i.i.d.
// length-m word. Depth m bounds the resolution by rho^m |I|.
// ---------------------------------------------------------------------------
struct MeasureSampler {
    Ifs ifs;
    int depth = 30;
    std::uint64_t seed = 0;
    std::size_t count = 0;
    unsigned workers = 1;

    double resolution() const {
        return std::pow(ifs.rho, depth) * ifs.interval.length();
    }
};

// Minimal depth with rho^m |I| <= 1/(8 |q|); the cylinder diameter is kept
// well below the oscillation wavelength (phase error <= pi/4).
inline int min_depth_for_frequency(const Ifs& ifs, double q,
                                   double support_diameter = -1.0) {
    if (q == 0.0) return 1;
    const double diam =
        support_diameter > 0.0 ? support_diameter : ifs.interval.length();
    const double target = 1.0 / (8.0 * std::abs(q));
    if (diam <= target) return 1;
    return static_cast<int>(
               std::ceil(std::log(diam / target) / -std::log(ifs.rho))) ;
}

namespace detail {

// Draws one sample of the coding map: x = f_{w_1} ... f_{w_m}(x0).
// Symbols are consumed innermost-first, so the point can be built without
// materializing the word.
inline double sample_coding_point(const Ifs& ifs, int depth,
                                  const CategoricalSampler& cat,
                                  Xoshiro256& rng) {
    double x = ifs.x0;
    for (int j = 0; j < depth; ++j) x = ifs.maps[cat(rng)](x);
    return x;
}

} // namespace detail

inline std::vector<double> sample_points(const MeasureSampler& s) {
    std::vector<double> pts(s.count);
    const CategoricalSampler cat(s.ifs.p);
    const std::size_t nb = batch_count(s.count, kMcBatch);
    parallel_batches(nb, s.workers, [&](std::size_t b) {
        const BatchRange r = batch_range(s.count, kMcBatch, b);
        Xoshiro256 rng(s.seed, b);
        for (std::size_t i = 0; i < r.count; ++i)
            pts[r.begin + i] =
                detail::sample_coding_point(s.ifs, s.depth, cat, rng);
    });
    return pts;
}

struct FourierEstimate {
    std::complex<double> value;
    double stderr_bound = 0.0; // 1/sqrt(N)
    int depth = 0;
    std::size_t count = 0;
    double modulus() const { return std::abs(value); }
};

// Monte Carlo Fourier transform at frequency q. Batches accumulate partial
// sums that are combined in fixed order, so results do not depend on the
// worker count.
inline FourierEstimate fourier_mc(const MeasureSampler& s, double q) {
    const int need = min_depth_for_frequency(s.ifs, q);
    if (s.depth < need)
        throw ResolutionError(
            "fourier_mc: depth " + std::to_string(s.depth) +
                " too shallow for q = " + std::to_string(q) +
                " (minimal admissible depth " + std::to_string(need) + ")",
            need);
    if (s.count == 0)
        throw std::invalid_argument("fourier_mc: empty sample");

    const CategoricalSampler cat(s.ifs.p);
    const std::size_t nb = batch_count(s.count, kMcBatch);
    std::vector<std::complex<double>> partial(nb);
    const double twopi_q = 2.0 * std::numbers::pi * q;
    parallel_batches(nb, s.workers, [&](std::size_t b) {
        const BatchRange r = batch_range(s.count, kMcBatch, b);
        Xoshiro256 rng(s.seed, b);
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t i = 0; i < r.count; ++i) {
            const double x = detail::sample_coding_point(s.ifs, s.depth, cat, rng);
            acc += std::complex<double>(std::cos(twopi_q * x),
                                        std::sin(twopi_q * x));
        }
        partial[b] = acc;
    });
    std::complex<double> total{0.0, 0.0};
    for (const auto& c : partial) total += c;
    FourierEstimate est;
    est.value = total / static_cast<double>(s.count);
    est.stderr_bound = 1.0 / std::sqrt(static_cast<double>(s.count));
    est.depth = s.depth;
    est.count = s.count;
    return est;
}

// Same estimator on an already materialized point set (used when many
// frequencies share one sample).
inline FourierEstimate fourier_of_points(const std::vector<double>& pts,
                                         double q, int depth) {
    const double twopi_q = 2.0 * std::numbers::pi * q;
    std::complex<double> acc{0.0, 0.0};
    for (double x : pts)
        acc += std::complex<double>(std::cos(twopi_q * x), std::sin(twopi_q * x));
    FourierEstimate est;
    est.value = pts.empty() ? std::complex<double>(1.0, 0.0)
                            : acc / static_cast<double>(pts.size());
    est.stderr_bound =
        pts.empty() ? 0.0 : 1.0 / std::sqrt(static_cast<double>(pts.size()));
    est.depth = depth;
    est.count = pts.size();
    return est;
}

// ---------------------------------------------------------------------------
// Exact recursion for self-similar (all-affine) measures:
//   F_q = sum_i p_i e^{2 pi i q b_i} F_{r_i q},
// terminated with F ~ 1 once |q| |I| < tol. Memoized on the frequency
// quantized at relative 1e-12 to bound table growth.
// ---------------------------------------------------------------------------
class SelfSimilarFourier {
public:
    SelfSimilarFourier(const Ifs& ifs, double tol)
        : ifs_(&ifs), tol_(tol) {
        if (!ifs.all_affine())
            throw std::invalid_argument(
                "fourier_ss requires all maps affine");
        if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    }

    std::complex<double> operator()(double q) {
        if (q == 0.0) return {1.0, 0.0};
        if (std::abs(q) * ifs_->interval.length() < tol_) return {1.0, 0.0};
        const std::int64_t key = quantize(q);
        if (auto it = memo_.find(key); it != memo_.end()) return it->second;
        std::complex<double> acc{0.0, 0.0};
        for (std::size_t i = 0; i < ifs_->maps.size(); ++i) {
            const double r = ifs_->maps[i].coefficients()[1];
            const double b = ifs_->maps[i].coefficients()[0];
            const double phase = 2.0 * std::numbers::pi * q * b;
            acc += ifs_->p[i] *
                   std::complex<double>(std::cos(phase), std::sin(phase)) *
                   (*this)(r * q);
        }
        memo_.emplace(key, acc);
        return acc;
    }

private:
    static std::int64_t quantize(double q) {
        // same bucket iff equal to ~12 significant digits
        const std::int64_t mag =
            static_cast<std::int64_t>(std::llround(std::log(std::abs(q)) * 1e12));
        return q > 0 ? mag : ~mag;
    }
    const Ifs* ifs_;
    double tol_;
    std::unordered_map<std::int64_t, std::complex<double>> memo_;
};

inline std::complex<double> fourier_ss(const Ifs& ifs, double q, double tol) {
    SelfSimilarFourier f(ifs, tol);
    return f(q);
}

// ---------------------------------------------------------------------------
// Decay fit: least squares of log |F_q| against -alpha log log q + log C
// over grid points above the Monte Carlo noise floor.
// ---------------------------------------------------------------------------
struct DecayFitPoint {
    double q = 0.0;
    double modulus = 0.0;
    double stderr_bound = 0.0;
    int depth = 0;
    bool used = false;
    double residual = 0.0;
};

struct DecayFit {
    std::vector<DecayFitPoint> points;
    bool resolved = false;
    double alpha_hat = 0.0;
    double c_hat = 0.0;
    double rms = 0.0;
    double noise_floor = 0.0; // 1/sqrt(N); the fit gates at 3x this
    std::size_t n_points_used = 0;
};

inline DecayFit decay_fit(const Ifs& ifs, const std::vector<double>& q_grid,
                          std::size_t count, std::uint64_t seed,
                          unsigned workers = 1, int extra_depth = 2) {
    if (q_grid.size() < 8)
        throw std::invalid_argument("decay_fit needs a grid of >= 8 frequencies");
    for (double q : q_grid)
        if (!(q > 1.0))
            throw std::invalid_argument(
                "decay_fit needs frequencies > 1 (log log q must exist)");

    DecayFit fit;
    fit.noise_floor = 1.0 / std::sqrt(static_cast<double>(count));
    const double gate = 3.0 * fit.noise_floor;
    for (double q : q_grid) {
        MeasureSampler s{ifs, min_depth_for_frequency(ifs, q) + extra_depth,
                         seed, count, workers};
        const FourierEstimate est = fourier_mc(s, q);
        DecayFitPoint pt;
        pt.q = q;
        pt.modulus = est.modulus();
        pt.stderr_bound = est.stderr_bound;
        pt.depth = est.depth;
        fit.points.push_back(pt);
    }

    double maxmod = 0.0;
    for (const auto& pt : fit.points) maxmod = std::max(maxmod, pt.modulus);
    if (maxmod <= gate) {
        fit.resolved = false; // decay unresolvable at this N
        return fit;
    }

    // y = log m, x = log log q; y = log C - alpha x
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (auto& pt : fit.points) {
        if (pt.modulus <= gate) continue;
        pt.used = true;
        const double x = std::log(std::log(pt.q));
        const double y = std::log(pt.modulus);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++n;
    }
    fit.n_points_used = n;
    if (n < 2) {
        fit.resolved = false;
        return fit;
    }
    const double denom = n * sxx - sx * sx;
    if (std::abs(denom) < 1e-30) {
        fit.resolved = false;
        return fit;
    }
    const double slope = (n * sxy - sx * sy) / denom;
    const double intercept = (sy - slope * sx) / n;
    fit.alpha_hat = -slope;
    fit.c_hat = std::exp(intercept);
    double ss = 0.0;
    for (auto& pt : fit.points) {
        if (!pt.used) continue;
        const double pred = intercept + slope * std::log(std::log(pt.q));
        pt.residual = std::log(pt.modulus) - pred;
        ss += pt.residual * pt.residual;
    }
    fit.rms = std::sqrt(ss / n);
    fit.resolved = true;
    return fit;
}

// ---------------------------------------------------------------------------
// Ball mass and the Frostman regression
// ---------------------------------------------------------------------------
inline double ball_mass(const MeasureSampler& s, double y, double r) {
    if (r >= s.ifs.interval.length()) return 1.0;
    if (!(r > 2.0 * s.resolution())) {
        const double target = r / (2.0 * s.ifs.interval.length());
        const int need = static_cast<int>(
            std::ceil(std::log(target) / std::log(s.ifs.rho)));
        throw ResolutionError(
            "ball_mass: radius below sampling resolution (minimal depth " +
                std::to_string(need) + ")",
            need);
    }
    const auto pts = sample_points(s);
    std::size_t hit = 0;
    for (double x : pts)
        if (std::abs(x - y) <= r) ++hit;
    return pts.empty() ? 0.0
                       : static_cast<double>(hit) / static_cast<double>(pts.size());
}

struct FrostmanFit {
    double d_hat = 0.0;
    double c_hat = 0.0;
    std::vector<double> radii;
    std::vector<double> sup_mass;
};

// Regression of log sup_y mass(B_r(y)) against log r over a geometric radius
// grid; the sup is taken over a grid of centers.
inline FrostmanFit frostman_fit(const Ifs& ifs, const std::vector<double>& radii,
                                std::size_t count, std::uint64_t seed,
                                unsigned workers = 1, int centers = 64) {
    FrostmanFit out;
    double rmin = radii.empty() ? 0.0 : radii[0];
    for (double r : radii) rmin = std::min(rmin, r);
    const double target = rmin / (2.0 * ifs.interval.length());
    int depth = static_cast<int>(
                    std::ceil(std::log(target) / std::log(ifs.rho))) + 2;
    depth = std::max(depth, 8);
    MeasureSampler s{ifs, depth, seed, count, workers};
    const auto pts = sample_points(s);
    std::vector<double> sorted(pts);
    std::sort(sorted.begin(), sorted.end());
    for (double r : radii) {
        double best = 0.0;
        for (int c = 0; c <= centers; ++c) {
            const double y = ifs.interval.lo +
                             ifs.interval.length() * c / centers;
            const auto lo = std::lower_bound(sorted.begin(), sorted.end(), y - r);
            const auto hi = std::upper_bound(sorted.begin(), sorted.end(), y + r);
            best = std::max(best, static_cast<double>(hi - lo) /
                                      static_cast<double>(sorted.size()));
        }
        out.radii.push_back(r);
        out.sup_mass.push_back(best);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < out.radii.size(); ++i) {
        if (out.sup_mass[i] <= 0.0) continue;
        const double x = std::log(out.radii[i]);
        const double y = std::log(out.sup_mass[i]);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++n;
    }
    if (n >= 2 && std::abs(n * sxx - sx * sx) > 1e-30) {
        out.d_hat = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        out.c_hat = std::exp((sy - out.d_hat * sx) / n);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Scaled-frequency averages (oscillatory-integral diagnostics)
// ---------------------------------------------------------------------------

// Trapezoid average over z in [z_lo, z_hi] of |F_{q e^{-z}}(nu)|^2. One
// sample set at the depth demanded by the largest effective frequency is
// reused across nodes.
inline double scaled_fourier_avg(const Ifs& ifs, double q, double z_lo,
                                 double z_hi, int grid, std::size_t count,
                                 std::uint64_t seed, unsigned workers = 1) {
    if (!(z_hi > z_lo))
        throw std::invalid_argument("scaled_fourier_avg: need z_hi > z_lo");
    if (grid < 1) throw std::invalid_argument("scaled_fourier_avg: grid >= 1");
    if (q == 0.0) return 1.0;
    const double qmax = std::abs(q) * std::exp(-z_lo);
    const int depth = min_depth_for_frequency(ifs, qmax) + 2;
    MeasureSampler s{ifs, depth, seed, count, workers};
    const auto pts = sample_points(s);
    double acc = 0.0;
    for (int i = 0; i <= grid; ++i) {
        const double z = z_lo + (z_hi - z_lo) * i / grid;
        const double m = std::abs(fourier_of_points(pts, q * std::exp(-z), depth).value);
        const double w = (i == 0 || i == grid) ? 0.5 : 1.0;
        acc += w * m * m;
    }
    return acc / grid;
}

// g_{q,rho}(t) = |F_{q e^{-t}}(f_w nu)|^2 for the pushforward by a finite
// word w (a measure of diameter <= rho^{|w|} |I|).
inline double g_mode(const Ifs& ifs, double q, double t, const Word& support_word,
                     std::size_t count, std::uint64_t seed,
                     unsigned workers = 1) {
    if (support_word.empty())
        throw std::invalid_argument("g_mode: support word must be nonempty");
    check_symbols(ifs, support_word);
    const double qe = q * std::exp(-t);
    if (qe == 0.0) return 1.0;
    // resolution on the pushforward: rho^m * diam f_w(I) <= 1/(8|qe|)
    const double diam = compose_eval(ifs, support_word, ifs.interval.hi) -
                        compose_eval(ifs, support_word, ifs.interval.lo);
    const int depth = min_depth_for_frequency(ifs, qe, diam) + 2;
    MeasureSampler s{ifs, depth, seed, count, workers};
    const auto pts = sample_points(s);
    const double twopi_q = 2.0 * std::numbers::pi * qe;
    std::complex<double> acc{0.0, 0.0};
    for (double x : pts) {
        const double y = compose_eval(ifs, support_word, x);
        acc += std::complex<double>(std::cos(twopi_q * y), std::sin(twopi_q * y));
    }
    const double m = std::abs(acc) / static_cast<double>(pts.size());
    return m * m;
}

} // namespace scfd

#endif
