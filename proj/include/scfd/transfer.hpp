#ifndef SCFD_TRANSFER_HPP
#define SCFD_TRANSFER_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "errors.hpp"
#include "ifs.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace scfd {

// ---------------------------------------------------------------------------
// Depth-m cylinder discretization of H^1. A function constant on depth-m
// cylinders is stored as n^m complex values indexed by words, first symbol
// most significant. The cylinder representative is the truncated coding
// point of the index word, so one application of the operator carries a
// phase error <= 2 pi |theta| Lip(c) rho^m.
// ---------------------------------------------------------------------------
class CylinderSpace {
public:
    CylinderSpace(const Ifs& ifs, int depth) : ifs_(&ifs), depth_(depth) {
        if (depth < 1) throw std::invalid_argument("cylinder depth >= 1");
        n_ = ifs.alphabet();
        size_ = 1;
        for (int i = 0; i < depth; ++i) {
            if (size_ > (std::size_t{1} << 40) / n_)
                throw std::invalid_argument("cylinder table too large");
            size_ *= n_;
        }
        stride_ = size_ / n_;

        // coding points by prefix level: x_(a . rest) = f_a(x_rest)
        std::vector<double> pts{ifs.x0};
        for (int level = 1; level <= depth; ++level) {
            std::vector<double> next(pts.size() * n_);
            for (int a = 0; a < n_; ++a)
                for (std::size_t r = 0; r < pts.size(); ++r)
                    next[a * pts.size() + r] = ifs.maps[a](pts[r]);
            pts.swap(next);
        }
        // cocycle table c(a, w) = -log f'_a(x_w)
        c_.resize(static_cast<std::size_t>(n_) * size_);
        for (int a = 0; a < n_; ++a)
            for (std::size_t w = 0; w < size_; ++w)
                c_[a * size_ + w] = -std::log(ifs.maps[a].derivative(pts[w]));
        points_ = std::move(pts);
    }

    const Ifs& ifs() const { return *ifs_; }
    int depth() const { return depth_; }
    int alphabet() const { return n_; }
    std::size_t size() const { return size_; }
    double rho() const { return ifs_->rho; }
    double cocycle(int a, std::size_t w) const { return c_[a * size_ + w]; }
    double point(std::size_t w) const { return points_[w]; }
    // index of (a . w)|_m, i.e. prepend a and drop the last symbol
    std::size_t shift_in(int a, std::size_t w) const {
        return static_cast<std::size_t>(a) * stride_ + w / n_;
    }

private:
    const Ifs* ifs_;
    int depth_;
    int n_ = 0;
    std::size_t size_ = 0;
    std::size_t stride_ = 0;
    std::vector<double> c_;
    std::vector<double> points_;
};

struct CylinderFunction {
    int depth = 0;
    int alphabet = 0;
    double rho = 0.0;
    std::vector<std::complex<double>> v;

    static CylinderFunction ones(const CylinderSpace& s) {
        CylinderFunction f;
        f.depth = s.depth();
        f.alphabet = s.alphabet();
        f.rho = s.rho();
        f.v.assign(s.size(), {1.0, 0.0});
        return f;
    }
};

inline double norm_sup(const CylinderFunction& f) {
    double m = 0.0;
    for (const auto& z : f.v) m = std::max(m, std::abs(z));
    return m;
}

namespace detail {

// Exact diameter of a planar point set: convex hull (monotone chain) and a
// pairwise sweep over hull vertices.
inline double complex_set_diameter(const std::complex<double>* v,
                                   std::size_t len) {
    if (len < 2) return 0.0;
    std::vector<std::pair<double, double>> p(len);
    for (std::size_t i = 0; i < len; ++i) p[i] = {v[i].real(), v[i].imag()};
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
    if (p.size() == 1) return 0.0;
    auto cross = [](const std::pair<double, double>& o,
                    const std::pair<double, double>& a,
                    const std::pair<double, double>& b) {
        return (a.first - o.first) * (b.second - o.second) -
               (a.second - o.second) * (b.first - o.first);
    };
    std::vector<std::pair<double, double>> hull(2 * p.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
        hull[k++] = p[i];
    }
    for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
        hull[k++] = p[i];
    }
    hull.resize(k > 1 ? k - 1 : k);
    double best = 0.0;
    for (std::size_t i = 0; i < hull.size(); ++i)
        for (std::size_t j = i + 1; j < hull.size(); ++j) {
            const double dx = hull[i].first - hull[j].first;
            const double dy = hull[i].second - hull[j].second;
            best = std::max(best, dx * dx + dy * dy);
        }
    return std::sqrt(best);
}

} // namespace detail

// Lipschitz constant of a cylinder function in d_rho. Pairs split first at
// index s lie in a common depth-(s-1) block, so
//   c_1 = max_s (max oscillation over level-s blocks) / rho^s,
// computed level by level rather than over all pairs. The oscillation of a
// complex block is its exact set diameter.
inline double lip_constant(const CylinderFunction& f) {
    const int n = f.alphabet;
    const int m = f.depth;
    double c1 = 0.0;
    std::size_t block = f.v.size(); // level s: blocks of size n^{m-s+1}
    double rho_s = f.rho;
    for (int s = 1; s <= m; ++s) {
        double osc = 0.0;
        for (std::size_t start = 0; start < f.v.size(); start += block)
            osc = std::max(osc,
                           detail::complex_set_diameter(f.v.data() + start, block));
        c1 = std::max(c1, osc / rho_s);
        block /= n;
        rho_s *= f.rho;
    }
    return c1;
}

// |phi|_1 = ||phi||_inf + c_1(phi)
inline double norm_lip(const CylinderFunction& f) {
    return norm_sup(f) + lip_constant(f);
}

// ||phi||_(theta) = max(||phi||_inf, c_1(phi) / (2 C6 |theta|))
inline double norm_theta(const CylinderFunction& f, double theta, double c6) {
    if (theta == 0.0)
        throw std::invalid_argument("norm_theta undefined at theta = 0");
    if (!(c6 > 0.0)) throw std::invalid_argument("norm_theta needs C6 > 0");
    return std::max(norm_sup(f), lip_constant(f) / (2.0 * c6 * std::abs(theta)));
}

// ---------------------------------------------------------------------------
// The complex transfer operator P_{i theta} on the cylinder discretization:
//   (P phi)(w) = sum_a p_a e^{2 pi i theta c(a, w)} phi((a.w)|_m).
// Recentring replaces c by c - chi, a global phase per application.
// ---------------------------------------------------------------------------
class TransferOperator {
public:
    TransferOperator(const CylinderSpace& space, double theta,
                     bool recentred = false, double chi = 0.0)
        : space_(&space), theta_(theta) {
        const int n = space.alphabet();
        phase_.resize(static_cast<std::size_t>(n) * space.size());
        for (int a = 0; a < n; ++a) {
            const double pa = space.ifs().p[a];
            for (std::size_t w = 0; w < space.size(); ++w) {
                const double c = space.cocycle(a, w) - (recentred ? chi : 0.0);
                const double ph = 2.0 * std::numbers::pi * theta * c;
                phase_[a * space.size() + w] =
                    pa * std::complex<double>(std::cos(ph), std::sin(ph));
            }
        }
    }

    const CylinderSpace& space() const { return *space_; }
    double theta() const { return theta_; }

    CylinderFunction apply(const CylinderFunction& phi) const {
        if (phi.depth != space_->depth() ||
            phi.v.size() != space_->size())
            throw std::invalid_argument("transfer apply: depth mismatch");
        CylinderFunction out;
        out.depth = phi.depth;
        out.alphabet = phi.alphabet;
        out.rho = phi.rho;
        out.v.assign(phi.v.size(), {0.0, 0.0});
        const int n = space_->alphabet();
        const std::size_t size = space_->size();
        // dense gather, parallel over disjoint output ranges once the table
        // is large enough to pay for the threads
        const std::size_t chunk = 1 << 15;
        const unsigned workers =
            size >= 2 * chunk ? default_workers() : 1u;
        parallel_batches(batch_count(size, chunk), workers, [&](std::size_t b) {
            const BatchRange r = batch_range(size, chunk, b);
            for (int a = 0; a < n; ++a) {
                const auto* ph = phase_.data() + a * size;
                for (std::size_t w = r.begin; w < r.begin + r.count; ++w)
                    out.v[w] += ph[w] * phi.v[space_->shift_in(a, w)];
            }
        });
        return out;
    }

    CylinderFunction apply_n(CylinderFunction phi, int n) const {
        for (int i = 0; i < n; ++i) phi = apply(phi);
        return phi;
    }

private:
    const CylinderSpace* space_;
    double theta_;
    std::vector<std::complex<double>> phase_;
};

// ---------------------------------------------------------------------------
// Leading eigenvalue by power iteration
// ---------------------------------------------------------------------------
struct EigenResult {
    std::complex<double> lambda;
    CylinderFunction eigenfunction;
    int iterations = 0;
};

inline EigenResult leading_eigen(const TransferOperator& op,
                                 double tol = 1e-12,
                                 int max_iterations = 100000) {
    const CylinderSpace& S = op.space();
    CylinderFunction v = CylinderFunction::ones(S);
    // fixed pseudorandom perturbation, so the start is never trapped in an
    // invariant subspace
    Xoshiro256 rng(0x5eed0fULL, 7);
    for (auto& z : v.v)
        z += 0.01 * std::complex<double>(rng.uniform() - 0.5, rng.uniform() - 0.5);

    std::complex<double> lambda{0.0, 0.0}, prev{1e300, 0.0};
    int it = 0;
    for (; it < max_iterations; ++it) {
        CylinderFunction w = op.apply(v);
        std::complex<double> num{0.0, 0.0};
        double den = 0.0;
        for (std::size_t i = 0; i < v.v.size(); ++i) {
            num += std::conj(v.v[i]) * w.v[i];
            den += std::norm(v.v[i]);
        }
        lambda = num / den;
        double norm2 = 0.0;
        for (const auto& z : w.v) norm2 += std::norm(z);
        const double scale = 1.0 / std::sqrt(norm2);
        for (auto& z : w.v) z *= scale;
        v = std::move(w);
        if (std::abs(lambda - prev) < tol) break;
        prev = lambda;
    }
    if (it >= max_iterations)
        throw std::runtime_error("leading_eigen: power iteration did not converge");

    // normalize so the entry of maximal modulus equals 1
    std::size_t arg = 0;
    for (std::size_t i = 1; i < v.v.size(); ++i)
        if (std::abs(v.v[i]) > std::abs(v.v[arg])) arg = i;
    const std::complex<double> pivot = v.v[arg];
    for (auto& z : v.v) z /= pivot;
    return {lambda, std::move(v), it + 1};
}

// ---------------------------------------------------------------------------
// C6 calibration: smallest power-of-two multiple of Lip(c)/(1-rho) for which
// ||P^n phi||_(theta) <= ||phi||_(theta) holds on a probe set.
// ---------------------------------------------------------------------------
struct C6Calibration {
    double c6 = 0.0;
    double start = 0.0;
    int doublings = 0;
};

namespace detail {

inline CylinderFunction random_probe(const CylinderSpace& S, Xoshiro256& rng) {
    CylinderFunction f = CylinderFunction::ones(S);
    for (auto& z : f.v)
        z = std::complex<double>(2.0 * rng.uniform() - 1.0,
                                 2.0 * rng.uniform() - 1.0);
    return f;
}

} // namespace detail

inline C6Calibration c6_calibrate(const CylinderSpace& S,
                                  const std::vector<double>& theta_grid,
                                  int n_max, int probes, std::uint64_t seed) {
    const Ifs& ifs = S.ifs();
    const double start =
        std::max(ifs.lip_c / (1.0 - ifs.rho), 1e-6);
    double c6 = start;
    for (int doubling = 0; doubling <= 20; ++doubling) {
        bool ok = true;
        for (double theta : theta_grid) {
            if (theta == 0.0) continue;
            TransferOperator op(S, theta);
            for (int pr = 0; pr <= probes && ok; ++pr) {
                Xoshiro256 rng(seed, static_cast<std::uint64_t>(pr) * 1315423911ULL +
                                          fnv1a64(&theta, sizeof(theta)));
                CylinderFunction phi = pr == 0 ? CylinderFunction::ones(S)
                                               : detail::random_probe(S, rng);
                const double n0 = norm_theta(phi, theta, c6);
                for (auto& z : phi.v) z /= n0;
                for (int n = 1; n <= n_max; ++n) {
                    phi = op.apply(phi);
                    if (norm_theta(phi, theta, c6) > 1.0 + 1e-12) {
                        ok = false;
                        break;
                    }
                }
            }
            if (!ok) break;
        }
        if (ok) return {c6, start, doubling};
        c6 *= 2.0;
    }
    throw std::runtime_error(
        "c6_calibrate: no C6 within 20 doublings keeps the probe norms "
        "contractive; operator data inconsistent");
}

// ---------------------------------------------------------------------------
// Dolgopyat-bound diagnostics
// ---------------------------------------------------------------------------
inline int n_beta_theta(double beta, double theta) {
    return static_cast<int>(beta * std::log(std::abs(theta)));
}

struct DolgopyatRow {
    double theta = 0.0;
    int n = 0;
    double norm_estimate = 0.0; // probe lower bound for ||P^{n}||_(theta)
    double residual = 0.0;
};

struct DolgopyatReport {
    std::vector<DolgopyatRow> rows;
    bool fit_ok = false;
    double c_hat = 0.0;
    double alpha_hat = 0.0;
};

// Estimates g(theta) = ||P^{n(beta,theta)}||_(theta) from below by probe
// maximization and fits 1 - g(theta) ~ C theta^{-alpha}.
inline DolgopyatReport dolgopyat_check(const CylinderSpace& S,
                                       const std::vector<double>& theta_grid,
                                       double beta, double c6, int probes,
                                       std::uint64_t seed) {
    DolgopyatReport rep;
    for (double theta : theta_grid) {
        if (!(std::abs(theta) > 1.0))
            throw std::invalid_argument("dolgopyat_check needs |theta| > 1");
        const int n = std::max(1, n_beta_theta(beta, theta));
        TransferOperator op(S, theta);
        double g = 0.0;
        for (int pr = 0; pr <= probes; ++pr) {
            Xoshiro256 rng(seed, static_cast<std::uint64_t>(pr) * 2654435761ULL +
                                     fnv1a64(&theta, sizeof(theta)));
            CylinderFunction phi = pr == 0 ? CylinderFunction::ones(S)
                                           : detail::random_probe(S, rng);
            const double n0 = norm_theta(phi, theta, c6);
            for (auto& z : phi.v) z /= n0;
            g = std::max(g, norm_theta(op.apply_n(std::move(phi), n), theta, c6));
        }
        if (g > 1.0 + 1e-9)
            throw std::runtime_error(
                "dolgopyat_check: probe norm exceeds 1, contradicting the C6 "
                "calibration (theta = " + std::to_string(theta) + ")");
        rep.rows.push_back({theta, n, g, 0.0});
    }

    // fit log(1 - g) = log C - alpha log theta on rows with a genuine gap
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t cnt = 0;
    for (const auto& row : rep.rows) {
        const double gap = 1.0 - row.norm_estimate;
        if (gap <= 0.0) continue;
        const double x = std::log(std::abs(row.theta));
        const double y = std::log(gap);
        sx += x; sy += y; sxx += x * x; sxy += x * y;
        ++cnt;
    }
    if (cnt >= 2 && std::abs(cnt * sxx - sx * sx) > 1e-30) {
        const double slope = (cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
        const double intercept = (sy - slope * sx) / cnt;
        rep.alpha_hat = -slope;
        rep.c_hat = std::exp(intercept);
        rep.fit_ok = true;
        for (auto& row : rep.rows) {
            const double gap = 1.0 - row.norm_estimate;
            if (gap <= 0.0) continue;
            row.residual = std::log(gap) -
                           (intercept + slope * std::log(std::abs(row.theta)));
        }
    }
    return rep;
}

// ||P_{i theta}^n (1)||_inf, the quantity bounded by e^{-n C / |theta|^{alpha+1}}.
inline double decay_of_one(const CylinderSpace& S, double theta, int n,
                           double beta) {
    if (!(std::abs(theta) > 1.0))
        throw std::invalid_argument("decay_of_one needs |theta| > 1");
    if (!(n > 2.0 * beta * std::log(std::abs(theta))))
        throw std::invalid_argument("decay_of_one needs n > 2 beta log|theta|");
    TransferOperator op(S, theta);
    return norm_sup(op.apply_n(CylinderFunction::ones(S), n));
}

// ---------------------------------------------------------------------------
// Small-theta curvature: fit log ||P^n 1||_inf ~ -c theta^2 n. For affine
// systems c should sit near (2 pi)^2 r0^2 / 2.
// ---------------------------------------------------------------------------
struct CurvatureFit {
    double fitted_c = 0.0;
    std::size_t points = 0;
};

inline CurvatureFit curvature_check(const CylinderSpace& S,
                                    const std::vector<double>& theta_grid,
                                    int n_max, double var_r0) {
    if (var_r0 < 1e-10)
        throw DegenerateVarianceError(
            "curvature_check: degenerate variance (walk cohomologous to "
            "constant)");
    // slope through the origin of y = log||P^n 1|| against x = theta^2 n
    double sxy = 0.0, sxx = 0.0;
    std::size_t pts = 0;
    for (double theta : theta_grid) {
        if (theta == 0.0) continue;
        TransferOperator op(S, theta);
        CylinderFunction f = CylinderFunction::ones(S);
        for (int n = 1; n <= n_max; ++n) {
            f = op.apply(f);
            if (n % 25 != 0) continue;
            const double y = std::log(norm_sup(f));
            const double x = theta * theta * n;
            sxy += x * y;
            sxx += x * x;
            ++pts;
        }
    }
    CurvatureFit fit;
    fit.points = pts;
    fit.fitted_c = sxx > 0.0 ? -sxy / sxx : 0.0;
    return fit;
}

} // namespace scfd

#endif
