#ifndef SCFD_IFS_HPP
#define SCFD_IFS_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace scfd {

// Symbols are stored 0-based; user-facing text is 1-based.
using Word = std::vector<std::uint8_t>;

inline std::string format_word(const Word& w, int alphabet) {
    std::string out;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (alphabet > 9 && i) out += '.';
        out += std::to_string(static_cast<int>(w[i]) + 1);
    }
    return out;
}

inline Word repeat_word(std::initializer_list<int> pattern, std::size_t length) {
    Word w;
    w.reserve(length);
    std::size_t i = 0;
    while (w.size() < length) {
        w.push_back(static_cast<std::uint8_t>(*(pattern.begin() + (i % pattern.size())) - 1));
        ++i;
    }
    return w;
}

struct Interval {
    double lo = 0.0;
    double hi = 1.0;
    double length() const { return hi - lo; }
    double midpoint() const { return 0.5 * (lo + hi); }
    bool contains(double x) const { return x >= lo && x <= hi; }
};

// ---------------------------------------------------------------------------
// Small dense polynomials (degree <= 4), with exact derivatives and real
// root isolation on an interval. Used for the map models and for exact
// optimization of derivatives during validation.
// ---------------------------------------------------------------------------
class Poly {
public:
    Poly() = default;
    explicit Poly(std::vector<double> coef) : c_(std::move(coef)) { trim(); }

    int degree() const { return static_cast<int>(c_.size()) - 1; }

    double operator()(double x) const {
        double v = 0.0;
        for (std::size_t i = c_.size(); i-- > 0;) v = v * x + c_[i];
        return v;
    }

    Poly derivative() const {
        if (c_.size() <= 1) return Poly(std::vector<double>{});
        std::vector<double> d(c_.size() - 1);
        for (std::size_t i = 1; i < c_.size(); ++i)
            d[i - 1] = c_[i] * static_cast<double>(i);
        return Poly(std::move(d));
    }

    // All real roots in [lo, hi], ascending, deduplicated. Splits the
    // interval at the derivative's roots and bisects each monotone piece.
    std::vector<double> roots_in(double lo, double hi) const {
        std::vector<double> out;
        if (c_.empty()) return out; // identically zero: treat as rootless
        if (degree() == 0) return out;
        if (degree() == 1) {
            const double r = -c_[0] / c_[1];
            if (r >= lo && r <= hi) out.push_back(r);
            return out;
        }
        std::vector<double> cuts = derivative().roots_in(lo, hi);
        cuts.insert(cuts.begin(), lo);
        cuts.push_back(hi);
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            double a = cuts[i], b = cuts[i + 1];
            if (!(b > a)) continue;
            double fa = (*this)(a), fb = (*this)(b);
            const double scale = std::max({std::abs(fa), std::abs(fb), 1.0});
            if (std::abs(fa) <= 1e-14 * scale) {
                push_root(out, a);
                continue;
            }
            if (std::abs(fb) <= 1e-14 * scale) {
                if (i + 2 == cuts.size()) push_root(out, b);
                continue;
            }
            if ((fa > 0) == (fb > 0)) continue;
            for (int it = 0; it < 200; ++it) {
                const double m = 0.5 * (a + b);
                const double fm = (*this)(m);
                if (fm == 0.0) { a = b = m; break; }
                if ((fm > 0) == (fa > 0)) { a = m; fa = fm; } else { b = m; }
                if (b - a <= 1e-15 * std::max(1.0, std::abs(a))) break;
            }
            push_root(out, 0.5 * (a + b));
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    const std::vector<double>& coefficients() const { return c_; }

private:
    static void push_root(std::vector<double>& out, double r) {
        for (double x : out)
            if (std::abs(x - r) <= 1e-12 * std::max(1.0, std::abs(r))) return;
        out.push_back(r);
    }
    void trim() {
        while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
        if (c_.size() == 1 && c_[0] == 0.0) c_.clear();
    }
    std::vector<double> c_;
};

// ---------------------------------------------------------------------------
// Maps
// ---------------------------------------------------------------------------
enum class MapKind { Affine, Polynomial, ConjugatedAffine };

inline const char* to_string(MapKind k) {
    switch (k) {
        case MapKind::Affine: return "affine";
        case MapKind::Polynomial: return "polynomial";
        case MapKind::ConjugatedAffine: return "conjugated-affine";
    }
    return "?";
}

// One orientation-preserving C^2 contraction, represented symbolically so
// that f' and f'' are exact coefficient operations.
//
//   affine:             f(x) = r x + b,        coefficients [r, b]
//   polynomial:         f(x) = a0 + ... + ad x^d (d <= 4)
//   conjugated-affine:  f = h o (r x + b) o h^{-1} with h(t) = (e^t-1)/(e-1),
//                        coefficients [r, b]
class IfsMap {
public:
    static IfsMap affine(double r, double b) {
        IfsMap m;
        m.kind_ = MapKind::Affine;
        m.coef_ = {b, r};
        return m;
    }

    static IfsMap polynomial(std::vector<double> ascending_coef) {
        if (ascending_coef.size() > 5)
            throw std::invalid_argument("polynomial maps support degree <= 4");
        IfsMap m;
        m.kind_ = MapKind::Polynomial;
        m.coef_ = std::move(ascending_coef);
        return m;
    }

    static IfsMap conjugated_affine(double r, double b) {
        IfsMap m;
        m.kind_ = MapKind::ConjugatedAffine;
        m.coef_ = {b, r};
        return m;
    }

    MapKind kind() const { return kind_; }
    const std::vector<double>& coefficients() const { return coef_; }

    double operator()(double x) const {
        switch (kind_) {
            case MapKind::Affine: return coef_[1] * x + coef_[0];
            case MapKind::Polynomial: return Poly(coef_)(x);
            case MapKind::ConjugatedAffine: {
                const double u = h_inv(x);
                return h(coef_[1] * u + coef_[0]);
            }
        }
        return 0.0;
    }

    double derivative(double x) const {
        switch (kind_) {
            case MapKind::Affine: return coef_[1];
            case MapKind::Polynomial: return Poly(coef_).derivative()(x);
            case MapKind::ConjugatedAffine: {
                // r * exp((r-1) u + b) with u = h^{-1}(x)
                const double u = h_inv(x);
                return coef_[1] * std::exp((coef_[1] - 1.0) * u + coef_[0]);
            }
        }
        return 0.0;
    }

    double second_derivative(double x) const {
        switch (kind_) {
            case MapKind::Affine: return 0.0;
            case MapKind::Polynomial:
                return Poly(coef_).derivative().derivative()(x);
            case MapKind::ConjugatedAffine: {
                const double u = h_inv(x);
                const double K = std::exp(1.0) - 1.0;
                return coef_[1] * (coef_[1] - 1.0) * K *
                       std::exp((coef_[1] - 2.0) * u + coef_[0]);
            }
        }
        return 0.0;
    }

    // Exact range of f' over [lo, hi]: endpoints plus critical points of f'.
    std::pair<double, double> derivative_range(const Interval& I) const {
        switch (kind_) {
            case MapKind::Affine:
                return {coef_[1], coef_[1]};
            case MapKind::Polynomial: {
                const Poly d1 = Poly(coef_).derivative();
                const Poly d2 = d1.derivative();
                double mn = std::min(d1(I.lo), d1(I.hi));
                double mx = std::max(d1(I.lo), d1(I.hi));
                for (double r : d2.roots_in(I.lo, I.hi)) {
                    const double v = d1(r);
                    mn = std::min(mn, v);
                    mx = std::max(mx, v);
                }
                return {mn, mx};
            }
            case MapKind::ConjugatedAffine: {
                // f' = r exp((r-1) u + b) is monotone in x
                const double a = derivative(I.lo), b = derivative(I.hi);
                return {std::min(a, b), std::max(a, b)};
            }
        }
        return {0.0, 0.0};
    }

    // Exact range of f over [lo, hi]: endpoints plus interior roots of f'.
    std::pair<double, double> value_range(const Interval& I) const {
        double mn = std::min((*this)(I.lo), (*this)(I.hi));
        double mx = std::max((*this)(I.lo), (*this)(I.hi));
        if (kind_ == MapKind::Polynomial) {
            for (double r : Poly(coef_).derivative().roots_in(I.lo, I.hi)) {
                const double v = (*this)(r);
                mn = std::min(mn, v);
                mx = std::max(mx, v);
            }
        }
        return {mn, mx};
    }

    // Exact sup of |f''/f'| over [lo, hi]; the critical points of the ratio
    // are roots of f''' f' - f''^2, again a small polynomial.
    double log_derivative_slope_bound(const Interval& I) const {
        switch (kind_) {
            case MapKind::Affine:
                return 0.0;
            case MapKind::Polynomial: {
                const Poly d1 = Poly(coef_).derivative();
                const Poly d2 = d1.derivative();
                const Poly d3 = d2.derivative();
                auto ratio = [&](double x) { return std::abs(d2(x) / d1(x)); };
                double best = std::max(ratio(I.lo), ratio(I.hi));
                // numerator of (f''/f')' = (f''' f' - f''^2)/f'^2
                std::vector<double> num(8, 0.0);
                const auto& a3 = d3.coefficients();
                const auto& a1 = d1.coefficients();
                const auto& a2 = d2.coefficients();
                for (std::size_t i = 0; i < a3.size(); ++i)
                    for (std::size_t j = 0; j < a1.size(); ++j)
                        num[i + j] += a3[i] * a1[j];
                for (std::size_t i = 0; i < a2.size(); ++i)
                    for (std::size_t j = 0; j < a2.size(); ++j)
                        num[i + j] -= a2[i] * a2[j];
                for (double r : Poly(num).roots_in(I.lo, I.hi))
                    best = std::max(best, ratio(r));
                return best;
            }
            case MapKind::ConjugatedAffine: {
                // |f''/f'| = |r-1| K e^{-u}, monotone in x
                auto ratio = [&](double x) {
                    return std::abs(second_derivative(x) / derivative(x));
                };
                return std::max(ratio(I.lo), ratio(I.hi));
            }
        }
        return 0.0;
    }

    std::string describe() const {
        std::ostringstream os;
        os << to_string(kind_) << " [";
        if (kind_ == MapKind::Polynomial) {
            for (std::size_t i = 0; i < coef_.size(); ++i)
                os << (i ? ", " : "") << coef_[i];
        } else {
            os << "r=" << coef_[1] << ", b=" << coef_[0];
        }
        os << "]";
        return os.str();
    }

private:
    static double h(double t) { return std::expm1(t) / (std::exp(1.0) - 1.0); }
    static double h_inv(double y) {
        return std::log1p((std::exp(1.0) - 1.0) * y);
    }

    MapKind kind_ = MapKind::Affine;
    std::vector<double> coef_{0.0, 0.5}; // [b, r] or ascending polynomial
};

// ---------------------------------------------------------------------------
// IFS with cached contraction constants
// ---------------------------------------------------------------------------
struct Ifs {
    std::vector<IfsMap> maps;
    std::vector<double> p;
    Interval interval;

    // cached on construction
    double rho = 0.0;        // sup ||f'||_inf
    double deriv_min = 0.0;  // inf f'
    double D = 0.0;          // min (-log f')  = -log rho
    double Dprime = 0.0;     // max (-log f')  = -log deriv_min
    double x0 = 0.0;         // base point (interval midpoint)
    double slope_bound = 0.0; // sup |f''/f'|
    double lip_c = 0.0;      // Lipschitz bound of c(a,.) in d_rho

    int alphabet() const { return static_cast<int>(maps.size()); }
    bool all_affine() const {
        for (const auto& m : maps)
            if (m.kind() != MapKind::Affine) return false;
        return true;
    }

    static Ifs create(std::vector<IfsMap> maps, std::vector<double> p,
                      Interval interval) {
        if (maps.empty()) throw std::invalid_argument("ifs needs maps");
        if (p.size() != maps.size())
            throw std::invalid_argument("probability vector size mismatch");
        double sum = 0.0;
        for (double w : p) {
            if (!(w > 0.0)) throw std::invalid_argument("probabilities must be > 0");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("probabilities must sum to 1");
        for (double& w : p) w /= sum;
        if (!(interval.hi > interval.lo))
            throw std::invalid_argument("interval must have positive length");

        Ifs ifs;
        ifs.maps = std::move(maps);
        ifs.p = std::move(p);
        ifs.interval = interval;
        ifs.x0 = interval.midpoint();

        double dmin = std::numeric_limits<double>::infinity();
        double dmax = 0.0;
        double slope = 0.0;
        for (const auto& m : ifs.maps) {
            const auto [mn, mx] = m.derivative_range(interval);
            dmin = std::min(dmin, mn);
            dmax = std::max(dmax, mx);
            slope = std::max(slope, m.log_derivative_slope_bound(interval));
        }
        ifs.rho = dmax;
        ifs.deriv_min = dmin;
        ifs.D = -std::log(dmax);
        ifs.Dprime = dmin > 0.0 ? -std::log(dmin)
                                : std::numeric_limits<double>::infinity();
        ifs.slope_bound = slope;
        // |c(a,w) - c(a,w')| <= slope * |x_w - x_w'| <= slope * |I| * rho^{s-1}
        // while d_rho = rho^s, hence the rho division.
        ifs.lip_c = dmax > 0.0 ? slope * interval.length() / dmax : 0.0;
        return ifs;
    }
};

// ---------------------------------------------------------------------------
// Word operations
// ---------------------------------------------------------------------------
inline void check_symbols(const Ifs& ifs, const Word& w) {
    for (auto s : w)
        if (s >= ifs.maps.size())
            throw std::invalid_argument("word symbol out of range");
}

// f_w(x) with the composition order f_{w_1} o ... o f_{w_m} (innermost map
// is the last symbol).
inline double compose_eval(const Ifs& ifs, const Word& w, double x) {
    if (!ifs.interval.contains(x))
        throw std::domain_error("compose_eval: x outside the interval");
    check_symbols(ifs, w);
    for (std::size_t i = w.size(); i-- > 0;) x = ifs.maps[w[i]](x);
    return x;
}

// f'_w(x) as the chain-rule product; always in (0, rho^{|w|}].
inline double derivative_word(const Ifs& ifs, const Word& w, double x) {
    if (!ifs.interval.contains(x))
        throw std::domain_error("derivative_word: x outside the interval");
    check_symbols(ifs, w);
    double deriv = 1.0;
    for (std::size_t i = w.size(); i-- > 0;) {
        deriv *= ifs.maps[w[i]].derivative(x);
        x = ifs.maps[w[i]](x);
    }
    return deriv;
}

// log f'_w(x), summed factor-wise so long words cannot underflow.
inline double log_derivative_word(const Ifs& ifs, const Word& w, double x) {
    if (!ifs.interval.contains(x))
        throw std::domain_error("log_derivative_word: x outside the interval");
    check_symbols(ifs, w);
    double acc = 0.0;
    for (std::size_t i = w.size(); i-- > 0;) {
        acc += std::log(ifs.maps[w[i]].derivative(x));
        x = ifs.maps[w[i]](x);
    }
    return acc;
}

// Truncated coding point f_w(x0); differs from x_omega of any extension of w
// by at most rho^{|w|} |I|.
inline double coding_point(const Ifs& ifs, const Word& w) {
    double x = ifs.x0;
    check_symbols(ifs, w);
    for (std::size_t i = w.size(); i-- > 0;) x = ifs.maps[w[i]](x);
    return x;
}

// Unique fixed point of a validated contraction, by bisection on f(x)-x.
inline double fixed_point(const IfsMap& map, const Interval& I) {
    double a = I.lo, b = I.hi;
    double fa = map(a) - a;
    const double fb = map(b) - b;
    if (fa == 0.0) return a;
    if (fb == 0.0) return b;
    if ((fa > 0) == (fb > 0))
        throw std::invalid_argument("fixed_point: map is not a self-map contraction");
    while (b - a > 1e-14) {
        const double m = 0.5 * (a + b);
        const double fm = map(m) - m;
        if (fm == 0.0) return m;
        if ((fm > 0) == (fa > 0)) { a = m; fa = fm; } else { b = m; }
    }
    return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------
struct ValidationCheck {
    std::string name;
    bool pass = false;
    double witness = std::numeric_limits<double>::quiet_NaN();
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    double rho = 0.0;
    double D = 0.0;
    double Dprime = 0.0;
    bool ok() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

inline ValidationReport validate(const Ifs& ifs) {
    ValidationReport rep;
    rep.rho = ifs.rho;
    rep.D = ifs.D;
    rep.Dprime = ifs.Dprime;
    const Interval I = ifs.interval;

    for (std::size_t i = 0; i < ifs.maps.size(); ++i) {
        const auto& m = ifs.maps[i];
        const std::string tag = "map " + std::to_string(i + 1);

        const auto [vmin, vmax] = m.value_range(I);
        ValidationCheck self{tag + ": self-map f(I) within I", true, 0.0, ""};
        if (vmin < I.lo - 1e-12 || vmax > I.hi + 1e-12) {
            self.pass = false;
            self.witness = vmin < I.lo - 1e-12 ? vmin : vmax;
            self.detail = "image [" + std::to_string(vmin) + ", " +
                          std::to_string(vmax) + "] escapes the interval";
        }
        rep.checks.push_back(self);

        const auto [dmin, dmax] = m.derivative_range(I);
        ValidationCheck pos{tag + ": orientation-preserving (f' > 0)", dmin > 0.0,
                            dmin, ""};
        if (!pos.pass) pos.detail = "min f' = " + std::to_string(dmin);
        rep.checks.push_back(pos);

        ValidationCheck con{tag + ": uniform contraction (f' < 1)", dmax < 1.0,
                            dmax, ""};
        if (!con.pass) con.detail = "max f' = " + std::to_string(dmax);
        rep.checks.push_back(con);
    }

    ValidationCheck count{"at least two maps", ifs.maps.size() >= 2,
                          static_cast<double>(ifs.maps.size()), ""};
    rep.checks.push_back(count);

    if (ifs.maps.size() >= 2 && rep.ok()) {
        bool distinct = false;
        std::vector<double> fps;
        for (const auto& m : ifs.maps) fps.push_back(fixed_point(m, I));
        for (std::size_t i = 0; i < fps.size() && !distinct; ++i)
            for (std::size_t j = i + 1; j < fps.size(); ++j)
                if (std::abs(fps[i] - fps[j]) > 1e-12) {
                    distinct = true;
                    break;
                }
        ValidationCheck dc{"two maps with distinct fixed points", distinct,
                           fps.size() >= 2 ? fps[1] - fps[0] : 0.0, ""};
        rep.checks.push_back(dc);
    }

    return rep;
}

// ---------------------------------------------------------------------------
// Ready-made systems used throughout the tests and docs
// ---------------------------------------------------------------------------
namespace systems {

// {x/2, x/2 + 1/2}: nu is Lebesgue on [0,1]
inline Ifs lebesgue() {
    return Ifs::create({IfsMap::affine(0.5, 0.0), IfsMap::affine(0.5, 0.5)},
                       {0.5, 0.5}, {0.0, 1.0});
}

// {x/3, x/3 + 2/3}: middle-thirds Cantor measure
inline Ifs cantor() {
    return Ifs::create({IfsMap::affine(1.0 / 3.0, 0.0),
                        IfsMap::affine(1.0 / 3.0, 2.0 / 3.0)},
                       {0.5, 0.5}, {0.0, 1.0});
}

// {x/2, x/3 + 2/3}: affine, two distinct ratios
inline Ifs two_ratio() {
    return Ifs::create({IfsMap::affine(0.5, 0.0),
                        IfsMap::affine(1.0 / 3.0, 2.0 / 3.0)},
                       {0.5, 0.5}, {0.0, 1.0});
}

// {x/2 + x^2/8, (x+2)/3}: genuinely nonlinear
inline Ifs nonlinear() {
    return Ifs::create({IfsMap::polynomial({0.0, 0.5, 0.125}),
                        IfsMap::affine(1.0 / 3.0, 2.0 / 3.0)},
                       {0.5, 0.5}, {0.0, 1.0});
}

// h {x/2, x/2+1/2} h^{-1} with h(t) = (e^t - 1)/(e - 1): smoothly conjugate
// to linear
inline Ifs conjugated_lebesgue() {
    return Ifs::create({IfsMap::conjugated_affine(0.5, 0.0),
                        IfsMap::conjugated_affine(0.5, 0.5)},
                       {0.5, 0.5}, {0.0, 1.0});
}

} // namespace systems

} // namespace scfd

#endif
