#ifndef SCFD_COCYCLE_HPP
#define SCFD_COCYCLE_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "ifs.hpp"
#include "measure.hpp"
#include "parallel.hpp"
#include "rng.hpp"

namespace scfd {

// Default number of extra tail symbols appended when a finite word stands in
// for an infinite one; the truncation error of the cocycle decays like
// Lip(c) rho^{extra}.
inline constexpr int kDefaultTail = 40;

// c(a, omega) = -log f'_a(x_omega), with x_omega approximated by the
// truncated coding point of w.
inline double cocycle_value(const Ifs& ifs, int a, const Word& w) {
    if (a < 0 || a >= ifs.alphabet())
        throw std::invalid_argument("cocycle_value: symbol out of range");
    return -std::log(ifs.maps[a].derivative(coding_point(ifs, w)));
}

// n-step cocycle c(u, omega) = -log f'_u(x_omega).
inline double cocycle_value(const Ifs& ifs, const Word& u, const Word& w) {
    return -log_derivative_word(ifs, u, coding_point(ifs, w));
}

// S_{|w|}(omega) = -log f'_w(x_{sigma^{|w|} omega}) with the shifted point
// approximated by the tail word.
inline double birkhoff_sum(const Ifs& ifs, const Word& w, const Word& tail) {
    return -log_derivative_word(ifs, w, coding_point(ifs, tail));
}

// Prefix sums S_1..S_n computed in one backward pass: y_i = x_{sigma^i w}
// obeys y_{i-1} = f_{w_i}(y_i), and X_i = -log f'_{w_i}(y_i).
inline std::vector<double> walk_prefix_sums(const Ifs& ifs, const Word& w) {
    const std::size_t n = w.size();
    std::vector<double> y(n + 1);
    y[n] = ifs.x0;
    for (std::size_t i = n; i-- > 0;) y[i] = ifs.maps[w[i]](y[i + 1]);
    std::vector<double> s(n);
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += -std::log(ifs.maps[w[i]].derivative(y[i + 1]));
        s[i] = acc;
    }
    return s;
}

inline Word random_word(const Ifs& ifs, std::size_t length,
                        const CategoricalSampler& cat, Xoshiro256& rng) {
    Word w(length);
    for (auto& s : w) s = cat(rng);
    return w;
}

struct McEstimate {
    double value = 0.0;
    double stderr_est = 0.0;
    bool exact = false;
};

// Lyapunov exponent chi = E[c]. Exact for all-affine systems, Monte Carlo
// average of S_n/n otherwise.
inline McEstimate lyapunov_chi(const Ifs& ifs, std::size_t count, int n,
                               std::uint64_t seed, unsigned workers = 1) {
    if (ifs.all_affine()) {
        double chi = 0.0;
        for (std::size_t i = 0; i < ifs.maps.size(); ++i)
            chi += ifs.p[i] * -std::log(ifs.maps[i].coefficients()[1]);
        return {chi, 0.0, true};
    }
    if (n < 1) throw std::invalid_argument("lyapunov_chi: n >= 1");
    const CategoricalSampler cat(ifs.p);
    const std::size_t nb = batch_count(count, kMcBatch);
    std::vector<double> sum(nb, 0.0), sumsq(nb, 0.0);
    parallel_batches(nb, workers, [&](std::size_t b) {
        const BatchRange r = batch_range(count, kMcBatch, b);
        Xoshiro256 rng(seed, b);
        double s1 = 0.0, s2 = 0.0;
        for (std::size_t i = 0; i < r.count; ++i) {
            const Word w = random_word(ifs, n + kDefaultTail, cat, rng);
            Word head(w.begin(), w.begin() + n);
            Word tail(w.begin() + n, w.end());
            const double v = birkhoff_sum(ifs, head, tail) / n;
            s1 += v;
            s2 += v * v;
        }
        sum[b] = s1;
        sumsq[b] = s2;
    });
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        s1 += sum[b];
        s2 += sumsq[b];
    }
    const double mean = s1 / count;
    const double var = std::max(0.0, s2 / count - mean * mean);
    return {mean, std::sqrt(var / count), false};
}

// Asymptotic variance r0^2 ~ Var(S_n)/n. Exact for all-affine systems
// (i.i.d. steps); flags the degenerate (cohomologous-to-constant) case.
struct VarianceEstimate {
    double value = 0.0;
    double stderr_est = 0.0;
    bool exact = false;
    bool degenerate = false;
};

inline VarianceEstimate variance_r0(const Ifs& ifs, std::size_t count, int n,
                                    std::uint64_t seed, unsigned workers = 1) {
    VarianceEstimate out;
    if (ifs.all_affine()) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t i = 0; i < ifs.maps.size(); ++i) {
            const double x = -std::log(ifs.maps[i].coefficients()[1]);
            m1 += ifs.p[i] * x;
            m2 += ifs.p[i] * x * x;
        }
        out.value = m2 - m1 * m1;
        out.exact = true;
        out.degenerate = out.value < 1e-10;
        return out;
    }
    if (n < 2) throw std::invalid_argument("variance_r0: n >= 2");
    const CategoricalSampler cat(ifs.p);
    const std::size_t nb = batch_count(count, kMcBatch);
    std::vector<double> sum(nb, 0.0), sumsq(nb, 0.0), sum4(nb, 0.0);
    parallel_batches(nb, workers, [&](std::size_t b) {
        const BatchRange r = batch_range(count, kMcBatch, b);
        Xoshiro256 rng(seed, b);
        double s1 = 0.0, s2 = 0.0, s4 = 0.0;
        for (std::size_t i = 0; i < r.count; ++i) {
            const Word w = random_word(ifs, n + kDefaultTail, cat, rng);
            Word head(w.begin(), w.begin() + n);
            Word tail(w.begin() + n, w.end());
            const double v = birkhoff_sum(ifs, head, tail);
            s1 += v;
            s2 += v * v;
            s4 += v * v * v * v;
        }
        sum[b] = s1;
        sumsq[b] = s2;
        sum4[b] = s4;
    });
    double s1 = 0.0, s2 = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        s1 += sum[b];
        s2 += sumsq[b];
    }
    const double mean = s1 / count;
    const double var = std::max(0.0, s2 / count - mean * mean);
    out.value = var / n;
    // stderr of a variance estimate ~ var * sqrt(2/count) for near-Gaussian S_n
    out.stderr_est = out.value * std::sqrt(2.0 / count);
    out.degenerate = out.value < 1e-10;
    return out;
}

// ---------------------------------------------------------------------------
// tau_k, the h'-partitions and the Gamma overshoot law
// ---------------------------------------------------------------------------

// tau_k(w) = min{n : S_n(w) >= k chi}. S_n is strictly increasing (every
// step exceeds D > 0), so this is a first crossing.
inline int tau_k(const Ifs& ifs, const Word& w, double k, double chi) {
    const auto s = walk_prefix_sums(ifs, w);
    const double target = k * chi;
    for (std::size_t n = 0; n < s.size(); ++n)
        if (s[n] >= target) return static_cast<int>(n) + 1;
    throw WordTooShortError(
        "tau_k: word of length " + std::to_string(w.size()) +
        " never reaches k*chi = " + std::to_string(target) +
        "; supply a longer word");
}

namespace detail {

// max_{x in I} f'_{w|n}(x), by coarse scan plus golden-section refinement.
// Exact for affine words (constant derivative).
inline double max_word_derivative(const Ifs& ifs, const Word& prefix) {
    bool affine = true;
    for (auto s : prefix)
        if (ifs.maps[s].kind() != MapKind::Affine) { affine = false; break; }
    if (affine) {
        double prod = 1.0;
        for (auto s : prefix) prod *= ifs.maps[s].coefficients()[1];
        return prod;
    }
    const auto logdw = [&](double x) {
        double acc = 0.0;
        for (std::size_t i = prefix.size(); i-- > 0;) {
            acc += std::log(ifs.maps[prefix[i]].derivative(x));
            x = ifs.maps[prefix[i]](x);
        }
        return acc;
    };
    const Interval I = ifs.interval;
    const int S = 64;
    double best = -1e300;
    int besti = 0;
    for (int i = 0; i <= S; ++i) {
        const double x = I.lo + I.length() * i / S;
        const double v = logdw(x);
        if (v > best) { best = v; besti = i; }
    }
    double a = I.lo + I.length() * std::max(0, besti - 1) / S;
    double b = I.lo + I.length() * std::min(S, besti + 1) / S;
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = logdw(x1), f2 = logdw(x2);
    for (int it = 0; it < 60 && b - a > 1e-13; ++it) {
        if (f1 < f2) {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a); f2 = logdw(x2);
        } else {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a); f1 = logdw(x1);
        }
    }
    return std::exp(std::max(best, std::max(f1, f2)));
}

} // namespace detail

// tilde_tau_h(w) = min{n : -log max_{x in I} f'_{w|n}(x) >= h chi}.
inline int tilde_tau_h(const Ifs& ifs, const Word& w, double h, double chi) {
    const double target = h * chi;
    Word prefix;
    prefix.reserve(w.size());
    for (std::size_t n = 0; n < w.size(); ++n) {
        prefix.push_back(w[n]);
        if (-std::log(detail::max_word_derivative(ifs, prefix)) >= target)
            return static_cast<int>(n) + 1;
    }
    throw WordTooShortError(
        "tilde_tau_h: word of length " + std::to_string(w.size()) +
        " never contracts past h*chi = " + std::to_string(target));
}

struct PartitionCell {
    double k = 0.0;
    double h_prime = 0.0;
    Word label; // eta' = (sigma^{tau_k - 1} w) | tilde_tau_{h'}
};

inline PartitionCell partition_cell(const Ifs& ifs, const Word& w, double k,
                                    double h_prime, double chi) {
    const int tk = tau_k(ifs, w, k, chi);
    Word shifted(w.begin() + (tk - 1), w.end());
    const int tt = tilde_tau_h(ifs, shifted, h_prime, chi);
    PartitionCell cell;
    cell.k = k;
    cell.h_prime = h_prime;
    cell.label.assign(shifted.begin(), shifted.begin() + tt);
    return cell;
}

// Gamma_{A_{k,eta'}}((-inf, t]) for t in [k chi, k chi + D']:
//   E[ min(t - k chi, X_1)^+ ] / E[ X_1 ]  over tails starting with eta'.
inline double gamma_cdf(const Ifs& ifs, const PartitionCell& cell, double t,
                        double chi, std::size_t count, std::uint64_t seed,
                        unsigned workers = 1) {
    if (cell.label.empty())
        throw std::invalid_argument("gamma_cdf: empty cell label");
    if (count == 0) throw std::invalid_argument("gamma_cdf: no tail samples");
    check_symbols(ifs, cell.label);
    const double offset = t - cell.k * chi;
    const CategoricalSampler cat(ifs.p);
    const std::size_t nb = batch_count(count, kMcBatch);
    std::vector<double> num(nb, 0.0), den(nb, 0.0);
    parallel_batches(nb, workers, [&](std::size_t b) {
        const BatchRange r = batch_range(count, kMcBatch, b);
        Xoshiro256 rng(seed, b);
        double nsum = 0.0, dsum = 0.0;
        for (std::size_t i = 0; i < r.count; ++i) {
            // omega' = eta' . tail;  X_1(omega') = -log f'_{eta'_1}(x_{sigma omega'})
            Word shifted(cell.label.begin() + 1, cell.label.end());
            const Word tail = random_word(ifs, kDefaultTail, cat, rng);
            shifted.insert(shifted.end(), tail.begin(), tail.end());
            const double x1 =
                -std::log(ifs.maps[cell.label[0]].derivative(coding_point(ifs, shifted)));
            nsum += std::max(0.0, std::min(offset, x1));
            dsum += x1;
        }
        num[b] = nsum;
        den[b] = dsum;
    });
    double n = 0.0, d = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        n += num[b];
        d += den[b];
    }
    return n / d;
}

} // namespace scfd

#endif
