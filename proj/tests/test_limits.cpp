#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "scfd/limits.hpp"

using namespace scfd;
using Catch::Approx;

TEST_CASE("gaussian density: conventions and normalization") {
    CHECK(gaussian_density({1, 1.0, false}, 0.0) ==
          Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)));
    CHECK(gaussian_density({100, 0.2027, false}, 0.0) ==
          Approx(1.0 / (0.2027 * std::sqrt(200.0 * std::numbers::pi))));
    CHECK(gaussian_density({50, 0.3, false}, 1e6) == Approx(0.0).margin(1e-300));

    // paper-literal formula, as printed
    CHECK(gaussian_density({10, 0.5, true}, 2.0) ==
          Approx(std::exp(-4.0 * 0.25 / 20.0) /
                 std::sqrt(20.0 * std::numbers::pi)));

    // the standard convention integrates to one
    for (int n : {1, 30}) {
        const GaussianModel g{n, 0.4, false};
        const double sigma = 0.4 * std::sqrt(static_cast<double>(n));
        const double lo = -10.0 * sigma, hi = 10.0 * sigma;
        const int seg = 1 << 16;
        const double h = (hi - lo) / seg;
        double acc = 0.0;
        for (int i = 0; i <= seg; ++i) {
            const double w = (i == 0 || i == seg) ? 1.0 : (i % 2 ? 4.0 : 2.0);
            acc += w * gaussian_density(g, lo + i * h);
        }
        CHECK(acc * h / 3.0 == Approx(1.0).margin(1e-8));
    }
}

TEST_CASE("exact Berry-Esseen distances for the two-ratio system") {
    const auto two = systems::two_ratio();
    const double d100 = clt_error(two, 100, CltMethod::ExactTwoPointAffine, 0, 0);
    const double d400 = clt_error(two, 400, CltMethod::ExactTwoPointAffine, 0, 0);
    const double d1600 = clt_error(two, 1600, CltMethod::ExactTwoPointAffine, 0, 0);
    CHECK(d100 <= 0.06);
    CHECK(d400 <= 0.03);
    CHECK(d1600 < d400);
    CHECK(d400 < d100);
    CHECK(clt_error(two, 1, CltMethod::ExactTwoPointAffine, 0, 0) <= 1.0);

    // deterministic: the seed argument is unused by the exact oracle
    CHECK(clt_error(two, 100, CltMethod::ExactTwoPointAffine, 10, 123) == d100);
}

TEST_CASE("empirical CLT distance agrees with the exact oracle") {
    const auto two = systems::two_ratio();
    const double exact = clt_error(two, 64, CltMethod::ExactTwoPointAffine, 0, 0);
    const double emp = clt_error(two, 64, CltMethod::Empirical, 200000, 9, 2);
    CHECK(emp == Approx(exact).margin(0.01));

    const auto nl = systems::nonlinear();
    const double d = clt_error(nl, 50, CltMethod::Empirical, 100000, 5, 2);
    CHECK(d > 0.0);
    CHECK(d < 0.2);
    CHECK_THROWS_AS(clt_error(systems::lebesgue(), 10, CltMethod::Empirical,
                              1000, 1, 1),
                    DegenerateVarianceError);
}

TEST_CASE("llt_ratio: nonlinear mass near lambda(C)") {
    const auto nl = systems::nonlinear();
    const auto rep = llt_ratio(nl, Word(30, 0), 30, -0.25, 0.25, 0.0, 200000, 31,
                               2, 2.0);
    CHECK(rep.lambda_c == Approx(0.5));
    CHECK_FALSE(rep.lattice);
    CHECK(rep.ratio == Approx(0.5).margin(0.15));
    CHECK(rep.stderr_ratio < 0.05);
}

TEST_CASE("llt_ratio: empty interval and lattice warnings") {
    const auto nl = systems::nonlinear();
    const auto empty =
        llt_ratio(nl, Word(30, 0), 10, 0.25, 0.25, 0.0, 1000, 3, 1, 2.0);
    CHECK(empty.mass == 0.0);
    CHECK(empty.ratio == 0.0);

    const auto two = systems::two_ratio();
    // interval shorter than the lattice gap log(3/2)
    const auto rep =
        llt_ratio(two, Word(30, 0), 20, -0.1, 0.1, 0.0, 20000, 3, 2, 2.0);
    CHECK(rep.lattice);
    CHECK(rep.lattice_span == Approx(std::log(1.5)));
    CHECK(rep.lattice_warning);

    CHECK_THROWS_AS(
        llt_ratio(nl, Word(30, 0), 20, 0.0, 1.0, 100.0, 1000, 3, 1, 1.0),
        std::domain_error);
}

TEST_CASE("llt_ratio: interval partition carries total mass") {
    const auto nl = systems::nonlinear();
    const int n = 25;
    const std::size_t N = 100000;
    // one shared seed: every interval is measured on the same walk sample
    const double chi = detail::walk_constants(nl, 77, 2).first;
    const double var = detail::walk_constants(nl, 77, 2).second;
    const double sigma = std::sqrt(var * n);
    double total = 0.0;
    const int cells = 12;
    for (int i = 0; i < cells; ++i) {
        const double a = -8.0 * sigma + 16.0 * sigma * i / cells;
        const double b = -8.0 * sigma + 16.0 * sigma * (i + 1) / cells;
        total += llt_ratio(nl, Word(30, 1), n, a, b, 0.0, N, 77, 2, 2.0, chi, var)
                     .mass;
    }
    CHECK(total == Approx(1.0).margin(2.0 / std::sqrt(static_cast<double>(N))));
}

TEST_CASE("smooth_llt: total mass, nonlinear agreement, heavy smoothing") {
    const auto nl = systems::nonlinear();
    // C wide enough to cover the walk: both sides are the total mass
    const auto wide = smooth_llt(nl, Word(30, 0), 20, -14.0, 14.0, 0.05, 50000,
                                 11, 2);
    CHECK(wide.lhs == Approx(1.0).margin(1e-3));
    CHECK(wide.rhs == Approx(1.0).margin(1e-3));

    const auto mid =
        smooth_llt(nl, Word(30, 0), 30, -0.5, 0.5, 0.1, 400000, 13, 2);
    CHECK(std::abs(mid.diff) <= 3.0 * mid.stderr_lhs + 0.01);

    const auto heavy =
        smooth_llt(nl, Word(30, 0), 30, -0.5, 0.5, 3.0, 400000, 17, 2);
    CHECK(std::abs(heavy.diff) <= 2.0 * (3.0 * heavy.stderr_lhs + 0.01));
}

TEST_CASE("conditional LLT: degenerate walk hits its atom") {
    const auto leb = systems::lebesgue();
    const double chi = std::log(2.0);
    const double k = 10.0;
    // J contains the deterministic S_tau = 10 log 2
    const auto rep = conditional_llt(leb, k, 2.0, k * chi - 0.01, k * chi + 0.01,
                                     20000, 3, 2, 100, 5000, chi);
    for (const auto& cell : rep.cells) CHECK(cell.emp_prob == 1.0);
    CHECK(rep.uncond_prob == 1.0);

    // full interval: every probability and Gamma mass is one
    const auto full = conditional_llt(leb, k, 2.0, k * chi,
                                      k * chi + leb.Dprime, 20000, 3, 2, 100,
                                      5000, chi);
    for (const auto& cell : full.cells) {
        CHECK(cell.emp_prob == 1.0);
        CHECK(cell.gamma_prob == Approx(1.0).margin(1e-12));
        CHECK(cell.abs_err <= 1e-12);
    }
    CHECK(full.weighted_error <= 1e-12);
}

TEST_CASE("conditional LLT: law of total probability on the sample") {
    const auto nl = systems::nonlinear();
    const double chi = detail::walk_constants(nl, 5, 2).first;
    const double k = 8.0;
    const double j_lo = k * chi, j_hi = k * chi + 0.5 * nl.Dprime;
    // threshold 1 retains every cell, so the weighted sum is exact
    const auto rep = conditional_llt(nl, k, 2.0, j_lo, j_hi, 30000, 21, 2, 1,
                                     2000, chi);
    CHECK(rep.retained_fraction == 1.0);
    double weighted = 0.0;
    for (const auto& cell : rep.cells)
        weighted += static_cast<double>(cell.count) / rep.n_trajectories *
                    cell.emp_prob;
    CHECK(weighted == Approx(rep.uncond_prob).margin(1e-12));
}

TEST_CASE("conditional LLT: nonlinear cells approach the Gamma law") {
    const auto nl = systems::nonlinear();
    const double chi = detail::walk_constants(nl, 5, 2).first;
    const double k = 12.0;
    const double j_lo = k * chi, j_hi = k * chi + 0.5 * nl.Dprime;
    const auto rep = conditional_llt(nl, k, 2.0, j_lo, j_hi, 150000, 41, 2, 1000,
                                     30000, chi);
    CHECK(rep.retained_fraction > 0.5);
    CHECK(rep.weighted_error < 0.2);
    CHECK(rep.n_cells_retained >= 3);
}
