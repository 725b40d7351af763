#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "scfd/dio.hpp"
#include "scfd/rng.hpp"

using namespace scfd;
using Catch::Approx;

namespace {

double frac_dist(long double x) {
    long double f = std::fmod(std::abs(x), 1.0L);
    return static_cast<double>(std::min(f, 1.0L - f));
}

} // namespace

TEST_CASE("dio_distance: exact circular 1-center") {
    CHECK(dio_distance({std::log(2.0)}, 17.3) == 0.0);
    CHECK(dio_distance({std::log(2.0), std::log(2.0)}, 5.0) ==
          Approx(0.0).margin(1e-15));
    CHECK(dio_distance({0.0, 0.5}, 1.0) == Approx(0.25));

    // two-point identity d((a-b)x, Z)/2 on random triples
    Xoshiro256 rng(99, 0);
    for (int i = 0; i < 1000; ++i) {
        const double a = 4.0 * rng.uniform() - 2.0;
        const double b = 4.0 * rng.uniform() - 2.0;
        const double x = 200.0 * rng.uniform() - 100.0;
        const double expect =
            0.5 * frac_dist((static_cast<long double>(a) - b) * x);
        CHECK(std::abs(dio_distance({a, b}, x) - expect) <= 1e-14);
    }
}

TEST_CASE("dio_distance symmetries") {
    const std::vector<double> t{std::log(2.0), std::log(3.0), std::log(5.0)};
    Xoshiro256 rng(3, 0);
    for (int i = 0; i < 200; ++i) {
        const double x = 1000.0 * (rng.uniform() - 0.5);
        CHECK(dio_distance(t, x) == Approx(dio_distance(t, -x)).margin(1e-12));
        std::vector<double> perm{t[2], t[0], t[1]};
        CHECK(dio_distance(perm, x) == Approx(dio_distance(t, x)).margin(1e-14));
        CHECK(dio_distance(t, x) <= 0.5);
        CHECK(dio_distance(t, x) >= 0.0);
    }
}

TEST_CASE("dio scans classify the standard profiles") {
    // homogeneous: identically zero
    const auto homog = dio_scan({std::log(2.0), std::log(2.0)}, 10.0, 1e4, 64, 16);
    CHECK(homog.non_diophantine);

    // two logs: the two-point reduction vanishes along x = m/log(3/2)
    const auto pair =
        dio_scan({std::log(2.0), std::log(3.0)}, 10.0, 1e4, 128, 16);
    CHECK(pair.non_diophantine);

    // three logs: positive envelope with a finite fitted exponent
    const auto triple = dio_scan({std::log(2.0), std::log(3.0), std::log(5.0)},
                                 10.0, 1e4, 128, 16);
    CHECK_FALSE(triple.non_diophantine);
    CHECK(triple.classification == "diophantine");
    CHECK(std::isfinite(triple.ell_hat));
    CHECK(triple.c_hat > 0.0);
    for (const auto& pt : triple.envelope) CHECK(pt.distance > 1e-9);
}

TEST_CASE("dio_condition_ls: the no-shift variant") {
    // both t vanish on the common grid x = m / log 2
    const auto multiple =
        dio_condition_ls({std::log(2.0), 2.0 * std::log(2.0)}, 10.0, 1e4, 128, 16);
    CHECK(multiple.non_diophantine);

    const auto single = dio_condition_ls({std::log(2.0)}, 10.0, 1e4, 128, 16);
    CHECK(single.non_diophantine);

    // log2 / log3 are not simultaneously close to integers until large x
    const auto pair =
        dio_condition_ls({std::log(2.0), std::log(3.0)}, 10.0, 1e4, 128, 16);
    CHECK_FALSE(pair.non_diophantine);
    CHECK(std::isfinite(pair.ell_hat));
}

TEST_CASE("dio_exponent reads the ratio logs off the IFS") {
    const auto prof = dio_exponent(systems::lebesgue(), 10.0, 1e4, 64, 16);
    CHECK(prof.non_diophantine); // homogeneous ratios
}

TEST_CASE("temporal distance: affine vanishing and antisymmetry") {
    const auto two = systems::two_ratio();
    const Word xi(25, 0), zeta(25, 1), omega(20, 0), eta(20, 1);
    CHECK(temporal_distance(two, xi, zeta, omega, eta, 20).value == 0.0);

    const auto nl = systems::nonlinear();
    CHECK(temporal_distance(nl, xi, xi, omega, eta, 20).value == 0.0);

    const auto d = temporal_distance(nl, xi, zeta, omega, eta, 20);
    CHECK(std::abs(d.value) > 1e-4);

    const auto swapped_words = temporal_distance(nl, zeta, xi, omega, eta, 20);
    CHECK(swapped_words.value == Approx(-d.value).margin(1e-13));
    const auto swapped_pts = temporal_distance(nl, xi, zeta, eta, omega, 20);
    CHECK(swapped_pts.value == Approx(-d.value).margin(1e-13));

    // convergence: n -> n+5 moves the value by at most the tail bound
    const Word xi30(30, 0), zeta30(30, 1);
    const auto d25 = temporal_distance(nl, xi30, zeta30, omega, eta, 25);
    CHECK(std::abs(d25.value - d.value) <= d.tail_bound + 1e-12);
    CHECK(std::abs(d25.value - d.value) < 1e-2);
    const auto d30 = temporal_distance(nl, xi30, zeta30, omega, eta, 30);
    CHECK(std::abs(d30.value - d25.value) < 1e-6 + d25.tail_bound);

    CHECK_THROWS_AS(temporal_distance(nl, xi, zeta, omega, eta, 40),
                    WordTooShortError);
}

TEST_CASE("box dimension estimator") {
    CHECK(box_dim_estimate(std::vector<double>(100, 0.0), {0.25, 0.125, 0.0625}) ==
          Approx(0.0));

    std::vector<double> grid(10000);
    for (std::size_t i = 0; i < grid.size(); ++i)
        grid[i] = static_cast<double>(i) / (grid.size() - 1);
    std::vector<double> scales;
    for (int j = 4; j <= 8; ++j) scales.push_back(std::pow(2.0, -j));
    CHECK(box_dim_estimate(grid, scales) == Approx(1.0).margin(0.1));
}

TEST_CASE("sampled temporal distances of the nonlinear system fill dimension") {
    const auto nl = systems::nonlinear();
    const CategoricalSampler cat(nl.p);
    Xoshiro256 rng(2718, 0);
    std::vector<double> values;
    values.reserve(10000);
    for (int i = 0; i < 10000; ++i) {
        const Word xi = random_word(nl, 20, cat, rng);
        const Word zeta = random_word(nl, 20, cat, rng);
        const Word omega = random_word(nl, 20, cat, rng);
        const Word eta = random_word(nl, 20, cat, rng);
        values.push_back(temporal_distance(nl, xi, zeta, omega, eta, 20).value);
    }
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    const double range = *mx - *mn;
    REQUIRE(range > 0.0);
    std::vector<double> scales;
    for (int j = 3; j <= 8; ++j) scales.push_back(range * std::pow(2.0, -j));
    CHECK(box_dim_estimate(values, scales) > 0.2);
}

TEST_CASE("linearity detector: affine zero, conjugate decay, nonlinear floor") {
    const auto two = systems::two_ratio();
    for (int n : {2, 4, 8})
        CHECK(linearity_sup(two, n) == 0.0);

    const auto conj = systems::conjugated_lebesgue();
    const auto trend = linearity_trend(conj, 16);
    CHECK(trend.decaying);

    const auto nl = systems::nonlinear();
    const auto nltrend = linearity_trend(nl, 16);
    CHECK_FALSE(nltrend.decaying);
    const double first = nltrend.sup_values.front();
    for (double v : nltrend.sup_values) CHECK(v >= 0.5 * first);
}

TEST_CASE("conjugacy construction: affine identity case") {
    const auto two = systems::two_ratio();
    const auto res = conjugacy_construct(two, 1000);
    REQUIRE(res.monotone);
    for (double p : res.phi1) CHECK(std::abs(p) < 1e-14);
    for (std::size_t i = 0; i < res.grid_x.size(); ++i)
        CHECK(res.h[i] == Approx(res.grid_x[i] - two.interval.lo).margin(1e-12));
    CHECK(res.sup_g2 <= 1e-8);
}

TEST_CASE("conjugacy round trip recovers the exponential change of variables") {
    const auto conj = systems::conjugated_lebesgue();
    const auto res = conjugacy_construct(conj, 1000);
    REQUIRE(res.monotone);
    CHECK(res.sup_g2 <= 1e-4);

    // hhat o h0 must be affine: vanishing second differences on a fine grid
    const double K = std::exp(1.0) - 1.0;
    const auto h0 = [&](double x) { return std::expm1(x) / K; };
    const int G = 1000;
    std::vector<double> comp(G + 1);
    for (int i = 0; i <= G; ++i)
        comp[i] = res.hmap(h0(static_cast<double>(i) / G));
    double resid = 0.0;
    for (int i = 1; i < G; ++i)
        resid = std::max(resid,
                         std::abs(comp[i + 1] - 2.0 * comp[i] + comp[i - 1]));
    CHECK(resid <= 1e-4);
}

TEST_CASE("conjugacy on a genuinely nonlinear system keeps curvature") {
    const auto nl = systems::nonlinear();
    const auto res = conjugacy_construct(nl, 1000);
    REQUIRE(res.monotone);
    // the construction linearizes map 1 by design; map 2 must resist
    CHECK(res.sup_g2_per_map[0] <= 1e-6);
    CHECK(res.sup_g2 > 0.01);
}
