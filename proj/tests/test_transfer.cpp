#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <complex>
#include <numbers>

#include "scfd/cocycle.hpp"
#include "scfd/transfer.hpp"

using namespace scfd;
using Catch::Approx;

namespace {

std::complex<double> affine_lambda(const Ifs& ifs, double theta) {
    std::complex<double> acc{0.0, 0.0};
    for (std::size_t i = 0; i < ifs.maps.size(); ++i) {
        const double c = -std::log(ifs.maps[i].coefficients()[1]);
        const double ph = 2.0 * std::numbers::pi * theta * c;
        acc += ifs.p[i] * std::complex<double>(std::cos(ph), std::sin(ph));
    }
    return acc;
}

} // namespace

TEST_CASE("apply: stochasticity, closed affine form, positivity") {
    const auto leb = systems::lebesgue();
    CylinderSpace S(leb, 6);
    TransferOperator P0(S, 0.0);
    const auto one = CylinderFunction::ones(S);
    const auto r = P0.apply(one);
    for (const auto& z : r.v) {
        CHECK(z.real() == Approx(1.0).margin(1e-14));
        CHECK(z.imag() == Approx(0.0).margin(1e-14));
    }

    // affine: apply(1) is the constant character sum
    const auto two = systems::two_ratio();
    CylinderSpace S2(two, 6);
    for (double theta : {0.3, 1.7, 12.0}) {
        TransferOperator P(S2, theta);
        const auto out = P.apply(CylinderFunction::ones(S2));
        const auto expect = affine_lambda(two, theta);
        for (const auto& z : out.v) CHECK(std::abs(z - expect) < 1e-14);
    }

    // theta = 0 keeps the positive cone and contracts the sup norm
    Xoshiro256 rng(5, 0);
    CylinderFunction f = CylinderFunction::ones(S);
    for (auto& z : f.v) z = rng.uniform();
    const auto g = P0.apply(f);
    for (const auto& z : g.v) CHECK(z.real() >= 0.0);
    CHECK(norm_sup(g) <= norm_sup(f) + 1e-15);
}

TEST_CASE("apply rejects a depth mismatch") {
    const auto leb = systems::lebesgue();
    CylinderSpace S5(leb, 5), S6(leb, 6);
    TransferOperator P(S6, 0.0);
    CHECK_THROWS_AS(P.apply(CylinderFunction::ones(S5)), std::invalid_argument);
}

TEST_CASE("sup-norm never grows under the operator") {
    const auto nl = systems::nonlinear();
    CylinderSpace S(nl, 7);
    Xoshiro256 rng(9, 1);
    for (double theta : {0.0, 0.4, 3.0, 40.0}) {
        TransferOperator P(S, theta);
        auto f = CylinderFunction::ones(S);
        for (auto& z : f.v)
            z = std::complex<double>(2 * rng.uniform() - 1, 2 * rng.uniform() - 1);
        CHECK(norm_sup(P.apply(f)) <= norm_sup(f) + 1e-14);
    }
}

TEST_CASE("norms on cylinder functions") {
    const auto leb = systems::lebesgue();
    CylinderSpace S(leb, 2); // rho = 1/2
    auto one = CylinderFunction::ones(S);
    CHECK(norm_lip(one) == Approx(1.0));
    CHECK(norm_theta(one, 3.0, 1.0) == Approx(1.0));

    // indicator of the cylinder [1]: sup 1, c1 = 1/rho = 2, |phi|_1 = 3
    auto ind = CylinderFunction::ones(S);
    ind.v = {1.0, 1.0, 0.0, 0.0};
    CHECK(norm_lip(ind) == Approx(3.0));

    auto zero = CylinderFunction::ones(S);
    zero.v = {0.0, 0.0, 0.0, 0.0};
    CHECK(norm_lip(zero) == Approx(0.0).margin(0.0));

    // c1 = 4, sup = 1 at depth 1
    CylinderSpace S1(leb, 1);
    auto pm = CylinderFunction::ones(S1);
    pm.v = {1.0, -1.0};
    CHECK(norm_theta(pm, 1.0, 1.0) == Approx(2.0));
    CHECK(norm_theta(pm, 10.0, 1.0) == Approx(1.0));
    CHECK_THROWS_AS(norm_theta(pm, 0.0, 1.0), std::invalid_argument);
}

TEST_CASE("lip constant handles complex values exactly") {
    const auto leb = systems::lebesgue();
    CylinderSpace S(leb, 1); // two symbols, rho = 1/2
    auto f = CylinderFunction::ones(S);
    f.v = {std::complex<double>(1.0, 1.0), std::complex<double>(-1.0, -1.0)};
    // diameter 2 sqrt(2) at split index 1
    CHECK(lip_constant(f) == Approx(2.0 * std::numbers::sqrt2 * 2.0));
}

TEST_CASE("leading eigenvalue: theta = 0 gives (1, identity)") {
    for (const auto& ifs :
         {systems::lebesgue(), systems::two_ratio(), systems::nonlinear()}) {
        CylinderSpace S(ifs, 6);
        TransferOperator P(S, 0.0);
        const auto eig = leading_eigen(P);
        CHECK(std::abs(eig.lambda - 1.0) < 1e-12);
        for (const auto& z : eig.eigenfunction.v)
            CHECK(std::abs(z - 1.0) < 1e-10);
    }
}

TEST_CASE("leading eigenvalue: affine closed form and recentring phase") {
    const auto two = systems::two_ratio();
    CylinderSpace S(two, 8);
    const double chi = lyapunov_chi(two, 1, 1, 1).value;
    for (double theta : {0.01, 0.05, 0.1}) {
        TransferOperator P(S, theta);
        const auto eig = leading_eigen(P);
        const auto expect = affine_lambda(two, theta);
        CHECK(std::abs(eig.lambda - expect) < 1e-10);

        TransferOperator Pr(S, theta, true, chi);
        const auto eigr = leading_eigen(Pr);
        const double ph = -2.0 * std::numbers::pi * theta * chi;
        const auto expect_rec =
            expect * std::complex<double>(std::cos(ph), std::sin(ph));
        CHECK(std::abs(eigr.lambda - expect_rec) < 1e-10);
    }
}

TEST_CASE("leading eigenvalue: nonlinear perturbation window") {
    const auto nl = systems::nonlinear();
    const double chi = lyapunov_chi(nl, 40000, 32, 5, 2).value;
    CylinderSpace S(nl, 8);
    const double theta = 0.05;
    TransferOperator P(S, theta, true, chi);
    const auto eig = leading_eigen(P);
    CHECK(std::abs(eig.lambda) <= 1.0 + 1e-12);
    CHECK(std::abs(eig.lambda) >= 1.0 - 10.0 * theta * theta);
}

TEST_CASE("discretization consistency across depths") {
    const auto nl = systems::nonlinear();
    const double theta = 0.05;
    std::vector<std::complex<double>> lambdas;
    for (int depth : {5, 7, 9}) {
        CylinderSpace S(nl, depth);
        TransferOperator P(S, theta);
        lambdas.push_back(leading_eigen(P).lambda);
    }
    const double d57 = std::abs(lambdas[0] - lambdas[1]);
    const double d79 = std::abs(lambdas[1] - lambdas[2]);
    CHECK(d57 < 0.01);
    CHECK(d79 <= std::max(d57, 1e-12));
}

TEST_CASE("c6 calibration: free for homogeneous phases, finite in general") {
    const auto leb = systems::lebesgue();
    CylinderSpace S(leb, 6);
    const auto cal = c6_calibrate(S, {1.0, 5.0, 25.0}, 12, 8, 77);
    CHECK(cal.doublings == 0);

    const auto nl = systems::nonlinear();
    CylinderSpace Snl(nl, 6);
    const auto cal2 = c6_calibrate(Snl, {1.0, 10.0, 100.0}, 12, 8, 77);
    CHECK(cal2.c6 > 0.0);
    CHECK(std::isfinite(cal2.c6));
}

TEST_CASE("dolgopyat diagnostics: resonance without gap, nonlinear gap") {
    // homogeneous: the phase has modulus one, so no theta shows a gap;
    // resonant theta = m / log 2 in particular
    const auto leb = systems::lebesgue();
    CylinderSpace S(leb, 6);
    const auto cal = c6_calibrate(S, {2.0, 8.0}, 12, 8, 3);
    std::vector<double> resonant;
    for (int m : {2, 5, 9}) resonant.push_back(m / std::log(2.0));
    const auto rep = dolgopyat_check(S, resonant, 2.0, cal.c6, 16, 3);
    for (const auto& row : rep.rows)
        CHECK(row.norm_estimate >= 1.0 - 1e-12);

    // nonlinear: every theta shows a gap and the fit is finite
    const auto nl = systems::nonlinear();
    CylinderSpace Snl(nl, 6);
    const auto cal2 = c6_calibrate(Snl, {2.0, 8.0, 32.0}, 12, 8, 3);
    const auto rep2 =
        dolgopyat_check(Snl, {2.0, 4.0, 8.0, 16.0, 32.0}, 2.0, cal2.c6, 24, 3);
    for (const auto& row : rep2.rows) CHECK(row.norm_estimate < 1.0);
    CHECK(rep2.fit_ok);
    CHECK(std::isfinite(rep2.alpha_hat));
}

TEST_CASE("decay of one: closed form, contraction, monotone doubling") {
    const auto two = systems::two_ratio();
    CylinderSpace S(two, 6);
    const double theta = 2.0;
    const double expect =
        std::abs(std::cos(2.0 * std::numbers::pi * theta * 0.5 * std::log(1.5)));
    CHECK(decay_of_one(S, theta, 1, 0.1) == Approx(expect).epsilon(1e-12));

    const auto nl = systems::nonlinear();
    CylinderSpace Snl(nl, 7);
    const double v64 = decay_of_one(Snl, 8.0, 64, 2.0);
    CHECK(v64 <= 1.0);
    double prev = 1.0;
    for (int n : {16, 32, 64, 128}) {
        const double v = decay_of_one(Snl, 8.0, n, 2.0);
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
    CHECK_THROWS_AS(decay_of_one(Snl, 8.0, 2, 2.0), std::invalid_argument);
}

TEST_CASE("curvature fit against the exact affine expansion") {
    const auto two = systems::two_ratio();
    CylinderSpace S(two, 6);
    const auto var = variance_r0(two, 1, 1, 1);
    const auto fit = curvature_check(S, {0.01, 0.02, 0.03, 0.05}, 200, var.value);
    const double expect =
        std::pow(2.0 * std::numbers::pi, 2) * var.value / 2.0;
    CHECK(fit.fitted_c == Approx(expect).epsilon(0.3));

    const auto nl = systems::nonlinear();
    CylinderSpace Snl(nl, 6);
    const auto varnl = variance_r0(nl, 40000, 100, 71, 2);
    const auto fitnl =
        curvature_check(Snl, {0.01, 0.02, 0.03, 0.05}, 200, varnl.value);
    CHECK(fitnl.fitted_c > 0.0);

    CHECK_THROWS_AS(curvature_check(S, {0.01}, 50, 0.0), DegenerateVarianceError);
}
