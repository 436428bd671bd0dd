#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "sppb/math.hpp"
#include "sppb/rng.hpp"

using sppb::RngStream;

TEST_CASE("same seed reproduces the same stream") {
    RngStream a(42), b(42);
    for (int i = 0; i < 1000; ++i) REQUIRE(a.next() == b.next());
}

TEST_CASE("different seeds differ") {
    RngStream a(1), b(2);
    bool differ = false;
    for (int i = 0; i < 16 && !differ; ++i) differ = a.next() != b.next();
    REQUIRE(differ);
}

TEST_CASE("derive is a pure function of the key") {
    const RngStream root(7);
    RngStream c1 = root.derive(3u, 5u);
    RngStream c2 = root.derive(3u, 5u);
    for (int i = 0; i < 100; ++i) REQUIRE(c1.next() == c2.next());

    RngStream other = root.derive(3u, 6u);
    bool differ = false;
    for (int i = 0; i < 16 && !differ; ++i) differ = c1.next() != other.next();
    REQUIRE(differ);
}

TEST_CASE("derive does not perturb the parent") {
    RngStream a(99), b(99);
    (void)a.derive(1u);
    (void)a.derive(2u, 3u, 4u);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next() == b.next());
}

TEST_CASE("derivation order of keys matters") {
    const RngStream root(7);
    RngStream c1 = root.derive(1u, 2u);
    RngStream c2 = root.derive(2u, 1u);
    bool differ = false;
    for (int i = 0; i < 16 && !differ; ++i) differ = c1.next() != c2.next();
    REQUIRE(differ);
}

TEST_CASE("uniform01 stays inside the open unit interval and has mean 1/2") {
    RngStream rng(2024);
    const int n = 100000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        acc += u;
    }
    REQUIRE(std::abs(acc / n - 0.5) < 0.005);
}

TEST_CASE("below produces integers in range with near-uniform frequencies") {
    RngStream rng(5);
    const std::uint64_t m = 7;
    std::vector<int> counts(m, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const std::uint64_t v = rng.below(m);
        REQUIRE(v < m);
        ++counts[v];
    }
    for (auto c : counts) REQUIRE(std::abs(c / static_cast<double>(n) - 1.0 / 7.0) < 0.01);
    REQUIRE(rng.below(1) == 0);
    REQUIRE_THROWS_AS(rng.below(0), std::invalid_argument);
}

TEST_CASE("normal_quantile matches reference values and inverts the CDF") {
    REQUIRE(sppb::normal_quantile(0.5) == 0.0);
    REQUIRE_THAT(sppb::normal_quantile(0.975),
                 Catch::Matchers::WithinAbs(1.959963984540054, 1e-9));
    REQUIRE_THAT(sppb::normal_quantile(0.75),
                 Catch::Matchers::WithinAbs(0.674489750196082, 1e-9));
    REQUIRE_THAT(sppb::normal_quantile(0.0013498980316300946),
                 Catch::Matchers::WithinAbs(-3.0, 1e-9));

    for (double p : {1e-10, 1e-6, 0.01, 0.3, 0.5, 0.7, 0.99, 1 - 1e-6}) {
        const double z = sppb::normal_quantile(p);
        REQUIRE_THAT(sppb::normal_cdf(z), Catch::Matchers::WithinAbs(p, 1e-12));
        // symmetry, up to how rounding 1 - p perturbs a quantile this steep
        const double sym_tol = 1e-9 + std::numeric_limits<double>::epsilon() / sppb::normal_pdf(z);
        REQUIRE_THAT(sppb::normal_quantile(1.0 - p) + z,
                     Catch::Matchers::WithinAbs(0.0, sym_tol));
    }

    double prev = sppb::normal_quantile(0.001);
    for (double p = 0.01; p < 1.0; p += 0.01) {
        const double z = sppb::normal_quantile(p);
        REQUIRE(z > prev);
        prev = z;
    }

    REQUIRE_THROWS_AS(sppb::normal_quantile(0.0), std::domain_error);
    REQUIRE_THROWS_AS(sppb::normal_quantile(1.0), std::domain_error);
    REQUIRE_THROWS_AS(sppb::normal_quantile(-0.2), std::domain_error);
}

TEST_CASE("normal draws have standard moments") {
    RngStream rng(77);
    const int n = 200000;
    std::vector<double> z(n);
    for (auto& v : z) v = rng.normal();
    REQUIRE(std::abs(sppb::sample_mean(z)) < 0.01);
    REQUIRE(std::abs(sppb::sample_variance(z) - 1.0) < 0.02);
}

TEST_CASE("kahan summation keeps small terms alive") {
    sppb::KahanSum s;
    s.add(1.0);
    for (int i = 0; i < 1000000; ++i) s.add(1e-16);
    REQUIRE_THAT(s.value(), Catch::Matchers::WithinRel(1.0 + 1e-10, 1e-12));
}

TEST_CASE("sample variance of (1,3) is 2") {
    std::vector<double> y{1.0, 3.0};
    REQUIRE(sppb::sample_variance(y) == 2.0);
    REQUIRE(sppb::sample_mean(y) == 2.0);
}
