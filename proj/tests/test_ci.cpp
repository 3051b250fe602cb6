#include <doctest.h>

#include <cmath>
#include <random>

#include "disparity/ci.hpp"
#include "disparity/rng.hpp"

using namespace disparity;
using namespace disparity::ci;

namespace {

data::Dataset gaussian_chain(std::size_t n, std::uint64_t seed) {
    // X -> Z -> Y plus an independent W
    auto rng = make_rng(seed, "test");
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> x(n), z(n), y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = noise(rng);
        z[i] = 1.5 * x[i] + noise(rng);
        y[i] = 2.0 * z[i] + noise(rng);
        w[i] = noise(rng);
    }
    data::Dataset d;
    d.add_column("X", data::ColumnKind::Continuous, x);
    d.add_column("Z", data::ColumnKind::Continuous, z);
    d.add_column("Y", data::ColumnKind::Continuous, y);
    d.add_column("W", data::ColumnKind::Continuous, w);
    return d;
}

}  // namespace

TEST_CASE("normal cdf and quantile invert each other") {
    for (double p : {0.01, 0.2, 0.5, 0.8, 0.99}) {
        CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-9));
    }
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-5));
}

TEST_CASE("fisher z on a gaussian chain") {
    auto d = gaussian_chain(2000, 42);
    const int x = 0;
    const int z = 1;
    const int y = 2;
    const int w = 3;
    CHECK(!fisher_z(d, x, y, {}, 0.05).independent);
    CHECK(fisher_z(d, x, y, {z}, 0.05).independent);
    CHECK(fisher_z(d, x, w, {}, 0.05).independent);
    auto dec = fisher_z(d, x, z, {}, 0.05);
    CHECK(dec.p_value < 1e-6);
    CHECK(dec.test_name == "fisher_z");
}

TEST_CASE("fisher z degenerate and small-sample handling") {
    data::Dataset d;
    d.add_column("A", data::ColumnKind::Continuous, {1.0, 1.0, 1.0, 1.0, 1.0, 1.0});
    d.add_column("B", data::ColumnKind::Continuous, {0.0, 1.0, 2.0, 3.0, 4.0, 5.0});
    CHECK_THROWS_WITH_AS(fisher_z(d, 0, 1, {}, 0.05), doctest::Contains("A"),
                         degenerate_data_error);
    data::Dataset tiny;
    tiny.add_column("A", data::ColumnKind::Continuous, {1.0, 2.0, 3.0});
    tiny.add_column("B", data::ColumnKind::Continuous, {2.0, 1.0, 3.0});
    tiny.add_column("C", data::ColumnKind::Continuous, {0.0, 1.0, 0.5});
    CHECK_THROWS_AS(fisher_z(tiny, 0, 1, {2}, 0.05), sample_size_error);
}

TEST_CASE("fisher z false positive rate is near alpha") {
    auto rng = make_rng(5, "test");
    std::normal_distribution<double> noise(0.0, 1.0);
    int rejects = 0;
    const int reps = 200;
    for (int r = 0; r < reps; ++r) {
        std::vector<double> a(300), b(300);
        for (std::size_t i = 0; i < 300; ++i) {
            a[i] = noise(rng);
            b[i] = noise(rng);
        }
        data::Dataset d;
        d.add_column("A", data::ColumnKind::Continuous, a);
        d.add_column("B", data::ColumnKind::Continuous, b);
        if (!fisher_z(d, 0, 1, {}, 0.05).independent) ++rejects;
    }
    // binomial(200, 0.05): mean 10, sd ~3.1
    CHECK(rejects >= 1);
    CHECK(rejects <= 25);
}

TEST_CASE("hsic detects nonlinear dependence that correlation misses") {
    auto rng = make_rng(9, "test");
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> x(400), y(400), u(400);
    for (std::size_t i = 0; i < 400; ++i) {
        x[i] = noise(rng);
        y[i] = x[i] * x[i] + 0.2 * noise(rng);  // uncorrelated but dependent
        u[i] = noise(rng);
    }
    auto dep = hsic_test(x, y, 0.05, 200, 1);
    CHECK(!dep.independent);
    CHECK(dep.p_value < 0.05);
    auto indep = hsic_test(x, u, 0.05, 200, 1);
    CHECK(indep.independent);

    // constant input is flagged, not crashed on
    std::vector<double> c(400, 3.0);
    auto deg = hsic_test(c, y, 0.05, 100, 1);
    CHECK(deg.independent);
    CHECK(deg.degenerate_input);
}

TEST_CASE("hsic is deterministic given the seed and thins long input") {
    auto rng = make_rng(13, "test");
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> x(3000), y(3000);
    for (std::size_t i = 0; i < 3000; ++i) {
        x[i] = noise(rng);
        y[i] = 0.5 * x[i] + noise(rng);
    }
    auto a = hsic_test(x, y, 0.05, 100, 77);
    auto b = hsic_test(x, y, 0.05, 100, 77);
    CHECK(a.statistic == b.statistic);
    CHECK(a.p_value == b.p_value);
    CHECK(!a.independent);
}

TEST_CASE("residualized hsic answers conditional queries") {
    auto d = gaussian_chain(800, 21);
    HsicResidualSource src(d, 3, 200);
    CHECK(src.query("X", "Y", {"Z"}, 0.05).independent);
    CHECK(!src.query("X", "Y", {}, 0.05).independent);
    CHECK(!src.query("X", "Z", {}, 0.05).independent);
}

TEST_CASE("oracle ci source") {
    graph::MixedGraph g({"R", "M", "Y"});
    g.add_directed("R", "M");
    g.add_directed("M", "Y");
    OracleCiSource src(g);
    CHECK(!src.query("R", "Y", {}, 0.05).independent);
    CHECK(src.query("R", "Y", {"M"}, 0.05).independent);
    CHECK(src.query("R", "Y", {"M"}, 0.05).test_name == "oracle");
    CHECK_THROWS(src.query("R", "Q", {}, 0.05));
}
