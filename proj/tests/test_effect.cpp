#include <doctest.h>

#include <cmath>
#include <random>

#include "disparity/effect.hpp"
#include "disparity/rng.hpp"
#include "disparity/scm.hpp"

using namespace disparity;
using namespace disparity::effect;

namespace {

// noiseless linear table: Y = 1 + 2*M + 3*X, R independent of everything
data::Dataset exact_linear(std::size_t n, std::uint64_t seed) {
    auto rng = make_rng(seed, "exact-linear");
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    std::vector<double> r(n), x(n), m(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = coin(rng) ? 1.0 : 0.0;
        x[i] = gauss(rng);
        m[i] = gauss(rng);
        y[i] = 1.0 + 2.0 * m[i] + 3.0 * x[i];
    }
    data::Dataset d;
    d.add_column("R", data::ColumnKind::Binary, std::move(r));
    d.add_column("X", data::ColumnKind::Continuous, std::move(x));
    d.add_column("M", data::ColumnKind::Continuous, std::move(m));
    d.add_column("Y", data::ColumnKind::Continuous, std::move(y));
    d.set_roles("R", "Y", {});
    return d;
}

}  // namespace

TEST_CASE("linear fit recovers exact coefficients on noiseless data") {
    auto d = exact_linear(100000, 11);
    auto model = fit_outcome_model(d, {"M"}, {"X"});
    REQUIRE(model.coef.size() == 3);
    CHECK(model.coef[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(model.coef[1] == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(model.coef[2] == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(model.r_squared == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("linear fit on the noisy benchmark is close to the structural slopes") {
    auto spec = scm::ScmSpec::benchmark();
    auto d = scm::sample(spec, 10000, 5);
    auto model = fit_outcome_model(d, {"M1", "M2"}, {"X"});
    // Y = 2 M1 + 3 M2 + 4 R + 5 X + noise, so given R = 0 the slopes are exact
    CHECK(model.coef[1] == doctest::Approx(2.0).epsilon(0.1));
    CHECK(model.coef[2] == doctest::Approx(3.0).epsilon(0.1));
    CHECK(model.coef[3] == doctest::Approx(5.0).epsilon(0.1));
    CHECK(model.r_squared > 0.9);
}

TEST_CASE("constant outcome gives zero slopes and the mean as intercept") {
    auto d = exact_linear(500, 3);
    data::Dataset c;
    c.add_column("R", data::ColumnKind::Binary, d.col("R"));
    c.add_column("M", data::ColumnKind::Continuous, d.col("M"));
    c.add_column("Y", data::ColumnKind::Continuous, std::vector<double>(d.rows(), 7.25));
    c.set_roles("R", "Y", {});
    auto model = fit_outcome_model(c, {"M"}, {});
    CHECK(model.coef[0] == doctest::Approx(7.25).epsilon(1e-10));
    CHECK(std::abs(model.coef[1]) < 1e-10);
    CHECK(model.r_squared == doctest::Approx(1.0));
}

TEST_CASE("fit guards: rank deficiency names the column, small groups refuse") {
    auto d = exact_linear(500, 4);
    data::Dataset dup;
    dup.add_column("R", data::ColumnKind::Binary, d.col("R"));
    dup.add_column("M", data::ColumnKind::Continuous, d.col("M"));
    dup.add_column("M2", data::ColumnKind::Continuous, d.col("M"));  // copy of M
    dup.add_column("Y", data::ColumnKind::Continuous, d.col("Y"));
    dup.set_roles("R", "Y", {});
    try {
        fit_outcome_model(dup, {"M", "M2"}, {});
        FAIL("expected estimation_error");
    } catch (const estimation_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("rank-deficient") != std::string::npos);
        CHECK(msg.find("M") != std::string::npos);
    }

    auto tiny = d.select_rows({0, 1, 2, 3, 4, 5, 6, 7, 8, 9});
    CHECK_THROWS_AS(fit_outcome_model(tiny, {"M"}, {}), estimation_error);
}

TEST_CASE("knn model interpolates the training data") {
    auto d = exact_linear(1000, 6);
    auto model = fit_outcome_model(d, {"M"}, {"X"}, ModelKind::Knn, 1);
    // k = 1 returns the nearest training outcome exactly at a training point
    CHECK(model.predict(model.train_x[17]) == doctest::Approx(model.train_y[17]));
    auto smooth = fit_outcome_model(d, {"M"}, {"X"}, ModelKind::Knn, 25);
    CHECK(smooth.predict({0.0, 0.0}) == doctest::Approx(1.0).epsilon(0.5));
}

TEST_CASE("benchmark adjusted effects hit the analytic targets") {
    auto spec = scm::ScmSpec::benchmark();
    auto d = scm::sample(spec, 10000, 23);

    auto m1 = fit_outcome_model(d, {"M1"}, {"X"});
    auto e1 = estimate_adjusted(d, m1, {"M1"}, {"X"});
    CHECK(std::abs(e1.delta_hat - 16.0) <= 0.8);

    auto m2 = fit_outcome_model(d, {"M2"}, {"M1", "X"});
    auto e2 = estimate_adjusted(d, m2, {"M2"}, {"M1", "X"});
    CHECK(std::abs(e2.delta_hat - 21.0) <= 0.8);

    auto mj = fit_outcome_model(d, {"M1", "M2"}, {"X"});
    auto ej = estimate_adjusted(d, mj, {"M1", "M2"}, {"X"});
    CHECK(std::abs(ej.delta_hat - 25.0) <= 0.8);

    // the decomposition identity holds to floating point on every run
    for (const auto* e : {&e1, &e2, &ej}) {
        CHECK(std::abs(e->delta_hat + e->zeta_hat - e->total_hat) <=
              1e-10 * std::max(1.0, std::abs(e->total_hat)));
    }
    CHECK(e1.n0 + e1.n1 == 10000);
}

TEST_CASE("identical group distributions give a null decomposition") {
    auto d = exact_linear(4000, 8);  // R independent of (X, M, Y)
    auto model = fit_outcome_model(d, {"M"}, {"X"});
    auto e = estimate_adjusted(d, model, {"M"}, {"X"});
    CHECK(std::abs(e.total_hat) < 0.3);
    CHECK(std::abs(e.delta_hat) < 0.3);
    CHECK(std::abs(e.zeta_hat) < 0.3);
}

TEST_CASE("kde mode agrees with the empirical-product mode") {
    auto spec = scm::ScmSpec::benchmark();
    auto d = scm::sample(spec, 10000, 31);
    auto model = fit_outcome_model(d, {"M1"}, {"X"});
    auto emp = estimate_adjusted(d, model, {"M1"}, {"X"});
    EstimatorConfig kde;
    kde.mode = EstimatorMode::Kde;
    auto smooth = estimate_adjusted(d, model, {"M1"}, {"X"}, kde, 31);
    CHECK(smooth.mc_se > 0.0);
    CHECK(std::abs(smooth.delta_hat - emp.delta_hat) <= 2.0 * smooth.mc_se);
    // identity holds in kde mode too
    CHECK(std::abs(smooth.delta_hat + smooth.zeta_hat - smooth.total_hat) <= 1e-10);
}

TEST_CASE("kde mode handles discrete adjustment columns and the mcmc fallback") {
    auto spec = scm::ScmSpec::benchmark();
    auto d = scm::sample(spec, 4000, 41);
    // pad the adjustment set past the mcmc threshold with independent columns
    auto rng = make_rng(41, "pad");
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution coin(0.4);
    data::Dataset wide;
    for (const auto& n : d.names()) {
        wide.add_column(n, d.kind(d.column_index(n)), d.col(n));
    }
    for (int j = 0; j < 4; ++j) {
        std::vector<double> v(d.rows());
        for (auto& x : v) x = (j % 2 == 0) ? gauss(rng) : (coin(rng) ? 1.0 : 0.0);
        wide.add_column("Z" + std::to_string(j),
                        j % 2 == 0 ? data::ColumnKind::Continuous : data::ColumnKind::Binary,
                        std::move(v));
    }
    wide.set_roles("R", "Y", {});
    auto model = fit_outcome_model(wide, {"M1"}, {"X", "Z0", "Z1", "Z2", "Z3"});
    EstimatorConfig kde;
    kde.mode = EstimatorMode::Kde;
    kde.mc_draws = 4000;
    auto e = estimate_adjusted(wide, model, {"M1"}, {"X", "Z0", "Z1", "Z2", "Z3"}, kde, 7);
    auto emp = estimate_adjusted(wide, model, {"M1"}, {"X", "Z0", "Z1", "Z2", "Z3"});
    // the padded columns have near-zero coefficients, so the target is still ~16
    CHECK(std::abs(e.delta_hat - emp.delta_hat) <= std::max(4.0 * e.mc_se, 1.0));
}

TEST_CASE("adjusted effect is invariant to shifting the outcome") {
    auto spec = scm::ScmSpec::benchmark();
    auto d = scm::sample(spec, 4000, 13);
    auto model = fit_outcome_model(d, {"M1"}, {"X"});
    auto base = estimate_adjusted(d, model, {"M1"}, {"X"});

    data::Dataset shifted;
    for (const auto& n : d.names()) {
        auto v = d.col(n);
        if (n == "Y") {
            for (auto& x : v) x += 1000.0;
        }
        shifted.add_column(n, d.kind(d.column_index(n)), std::move(v));
    }
    shifted.set_roles("R", "Y", {});
    auto model2 = fit_outcome_model(shifted, {"M1"}, {"X"});
    auto moved = estimate_adjusted(shifted, model2, {"M1"}, {"X"});
    CHECK(moved.delta_hat == doctest::Approx(base.delta_hat).epsilon(1e-7));
    CHECK(moved.zeta_hat == doctest::Approx(base.zeta_hat).epsilon(1e-7));
}

TEST_CASE("estimation error paths") {
    auto spec = scm::ScmSpec::benchmark();
    auto d = scm::sample(spec, 200, 2);
    auto model = fit_outcome_model(d, {"M1"}, {"X"});
    CHECK_THROWS_AS(model.predict({1.0}), estimation_error);  // wrong width
    CHECK_THROWS_AS(bootstrap_ci(d, [](const data::Dataset&) { return 0.0; }, 50, 0.95, 1),
                    estimation_error);
    CHECK_THROWS_AS(bootstrap_ci(d, [](const data::Dataset&) { return 0.0; }, 100, 1.5, 1),
                    estimation_error);
}

TEST_CASE("bootstrap interval brackets the estimate and narrows with n") {
    auto spec = scm::ScmSpec::benchmark();
    auto pipeline = [](const data::Dataset& dd) {
        auto model = fit_outcome_model(dd, {"M1"}, {"X"});
        return estimate_adjusted(dd, model, {"M1"}, {"X"}).delta_hat;
    };

    auto small = scm::sample(spec, 500, 17);
    auto [lo_s, hi_s] = bootstrap_ci(small, pipeline, 200, 0.95, 17);
    auto big = scm::sample(spec, 8000, 17);
    auto [lo_b, hi_b] = bootstrap_ci(big, pipeline, 200, 0.95, 17);
    CHECK(hi_b - lo_b < 0.5 * (hi_s - lo_s));
    CHECK(lo_b < 16.0);
    CHECK(hi_b > 16.0);

    // width stays stable across replicate counts
    auto [lo2, hi2] = bootstrap_ci(small, pipeline, 400, 0.95, 18);
    const double w1 = hi_s - lo_s;
    const double w2 = hi2 - lo2;
    CHECK(std::abs(w1 - w2) <= 0.25 * std::max(w1, w2));
}

TEST_CASE("estimation error shrinks with sample size") {
    auto spec = scm::ScmSpec::benchmark();
    auto err_at = [&](std::size_t n) {
        std::vector<double> errs;
        for (std::uint64_t s = 1; s <= 5; ++s) {
            auto d = scm::sample(spec, n, 100 + s);
            auto model = fit_outcome_model(d, {"M1"}, {"X"});
            errs.push_back(std::abs(estimate_adjusted(d, model, {"M1"}, {"X"}).delta_hat - 16.0));
        }
        std::sort(errs.begin(), errs.end());
        return errs[2];
    };
    CHECK(err_at(40000) < err_at(2500));
}
