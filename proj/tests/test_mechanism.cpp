#include <doctest.h>

#include <cmath>
#include <random>

#include "disparity/ci.hpp"
#include "disparity/mechanism.hpp"
#include "disparity/rng.hpp"
#include "disparity/scm.hpp"

using namespace disparity;
using namespace disparity::mechanism;

namespace {

// additive-noise pair: A exogenous and stable, B = tanh(2A) + noise whose
// scale is the only thing the exposure changes
data::Dataset anm_pair(std::size_t n, std::uint64_t seed) {
    auto rng = make_rng(seed, "anm");
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    std::vector<double> r(n), a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = coin(rng) ? 1.0 : 0.0;
        a[i] = gauss(rng);
        const double scale = r[i] > 0.5 ? 1.0 : 0.3;
        b[i] = std::tanh(2.0 * a[i]) + scale * gauss(rng);
    }
    data::Dataset d;
    d.add_column("R", data::ColumnKind::Binary, r);
    d.add_column("A", data::ColumnKind::Continuous, a);
    d.add_column("B", data::ColumnKind::Continuous, b);
    d.add_column("Ydummy", data::ColumnKind::Continuous, b);
    d.set_roles("R", "Ydummy", {});
    return d;
}

}  // namespace

TEST_CASE("delta orients an additive-noise pair") {
    int fwd_ok = 0;
    int rev_ok = 0;
    const int seeds = 5;
    for (int s = 0; s < seeds; ++s) {
        auto d = anm_pair(2000, 100 + static_cast<std::uint64_t>(s));
        DataMechanismSource src(d, 17 + static_cast<std::uint64_t>(s));
        auto fwd = delta_statistic(src, "A", "B", {}, 0.05);
        auto rev = delta_statistic(src, "B", "A", {}, 0.05);
        CHECK(fwd.delta >= 0.0);
        CHECK(rev.delta >= 0.0);
        if (fwd.independent) ++fwd_ok;
        if (!rev.independent) ++rev_ok;
    }
    CHECK(fwd_ok >= 4);
    CHECK(rev_ok >= 4);
}

TEST_CASE("identical domains report independence in both directions") {
    auto rng = make_rng(3, "anm");
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::bernoulli_distribution coin(0.5);
    const std::size_t n = 1500;
    std::vector<double> r(n), a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        r[i] = coin(rng) ? 1.0 : 0.0;
        a[i] = gauss(rng);
        b[i] = 0.8 * a[i] + gauss(rng);  // no dependence on R anywhere
    }
    data::Dataset d;
    d.add_column("R", data::ColumnKind::Binary, r);
    d.add_column("A", data::ColumnKind::Continuous, a);
    d.add_column("B", data::ColumnKind::Continuous, b);
    d.set_roles("R", "B", {});
    DataMechanismSource src(d, 5);
    auto fwd = delta_statistic(src, "A", "B", {}, 0.05);
    auto rev = delta_statistic(src, "B", "A", {}, 0.05);
    CHECK(fwd.independent);
    CHECK(fwd.delta == 0.0);
    CHECK(!fwd.from_changed);
    CHECK(rev.independent);
}

TEST_CASE("delta is invariant to row permutation") {
    auto d = anm_pair(1200, 2);
    std::vector<std::size_t> shuffled(d.rows());
    std::iota(shuffled.begin(), shuffled.end(), 0);
    auto rng = make_rng(9, "perm");
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto d2 = d.select_rows(shuffled);
    DataMechanismSource s1(d, 42), s2(d2, 42);
    auto r1 = delta_statistic(s1, "B", "A", {}, 0.05);
    auto r2 = delta_statistic(s2, "B", "A", {}, 0.05);
    CHECK(r1.delta == r2.delta);
    CHECK(r1.p_value == r2.p_value);
}

TEST_CASE("delta input guards") {
    auto d = anm_pair(50, 4);
    DataMechanismSource src(d, 1, DeltaConfig{.min_domain_rows = 30});
    CHECK_THROWS_AS(delta_statistic(src, "A", "B", {}, 0.05), ci::sample_size_error);

    auto big = anm_pair(400, 4);
    // make A constant within domain R=0
    std::vector<double> a = big.col("A");
    const auto& r = big.col("R");
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (r[i] < 0.5) a[i] = 1.0;
    }
    data::Dataset d2;
    d2.add_column("R", data::ColumnKind::Binary, big.col("R"));
    d2.add_column("A", data::ColumnKind::Continuous, a);
    d2.add_column("B", data::ColumnKind::Continuous, big.col("B"));
    d2.set_roles("R", "B", {});
    DataMechanismSource src2(d2, 1);
    CHECK_THROWS_AS(delta_statistic(src2, "A", "B", {}, 0.05), ci::degenerate_data_error);
}

TEST_CASE("benchmark data: X -> M1 is independent, reverse directions are not") {
    auto spec = scm::ScmSpec::benchmark();
    auto d = scm::sample(spec, 5000, 31);
    DataMechanismSource src(d, 8);
    auto t1 = src.delta({"X"}, {"M1", "Y"}, {}, 0.05);
    CHECK(t1.independent);  // P(X) does not shift with R
    auto t2 = src.delta({"M1"}, {"X"}, {}, 0.05);
    CHECK(!t2.independent);
    auto t3 = src.delta({"M1"}, {"Y"}, {}, 0.05);
    CHECK(!t3.independent);
}

TEST_CASE("small-set membership on benchmark data") {
    auto spec = scm::ScmSpec::benchmark();
    int x_ok = 0;
    int m2_ok = 0;
    const int seeds = 3;
    for (int s = 0; s < seeds; ++s) {
        auto d = scm::sample(spec, 5000, 200 + static_cast<std::uint64_t>(s));
        DataMechanismSource src(d, 50 + static_cast<std::uint64_t>(s));
        auto mx = detect_small_membership(src, "X", {"M1"}, "Y", {"M2"}, 0.05);
        if (mx.member && mx.witness == std::vector<std::string>{}) ++x_ok;
        auto mm2 = detect_small_membership(src, "M2", {"M1"}, "Y", {"X"}, 0.05);
        if (!mm2.member) ++m2_ok;
    }
    CHECK(x_ok >= 2);
    CHECK(m2_ok >= 2);
}

TEST_CASE("oracle mechanism source mirrors the graph truth") {
    auto spec = scm::ScmSpec::benchmark();
    OracleMechanismSource src(spec.to_dag(), "R");
    auto t1 = src.delta({"X"}, {"M1", "Y"}, {}, 0.05);
    CHECK(t1.independent);
    CHECK(!src.delta({"M1"}, {"X"}, {}, 0.05).independent);
    CHECK(!src.delta({"M1"}, {"Y"}, {}, 0.05).independent);
    // exposure-free pair
    graph::MixedGraph g({"R", "A", "B", "Y"});
    g.add_directed("A", "B");
    g.add_directed("R", "Y");
    OracleMechanismSource quiet(g, "R");
    auto q = quiet.delta({"A"}, {"B"}, {}, 0.05);
    CHECK(q.independent);
    CHECK(!q.from_changed);

    auto mx = detect_small_membership(src, "X", {"M1"}, "Y", {"M2"}, 0.05);
    CHECK(mx.member);
    CHECK(mx.witness == std::vector<std::string>{});
    auto mm2 = detect_small_membership(src, "M2", {"M1"}, "Y", {"X"}, 0.05);
    CHECK(!mm2.member);
    CHECK(mm2.subsets_visited == 2);  // {} and {X}
}

TEST_CASE("oracle small membership matches the six projected triple types") {
    using graph::MixedGraph;
    // i) O -> M, O -> Y: member
    MixedGraph t1({"R", "O", "M", "Y"});
    t1.add_directed("R", "M");
    t1.add_directed("O", "M");
    t1.add_directed("O", "Y");
    t1.add_directed("M", "Y");
    OracleMechanismSource s1(t1, "R");
    CHECK(detect_small_membership(s1, "O", {"M"}, "Y", {}, 0.05).member);

    // iii) M <-> O -> Y via latent W: not small
    MixedGraph t3({"R", "W", "O", "M", "Y"});
    t3.add_directed("R", "M");
    t3.add_directed("W", "O");
    t3.add_directed("W", "M");
    t3.add_directed("O", "Y");
    t3.add_directed("M", "Y");
    OracleMechanismSource s3(t3, "R", {"W"});
    CHECK(!detect_small_membership(s3, "O", {"M"}, "Y", {}, 0.05).member);

    // iv) M -> O -> Y: not small
    MixedGraph t4({"R", "O", "M", "Y"});
    t4.add_directed("R", "M");
    t4.add_directed("M", "O");
    t4.add_directed("O", "Y");
    t4.add_directed("M", "Y");
    OracleMechanismSource s4(t4, "R");
    CHECK(!detect_small_membership(s4, "O", {"M"}, "Y", {}, 0.05).member);

    // v) M -> O <-> Y: not small
    MixedGraph t5({"R", "W", "O", "M", "Y"});
    t5.add_directed("R", "M");
    t5.add_directed("M", "O");
    t5.add_directed("W", "O");
    t5.add_directed("W", "Y");
    t5.add_directed("M", "Y");
    OracleMechanismSource s5(t5, "R", {"W"});
    CHECK(!detect_small_membership(s5, "O", {"M"}, "Y", {}, 0.05).member);

    // vi) M <-> O <-> Y: not small
    MixedGraph t6({"R", "W1", "W2", "O", "M", "Y"});
    t6.add_directed("R", "M");
    t6.add_directed("W1", "M");
    t6.add_directed("W1", "O");
    t6.add_directed("W2", "O");
    t6.add_directed("W2", "Y");
    t6.add_directed("M", "Y");
    OracleMechanismSource s6(t6, "R", {"W1", "W2"});
    CHECK(!detect_small_membership(s6, "O", {"M"}, "Y", {}, 0.05).member);
}
