#include <doctest.h>

#include <sstream>

#include "disparity/dataset.hpp"

using namespace disparity::data;

TEST_CASE("csv read with kind inference") {
    std::istringstream in(
        "R,K,X\n"
        "0,1,0.5\n"
        "1,2,1.25\n"
        "0,3,-0.75\n"
        "1,1,2.5\n");
    auto d = read_csv(in);
    CHECK(d.rows() == 4);
    CHECK(d.kind(d.column_index("R")) == ColumnKind::Binary);
    CHECK(d.kind(d.column_index("K")) == ColumnKind::Categorical);
    CHECK(d.kind(d.column_index("X")) == ColumnKind::Continuous);
    CHECK(d.col("X")[2] == doctest::Approx(-0.75));
}

TEST_CASE("csv errors carry row and column") {
    std::istringstream ragged("A,B\n1,2\n3\n");
    CHECK_THROWS_WITH_AS(read_csv(ragged), doctest::Contains("row 3"), input_error);
    std::istringstream junk("A,B\n1,x\n");
    CHECK_THROWS_WITH_AS(read_csv(junk), doctest::Contains("column B"), input_error);
}

TEST_CASE("roles and validation") {
    Dataset d;
    d.add_column("R", ColumnKind::Binary, {0, 1, 0, 1});
    d.add_column("M", ColumnKind::Continuous, {1.0, 2.0, 3.0, 4.0});
    d.add_column("Y", ColumnKind::Continuous, {0.1, 0.2, 0.3, 0.4});
    d.set_roles("R", "Y", {});
    d.validate();
    CHECK(d.group_rows(0) == std::vector<std::size_t>{0, 2});
    CHECK(d.group_rows(1) == std::vector<std::size_t>{1, 3});
    CHECK(d.covariates() == std::vector<int>{1});
    CHECK_THROWS_AS(d.set_roles("R", "R", {}), input_error);
    CHECK_THROWS_AS(d.set_roles("R", "Y", {"Y"}), input_error);

    Dataset one_group;
    one_group.add_column("R", ColumnKind::Binary, {1, 1});
    one_group.add_column("Y", ColumnKind::Continuous, {0.5, 0.6});
    one_group.set_roles("R", "Y", {});
    CHECK_THROWS_AS(one_group.validate(), input_error);
}

TEST_CASE("row selection keeps roles and allows repeats") {
    Dataset d;
    d.add_column("R", ColumnKind::Binary, {0, 1, 1});
    d.add_column("Y", ColumnKind::Continuous, {10.0, 20.0, 30.0});
    d.set_roles("R", "Y", {});
    auto sub = d.select_rows({2, 2, 0});
    CHECK(sub.rows() == 3);
    CHECK(sub.col("Y")[0] == 30.0);
    CHECK(sub.col("Y")[2] == 10.0);
    CHECK(sub.exposure() == d.exposure());
}

TEST_CASE("csv round trip") {
    Dataset d;
    d.add_column("A", ColumnKind::Continuous, {0.123456789012345, -3.25});
    d.add_column("B", ColumnKind::Binary, {0, 1});
    std::ostringstream out;
    write_csv(d, out);
    std::istringstream in(out.str());
    auto back = read_csv(in);
    CHECK(back.col("A")[0] == d.col("A")[0]);
    CHECK(back.col("A")[1] == d.col("A")[1]);
}
