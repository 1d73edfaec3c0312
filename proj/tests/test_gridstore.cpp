#include <doctest.h>

#include <sstream>

#include "subsight/error.hpp"
#include "subsight/gridstore.hpp"
#include "subsight/synthgen.hpp"
#include "support.hpp"

using namespace subsight;

namespace {

space_time_grid small_grid(std::size_t rows, std::size_t cols, std::size_t epochs) {
  return make_regular_grid({rows, cols, 2000.0, 0.0, 0.0}, date::from_ymd(2015, 3, 1), epochs, 14);
}

data_cube roundtrip(const data_cube& c) {
  std::stringstream s;
  write_cube(c, s);
  return read_cube(s);
}

std::string cube_text(const std::string& dims, const std::string& dates, const std::string& values) {
  return "SUBSIGHT-CUBE v1\n" + dims + "\ndisplacement_mm\n" + dates + "\n" + values + "\n";
}

}  // namespace

TEST_CASE("grid invariants") {
  CHECK_THROWS_AS(spatial_grid({0, 3, 2000.0, 0, 0}).validate(), data_error);
  CHECK_THROWS_AS(spatial_grid({2, 3, -5.0, 0, 0}).validate(), data_error);
  space_time_grid g{{2, 2, 2000.0, 0, 0}, {date::from_ymd(2015, 3, 1), date::from_ymd(2015, 3, 1)}, std::nullopt};
  CHECK_THROWS_AS(g.validate(), data_error);
  space_time_grid spaced{{1, 1, 2000.0, 0, 0}, {date::from_ymd(2015, 3, 1), date::from_ymd(2015, 3, 16)}, 14};
  CHECK_THROWS_AS(spaced.validate(), data_error);
  CHECK_NOTHROW(small_grid(3, 4, 5).validate());
}

TEST_CASE("1x1x1 cube with value 0.0 writes one data token") {
  data_cube c(small_grid(1, 1, 1), variable::displacement_mm, 0.0);
  std::stringstream s;
  write_cube(c, s);
  std::string text = s.str();
  auto last_line = text.substr(text.rfind('\n', text.size() - 2) + 1);
  CHECK(last_line == "0.0\n");
  CHECK(roundtrip(c) == c);
}

TEST_CASE("masked entries survive a roundtrip") {
  data_cube c(small_grid(2, 2, 3), variable::groundwater_ft, 1.5);
  c.mask(1, 2);
  c.mask(3, 0);
  auto back = roundtrip(c);
  CHECK(back.valid_count() == 12 - 2);
  CHECK_FALSE(back.valid(1, 2));
  CHECK_FALSE(back.valid(3, 0));
  CHECK(back == c);
}

TEST_CASE("Chowchilla mean displacement parses back exactly") {
  data_cube c(small_grid(1, 1, 1), variable::displacement_mm);
  c.set(0, 0, -22.47);
  CHECK(roundtrip(c).at(0, 0) == -22.47);
}

TEST_CASE("read_cube rejects bad inputs") {
  SUBCASE("token count mismatch") {
    std::stringstream s(cube_text("2 2 2 2000.0 0.0 0.0", "2015-03-01 2015-03-15", "1 2 3 4 5 6 7"));
    CHECK_THROWS_WITH_AS(read_cube(s), doctest::Contains("dimension mismatch"), parse_error);
  }
  SUBCASE("non-increasing dates") {
    std::stringstream s(cube_text("1 1 2 2000.0 0.0 0.0", "2015-03-01 2015-03-01", "1 2"));
    CHECK_THROWS_WITH_AS(read_cube(s), doctest::Contains("non-increasing"), parse_error);
  }
  SUBCASE("bad magic") {
    std::stringstream s("SUBSIGHT-CUBE v2\n1 1 1 2000 0 0\ndisplacement_mm\n2015-03-01\n0\n");
    CHECK_THROWS_AS(read_cube(s), parse_error);
  }
  SUBCASE("overflowing dimensions") {
    std::stringstream s(cube_text("4000000000 4000000000 4000000000 2000.0 0.0 0.0", "2015-03-01", "0"));
    CHECK_THROWS_AS(read_cube(s), data_error);
  }
}

TEST_CASE("reading a masked entry is an error") {
  data_cube c(small_grid(1, 2, 2), variable::precipitation_mm, 3.0);
  c.mask(1, 1);
  CHECK_THROWS_AS(c.at(1, 1), masked_read_error);
  CHECK_FALSE(c.get(1, 1).has_value());
  texture_stack t({1, 1, 2000.0, 0, 0});
  CHECK_THROWS_AS(t.at(0, 0), masked_read_error);
  CHECK_THROWS_AS(t.mean_coarse(0), masked_read_error);
}

TEST_CASE("texture values are percents") {
  texture_stack t({1, 2, 2000.0, 0, 0});
  CHECK_THROWS_AS(t.set(0, 0, 100.5), data_error);
  CHECK_THROWS_AS(t.set(0, 0, -0.1), data_error);
  CHECK_NOTHROW(t.set(0, 0, 100.0));
}

TEST_CASE("cube_to_samples shapes and exclusion") {
  auto g = small_grid(2, 2, 3);
  data_cube d(g, variable::displacement_mm, 1.0);
  texture_stack t(g.space);
  for (std::size_t c = 0; c < 4; ++c)
    for (std::size_t l = 0; l < 10; ++l) t.set(c, l, 10.0 * static_cast<double>(l) + static_cast<double>(c));

  auto all = cube_to_samples(d, t);
  CHECK(all.size() == 4);
  CHECK(all.n_features() == 3);
  CHECK(all.n_targets() == 10);
  CHECK(all.targets(2)[9] == 92.0);
  CHECK(all.x(1) == 3000.0);
  CHECK(all.y(2) == 3000.0);

  d.mask(2, 1);
  CHECK(cube_to_samples(d, t).size() == 3);

  texture_stack other({2, 3, 2000.0, 0, 0});
  CHECK_THROWS_AS(cube_to_samples(d, other), geometry_error);
}

TEST_CASE("cube_to_samples row count equals fully valid cells") {
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    rng_stream rng(stream_key(11, trial));
    auto cube = testing::random_cube(rng);
    texture_stack tex(cube.grid().space);
    for (std::size_t c = 0; c < tex.n_cells(); ++c)
      for (std::size_t l = 0; l < 10; ++l)
        if (rng.below(15) != 0) tex.set(c, l, rng.uniform(0, 100));
    std::size_t expected = 0;
    for (std::size_t c = 0; c < cube.n_cells(); ++c) {
      bool ok = tex.cell_defined(c);
      for (std::size_t e = 0; e < cube.n_epochs(); ++e) ok = ok && cube.valid(c, e);
      expected += ok;
    }
    CHECK(cube_to_samples(cube, tex).size() == expected);
  }
}

TEST_CASE("full-scale default scenario grid yields 8818 rows") {
  auto cfg = synthgen::full_scale_scenario();
  data_cube d(cfg.grid, variable::displacement_mm, 0.0);
  auto active = cfg.active_mask();
  for (std::size_t c = 0; c < d.n_cells(); ++c)
    if (!active[c]) d.mask_cell(c);
  texture_stack t(cfg.grid.space);
  for (std::size_t c = 0; c < t.n_cells(); ++c)
    for (std::size_t l = 0; l < 10; ++l) t.set(c, l, 50.0);
  CHECK(cube_to_samples(d, t).size() == 8818);
}

TEST_CASE("samples CSV") {
  SUBCASE("1-row table roundtrip") {
    sample_table t(2, 10);
    std::vector<double> f{1.25, -3.0}, y(10, 40.01);
    t.add_row(7, 1000.0, 3000.0, f, y);
    std::stringstream s;
    write_samples(t, s);
    CHECK(read_samples(s) == t);
  }
  SUBCASE("132 features end at f132,t10") {
    auto h = samples_header(132);
    CHECK(h.starts_with("cell_id,x_m,y_m,f001,"));
    CHECK(h.find(",f132,t01,") != std::string::npos);
    CHECK(h.ends_with("t10"));
  }
  SUBCASE("ragged row names the line") {
    std::stringstream s(samples_header(2, 1) + "\n0,1,2,3,4,5\n1,1,2,3,4\n");
    CHECK_THROWS_WITH_AS(read_samples(s), doctest::Contains("line 3"), parse_error);
  }
  SUBCASE("header mismatch") {
    std::stringstream s("cell,x,y,f1,t1\n");
    CHECK_THROWS_AS(read_samples(s), parse_error);
  }
  SUBCASE("duplicate cell ids are rejected") {
    sample_table t(1, 1);
    std::vector<double> f{1.0}, y{2.0};
    t.add_row(3, 0, 0, f, y);
    CHECK_THROWS_AS(t.add_row(3, 0, 0, f, y), data_error);
  }
}

TEST_CASE("randomized roundtrips are byte-identical") {
  for (std::uint64_t trial = 0; trial < 200; ++trial) {
    rng_stream rng(stream_key(5, trial));
    auto cube = testing::random_cube(rng);
    auto text = testing::serialize(cube, [](const auto& c, std::ostream& o) { write_cube(c, o); });
    std::stringstream in(text);
    auto back = read_cube(in);
    CHECK(back == cube);
    CHECK(testing::serialize(back, [](const auto& c, std::ostream& o) { write_cube(c, o); }) == text);

    auto tex = testing::random_texture(rng);
    auto ttext = testing::serialize(tex, [](const auto& t, std::ostream& o) { write_texture(t, o); });
    std::stringstream tin(ttext);
    CHECK(read_texture(tin) == tex);

    auto table = testing::random_samples(rng);
    auto stext = testing::serialize(table, [](const auto& t, std::ostream& o) { write_samples(t, o); });
    std::stringstream sin(stext);
    CHECK(read_samples(sin) == table);
  }
}
