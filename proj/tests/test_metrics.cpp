#include <doctest.h>

#include "oracles.hpp"
#include "pdl/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <random>

using namespace pdl;
using oracle::from_rows;

TEST_CASE("surface area pixel rules") {
  CHECK(surface_area(PoreImage::filled(8, 8, true)) == 0.0);

  PoreImage one = PoreImage::filled(10, 10, true, 10.0);  // h = 1
  Mask m = one.cells();
  m(4, 4) = false;
  const double h = 0.25;
  CHECK(surface_area(PoreImage(m, h)) == doctest::Approx(0.04 / h).epsilon(1e-14));

  Mask row = Mask::Constant(6, 12, true);
  row.row(2).setConstant(false);
  const PoreImage r(row, 0.5);
  CHECK(surface_area(r) == doctest::Approx(2.0 * 12 * 0.5 / (72 * 0.25)).epsilon(1e-14));

  // one exposed face, two adjacent, three exposed
  const PoreImage notch = from_rows({"......", ".####.", ".####.", "......"}, 6.0);
  // corners have 2 adjacent faces, edge pixels 1 face: 4 corners sqrt2 + 4 edges
  CHECK(surface_area(notch) == doctest::Approx((4 * std::sqrt(2.0) + 4.0) / 24.0).epsilon(1e-14));
  const PoreImage tip = from_rows({"......", ".###..", "......", "......"}, 6.0);
  // end pixels expose 3 faces, the middle two opposite faces
  CHECK(surface_area(tip) == doctest::Approx((2 * std::sqrt(2.0) + 2.0) / 24.0).epsilon(1e-14));
}

TEST_CASE("roughness of a straight interface is one") {
  Mask m = Mask::Constant(64, 64, true);
  m.bottomRows(31).setConstant(false);
  const Roughness r = roughness_dimension(PoreImage(m, 1.0 / 64));
  REQUIRE(r.defined);
  CHECK(r.dimension >= 0.95);
  CHECK(r.dimension <= 1.05);
}

TEST_CASE("roughness of a checkerboard is two") {
  Mask m(32, 32);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) m(y, x) = (x + y) % 2 == 0;
  const Roughness r = roughness_dimension(PoreImage(m, 1.0 / 32));
  REQUIRE(r.defined);
  CHECK(r.box_sizes.back() == 2);
  CHECK(r.dimension == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("box counts match exhaustive enumeration on a 16x16 pattern") {
  const PoreImage img = from_rows({"................", "...##...........", "..####......#...", "..####.....###..",
                                   "...##.......#...", "................", "......#.........", ".....###........",
                                   "....#####.......", ".....###....##..", "......#.....##..", "................",
                                   "#..............#", "##............##", "................", "........#......."});
  for (int box : {1, 2, 4, 8, 16}) CHECK(mixed_box_count(img, box) == oracle::mixed_boxes(img, box));
  std::mt19937_64 rng(3);
  for (int k = 0; k < 20; ++k) {
    const PoreImage r = oracle::random_image(13 + k % 5, 11 + k % 7, 0.6, rng);
    for (int box : {1, 2, 3, 4, 8, 16}) CHECK(mixed_box_count(r, box) == oracle::mixed_boxes(r, box));
  }
  CHECK_FALSE(roughness_dimension(PoreImage::filled(16, 16, true)).defined);
}

TEST_CASE("directionality bins") {
  SUBCASE("centered square inclusion is symmetric") {
    Mask m = Mask::Constant(12, 12, true);
    m.block(4, 4, 4, 4).setConstant(false);
    const Directionality d = directionality(PoreImage(m, 1.0 / 12));
    REQUIRE(d.defined);
    CHECK(std::accumulate(d.gamma.begin(), d.gamma.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    for (int k = 2; k < 8; k += 2) CHECK(d.gamma[k] == doctest::Approx(d.gamma[0]).epsilon(1e-15));
    for (int k = 3; k < 8; k += 2) CHECK(d.gamma[k] == doctest::Approx(d.gamma[1]).epsilon(1e-15));
    CHECK(std::abs(d.skewness) < 1e-12);
  }
  SUBCASE("uniform bins have zero spread") {
    Directionality d;
    d.gamma.fill(0.125);
    directionality_statistics(d);
    CHECK(d.sigma == 0.0);
  }
  SUBCASE("isolated solid pixel splits over the x pair") {
    Mask m = Mask::Constant(5, 5, true);
    m(2, 2) = false;
    const Directionality d = directionality(PoreImage(m, 0.2));
    REQUIRE(d.defined);
    CHECK(d.gamma[0] == 0.5);
    CHECK(d.gamma[4] == 0.5);
    CHECK(d.gamma[0] == d.gamma[4]);
  }
  SUBCASE("no interface is flagged") {
    const Directionality d = directionality(PoreImage::filled(6, 6, true));
    CHECK_FALSE(d.defined);
    for (double g : d.gamma) CHECK(g == 0.0);
  }
  SUBCASE("statistics of a hand vector") {
    Directionality d;
    d.gamma = {0.3, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1, 0.1};
    directionality_statistics(d);
    // mean 0.125, deviations 0.175 once and -0.025 seven times
    const double m2 = (0.175 * 0.175 + 7 * 0.025 * 0.025) / 8;
    const double m3 = (std::pow(0.175, 3) - 7 * std::pow(0.025, 3)) / 8;
    const double m4 = (std::pow(0.175, 4) + 7 * std::pow(0.025, 4)) / 8;
    CHECK(d.sigma == doctest::Approx(std::sqrt(m2)).epsilon(1e-13));
    CHECK(d.skewness == doctest::Approx(m3 / std::pow(m2, 1.5)).epsilon(1e-12));
    CHECK(d.kurtosis == doctest::Approx(m4 / (m2 * m2)).epsilon(1e-12));
  }
}

TEST_CASE("porosity examples") {
  CHECK(porosity(PoreImage::filled(7, 5, true)) == 1.0);
  Mask half = Mask::Constant(10, 10, true);
  half.topRows(5).setConstant(false);
  CHECK(porosity(PoreImage(half, 0.1)) == 0.5);
  Mask block = Mask::Constant(100, 100, true);
  block.block(25, 25, 50, 50).setConstant(false);
  CHECK(porosity(PoreImage(block, 0.01)) == 0.75);
  // the isolated pocket does not count
  const PoreImage pocket = from_rows({"......", "......", "######", "#.####", "######", "......"});
  CHECK(porosity(pocket) == 0.5);
}

TEST_CASE("periodic distance transform matches brute force") {
  std::mt19937_64 rng(17);
  for (int k = 0; k < 10; ++k) {
    const PoreImage img = oracle::random_image(9 + k, 7 + k % 3, 0.8, rng);
    if (img.void_count() == static_cast<long>(img.cells().size())) continue;
    const GridT<long> d = periodic_distance_squared(img);
    const int w = img.width(), h = img.height();
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        long best = -1;
        for (int sy = 0; sy < h; ++sy)
          for (int sx = 0; sx < w; ++sx) {
            if (img.is_void(sx, sy)) continue;
            const long dx = std::min(std::abs(sx - x), w - std::abs(sx - x));
            const long dy = std::min(std::abs(sy - y), h - std::abs(sy - y));
            if (best < 0 || dx * dx + dy * dy < best) best = dx * dx + dy * dy;
          }
        CHECK(d(y, x) == best);
      }
  }
}

TEST_CASE("pore segmentation") {
  SUBCASE("all void is one pore") {
    const Segmentation s = segment_pores(PoreImage::filled(12, 9, true));
    CHECK(s.count() == 1);
    CHECK(s.mean_size() == 108.0);
    CHECK(s.std_size() == 0.0);
  }
  SUBCASE("two chambers joined by a throat") {
    const PoreImage img = from_rows({"####################", "#........##........#", "#........##........#",
                                     "#........##........#", "#..................#", "#........##........#",
                                     "#........##........#", "#........##........#", "#........##........#",
                                     "####################"});
    const Segmentation s = segment_pores(img);
    REQUIRE(s.count() == 2);
    CHECK(std::abs(s.sizes[0] - s.sizes[1]) <= 2);
    CHECK(s.sizes[0] + s.sizes[1] == img.void_count());
  }
  SUBCASE("regions partition the void") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 5; ++k) {
      const PoreImage img = oracle::random_image(24, 20, 0.75, rng);
      const Segmentation s = segment_pores(img);
      CHECK(std::accumulate(s.sizes.begin(), s.sizes.end(), 0L) == img.void_count());
      for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
          const int l = s.labels(y, x);
          CHECK((l >= 0) == img.is_void(x, y));
          CHECK(l < s.count());
        }
    }
  }
}

TEST_CASE("stairwise cost pairs perpendicular neighbours") {
  CHECK(stairwise_cost(std::vector<int>{0, 0, 0}) == PathCost{3, 0});
  CHECK(stairwise_cost(std::vector<int>{0, 1, 0, 1}) == PathCost{0, 2});
  CHECK(stairwise_cost(std::vector<int>{0, 1, 1, 0}) == PathCost{0, 2});
  CHECK(stairwise_cost(std::vector<int>{0, 0, 1, 0}) == PathCost{2, 1});
  CHECK(PathCost{1, 1}.length() == doctest::Approx(1.0 + std::sqrt(2.0)));
}

TEST_CASE("tortuosity examples") {
  CHECK(tortuosity(PoreImage::filled(9, 6, true), Axis::X) == 1.0);
  CHECK(tortuosity(PoreImage::filled(9, 6, true), Axis::Y) == 1.0);
  Mask wall = Mask::Constant(6, 6, true);
  wall.col(3).setConstant(false);
  CHECK_THROWS_AS(tortuosity(PoreImage(wall, 1.0 / 6), Axis::X), Error);
  try {
    tortuosity(PoreImage(wall, 1.0 / 6), Axis::X);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BlockedAxis);
  }
  CHECK(tortuosity(PoreImage(wall, 1.0 / 6), Axis::Y) == 1.0);

  const PoreImage obstacle = from_rows({"......", "......", "..##..", "..##..", "......", "......"});
  const auto costs = crossing_costs(obstacle, Axis::X);
  for (int y = 0; y < 6; ++y) {
    const auto ref = oracle::brute_crossing(obstacle, y);
    REQUIRE(costs[y].has_value() == ref.has_value());
    CHECK(costs[y]->single == ref->single);
    CHECK(costs[y]->pairs == ref->pairs);
  }
}

TEST_CASE("tortuosity equals brute force on random small grids") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> D(2, 6);
  for (int k = 0; k < 60; ++k) {
    const PoreImage img = oracle::random_image(D(rng), D(rng), 0.65, rng);
    for (Axis axis : {Axis::X, Axis::Y}) {
      const PoreImage view = axis == Axis::X ? img : img.transposed();
      const auto costs = crossing_costs(img, axis);
      REQUIRE(static_cast<int>(costs.size()) == view.height());
      for (int y = 0; y < view.height(); ++y) {
        const auto ref = oracle::brute_crossing(view, y);
        REQUIRE(costs[y].has_value() == ref.has_value());
        if (!ref) continue;
        CHECK(costs[y]->single == ref->single);
        CHECK(costs[y]->pairs == ref->pairs);
      }
    }
  }
}

TEST_CASE("max flow examples") {
  CHECK(max_flow(PoreImage::filled(7, 5, true), Axis::X) == 5);
  CHECK(max_flow(PoreImage::filled(7, 5, true), Axis::Y) == 7);
  Mask wall = Mask::Constant(6, 6, true);
  wall.col(2).setConstant(false);
  CHECK(max_flow(PoreImage(wall, 1.0 / 6), Axis::X) == 0);
  const PoreImage throat = from_rows({".....#####.....", ".....#####.....", "...............",
                                      ".....#####.....", ".....#####....."});
  CHECK(max_flow(throat, Axis::X) == 1);
}

TEST_CASE("max flow equals min cut on random 5x5 grids") {
  std::mt19937_64 rng(99);
  for (int k = 0; k < 300; ++k) {
    const PoreImage img = oracle::random_image(5, 2 + k % 4, 0.6, rng);
    CHECK(max_flow(img, Axis::X) == oracle::min_cut_x(img));
    CHECK(max_flow(img, Axis::Y) == oracle::min_cut_x(img.transposed()));
  }
}

TEST_CASE("pearson examples") {
  const std::vector<double> x{1, 2, 3, 4}, y{1, 3, 2, 4};
  CHECK(pearson(x, y) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(pearson(x, x) == doctest::Approx(1.0).epsilon(1e-15));
  std::vector<double> z;
  for (double v : x) z.push_back(-2 * v + 7);
  CHECK(pearson(x, z) == doctest::Approx(-1.0).epsilon(1e-15));
  const std::vector<double> c{2, 2, 2, 2};
  CHECK_THROWS_AS(pearson(x, c), Error);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), Error);
}

TEST_CASE("assembled metrics of the all-void image") {
  const int w = 8, h = 6;
  const MetricsVector m = assemble_metrics(PoreImage::filled(w, h, true));
  const auto v = m.values();
  REQUIRE(v.size() == 21);
  const std::array<double, 10> head{1, 1, h, w, 1, w * h, 0, 1, 0, 0};
  for (int i = 0; i < 10; ++i) CHECK(v[i] == head[i]);
  for (int i = 10; i < 21; ++i) CHECK(v[i] == 0.0);
  CHECK(m.roughness_undefined);
  CHECK(m.directionality_undefined);
  CHECK(m.usable());
  CHECK(metric_names().size() == 21);
  CHECK(MetricsVector::from_values(v).values() == v);
}

TEST_CASE("metric invariances") {
  const PoreImage img = generate({GeneratorKind::Perlin, 77, 0.7, 4, 1}, 48);
  const MetricsVector base = assemble_metrics(img);
  CHECK(assemble_metrics(img).values() == base.values());

  SUBCASE("tangential shifts") {
    const MetricsVector sy = assemble_metrics(img.shifted(0, 13));
    CHECK(sy.tau_x == doctest::Approx(base.tau_x).epsilon(1e-14));
    CHECK(sy.flow_x == base.flow_x);
    const MetricsVector sx = assemble_metrics(img.shifted(9, 0));
    CHECK(sx.tau_y == doctest::Approx(base.tau_y).epsilon(1e-14));
    CHECK(sx.flow_y == base.flow_y);
    for (const MetricsVector& s : {sx, sy}) {
      CHECK(s.phi == base.phi);
      CHECK(s.surface == doctest::Approx(base.surface).epsilon(1e-14));
      for (int k = 0; k < 8; ++k) CHECK(s.gamma[k] == doctest::Approx(base.gamma[k]).epsilon(1e-14));
      CHECK(s.pore_count == base.pore_count);
      CHECK(s.pore_mean == doctest::Approx(base.pore_mean).epsilon(1e-14));
    }
  }
  SUBCASE("transpose swaps the axes") {
    const MetricsVector t = assemble_metrics(img.transposed());
    CHECK(t.tau_x == doctest::Approx(base.tau_y).epsilon(1e-14));
    CHECK(t.tau_y == doctest::Approx(base.tau_x).epsilon(1e-14));
    CHECK(t.flow_x == base.flow_y);
    CHECK(t.flow_y == base.flow_x);
    CHECK(t.phi == base.phi);
  }
  SUBCASE("row flip mirrors the bins") {
    const MetricsVector f = assemble_metrics(img.flipped_rows());
    for (int k = 0; k < 8; ++k) CHECK(f.gamma[k] == doctest::Approx(base.gamma[(8 - k) % 8]).epsilon(1e-14));
    CHECK(f.sigma_d == doctest::Approx(base.sigma_d).epsilon(1e-12));
    CHECK(f.kappa_d == doctest::Approx(base.kappa_d).epsilon(1e-12));
    CHECK(f.tau_x == doctest::Approx(base.tau_x).epsilon(1e-14));
    CHECK(f.flow_x == base.flow_x);
  }
}
