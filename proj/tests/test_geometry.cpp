#include <doctest.h>

#include "pdl/geometry.hpp"

#include <sstream>

using namespace pdl;

namespace {

PoreImage from_rows(std::initializer_list<const char*> rows) {
  const int h = static_cast<int>(rows.size());
  const int w = static_cast<int>(std::string(*rows.begin()).size());
  Mask m(h, w);
  int y = 0;
  for (const char* r : rows) {
    for (int x = 0; x < w; ++x) m(y, x) = r[x] == '.';
    ++y;
  }
  return PoreImage(m, 1.0 / w);
}

}  // namespace

TEST_CASE("plain pbm with zero payload is all void") {
  const PoreImage img = parse_pbm("P1 2 2 0 0 0 0");
  CHECK(img.width() == 2);
  CHECK(img.height() == 2);
  CHECK(img.void_count() == 4);
}

TEST_CASE("plain pbm tolerates comments and packed digits") {
  const PoreImage img = parse_pbm("P1\n# note\n3 2\n101\n000\n");
  CHECK(img.is_solid(0, 0));
  CHECK(img.is_void(1, 0));
  CHECK(img.is_solid(2, 0));
}

TEST_CASE("binary pbm reads pixel 9 of a 10 wide row from bit 6 of byte 1") {
  std::string bytes = "P4\n10 2\n";
  bytes += std::string{'\x00', '\x40', '\x00', '\x00'};
  const PoreImage img = parse_pbm(bytes);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 10; ++x) CHECK(img.is_solid(x, y) == (x == 9 && y == 0));
}

TEST_CASE("all solid 3x3 plain payload is nine ones") {
  const std::string text = encode_pbm(PoreImage::filled(3, 3, false), PbmFormat::Plain);
  std::istringstream in(text);
  std::string magic, tok;
  int w, h, ones = 0, other = 0;
  in >> magic >> w >> h;
  while (in >> tok)
    for (char ch : tok) (ch == '1' ? ones : other)++;
  CHECK(magic == "P1");
  CHECK(ones == 9);
  CHECK(other == 0);
}

TEST_CASE("alternating 10 wide row packs to 0xAA 0x80") {
  const PoreImage img = from_rows({"..........", "#.#.#.#.#."});
  const std::string bytes = encode_pbm(img, PbmFormat::Binary);
  REQUIRE(bytes.size() >= 4);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 4]) == 0x00);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 3]) == 0x00);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 2]) == 0xAA);
  CHECK(static_cast<unsigned char>(bytes[bytes.size() - 1]) == 0x80);
}

TEST_CASE("pbm round trips through both formats") {
  const PoreImage img = generate({GeneratorKind::Perlin, 5, 0.7, 3, 1}, 37);
  for (auto fmt : {PbmFormat::Plain, PbmFormat::Binary}) CHECK(parse_pbm(encode_pbm(img, fmt)) == img);
  const PoreImage back = parse_pbm(encode_pbm(parse_pbm(encode_pbm(img, PbmFormat::Plain)), PbmFormat::Binary));
  CHECK((back.cells() == img.cells()).all());
}

TEST_CASE("malformed pbm is a parse error") {
  CHECK_THROWS_AS(parse_pbm("P2 2 2 0 0 0 0"), ParseError);
  CHECK_THROWS_AS(parse_pbm("P1 2 2 0 0 0"), ParseError);
  CHECK_THROWS_AS(parse_pbm(std::string("P4\n10 2\n") + std::string(3, '\0')), ParseError);
}

TEST_CASE("connectivity filter") {
  SUBCASE("all void is unchanged") {
    const auto r = filter_periodic_connectivity(PoreImage::filled(6, 4, true));
    CHECK(r.removed == 0);
    CHECK(r.image.void_count() == 24);
  }
  SUBCASE("enclosed pocket becomes solid") {
    const PoreImage img = from_rows({"......", ".###..", ".#.#..", ".###..", "......"});
    const auto r = filter_periodic_connectivity(img);
    CHECK(r.removed == 1);
    CHECK(r.image.is_solid(2, 2));
  }
  SUBCASE("wrap joins column 0 and column w-1") {
    const PoreImage img = from_rows({"#####", ".###.", "#####"});
    const auto r = filter_periodic_connectivity(img);
    CHECK(r.removed == 0);
    CHECK(r.image.is_void(0, 1));
    CHECK(r.image.is_void(4, 1));
  }
  SUBCASE("diagonal contact does not connect") {
    const PoreImage img = from_rows({"....#", "....#", "....#", "#####", "####."});
    const auto r = filter_periodic_connectivity(img);
    CHECK(r.removed == 1);
  }
}

TEST_CASE("filter commutes with periodic shift") {
  const PoreImage img = generate_with_report({GeneratorKind::Fractal, 11, 0.65, 4, 3}, 48).raw;
  const auto base = filter_periodic_connectivity(img).image;
  for (auto [dx, dy] : {std::pair{37, 11}, {5, -3}, {-20, 47}}) {
    const auto shifted = filter_periodic_connectivity(img.shifted(dx, dy)).image;
    CHECK(shifted == base.shifted(dx, dy));
  }
}

TEST_CASE("rasterized shapes") {
  CHECK(rasterize_shape({ShapeKind::Circle, 0.0}, 32).void_count() == 32 * 32);

  const PoreImage sq = rasterize_shape({ShapeKind::Square, 0.5}, 100);
  CHECK(sq.void_fraction() == 0.75);
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x) CHECK(sq.is_solid(x, y) == (x >= 25 && x < 75 && y >= 25 && y < 75));

  const PoreImage e1 = rasterize_shape({ShapeKind::Ellipse, 0.25, 2.0, 90.0}, 64);
  const PoreImage e2 = rasterize_shape({ShapeKind::Ellipse, 0.25, 0.5, 0.0}, 64);
  CHECK(e1 == e2);

  CHECK_THROWS_AS(rasterize_shape({ShapeKind::Circle, 0.5}, 64), Error);
  try {
    rasterize_shape({ShapeKind::Square, 1.0}, 64);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ShapeOutOfBounds);
  }
}

TEST_CASE("shape porosity is non-increasing in size") {
  for (auto kind : {ShapeKind::Circle, ShapeKind::Square}) {
    double last = 1.0;
    for (double s = 0.0; s < 0.45; s += 0.025) {
      const double phi = rasterize_shape({kind, kind == ShapeKind::Square ? 2 * s : s}, 64).void_fraction();
      CHECK(phi <= last);
      last = phi;
    }
  }
}

TEST_CASE("centred shapes are mirror symmetric") {
  for (auto kind : {ShapeKind::Circle, ShapeKind::Square, ShapeKind::Ellipse}) {
    const PoreImage img = rasterize_shape({kind, 0.3, 1.0, 0.0}, 64);
    CHECK(img.flipped_rows() == img);
  }
}

TEST_CASE("generators are deterministic and hit the porosity target") {
  for (auto kind : {GeneratorKind::Perlin, GeneratorKind::Fractal, GeneratorKind::Voronoi}) {
    const GeneratorSpec spec{kind, 42, 0.7, kind == GeneratorKind::Voronoi ? 10 : 4, 3};
    const auto a = generate_with_report(spec, 64);
    const auto b = generate_with_report(spec, 64);
    CHECK(a.image == b.image);
    CHECK(a.raw.void_fraction() >= 0.68);
    CHECK(a.raw.void_fraction() <= 0.72);
    CHECK(filter_periodic_connectivity(a.image).removed == 0);
  }
}

TEST_CASE("shifted generation filters to the same void count") {
  const auto g = generate_with_report({GeneratorKind::Perlin, 9, 0.7, 4, 1}, 64);
  const auto shifted = filter_periodic_connectivity(g.raw.shifted(37, 11)).image;
  CHECK(shifted.void_count() == g.image.void_count());
}

TEST_CASE("noise fields tile periodically") {
  const Grid f = periodic_noise_field({GeneratorKind::Perlin, 3, 0.7, 4, 1}, 64);
  // neighbouring values across the seam differ no more than interior steps do
  const double seam = (f.col(0) - f.col(63)).abs().maxCoeff();
  const double interior = (f.rightCols(63) - f.leftCols(63)).abs().maxCoeff();
  CHECK(seam <= interior * 1.0000001);
}
