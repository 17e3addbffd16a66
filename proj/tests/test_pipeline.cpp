#include <doctest.h>

#include "oracles.hpp"
#include "pdl/pipeline.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

using namespace pdl;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pdl_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.resolution = 32;
  c.schedule.samples = 8;
  return c;
}

DatasetRecord fake_record(const std::string& id, double aL, double aT, bool fail = false) {
  DatasetRecord r;
  r.id = id;
  r.geometry_path = "geometry/" + id + ".pbm";
  r.provenance = {{"generator", {{"kind", id.substr(0, id.find('-'))}}}};
  r.alpha_L = aL;
  r.alpha_T = aT;
  auto v = assemble_metrics(PoreImage::filled(8, 8, true)).values();
  for (int k = 0; k < kMetricCount; ++k) v[k] += 0.001 * k + aL;
  r.metrics = MetricsVector::from_values(v);
  if (fail) r.failure = CaseFailure{"transport", "timeout", "step limit"};
  return r;
}

nlohmann::json without_times(nlohmann::json j) {
  for (auto& r : j) {
    if (!r.contains("metadata")) continue;
    r["metadata"].erase("started");
    r["metadata"].erase("finished");
  }
  return j;
}

}  // namespace

TEST_CASE("config text, files and environment") {
  PipelineConfig c;
  apply_config_text(c, "# desk run\nresolution = 48\n  cfl=0.3  # tighter\n\nnavier_stokes = true\nseed = 99\n");
  CHECK(c.resolution == 48);
  CHECK(c.cfl == 0.3);
  CHECK(c.flow.navier_stokes);
  CHECK(c.master_seed == 99);
  CHECK_THROWS_AS(apply_setting(c, "no_such_key", "1"), Error);
  CHECK_THROWS_AS(apply_setting(c, "resolution", "many"), Error);
  CHECK_THROWS_AS(apply_config_text(c, "resolution 12\n"), Error);

  const fs::path dir = scratch_dir("config");
  fs::create_directories(dir);
  std::ofstream(dir / "run.conf") << "samples = 7\nviscosity = 0.5\n";
  apply_config_file(c, dir / "run.conf");
  CHECK(c.schedule.samples == 7);
  CHECK(c.fluid.viscosity == 0.5);
  CHECK_THROWS_AS(apply_config_file(c, dir / "missing.conf"), Error);
  fs::remove_all(dir);

  ::setenv("PDL_WORKERS", "3", 1);
  apply_environment(c);
  CHECK(c.workers == 3);
  ::setenv("PDL_WORKERS", "0", 1);
  CHECK_THROWS_AS(apply_environment(c), Error);
  ::unsetenv("PDL_WORKERS");
  const auto j = config_to_json(c);
  CHECK(j.at("resolution") == 48);
  CHECK_FALSE(j.contains("workers"));
}

TEST_CASE("record JSON round trip keeps unknown fields") {
  DatasetRecord r = fake_record("perlin-0003", 1.0 / 3.0, 0.1 + 0.2);
  r.clamps = {0.01, 0.125, 0.0};
  r.metadata = {{"cfl", 0.45}};
  r.extra = {{"note", "kept"}, {"nested", {1, 2, 3}}};
  const nlohmann::json j = record_to_json(r);
  CHECK(j.at("schema_version") == kSchemaVersion);
  const DatasetRecord back = record_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.alpha_L == r.alpha_L);
  CHECK(back.alpha_T == r.alpha_T);
  CHECK(back.metrics.values() == r.metrics.values());
  CHECK(back.extra == r.extra);
  CHECK(record_to_json(back) == j);

  const fs::path dir = scratch_dir("record");
  fs::create_directories(dir);
  save_record(r, dir / "r.json");
  CHECK(record_to_json(load_record(dir / "r.json")) == j);
  fs::remove_all(dir);

  DatasetRecord f = fake_record("fractal-0001", 0, 0, true);
  const DatasetRecord fb = record_from_json(record_to_json(f));
  REQUIRE(fb.failure);
  CHECK(fb.failure->code == "timeout");
  CHECK(fb.flagged());
  CHECK(record_to_json(f).at("alpha_L").is_null());

  nlohmann::json newer = j;
  newer["schema_version"] = kSchemaVersion + 1;
  CHECK_THROWS_AS(record_from_json(newer), Error);
  nlohmann::json broken = j;
  broken.erase("metrics");
  CHECK_THROWS_AS(record_from_json(broken), Error);
}

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, "perlin-0000") == derive_seed(1, "perlin-0000"));
  CHECK(derive_seed(1, "perlin-0000") != derive_seed(1, "perlin-0001"));
  CHECK(derive_seed(1, "perlin-0000") != derive_seed(2, "perlin-0000"));
  std::string id;
  const GeneratorSpec a = dataset_case_spec(GeneratorKind::Voronoi, 4, PipelineConfig{}, &id);
  CHECK(id == "voronoi-0004");
  const GeneratorSpec b = dataset_case_spec(GeneratorKind::Voronoi, 4, PipelineConfig{});
  CHECK(a.seed == b.seed);
  CHECK(a.porosity == b.porosity);
  CHECK(a.porosity >= 0.6);
  CHECK(a.porosity <= 0.85);
}

TEST_CASE("parallel_for visits every index and rethrows") {
  std::vector<std::atomic<int>> hits(50);
  parallel_for(50, 4, [&](int i) { ++hits[i]; });
  for (auto& h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(10, 3, [](int i) {
                    if (i == 7) throw Error(ErrorCode::Numeric, "boom");
                  }),
                  Error);
}

TEST_CASE("sweep grid order and validation") {
  SweepSpec s;
  s.family = ShapeKind::Ellipse;
  s.sizes = {0.1, 0.2};
  s.aspects = {1.0, 2.0};
  s.rotations = {0.0, 30.0, 90.0};
  const auto grid = sweep_grid(s);
  REQUIRE(grid.size() == 12);
  CHECK(grid[0].size == 0.1);
  CHECK(grid[5].size == 0.1);
  CHECK(grid[5].aspect == 2.0);
  CHECK(grid[5].rotation_deg == 90.0);
  CHECK(grid[6].size == 0.2);
  s.sizes.clear();
  CHECK_THROWS_AS(sweep_grid(s), Error);
  s.sizes = {0.1};
  s.rotations.clear();
  CHECK_THROWS_AS(run_sweep(s, small_config()), Error);
}

TEST_CASE("run_case on a centred circle") {
  const PipelineConfig c = small_config();
  const PoreImage img = rasterize_shape({ShapeKind::Circle, 0.2}, c.resolution);
  const DatasetRecord r = run_case({"circle", img, {}}, c);
  REQUIRE_FALSE(r.failure);
  CHECK(r.alpha_L > 0.0);
  CHECK(r.alpha_T <= 0.02 * std::max(r.alpha_L, img.pixel_size()));
  CHECK(r.metadata.at("transport").at("max_balance_residual").get<double>() <= 1e-12);
  const DatasetRecord again = run_case({"circle", img, {}}, c);
  CHECK(again.alpha_L == r.alpha_L);
  CHECK(again.alpha_T == r.alpha_T);
  CHECK(without_times(nlohmann::json::array({record_to_json(again)})) == without_times(nlohmann::json::array({record_to_json(r)})));
}

TEST_CASE("stagnant geometry is flagged, never thrown") {
  Mask m = Mask::Constant(32, 32, true);
  m.col(16).setConstant(false);
  const DatasetRecord r = run_case({"walled", PoreImage(m, 1.0 / 32), {}}, small_config());
  REQUIRE(r.failure);
  CHECK(r.failure->code == "stagnation");
  CHECK(r.flagged());
  CHECK(r.metrics.blocked_x);

  const DatasetRecord solid = run_case({"solid", PoreImage::filled(32, 32, false), {}}, small_config());
  REQUIRE(solid.failure);
  CHECK(solid.flagged());
}

TEST_CASE("small dataset build, manifest and export") {
  PipelineConfig c = small_config();
  c.master_seed = 5;
  const fs::path a = scratch_dir("ds_a"), b = scratch_dir("ds_b");
  int calls = 0;
  const auto recs = build_dataset(2, c, a, [&](const DatasetRecord&, int done, int total) {
    ++calls;
    CHECK(total == 6);
    CHECK(done <= total);
  });
  CHECK(calls == 6);
  REQUIRE(recs.size() == 6);
  for (std::size_t i = 1; i < recs.size(); ++i) CHECK(recs[i - 1].id < recs[i].id);

  nlohmann::json manifest;
  std::ifstream(a / "manifest.json") >> manifest;
  CHECK(manifest.at("records").size() == 6);
  const ManifestSummary s = summarize(recs);
  CHECK(s.total == 6);
  CHECK(s.successful + s.flagged == s.total);
  CHECK(manifest.at("summary").at("total") == 6);
  for (const auto& r : recs) CHECK(fs::exists(a / r.geometry_path));

  c.workers = 2;
  build_dataset(2, c, b);
  nlohmann::json other;
  std::ifstream(b / "manifest.json") >> other;
  CHECK(other.at("records") == manifest.at("records"));
  CHECK(other.at("summary") == manifest.at("summary"));
  const auto ra = load_dataset(a), rb = load_dataset(b);
  REQUIRE(ra.size() == rb.size());
  for (std::size_t i = 0; i < ra.size(); ++i) {
    CHECK(ra[i].alpha_L == rb[i].alpha_L);
    CHECK(ra[i].alpha_T == rb[i].alpha_T);
    CHECK(ra[i].metrics.values() == rb[i].metrics.values());
  }

  if (s.successful > 0) {
    const fs::path table = export_training_table(a);
    std::ifstream in(table);
    std::string text((std::istreambuf_iterator<char>(in)), {});
    const auto rows = parse_training_table(text);
    CHECK(static_cast<int>(rows.size()) == static_cast<int>(training_rows(ra).size()));
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("dataset directory errors") {
  const fs::path f = scratch_dir("file");
  std::ofstream(f) << "x";
  CHECK_THROWS_AS(build_dataset(1, small_config(), f), Error);
  fs::remove(f);
  CHECK_THROWS_AS(load_dataset(scratch_dir("missing")), Error);
}

TEST_CASE("training table drops flagged records and round trips exactly") {
  std::vector<DatasetRecord> recs;
  for (int i = 0; i < 5; ++i) recs.push_back(fake_record("perlin-000" + std::to_string(4 - i), 0.1 * (i + 1) / 3.0, 0.7 / (i + 3), i == 2));
  const auto rows = training_rows(recs);
  REQUIRE(rows.size() == 4);
  CHECK(rows.front().geometry_path == "geometry/perlin-0000.pbm");
  const std::string csv = training_table_csv(rows);
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(std::count(header.begin(), header.end(), ',') == 23);
  const auto back = parse_training_table(csv);
  REQUIRE(back.size() == rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(back[i].metrics == rows[i].metrics);
    CHECK(back[i].alpha_L == rows[i].alpha_L);
    CHECK(back[i].alpha_T == rows[i].alpha_T);
    CHECK(back[i].geometry_path == rows[i].geometry_path);
  }
  CHECK_THROWS_AS(parse_training_table("a,b\n1,2\n"), Error);

  const nn::Tensor x = metric_inputs(rows);
  CHECK(x.shape == std::vector<int>{4, 21});
  CHECK(x.values[21 + 3] == rows[1].metrics[3]);
  const Eigen::MatrixX2d y = alpha_targets(rows);
  CHECK(y(2, 1) == rows[2].alpha_T);
}

TEST_CASE("correlation table") {
  std::vector<DatasetRecord> recs;
  for (int i = 0; i < 6; ++i) {
    DatasetRecord r = fake_record((i % 2 ? "perlin-" : "voronoi-") + std::to_string(i), 1.0 + i, 2.0 - 0.1 * i * i);
    recs.push_back(r);
  }
  recs.push_back(fake_record("fractal-9", 1.0, 1.0, true));
  const auto table = correlation_table(recs);
  REQUIRE(table.size() == 21);
  CHECK(table[0].metric == "tau_x");
  REQUIRE(table[0].rho_L);
  CHECK(*table[0].rho_L == doctest::Approx(1.0));
  CHECK(table[0].by_generator.count("perlin") == 1);
  const std::string csv = correlation_csv(table);
  CHECK(csv.rfind("metric,rho_alpha_L,rho_alpha_T", 0) == 0);
}
