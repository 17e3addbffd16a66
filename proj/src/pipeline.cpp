#include "pdl/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

namespace pdl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (v.empty() || *end != '\0') throw Error(ErrorCode::InvalidArgument, "config " + key + ": not a number: " + v);
  return d;
}

long to_long(const std::string& key, const std::string& v) {
  char* end = nullptr;
  const long d = std::strtol(v.c_str(), &end, 10);
  if (v.empty() || *end != '\0') throw Error(ErrorCode::InvalidArgument, "config " + key + ": not an integer: " + v);
  return d;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw Error(ErrorCode::InvalidArgument, "config " + key + ": not a boolean: " + v);
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

void apply_setting(PipelineConfig& c, const std::string& key, const std::string& value) {
  const std::string& v = value;
  if (key == "resolution") c.resolution = static_cast<int>(to_long(key, v));
  else if (key == "density") c.fluid.density = to_double(key, v);
  else if (key == "viscosity") c.fluid.viscosity = to_double(key, v);
  else if (key == "force_x") c.fluid.body_force.x() = to_double(key, v);
  else if (key == "force_y") c.fluid.body_force.y() = to_double(key, v);
  else if (key == "navier_stokes") c.flow.navier_stokes = to_bool(key, v);
  else if (key == "tolerance") c.flow.tolerance = to_double(key, v);
  else if (key == "picard_max_iterations") c.flow.picard_max_iterations = static_cast<int>(to_long(key, v));
  else if (key == "picard_damping") c.flow.picard_damping = to_double(key, v);
  else if (key == "cfl") c.cfl = to_double(key, v);
  else if (key == "samples") c.schedule.samples = static_cast<int>(to_long(key, v));
  else if (key == "eps_in") c.schedule.eps_in = to_double(key, v);
  else if (key == "eps_out") c.schedule.eps_out = to_double(key, v);
  else if (key == "max_steps") c.schedule.max_steps = to_long(key, v);
  else if (key == "master_seed" || key == "seed") c.master_seed = static_cast<std::uint64_t>(std::stoull(v));
  else if (key == "workers") c.workers = static_cast<int>(to_long(key, v));
  else if (key == "porosity_min") c.porosity_min = to_double(key, v);
  else if (key == "porosity_max") c.porosity_max = to_double(key, v);
  else if (key == "scale_min") c.scale_min = static_cast<int>(to_long(key, v));
  else if (key == "scale_max") c.scale_max = static_cast<int>(to_long(key, v));
  else if (key == "voronoi_seeds_min") c.voronoi_seeds_min = static_cast<int>(to_long(key, v));
  else if (key == "voronoi_seeds_max") c.voronoi_seeds_max = static_cast<int>(to_long(key, v));
  else if (key == "octaves_min") c.octaves_min = static_cast<int>(to_long(key, v));
  else if (key == "octaves_max") c.octaves_max = static_cast<int>(to_long(key, v));
  else throw Error(ErrorCode::InvalidArgument, "unknown config key: " + key);
}

void apply_config_text(PipelineConfig& config, std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw Error(ErrorCode::Parse, "config line " + std::to_string(n) + ": expected key = value");
    apply_setting(config, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void apply_config_file(PipelineConfig& config, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open config " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  apply_config_text(config, s.str());
}

void apply_environment(PipelineConfig& config) {
  if (const char* w = std::getenv("PDL_WORKERS"); w && *w) {
    const long n = to_long("PDL_WORKERS", w);
    if (n < 1) throw Error(ErrorCode::InvalidArgument, "PDL_WORKERS must be positive");
    config.workers = static_cast<int>(n);
  }
}

json config_to_json(const PipelineConfig& c) {
  return {{"resolution", c.resolution},
          {"density", c.fluid.density},
          {"viscosity", c.fluid.viscosity},
          {"force", {c.fluid.body_force.x(), c.fluid.body_force.y()}},
          {"navier_stokes", c.flow.navier_stokes},
          {"tolerance", c.flow.tolerance},
          {"cfl", c.cfl},
          {"samples", c.schedule.samples},
          {"eps_in", c.schedule.eps_in},
          {"eps_out", c.schedule.eps_out},
          {"max_steps", c.schedule.max_steps},
          {"master_seed", c.master_seed}};
}

// ---------------------------------------------------------------------------
// Records

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json record_to_json(const DatasetRecord& r) {
  json j = r.extra;
  j["schema_version"] = kSchemaVersion;
  j["id"] = r.id;
  j["geometry_path"] = r.geometry_path;
  j["provenance"] = r.provenance;
  if (r.failure) {
    j["alpha_L"] = nullptr;
    j["alpha_T"] = nullptr;
    j["failure"] = {{"stage", r.failure->stage}, {"code", r.failure->code}, {"message", r.failure->message}};
  } else {
    j["alpha_L"] = r.alpha_L;
    j["alpha_T"] = r.alpha_T;
    j["failure"] = nullptr;
  }
  j["clamps"] = {{"longitudinal", r.clamps.longitudinal}, {"transversal", r.clamps.transversal}, {"degenerate", r.clamps.degenerate}};
  json m = json::object();
  const auto values = r.metrics.values();
  for (int k = 0; k < kMetricCount; ++k) m[std::string(metric_names()[k])] = values[k];
  j["metrics"] = m;
  j["metric_flags"] = {{"blocked_x", r.metrics.blocked_x},
                       {"blocked_y", r.metrics.blocked_y},
                       {"roughness_undefined", r.metrics.roughness_undefined},
                       {"directionality_undefined", r.metrics.directionality_undefined}};
  j["flagged"] = r.flagged();
  j["metadata"] = r.metadata;
  return j;
}

DatasetRecord record_from_json(const json& j) {
  try {
    if (j.at("schema_version").get<int>() > kSchemaVersion)
      throw Error(ErrorCode::Parse, "record schema version " + j.at("schema_version").dump() + " is newer than supported");
    DatasetRecord r;
    r.id = j.at("id").get<std::string>();
    r.geometry_path = j.value("geometry_path", "");
    r.provenance = j.value("provenance", json::object());
    if (const auto& f = j.at("failure"); !f.is_null())
      r.failure = CaseFailure{f.at("stage").get<std::string>(), f.at("code").get<std::string>(), f.at("message").get<std::string>()};
    else {
      r.alpha_L = j.at("alpha_L").get<double>();
      r.alpha_T = j.at("alpha_T").get<double>();
    }
    const auto& c = j.at("clamps");
    r.clamps = {c.at("longitudinal").get<double>(), c.at("transversal").get<double>(), c.at("degenerate").get<double>()};
    std::array<double, kMetricCount> values{};
    for (int k = 0; k < kMetricCount; ++k) values[k] = j.at("metrics").at(std::string(metric_names()[k])).get<double>();
    r.metrics = MetricsVector::from_values(values);
    const auto& mf = j.at("metric_flags");
    r.metrics.blocked_x = mf.at("blocked_x").get<bool>();
    r.metrics.blocked_y = mf.at("blocked_y").get<bool>();
    r.metrics.roughness_undefined = mf.at("roughness_undefined").get<bool>();
    r.metrics.directionality_undefined = mf.at("directionality_undefined").get<bool>();
    r.metadata = j.value("metadata", json::object());
    static const std::array<const char*, 12> known{"schema_version", "id", "geometry_path", "provenance", "alpha_L", "alpha_T",
                                                   "failure", "clamps", "metrics", "metric_flags", "flagged", "metadata"};
    for (const auto& [key, value] : j.items())
      if (std::find(known.begin(), known.end(), key) == known.end()) r.extra[key] = value;
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("dataset record: ") + e.what());
  }
}

void save_record(const DatasetRecord& record, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << record_to_json(record).dump(2) << '\n';
}

DatasetRecord load_record(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  return record_from_json(j);
}

// ---------------------------------------------------------------------------
// Cases

std::uint64_t derive_seed(std::uint64_t master, std::string_view id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : id) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t z = master ^ h;
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

DatasetRecord run_case(const CaseInput& input, const PipelineConfig& config, CaseArtifacts* artifacts) {
  DatasetRecord rec;
  rec.id = input.id;
  rec.provenance = input.provenance;
  json meta;
  meta["software_version"] = kSoftwareVersion;
  meta["started"] = utc_now();
  meta["config"] = config_to_json(config);
  meta["width"] = input.image.width();
  meta["height"] = input.image.height();
  meta["pixel_size"] = input.image.pixel_size();

  std::string stage = "geometry";
  PoreImage image;
  try {
    if (input.image.void_count() == 0) throw Error(ErrorCode::DegenerateGeometry, "geometry has no void");
    const FilterResult filtered = filter_periodic_connectivity(input.image);
    image = filtered.image;
    meta["removed_pixels"] = filtered.removed;

    stage = "flow";
    if (max_flow(image, Axis::X) == 0) throw Error(ErrorCode::Stagnation, "void does not percolate along x");
    FlowReport flow_report;
    const FlowField flow = solve_flow(image, config.fluid, config.flow, &flow_report);
    meta["flow"] = {{"iterations", flow_report.iterations},
                    {"residual", flow_report.residual_history.empty() ? 0.0 : flow_report.residual_history.back()},
                    {"max_divergence", flow_report.max_divergence},
                    {"unknowns", flow_report.unknowns}};

    stage = "transport";
    const ExtendedDomain domain(image, flow);
    TransportResult tr = advect(domain, config.cfl, config.schedule);
    meta["transport"] = {{"dt", tr.dt},
                         {"window_start_step", tr.window.start},
                         {"window_end_step", tr.window.end},
                         {"t_start", tr.t_start},
                         {"t_end", tr.t_end},
                         {"max_balance_residual", tr.max_balance_residual},
                         {"min_concentration", tr.min_concentration},
                         {"max_concentration", tr.max_concentration}};

    stage = "upscaling";
    UpscalingResult up = upscale_run(image, flow, tr.snapshots);
    rec.alpha_L = up.alphas.alpha_L;
    rec.alpha_T = up.alphas.alpha_T;
    rec.clamps = up.clamps;
    meta["v_bar"] = {up.v_bar.x(), up.v_bar.y()};
    if (!std::isfinite(rec.alpha_L) || !std::isfinite(rec.alpha_T))
      throw Error(ErrorCode::Numeric, "non-finite dispersivity");
    if (artifacts) {
      artifacts->flow = flow;
      artifacts->transport = std::move(tr);
      artifacts->upscaling = std::move(up);
    }
  } catch (const Error& e) {
    rec.failure = CaseFailure{stage, std::string(to_string(e.code())), e.what()};
    rec.alpha_L = rec.alpha_T = 0.0;
    if (image.width() == 0) image = input.image;
  } catch (const std::exception& e) {
    rec.failure = CaseFailure{stage, "internal", e.what()};
    rec.alpha_L = rec.alpha_T = 0.0;
    if (image.width() == 0) image = input.image;
  }

  try {
    rec.metrics = assemble_metrics(image);
  } catch (const std::exception& e) {
    if (!rec.failure) rec.failure = CaseFailure{"metrics", "internal", e.what()};
  }
  meta["finished"] = utc_now();
  rec.metadata = std::move(meta);
  return rec;
}

// ---------------------------------------------------------------------------
// Parallel helper

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int t = 0; t < std::min(workers, n); ++t)
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<ShapeSpec> sweep_grid(const SweepSpec& spec) {
  if (spec.sizes.empty() || spec.aspects.empty() || spec.rotations.empty())
    throw Error(ErrorCode::InvalidArgument, "sweep grid is empty");
  std::vector<ShapeSpec> grid;
  for (double s : spec.sizes)
    for (double a : spec.aspects)
      for (double r : spec.rotations) grid.push_back({spec.family, s, a, r});
  return grid;
}

std::vector<SweepPoint> run_sweep(const SweepSpec& spec, const PipelineConfig& config) {
  const auto grid = sweep_grid(spec);
  std::vector<PoreImage> images;
  for (const auto& s : grid) images.push_back(rasterize_shape(s, config.resolution));
  std::vector<SweepPoint> points(grid.size());
  parallel_for(static_cast<int>(grid.size()), config.workers, [&](int i) {
    const ShapeSpec& s = grid[static_cast<std::size_t>(i)];
    char id[64];
    std::snprintf(id, sizeof id, "%s-%03d", std::string(to_string(s.kind)).c_str(), i);
    CaseInput in{id, images[static_cast<std::size_t>(i)],
                 {{"shape", {{"kind", to_string(s.kind)}, {"size", s.size}, {"aspect", s.aspect}, {"rotation_deg", s.rotation_deg}}}}};
    points[static_cast<std::size_t>(i)] = {s, run_case(in, config)};
  });
  return points;
}

std::string sweep_csv(const std::vector<SweepPoint>& points) {
  std::string out = "index,kind,size,aspect,rotation_deg,alpha_L,alpha_T,flagged,error\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    out += std::to_string(i) + "," + std::string(to_string(p.shape.kind)) + "," + format_double(p.shape.size) + "," +
           format_double(p.shape.aspect) + "," + format_double(p.shape.rotation_deg) + "," + format_double(p.record.alpha_L) +
           "," + format_double(p.record.alpha_T) + "," + (p.record.flagged() ? "1" : "0") + "," +
           (p.record.failure ? p.record.failure->code : "") + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Datasets

GeneratorSpec dataset_case_spec(GeneratorKind kind, int index, const PipelineConfig& c, std::string* id_out) {
  char id[64];
  std::snprintf(id, sizeof id, "%s-%04d", std::string(to_string(kind)).c_str(), index);
  std::mt19937_64 rng(derive_seed(c.master_seed, id));
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(unit_double(rng()) * (hi - lo + 1)); };
  GeneratorSpec g;
  g.kind = kind;
  g.porosity = c.porosity_min + unit_double(rng()) * (c.porosity_max - c.porosity_min);
  g.scale = kind == GeneratorKind::Voronoi ? pick(c.voronoi_seeds_min, c.voronoi_seeds_max) : pick(c.scale_min, c.scale_max);
  g.octaves = kind == GeneratorKind::Fractal ? pick(c.octaves_min, c.octaves_max) : 1;
  g.seed = rng();
  if (id_out) *id_out = id;
  return g;
}

namespace {

json generator_json(const GeneratorSpec& g) {
  return {{"kind", to_string(g.kind)}, {"seed", g.seed}, {"porosity", g.porosity}, {"scale", g.scale}, {"octaves", g.octaves}};
}

}  // namespace

ManifestSummary summarize(const std::vector<DatasetRecord>& records) {
  ManifestSummary s;
  for (const auto& r : records) {
    ++s.total;
    if (r.flagged()) {
      ++s.flagged;
      ++s.by_error[r.failure ? r.failure->code : std::string("blocked_axis")];
    } else {
      ++s.successful;
    }
  }
  return s;
}

std::vector<DatasetRecord> build_dataset(int per_kind, const PipelineConfig& config, const std::filesystem::path& dir,
                                         const ProgressFn& progress) {
  if (per_kind < 1) throw Error(ErrorCode::InvalidArgument, "need at least one case per generator kind");
  std::error_code ec;
  std::filesystem::create_directories(dir / "geometry", ec);
  if (!ec) std::filesystem::create_directories(dir / "records", ec);
  if (ec) throw Error(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());

  struct Job {
    std::string id;
    GeneratorSpec spec;
  };
  std::vector<Job> jobs;
  for (GeneratorKind kind : {GeneratorKind::Perlin, GeneratorKind::Fractal, GeneratorKind::Voronoi})
    for (int i = 0; i < per_kind; ++i) {
      Job j;
      j.spec = dataset_case_spec(kind, i, config, &j.id);
      jobs.push_back(std::move(j));
    }
  std::sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) { return a.id < b.id; });

  std::vector<DatasetRecord> records(jobs.size());
  std::mutex mutex;
  int done = 0;
  parallel_for(static_cast<int>(jobs.size()), config.workers, [&](int i) {
    const Job& job = jobs[static_cast<std::size_t>(i)];
    const std::string rel_geom = "geometry/" + job.id + ".pbm";
    DatasetRecord rec;
    try {
      const Generation gen = generate_with_report(job.spec, config.resolution);
      save_pbm(gen.image, dir / rel_geom);
      json prov = {{"generator", generator_json(job.spec)}, {"threshold", gen.threshold}, {"realized_porosity", gen.raw.void_fraction()}};
      rec = run_case({job.id, gen.image, prov}, config);
    } catch (const Error& e) {
      rec.id = job.id;
      rec.provenance = {{"generator", generator_json(job.spec)}};
      rec.failure = CaseFailure{"geometry", std::string(to_string(e.code())), e.what()};
      rec.metadata = {{"software_version", kSoftwareVersion}, {"config", config_to_json(config)}};
    }
    rec.geometry_path = rel_geom;
    save_record(rec, dir / "records" / (job.id + ".json"));
    std::lock_guard lock(mutex);
    records[static_cast<std::size_t>(i)] = std::move(rec);
    ++done;
    if (progress) progress(records[static_cast<std::size_t>(i)], done, static_cast<int>(jobs.size()));
  });

  const ManifestSummary s = summarize(records);
  json manifest;
  manifest["schema_version"] = kSchemaVersion;
  manifest["software_version"] = kSoftwareVersion;
  manifest["per_kind"] = per_kind;
  manifest["config"] = config_to_json(config);
  json list = json::array();
  for (const auto& r : records)
    list.push_back({{"id", r.id},
                    {"record", "records/" + r.id + ".json"},
                    {"geometry", r.geometry_path},
                    {"flagged", r.flagged()},
                    {"error", r.failure ? json(r.failure->code) : json(nullptr)}});
  manifest["records"] = std::move(list);
  manifest["summary"] = {{"total", s.total}, {"successful", s.successful}, {"flagged", s.flagged}, {"by_error", s.by_error}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw Error(ErrorCode::Io, "cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
  return records;
}

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorCode::Io, "no manifest.json in " + dir.string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("manifest: ") + e.what());
  }
  std::vector<DatasetRecord> records;
  for (const auto& entry : manifest.at("records")) records.push_back(load_record(dir / entry.at("record").get<std::string>()));
  std::sort(records.begin(), records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  return records;
}

// ---------------------------------------------------------------------------
// Training table

std::vector<TrainingRow> training_rows(const std::vector<DatasetRecord>& records) {
  std::vector<const DatasetRecord*> ok;
  for (const auto& r : records)
    if (!r.flagged()) ok.push_back(&r);
  std::sort(ok.begin(), ok.end(), [](const auto* a, const auto* b) { return a->id < b->id; });
  std::vector<TrainingRow> rows;
  for (const auto* r : ok) rows.push_back({r->metrics.values(), r->alpha_L, r->alpha_T, r->geometry_path});
  return rows;
}

std::string training_table_csv(const std::vector<TrainingRow>& rows) {
  std::string out;
  for (const auto name : metric_names()) out += std::string(name) + ",";
  out += "alpha_L,alpha_T,geometry_path\n";
  for (const auto& r : rows) {
    for (double v : r.metrics) out += format_double(v) + ",";
    out += format_double(r.alpha_L) + "," + format_double(r.alpha_T) + "," + r.geometry_path + "\n";
  }
  return out;
}

std::vector<TrainingRow> parse_training_table(std::string_view csv) {
  std::istringstream in{std::string(csv)};
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::Parse, "training table is empty");
  std::vector<TrainingRow> rows;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (cells.size() != kMetricCount + 3) throw Error(ErrorCode::Parse, "training table line " + std::to_string(n) + ": expected 24 columns");
    TrainingRow r;
    for (int k = 0; k < kMetricCount + 2; ++k) {
      char* end = nullptr;
      const double v = std::strtod(cells[k].c_str(), &end);
      if (cells[k].empty() || *end != '\0') throw Error(ErrorCode::Parse, "training table line " + std::to_string(n) + ": bad number");
      if (k < kMetricCount) r.metrics[k] = v;
      else if (k == kMetricCount) r.alpha_L = v;
      else r.alpha_T = v;
    }
    r.geometry_path = cells.back();
    rows.push_back(std::move(r));
  }
  return rows;
}

std::filesystem::path export_training_table(const std::filesystem::path& dir) {
  const auto rows = training_rows(load_dataset(dir));
  if (rows.empty()) throw Error(ErrorCode::InvalidArgument, "dataset has no usable records");
  const auto path = dir / "training.csv";
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << training_table_csv(rows);
  return path;
}

nn::Tensor metric_inputs(const std::vector<TrainingRow>& rows) {
  nn::Tensor x({static_cast<int>(rows.size()), kMetricCount});
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (int k = 0; k < kMetricCount; ++k) x.values[static_cast<Eigen::Index>(i) * kMetricCount + k] = rows[i].metrics[k];
  return x;
}

Eigen::MatrixX2d alpha_targets(const std::vector<TrainingRow>& rows) {
  Eigen::MatrixX2d y(static_cast<Eigen::Index>(rows.size()), 2);
  for (std::size_t i = 0; i < rows.size(); ++i) y.row(static_cast<Eigen::Index>(i)) << rows[i].alpha_L, rows[i].alpha_T;
  return y;
}

nn::Tensor image_inputs(const std::vector<PoreImage>& images) {
  if (images.empty()) return nn::Tensor({0, 1, 0, 0});
  const int h = images.front().height(), w = images.front().width();
  nn::Tensor x({static_cast<int>(images.size()), 1, h, w});
  for (std::size_t n = 0; n < images.size(); ++n) {
    if (images[n].height() != h || images[n].width() != w) throw Error(ErrorCode::InvalidArgument, "images differ in size");
    for (int y = 0; y < h; ++y)
      for (int xx = 0; xx < w; ++xx) x.at(static_cast<int>(n), 0, y, xx) = images[n].is_void(xx, y) ? 1.0 : 0.0;
  }
  return x;
}

// ---------------------------------------------------------------------------
// Correlations

namespace {

std::optional<double> safe_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  try {
    return pearson(x, y);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace

std::vector<CorrelationRow> correlation_table(const std::vector<DatasetRecord>& records) {
  struct Group {
    std::vector<std::array<double, kMetricCount>> m;
    std::vector<double> aL, aT;
  };
  Group all;
  std::map<std::string, Group> groups;
  for (const auto& r : records) {
    if (r.flagged()) continue;
    std::string gen = "other";
    if (r.provenance.contains("generator")) gen = r.provenance["generator"].value("kind", "other");
    for (Group* g : {&all, &groups[gen]}) {
      g->m.push_back(r.metrics.values());
      g->aL.push_back(r.alpha_L);
      g->aT.push_back(r.alpha_T);
    }
  }
  std::vector<CorrelationRow> rows;
  for (int k = 0; k < kMetricCount; ++k) {
    auto column = [k](const Group& g) {
      std::vector<double> c;
      for (const auto& m : g.m) c.push_back(m[k]);
      return c;
    };
    CorrelationRow row;
    row.metric = metric_names()[k];
    const auto c = column(all);
    row.rho_L = safe_pearson(c, all.aL);
    row.rho_T = safe_pearson(c, all.aT);
    for (const auto& [name, g] : groups) {
      const auto cg = column(g);
      row.by_generator[name] = {safe_pearson(cg, g.aL), safe_pearson(cg, g.aT)};
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string correlation_csv(const std::vector<CorrelationRow>& rows) {
  auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  std::string out = "metric,rho_alpha_L,rho_alpha_T";
  if (!rows.empty())
    for (const auto& [name, _] : rows.front().by_generator) out += ",rho_alpha_L_" + name + ",rho_alpha_T_" + name;
  out += "\n";
  for (const auto& r : rows) {
    out += r.metric + "," + cell(r.rho_L) + "," + cell(r.rho_T);
    for (const auto& [name, v] : r.by_generator) out += "," + cell(v.first) + "," + cell(v.second);
    out += "\n";
  }
  return out;
}

}  // namespace pdl
