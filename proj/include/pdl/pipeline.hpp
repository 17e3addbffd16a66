#pragma once

#include "pdl/flow.hpp"
#include "pdl/geometry.hpp"
#include "pdl/metrics.hpp"
#include "pdl/nn.hpp"
#include "pdl/transport.hpp"
#include "pdl/upscaling.hpp"

#include <json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pdl {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kSoftwareVersion = "0.1.0";

struct PipelineConfig {
  int resolution = 64;
  FluidProps fluid;
  FlowOptions flow;
  double cfl = 0.45;
  SampleSchedule schedule;
  std::uint64_t master_seed = 1;
  int workers = 1;
  // random generator knob ranges
  double porosity_min = 0.6;
  double porosity_max = 0.85;
  int scale_min = 3;
  int scale_max = 6;
  int voronoi_seeds_min = 6;
  int voronoi_seeds_max = 14;
  int octaves_min = 2;
  int octaves_max = 4;
};

/// Applies one `key = value` setting; unknown keys throw.
void apply_setting(PipelineConfig& config, const std::string& key, const std::string& value);
/// key=value lines, '#' starts a comment.
void apply_config_text(PipelineConfig& config, std::string_view text);
void apply_config_file(PipelineConfig& config, const std::filesystem::path& path);
/// PDL_WORKERS, when set.
void apply_environment(PipelineConfig& config);
nlohmann::json config_to_json(const PipelineConfig& config);

struct CaseFailure {
  std::string stage;
  std::string code;
  std::string message;
};

struct DatasetRecord {
  std::string id;
  std::string geometry_path;
  nlohmann::json provenance = nlohmann::json::object();
  double alpha_L = 0.0;
  double alpha_T = 0.0;
  ClampStats clamps;
  MetricsVector metrics;
  std::optional<CaseFailure> failure;
  nlohmann::json metadata = nlohmann::json::object();
  nlohmann::json extra = nlohmann::json::object();  // unknown fields kept for round trips

  bool flagged() const { return failure.has_value() || !metrics.usable(); }
};

nlohmann::json record_to_json(const DatasetRecord& record);
DatasetRecord record_from_json(const nlohmann::json& j);
void save_record(const DatasetRecord& record, const std::filesystem::path& path);
DatasetRecord load_record(const std::filesystem::path& path);

struct CaseInput {
  std::string id;
  PoreImage image;
  nlohmann::json provenance = nlohmann::json::object();
};

struct CaseArtifacts {
  std::optional<FlowField> flow;
  std::optional<TransportResult> transport;
  std::optional<UpscalingResult> upscaling;
};

/// Runs flow, transport, upscaling and metrics on one geometry. Stage errors are
/// recorded on the record, never thrown.
DatasetRecord run_case(const CaseInput& input, const PipelineConfig& config, CaseArtifacts* artifacts = nullptr);

/// Per-case seed from the master seed and the case id.
std::uint64_t derive_seed(std::uint64_t master, std::string_view id);

// ---------------------------------------------------------------------------
// Verification sweeps

struct SweepSpec {
  ShapeKind family = ShapeKind::Circle;
  std::vector<double> sizes;
  std::vector<double> aspects{1.0};
  std::vector<double> rotations{0.0};
};

struct SweepPoint {
  ShapeSpec shape;
  DatasetRecord record;
};

/// Points in size-major, then aspect, then rotation order.
std::vector<ShapeSpec> sweep_grid(const SweepSpec& spec);
std::vector<SweepPoint> run_sweep(const SweepSpec& spec, const PipelineConfig& config);
std::string sweep_csv(const std::vector<SweepPoint>& points);

// ---------------------------------------------------------------------------
// Datasets

struct ManifestSummary {
  int total = 0;
  int successful = 0;
  int flagged = 0;
  std::map<std::string, int> by_error;
};

/// Generator spec for case `index` of `kind`, drawn from the config ranges.
GeneratorSpec dataset_case_spec(GeneratorKind kind, int index, const PipelineConfig& config, std::string* id = nullptr);

using ProgressFn = std::function<void(const DatasetRecord&, int done, int total)>;

/// Generates, runs and stores n cases per generator kind under `dir`
/// (geometry/, records/, manifest.json). Returns records sorted by id.
std::vector<DatasetRecord> build_dataset(int per_kind, const PipelineConfig& config, const std::filesystem::path& dir,
                                         const ProgressFn& progress = {});

std::vector<DatasetRecord> load_dataset(const std::filesystem::path& dir);
ManifestSummary summarize(const std::vector<DatasetRecord>& records);

struct TrainingRow {
  std::array<double, kMetricCount> metrics{};
  double alpha_L = 0.0;
  double alpha_T = 0.0;
  std::string geometry_path;
};

std::vector<TrainingRow> training_rows(const std::vector<DatasetRecord>& records);
std::string training_table_csv(const std::vector<TrainingRow>& rows);
std::vector<TrainingRow> parse_training_table(std::string_view csv);
/// Writes training.csv in the dataset directory and returns its path.
std::filesystem::path export_training_table(const std::filesystem::path& dir);

/// [N, 21] metric features, [N, 2] targets and [N, 1, H, W] void indicators.
nn::Tensor metric_inputs(const std::vector<TrainingRow>& rows);
Eigen::MatrixX2d alpha_targets(const std::vector<TrainingRow>& rows);
nn::Tensor image_inputs(const std::vector<PoreImage>& images);

struct CorrelationRow {
  std::string metric;
  std::optional<double> rho_L;
  std::optional<double> rho_T;
  std::map<std::string, std::pair<std::optional<double>, std::optional<double>>> by_generator;
};

std::vector<CorrelationRow> correlation_table(const std::vector<DatasetRecord>& records);
std::string correlation_csv(const std::vector<CorrelationRow>& rows);

/// Runs fn(i) for i in [0, n) on `workers` threads.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

std::string format_double(double v);

}  // namespace pdl
