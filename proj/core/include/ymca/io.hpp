#pragma once

// File formats: run configuration, problem documents, run manifests and the
// delimited report tables derived from them.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ymca/bench.hpp"
#include "ymca/featsel.hpp"
#include "ymca/gp.hpp"
#include "ymca/pfn.hpp"
#include "ymca/pipeline.hpp"

namespace ymca {

inline constexpr int kProblemVersion = 1;
inline constexpr int kManifestVersion = 1;

enum class SurrogateKind { Pfn, Gp, Oracle };
std::string to_string(SurrogateKind kind);

struct SurrogateSettings {
  SurrogateKind kind = SurrogateKind::Pfn;
  std::string checkpoint;  // PFN checkpoint path, relative to the config file
  GpOptions gp;
};

/// One configuration document drives every command. Seeds of the nested
/// settings are ignored; the top-level seed feeds all of them.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  SramLikeFamily family;
  std::string problem;  // problem file, relative to the config file; empty = generate from family
  SurrogateSettings surrogate;
  RunConfig run;
  AblationConfig ablation;
  MetaTrainConfig meta_train;
  /// Directory used to resolve relative paths. Not part of the hash.
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::string& path) const;
};

/// Parses a JSON configuration. Unknown keys and bad values raise
/// ConfigError.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical JSON with every default filled in.
std::string canonical_config(const ExperimentConfig& config);
/// 64-bit FNV-1a of the canonical text, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

std::string problem_to_json(const BenchmarkProblem& problem, const std::string& config_hash = {});
BenchmarkProblem problem_from_json(const std::string& text);
BenchmarkProblem load_problem(const std::filesystem::path& path);

/// Run manifest: configuration, seeds, feature subset, per-round yields and
/// the final report.
std::string manifest_json(const ExperimentConfig& config, const BenchmarkProblem& problem,
                          const YieldReport& report);

struct ManifestCorner {
  std::string id;
  double golden = 0.0;
  double estimate = 0.0;
  double error = 0.0;
  bool capped = false;
};

struct RunManifest {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string surrogate;
  std::string sampling;
  std::vector<ManifestCorner> corners;
  double mre = 0.0;
  std::uint64_t simulations = 0;
  std::int64_t reference_samples = 0;
  double speedup = 0.0;
  bool converged = false;
  std::uint64_t rounds = 0;
  std::vector<RoundRecord> trace;
};

/// Throws SchemaError on a foreign document or version mismatch.
RunManifest parse_manifest(const std::string& text);
RunManifest load_manifest(const std::filesystem::path& path);

/// Table-V-shaped grid: one row per corner, a shared golden column when all
/// runs agree on it (per-run golden columns otherwise), then estimate and
/// relative error per run.
std::string report_csv(std::span<const RunManifest> runs);
/// One row per run: MRE, simulations, reference samples, speedup, status.
std::string summary_csv(std::span<const RunManifest> runs);
/// Per-round yields of one run.
std::string trace_csv(const RunManifest& run);
/// Table-VII-shaped grid: target corner by pooling level.
std::string ablation_csv(const AblationTable& table, const std::string& config_hash, std::uint64_t seed);

/// First line of every delimited output: "# config_hash=<h> seed=<s>".
std::string provenance_line(const std::string& config_hash, std::uint64_t seed);

std::string read_text(const std::filesystem::path& path);
/// Writes text atomically enough for our purposes (truncate and write).
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ymca
