#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "repoclass/config.hpp"
#include "repoclass/evaluation.hpp"

namespace repoclass {

/// A stage was run before one of its prerequisites.
class DependencyError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

enum class Stage { BuildHin, Embed, Enrich, FitTopics, Generate, Train, Predict, Evaluate };
inline constexpr std::array<Stage, 8> kStages = {Stage::BuildHin, Stage::Embed,    Stage::Enrich,  Stage::FitTopics,
                                                 Stage::Generate, Stage::Train,    Stage::Predict, Stage::Evaluate};

std::string_view stage_name(Stage stage);  // the CLI subcommand
std::optional<Stage> parse_stage(std::string_view name);

/// Primary artifact file of a stage (relative to the workdir); its sidecar
/// "<artifact>.meta.json" records the config hash that produced it.
std::string_view stage_artifact(Stage stage);

std::string hash_hex(std::uint64_t h);
std::uint64_t hash_file(const std::filesystem::path& path);

struct RunOptions {
  bool force = false;  // accept inputs produced under a different config
};

/// Runs stages over the artifacts in config.workdir. Each stage checks that
/// its prerequisites exist and were produced by the current configuration,
/// writes its artifacts, a sidecar and a manifest.jsonl line.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, RunOptions options = {});

  const PipelineConfig& config() const { return config_; }
  std::filesystem::path path(std::string_view artifact) const { return config_.workdir / artifact; }

  /// Hash over every setting (and input file) that feeds the stage,
  /// upstream stages included.
  std::string config_hash(Stage stage) const;

  void run(Stage stage);
  /// All stages in order; returns the evaluation report.
  EvalReport run_all();

  void build_hin();
  void embed();
  void enrich();
  void fit_topics();
  void generate();
  void train();
  void predict();
  EvalReport evaluate();

 private:
  void require(Stage self, Stage prerequisite) const;
  void finish(Stage stage, const std::vector<std::string>& outputs,
              const std::map<std::string, std::string>& inputs, double wall_ms) const;

  PipelineConfig config_;
  RunOptions options_;
};

}  // namespace repoclass
