// repoclass: command-line driver for the keyword-driven hierarchical
// repository classifier.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "repoclass/fetcher.hpp"
#include "repoclass/pipeline.hpp"
#include "repoclass/synth.hpp"

using namespace repoclass;

namespace {

constexpr int kExitError = 1;
constexpr int kExitUsage = 2;
constexpr int kExitBelowThreshold = 3;

struct Globals {
  std::string config;
  std::string workdir;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<double> fail_under;
  bool force = false;
  bool verbose = false;
  bool quiet = false;
};

PipelineConfig make_config(const Globals& g) {
  if (g.config.empty()) throw ValidationError("--config is required for this subcommand");
  auto c = PipelineConfig::load(g.config);
  if (!g.workdir.empty()) c.workdir = g.workdir;
  if (g.seed) c.set_seed(*g.seed);
  if (g.deterministic) c.make_deterministic();
  if (g.fail_under) c.fail_under = *g.fail_under;
  c.validate();
  return c;
}

int check_threshold(const EvalReport& report, double fail_under) {
  std::cout << report.to_table();
  if (fail_under > 0.0 && report.min_micro_f1() < fail_under) {
    spdlog::error("micro-F1 {:.4f} is below --fail-under {:.4f}", report.min_micro_f1(), fail_under);
    return kExitBelowThreshold;
  }
  return 0;
}

int run_synth(const Globals& g, const SynthConfig& base, const std::string& out_dir) {
  SynthConfig sc = base;
  if (g.seed) sc.seed = *g.seed;
  auto corpus = make_synthetic(sc);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path dir(out_dir);
  save_corpus(dir / "corpus.jsonl", corpus.records);
  std::ofstream(dir / "hierarchy.json") << corpus.hierarchy_json << '\n';

  PipelineConfig pc;
  pc.corpus = "corpus.jsonl";
  pc.hierarchy = "hierarchy.json";
  pc.workdir = "work";
  pc.set_seed(sc.seed);
  std::ofstream(dir / "repoclass.conf") << pc.to_text();
  spdlog::info("synth: wrote {} repositories to {}", corpus.records.size(), dir.string());
  return 0;
}

int run_fetch(const Globals& g, FetchSpec spec, const std::string& slugs_file) {
  if (!g.config.empty()) {
    const auto c = PipelineConfig::load(g.config);
    if (spec.token_env.empty()) spec.token_env = c.fetch_token_env;
    spec.base_url = c.fetch_base_url;
    spec.concurrency = c.fetch_concurrency;
  }
  spec.slugs = load_slugs(slugs_file);
  spec.validate();
  HttplibTransport transport(spec.base_url);
  RateLimiter limiter(static_cast<std::size_t>(std::max(1.0, spec.requests_per_minute)));
  auto stats = fetch_records(spec, transport, limiter);
  spdlog::info("fetch: {} written, {} not found, {} failed ({} requests)", stats.written, stats.not_found,
               stats.failed, stats.requests);
  return stats.failed == 0 ? 0 : kExitError;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keyword-driven hierarchical repository classifier"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Pipeline config file");
  app.add_option("--workdir", g.workdir, "Artifact directory (overrides paths.workdir)");
  app.add_option("--seed", g.seed, "Seed for every stage (overrides pipeline.seed)");
  app.add_flag("--deterministic", g.deterministic, "Single-threaded training, reproducible bytes");
  app.add_option("--fail-under", g.fail_under, "Exit with status 3 if any scope's micro-F1 is lower")
      ->check(CLI::Range(0.0, 1.0));
  app.add_flag("--force", g.force, "Accept inputs produced under a different config");
  app.add_flag("-v,--verbose", g.verbose, "Debug logging");
  app.add_flag("-q,--quiet", g.quiet, "Warnings and errors only");

  FetchSpec fetch_spec;
  std::string slugs_file, fetch_out;
  auto* fetch = app.add_subcommand("fetch", "Download repository records from the REST API");
  fetch->add_option("--slugs", slugs_file, "File with one owner/name per line")->required();
  fetch->add_option("--out", fetch_out, "Output JSONL corpus (appended)")->required();
  fetch->add_option("--token-env", fetch_spec.token_env, "Environment variable holding the API token");
  fetch->add_option("--rpm", fetch_spec.requests_per_minute, "Requests per minute")->check(CLI::PositiveNumber);

  SynthConfig synth_config;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Write the planted-topic synthetic corpus");
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--repos", synth_config.repos, "Number of repositories");
  synth->add_option("--level1", synth_config.level1, "Level-1 categories");
  synth->add_option("--leaves", synth_config.leaves_per_node, "Leaves per level-1 category");

  std::vector<std::pair<Stage, CLI::App*>> stage_cmds;
  for (auto s : kStages) {
    auto* cmd = app.add_subcommand(std::string(stage_name(s)), "Run the " + std::string(stage_name(s)) + " stage");
    stage_cmds.emplace_back(s, cmd);
  }
  auto* e2e = app.add_subcommand("e2e", "Run every stage from build-hin to evaluate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitUsage;
  }

  spdlog::set_level(g.verbose ? spdlog::level::debug : g.quiet ? spdlog::level::warn : spdlog::level::info);
  spdlog::set_pattern("[%H:%M:%S] [%^%l%$] %v");

  try {
    if (*synth) return run_synth(g, synth_config, synth_out);
    if (*fetch) {
      fetch_spec.output = fetch_out;
      return run_fetch(g, fetch_spec, slugs_file);
    }
    Pipeline pipeline(make_config(g), RunOptions{g.force});
    if (*e2e) return check_threshold(pipeline.run_all(), pipeline.config().fail_under);
    for (auto [stage, cmd] : stage_cmds) {
      if (!*cmd) continue;
      if (stage == Stage::Evaluate) return check_threshold(pipeline.evaluate(), pipeline.config().fail_under);
      pipeline.run(stage);
      return 0;
    }
  } catch (const ParseError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const DependencyError& e) {
    spdlog::error("{}", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitError;
  }
  return 0;
}
