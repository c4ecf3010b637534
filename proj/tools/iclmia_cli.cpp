// Campaign driver: ingest -> index -> attack -> evaluate -> report, or any
// single stage, from a JSON config. Exit codes: 0 success, 2 config error,
// 3 stage failure (with a machine-readable error.json in the output dir).
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "iclmia/campaign.hpp"

namespace {

void write_error_json(const std::filesystem::path& output_dir, const std::string& stage,
                      const std::string& message) {
  std::error_code ec;
  std::filesystem::create_directories(output_dir, ec);
  std::ofstream out(output_dir / "error.json", std::ios::binary);
  if (!out) return;
  nlohmann::json j = {{"stage", stage}, {"error", message}};
  out << j.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"membership-inference evaluation campaigns for retrieval-based ICL services"};
  app.require_subcommand(1);
  app.fallthrough();  // allow global options after the subcommand name

  std::string config_path;
  std::size_t jobs = 1;
  bool strict = false;
  std::optional<std::uint64_t> seed_override;

  app.add_option("--config", config_path, "campaign config JSON")->required();
  app.add_option("--jobs", jobs, "parallel workers for the attack stage")->check(CLI::Range(1, 256));
  app.add_flag("--strict", strict, "reject unknown dataset keys");
  app.add_option("--seed", seed_override, "override the config seed");

  auto* cmd_ingest = app.add_subcommand("ingest", "load, dedup, and length-filter the dataset");
  auto* cmd_index = app.add_subcommand("index", "split the corpus and embed every text");
  auto* cmd_attack = app.add_subcommand("attack", "run each attack x fraction over both arms");
  auto* cmd_evaluate = app.add_subcommand("evaluate", "classify scores and compute ROC metrics");
  auto* cmd_report = app.add_subcommand("report", "merge summaries into one comparison table");
  auto* cmd_run = app.add_subcommand("run", "all stages in order, writing a manifest");

  CLI11_PARSE(app, argc, argv);

  iclmia::CampaignConfig config;
  try {
    config = iclmia::load_campaign_config(config_path);
    if (seed_override) iclmia::override_seed(config, *seed_override);
  } catch (const iclmia::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  std::string stage = "run";
  try {
    if (cmd_ingest->parsed()) {
      stage = "ingest";
      iclmia::stage_ingest(config, strict);
    } else if (cmd_index->parsed()) {
      stage = "index";
      iclmia::stage_index(config);
    } else if (cmd_attack->parsed()) {
      stage = "attack";
      iclmia::stage_attack(config, jobs);
    } else if (cmd_evaluate->parsed()) {
      stage = "evaluate";
      iclmia::stage_evaluate(config);
    } else if (cmd_report->parsed()) {
      stage = "report";
      iclmia::stage_report(config);
    } else if (cmd_run->parsed()) {
      iclmia::run_campaign(config, jobs, strict);
    }
  } catch (const iclmia::StageFailure& e) {
    write_error_json(config.output_dir, e.stage, e.what());
    std::cerr << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    write_error_json(config.output_dir, stage, e.what());
    std::cerr << stage << " failed: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
