#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "iclmia/attacks.hpp"
#include "iclmia/eval.hpp"
#include "iclmia/oracle_lm.hpp"

namespace iclmia {

struct ConfigError : Error {
  using Error::Error;
};

struct MissingArtifact : Error {
  explicit MissingArtifact(const std::string& what_artifact)
      : Error("missing artifact: " + what_artifact) {}
};

struct StageFailure : Error {
  StageFailure(std::string stage_name, const std::string& message)
      : Error("stage '" + stage_name + "' failed: " + message), stage(std::move(stage_name)) {}
  std::string stage;
};

enum class ProviderKind { word_hash, hash, store };
enum class BackendKind { oracle, http };

struct ProviderConfig {
  ProviderKind kind = ProviderKind::word_hash;
  std::size_t dimension = 64;
  std::filesystem::path store_path;  // kind == store only
};

struct BackendConfig {
  BackendKind kind = BackendKind::oracle;
  OracleLmConfig oracle;         // kind == oracle
  std::string http_base_url;     // kind == http
  std::string http_path = "/v1/completions";
  std::string http_auth_token;   // overridable via ICLMIA_AUTH_TOKEN
};

struct AttackSpec {
  std::string name;  // reference | prediction_only | logit | repeat | brainwash
  PenaltyKind penalty = PenaltyKind::inverse;  // prediction_only
  std::size_t regressor_k = 5;                 // reference
  BrainwashConfig brainwash;                   // brainwash
};

struct CampaignConfig {
  std::filesystem::path dataset_path;
  std::filesystem::path output_dir;
  std::uint64_t seed = 0;
  std::size_t query_size = 0;
  std::size_t max_words = 500;
  std::size_t k = 1;
  std::size_t answer_token_budget = 25;
  std::string template_preset = "compact";
  bool use_paraphrased = false;
  ProviderConfig provider;
  BackendConfig backend;
  std::vector<AttackSpec> attacks;
  std::vector<double> fractions = {0.05, 0.1, 0.2, 0.3, 0.5, 0.8, 1.0};
  std::optional<EnsembleDefenseConfig> defense;
  Forest1dConfig eval;
};

// Parses + validates a JSON campaign config; throws ConfigError on any
// invalid field, unknown attack name, or missing referenced path.
CampaignConfig load_campaign_config(const std::filesystem::path& path);

// Applies a --seed override uniformly to the campaign, split, oracle, and
// classifier seeds.
void override_seed(CampaignConfig& config, std::uint64_t seed);

// Stage artifacts live under config.output_dir:
//   ingested.jsonl  split.json  embeddings.jsonl
//   scores_<attack>_p<frac>.csv
//   report_<attack>_p<frac>.csv  summary_<attack>_p<frac>.json  roc_<attack>_p<frac>.tsv
//   report.tsv  manifest.json
// Each stage requires the previous stage's files and never rewrites them.
void stage_ingest(const CampaignConfig& config, bool strict);
void stage_index(const CampaignConfig& config);
void stage_attack(const CampaignConfig& config, std::size_t jobs);
void stage_evaluate(const CampaignConfig& config);
void stage_report(const CampaignConfig& config);

// Runs all stages in order and writes manifest.json (config hash, seed,
// per-stage wall time). Oracle-backed reruns with the same config produce
// byte-identical outputs apart from the manifest's timings.
void run_campaign(const CampaignConfig& config, std::size_t jobs, bool strict);

// Deterministic decimal rendering used by every text artifact.
std::string format_double(double value);

}  // namespace iclmia
