#include "iclmia/campaign.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "iclmia/http_lm.hpp"
#include "iclmia/retrieval.hpp"

namespace iclmia {

namespace {

using nlohmann::json;

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

std::string fraction_slug(double p) { return format_double(p); }

const std::vector<std::string>& attack_names() {
  static const std::vector<std::string> names = {"reference", "prediction_only", "logit",
                                                 "repeat", "brainwash"};
  return names;
}

AttackSpec parse_attack(const json& j) {
  AttackSpec spec;
  spec.name = j.at("name").get<std::string>();
  bool known = false;
  for (const auto& n : attack_names()) known = known || n == spec.name;
  if (!known) throw ConfigError("unknown attack '" + spec.name + "'");
  if (j.contains("penalty")) {
    std::string p = j["penalty"].get<std::string>();
    if (p == "inverse") {
      spec.penalty = PenaltyKind::inverse;
    } else if (p == "inverse_log") {
      spec.penalty = PenaltyKind::inverse_log;
    } else {
      throw ConfigError("unknown penalty '" + p + "'");
    }
  }
  if (j.contains("regressor_k")) spec.regressor_k = j["regressor_k"].get<std::size_t>();
  if (spec.regressor_k < 1) throw ConfigError("regressor_k must be >= 1");
  if (j.contains("max_tries")) spec.brainwash.max_tries = j["max_tries"].get<std::size_t>();
  if (j.contains("dummy_answer")) spec.brainwash.dummy_answer = j["dummy_answer"].get<std::string>();
  if (spec.brainwash.max_tries < 1) throw ConfigError("max_tries must be >= 1");
  return spec;
}

// Canonical JSON rendering of the config; its hash identifies a campaign in
// the manifest.
json config_json(const CampaignConfig& c) {
  json j;
  j["dataset"] = c.dataset_path.string();
  j["output_dir"] = c.output_dir.string();
  j["seed"] = c.seed;
  j["query_size"] = c.query_size;
  j["max_words"] = c.max_words;
  j["k"] = c.k;
  j["answer_token_budget"] = c.answer_token_budget;
  j["template"] = c.template_preset;
  j["use_paraphrased"] = c.use_paraphrased;
  switch (c.provider.kind) {
    case ProviderKind::word_hash:
      j["provider"] = {{"kind", "word_hash"}, {"dimension", c.provider.dimension}};
      break;
    case ProviderKind::hash:
      j["provider"] = {{"kind", "hash"}, {"dimension", c.provider.dimension}};
      break;
    case ProviderKind::store:
      j["provider"] = {{"kind", "store"}, {"path", c.provider.store_path.string()}};
      break;
  }
  if (c.backend.kind == BackendKind::oracle) {
    json o = {{"kind", "oracle"},
              {"member_hit_prob", c.backend.oracle.member_hit_prob},
              {"nonmember_hit_prob", c.backend.oracle.nonmember_hit_prob},
              {"info_position", c.backend.oracle.info_position},
              {"refusal_text", c.backend.oracle.refusal_text}};
    if (c.backend.oracle.brainwash_break_iteration)
      o["brainwash_break_iteration"] = *c.backend.oracle.brainwash_break_iteration;
    j["backend"] = o;
  } else {
    // auth token deliberately excluded from the hashed canonical form
    j["backend"] = {{"kind", "http"},
                    {"base_url", c.backend.http_base_url},
                    {"path", c.backend.http_path}};
  }
  json attacks = json::array();
  for (const auto& a : c.attacks) {
    json ja = {{"name", a.name}};
    if (a.name == "prediction_only")
      ja["penalty"] = a.penalty == PenaltyKind::inverse ? "inverse" : "inverse_log";
    if (a.name == "reference") ja["regressor_k"] = a.regressor_k;
    if (a.name == "brainwash") {
      ja["max_tries"] = a.brainwash.max_tries;
      ja["dummy_answer"] = a.brainwash.dummy_answer;
    }
    attacks.push_back(ja);
  }
  j["attacks"] = attacks;
  j["fractions"] = c.fractions;
  if (c.defense) j["defense"] = {{"m", c.defense->m}, {"c", c.defense->c}};
  j["eval"] = {{"estimators", c.eval.estimators},
               {"max_depth", c.eval.max_depth},
               {"folds", c.eval.folds},
               {"seed", c.eval.seed}};
  return j;
}

std::shared_ptr<EmbeddingProvider> make_provider(const CampaignConfig& config) {
  switch (config.provider.kind) {
    case ProviderKind::word_hash:
      return std::make_shared<WordHashEmbedder>(config.provider.dimension);
    case ProviderKind::hash:
      return std::make_shared<HashEmbedder>(config.provider.dimension);
    case ProviderKind::store:
      return load_store(config.provider.store_path);
  }
  throw ConfigError("unknown provider kind");
}

std::shared_ptr<LmBackend> make_backend(const CampaignConfig& config, const CorpusSet& corpus) {
  if (config.backend.kind == BackendKind::oracle) {
    OracleLmConfig oracle = config.backend.oracle;
    oracle.seed = config.seed;
    oracle.prompt_template = PromptTemplate::preset(config.template_preset);
    return std::make_shared<OracleLm>(oracle, corpus);
  }
  HttpEndpointConfig http;
  http.base_url = config.backend.http_base_url;
  http.path = config.backend.http_path;
  http.auth_token = config.backend.http_auth_token;
  return std::make_shared<HttpLm>(http);
}

struct SplitArtifacts {
  CorpusSet ingested;
  CorpusSet demonstrations;
  CorpusSet queries;
};

void require_artifact(const std::filesystem::path& path, const std::string& name) {
  if (!std::filesystem::exists(path)) throw MissingArtifact(name + " (" + path.string() + ")");
}

SplitArtifacts load_split(const CampaignConfig& config) {
  auto ingested_path = config.output_dir / "ingested.jsonl";
  auto split_path = config.output_dir / "split.json";
  require_artifact(ingested_path, "ingest output");
  require_artifact(split_path, "index output");

  SplitArtifacts out;
  out.ingested = load_jsonl(ingested_path);
  json split_doc = read_json_file(split_path);

  std::unordered_map<std::string, const DqaRecord*> by_id;
  for (const auto& rec : out.ingested.records) by_id[rec.id] = &rec;
  auto take = [&](const char* key, CorpusSet& dst, CorpusRole role) {
    dst.role = role;
    for (const auto& id : split_doc.at(key)) {
      auto it = by_id.find(id.get<std::string>());
      if (it == by_id.end())
        throw Error("split.json references unknown record '" + id.get<std::string>() + "'");
      dst.records.push_back(*it->second);
    }
  };
  take("demonstrations", out.demonstrations, CorpusRole::demonstration);
  take("queries", out.queries, CorpusRole::query);
  return out;
}

std::string scores_name(const std::string& attack, double p) {
  return "scores_" + attack + "_p" + fraction_slug(p) + ".csv";
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

struct ScoreFile {
  std::string attack;
  double p = 0.0;
  AttackDataset dataset;
};

ScoreFile read_scores(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifact("attack scores (" + path.string() + ")");
  std::string line;
  if (!std::getline(in, line) || line != "record_id,arm,attack,p,score")
    throw Error(path.string() + ": unexpected header");
  ScoreFile out;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 5) throw Error(path.string() + ": malformed row '" + line + "'");
    AttackRow row;
    row.record_id = fields[0];
    row.arm = fields[1] == "member_index" ? Arm::member_index : Arm::nonmember_index;
    row.label = row.arm == Arm::member_index ? 1 : 0;
    row.score = std::stod(fields[4]);
    if (first) {
      out.attack = fields[2];
      out.p = std::stod(fields[3]);
      first = false;
    }
    out.dataset.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", value);
  return buf;
}

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
  json doc = read_json_file(path);
  CampaignConfig config;
  try {
    config.dataset_path = doc.at("dataset").get<std::string>();
    config.output_dir = doc.at("output_dir").get<std::string>();
    config.seed = doc.value("seed", std::uint64_t{0});
    config.query_size = doc.at("query_size").get<std::size_t>();
    config.max_words = doc.value("max_words", std::size_t{500});
    config.k = doc.value("k", std::size_t{1});
    config.answer_token_budget = doc.value("answer_token_budget", std::size_t{25});
    config.template_preset = doc.value("template", std::string{"compact"});
    config.use_paraphrased = doc.value("use_paraphrased", false);

    if (doc.contains("provider")) {
      const json& p = doc["provider"];
      std::string kind = p.value("kind", std::string{"word_hash"});
      if (kind == "word_hash") {
        config.provider.kind = ProviderKind::word_hash;
      } else if (kind == "hash") {
        config.provider.kind = ProviderKind::hash;
      } else if (kind == "store") {
        config.provider.kind = ProviderKind::store;
        config.provider.store_path = p.at("path").get<std::string>();
      } else {
        throw ConfigError("unknown provider kind '" + kind + "'");
      }
      if (p.contains("dimension")) config.provider.dimension = p["dimension"].get<std::size_t>();
    }

    if (doc.contains("backend")) {
      const json& b = doc["backend"];
      std::string kind = b.value("kind", std::string{"oracle"});
      if (kind == "oracle") {
        config.backend.kind = BackendKind::oracle;
        OracleLmConfig& o = config.backend.oracle;
        o.member_hit_prob = b.value("member_hit_prob", o.member_hit_prob);
        o.nonmember_hit_prob = b.value("nonmember_hit_prob", o.nonmember_hit_prob);
        o.info_position = b.value("info_position", o.info_position);
        o.refusal_text = b.value("refusal_text", o.refusal_text);
        if (b.contains("brainwash_break_iteration"))
          o.brainwash_break_iteration = b["brainwash_break_iteration"].get<std::size_t>();
      } else if (kind == "http") {
        config.backend.kind = BackendKind::http;
        config.backend.http_base_url = b.at("base_url").get<std::string>();
        config.backend.http_path = b.value("path", config.backend.http_path);
        config.backend.http_auth_token = b.value("auth_token", std::string{});
      } else {
        throw ConfigError("unknown backend kind '" + kind + "'");
      }
    }

    if (!doc.contains("attacks") || !doc["attacks"].is_array() || doc["attacks"].empty())
      throw ConfigError("at least one attack is required");
    for (const auto& a : doc["attacks"]) config.attacks.push_back(parse_attack(a));

    if (doc.contains("fractions")) config.fractions = doc["fractions"].get<std::vector<double>>();

    if (doc.contains("defense")) {
      EnsembleDefenseConfig defense;
      defense.m = doc["defense"].value("m", defense.m);
      defense.c = doc["defense"].value("c", defense.c);
      config.defense = defense;
    }

    if (doc.contains("eval")) {
      const json& e = doc["eval"];
      config.eval.estimators = e.value("estimators", config.eval.estimators);
      config.eval.max_depth = e.value("max_depth", config.eval.max_depth);
      config.eval.folds = e.value("folds", config.eval.folds);
    }
    config.eval.seed = config.seed;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }

  if (const char* token = std::getenv("ICLMIA_AUTH_TOKEN"); token && *token)
    config.backend.http_auth_token = token;

  if (!std::filesystem::exists(config.dataset_path))
    throw ConfigError("dataset does not exist: " + config.dataset_path.string());
  if (config.provider.kind == ProviderKind::store &&
      !std::filesystem::exists(config.provider.store_path))
    throw ConfigError("embedding store does not exist: " + config.provider.store_path.string());
  if (config.query_size < 1) throw ConfigError("query_size must be >= 1");
  if (config.k < 1) throw ConfigError("k must be >= 1");
  if (config.provider.kind != ProviderKind::store && config.provider.dimension < 1)
    throw ConfigError("provider dimension must be >= 1");
  if (config.fractions.empty()) throw ConfigError("fractions must be non-empty");
  for (double p : config.fractions) {
    if (!(p > 0.0) || p > 1.0)
      throw ConfigError("fraction " + format_double(p) + " outside (0, 1]");
  }
  if (config.backend.kind == BackendKind::oracle) {
    const OracleLmConfig& o = config.backend.oracle;
    if (!(o.member_hit_prob > 0.0) || o.member_hit_prob > 1.0 ||
        !(o.nonmember_hit_prob > 0.0) || o.nonmember_hit_prob > 1.0)
      throw ConfigError("oracle hit probabilities must lie in (0, 1]");
    if (o.info_position < 0.0 || o.info_position > 1.0)
      throw ConfigError("info_position must lie in [0, 1]");
  }
  if (config.defense && config.defense->m < 2) throw ConfigError("defense m must be >= 2");
  if (config.defense && config.defense->c < 1) throw ConfigError("defense c must be >= 1");
  if (config.eval.folds < 2) throw ConfigError("eval folds must be >= 2");
  if (config.eval.estimators < 1) throw ConfigError("eval estimators must be >= 1");
  try {
    PromptTemplate::preset(config.template_preset);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return config;
}

void override_seed(CampaignConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.eval.seed = seed;
}

void stage_ingest(const CampaignConfig& config, bool strict) {
  std::filesystem::create_directories(config.output_dir);
  CorpusSet corpus = load_jsonl(config.dataset_path, strict);
  corpus = dedup_one_qa_per_text(corpus, config.seed);
  corpus = filter_by_length(corpus, config.max_words);
  if (corpus.size() < config.query_size)
    throw Error("only " + std::to_string(corpus.size()) + " records survive ingest, need " +
                std::to_string(config.query_size) + " queries");

  std::string out;
  for (const auto& rec : corpus.records) {
    json j = {{"id", rec.id}, {"text", rec.text}, {"question", rec.question},
              {"answer", rec.answer}};
    if (rec.paraphrased_text) j["paraphrased_text"] = *rec.paraphrased_text;
    out += j.dump();
    out += '\n';
  }
  write_text_file(config.output_dir / "ingested.jsonl", out);
}

void stage_index(const CampaignConfig& config) {
  auto ingested_path = config.output_dir / "ingested.jsonl";
  require_artifact(ingested_path, "ingest output");
  CorpusSet corpus = load_jsonl(ingested_path);

  SplitSpec spec{config.query_size, config.seed, config.max_words};
  CorpusSplit parts = split(corpus, spec);

  json split_doc;
  split_doc["demonstrations"] = json::array();
  split_doc["queries"] = json::array();
  for (const auto& rec : parts.demonstrations.records)
    split_doc["demonstrations"].push_back(rec.id);
  for (const auto& rec : parts.queries.records) split_doc["queries"].push_back(rec.id);
  write_text_file(config.output_dir / "split.json", split_doc.dump(2) + "\n");

  auto provider = make_provider(config);
  std::vector<std::pair<std::uint64_t, EmbeddingVector>> entries;
  for (const auto& rec : corpus.records) {
    entries.emplace_back(fnv1a64(rec.text), provider->embed(rec.text));
  }
  write_store(config.output_dir / "embeddings.jsonl", provider->dimension(), entries);
}

void stage_attack(const CampaignConfig& config, std::size_t jobs) {
  require_artifact(config.output_dir / "embeddings.jsonl", "index output");
  SplitArtifacts parts = load_split(config);

  auto provider = make_provider(config);
  auto backend = make_backend(config, parts.ingested);

  PromptTemplate tmpl = PromptTemplate::preset(config.template_preset);
  IclService member_service(build_member_index(parts.demonstrations, parts.queries, *provider),
                            parts.ingested.records, tmpl, provider, backend, config.k,
                            config.answer_token_budget, config.defense);
  IclService nonmember_service(
      build_nonmember_index(parts.demonstrations, parts.queries, *provider),
      parts.ingested.records, tmpl, provider, backend, config.k, config.answer_token_budget,
      config.defense);
  // Attacker-side reference: indexes the query records only, no defense.
  IclService reference_service(build_index(parts.queries, *provider), parts.queries.records, tmpl,
                               provider, backend, config.k, config.answer_token_budget);

  for (const auto& spec : config.attacks) {
    for (double p : config.fractions) {
      AttackRunner runner = [&, p](const IclService& service, const DqaRecord& rec) -> double {
        const std::string& text = attack_text(rec, config.use_paraphrased);
        if (spec.name == "reference") {
          PrefixPlan plan(word_count(text), p, /*include_full=*/true);
          return reference_attack(service, reference_service, rec, plan, spec.regressor_k,
                                  config.use_paraphrased)
              .score;
        }
        if (spec.name == "prediction_only") {
          PrefixPlan plan(word_count(text), p, /*include_full=*/false);
          return prediction_only_attack(service, rec, plan, PenaltyFn{spec.penalty},
                                        config.use_paraphrased)
              .score;
        }
        if (spec.name == "logit") return logit_attack(service, rec, config.use_paraphrased).score;
        if (spec.name == "repeat")
          return repeat_attack(service, rec, p, config.use_paraphrased).score;
        if (spec.name == "brainwash")
          return brainwash_attack(service, rec, spec.brainwash, config.use_paraphrased).score;
        throw Error("unknown attack '" + spec.name + "'");
      };

      AttackDataset dataset = build_attack_dataset(runner, parts.queries.records, member_service,
                                                   nonmember_service, jobs);
      std::string out = "record_id,arm,attack,p,score\n";
      for (const auto& row : dataset.rows) {
        out += csv_escape(row.record_id) + ',' + arm_name(row.arm) + ',' + spec.name + ',' +
               format_double(p) + ',' + format_double(row.score) + '\n';
      }
      write_text_file(config.output_dir / scores_name(spec.name, p), out);
    }
  }
}

void stage_evaluate(const CampaignConfig& config) {
  for (const auto& spec : config.attacks) {
    for (double p : config.fractions) {
      auto scores_path = config.output_dir / scores_name(spec.name, p);
      require_artifact(scores_path, "attack scores");
      ScoreFile scores = read_scores(scores_path);
      EvalReport report = evaluate(scores.dataset, config.eval);

      std::string slug = spec.name + "_p" + fraction_slug(p);

      std::string csv = "record_id,arm,attack,p,score,probability,label\n";
      for (std::size_t i = 0; i < scores.dataset.rows.size(); ++i) {
        const AttackRow& row = scores.dataset.rows[i];
        csv += csv_escape(row.record_id) + ',' + arm_name(row.arm) + ',' + spec.name + ',' +
               format_double(p) + ',' + format_double(row.score) + ',' +
               format_double(report.pooled[i].probability) + ',' + std::to_string(row.label) +
               '\n';
      }
      write_text_file(config.output_dir / ("report_" + slug + ".csv"), csv);

      json summary = {{"attack", spec.name},
                      {"p", p},
                      {"auc", report.auc},
                      {"raw_auc", report.raw_auc},
                      {"tpr_at_1", report.tpr_at_fpr.at(0.01)},
                      {"tpr_at_5", report.tpr_at_fpr.at(0.05)},
                      {"tpr_at_10", report.tpr_at_fpr.at(0.10)},
                      {"n_rows", scores.dataset.rows.size()},
                      {"seed", config.seed}};
      write_text_file(config.output_dir / ("summary_" + slug + ".json"), summary.dump(2) + "\n");

      std::string tsv;
      for (const auto& point : report.roc_points) {
        tsv += format_double(point.fpr) + '\t' + format_double(point.tpr) + '\n';
      }
      write_text_file(config.output_dir / ("roc_" + slug + ".tsv"), tsv);
    }
  }
}

void stage_report(const CampaignConfig& config) {
  std::string out = "attack\tp\tauc\traw_auc\ttpr_at_1\ttpr_at_5\ttpr_at_10\tn_rows\n";
  for (const auto& spec : config.attacks) {
    for (double p : config.fractions) {
      auto path = config.output_dir / ("summary_" + spec.name + "_p" + fraction_slug(p) + ".json");
      require_artifact(path, "evaluation summary");
      json summary = read_json_file(path);
      out += summary.at("attack").get<std::string>() + '\t' +
             format_double(summary.at("p").get<double>()) + '\t' +
             format_double(summary.at("auc").get<double>()) + '\t' +
             format_double(summary.at("raw_auc").get<double>()) + '\t' +
             format_double(summary.at("tpr_at_1").get<double>()) + '\t' +
             format_double(summary.at("tpr_at_5").get<double>()) + '\t' +
             format_double(summary.at("tpr_at_10").get<double>()) + '\t' +
             std::to_string(summary.at("n_rows").get<std::size_t>()) + '\n';
    }
  }
  write_text_file(config.output_dir / "report.tsv", out);
}

void run_campaign(const CampaignConfig& config, std::size_t jobs, bool strict) {
  std::filesystem::create_directories(config.output_dir);
  json manifest;
  manifest["config"] = config_json(config);
  char hash_hex[17];
  std::snprintf(hash_hex, sizeof(hash_hex), "%016llx",
                static_cast<unsigned long long>(fnv1a64(manifest["config"].dump())));
  manifest["config_hash"] = hash_hex;
  manifest["seed"] = config.seed;
  manifest["stages"] = json::array();

  auto timed = [&](const char* name, auto&& fn) {
    auto start = std::chrono::steady_clock::now();
    try {
      fn();
    } catch (const std::exception& e) {
      throw StageFailure(name, e.what());
    }
    auto wall = std::chrono::duration_cast<std::chrono::milliseconds>(
                    std::chrono::steady_clock::now() - start)
                    .count();
    manifest["stages"].push_back({{"name", name}, {"wall_ms", wall}});
  };

  timed("ingest", [&] { stage_ingest(config, strict); });
  timed("index", [&] { stage_index(config); });
  timed("attack", [&] { stage_attack(config, jobs); });
  timed("evaluate", [&] { stage_evaluate(config); });
  timed("report", [&] { stage_report(config); });

  write_text_file(config.output_dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace iclmia
