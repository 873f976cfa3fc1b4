#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

#include "cmf/checkpoint.hpp"
#include "cmf/map_engine.hpp"
#include "cmf/predict.hpp"
#include "cmf/schema.hpp"
#include "cmf/synth.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kVersion = "cmfcli 1.0.0";

// Exit-code policy: 0 success, 1 numerical/training failure, 2 usage or
// config error. UsageError marks the latter.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string resolve(const fs::path& config_path, const std::string& p) {
  fs::path q(p);
  if (q.is_absolute()) return q.string();
  return (config_path.parent_path() / q).string();
}

json load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("bad config JSON in " + path + ": " + e.what());
  }
}

uint64_t hash_bytes(const std::string& s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void write_trace_csv(const fs::path& path, const char* index_name,
                     const std::vector<double>& values) {
  std::ofstream out(path);
  out << index_name << ",objective\n";
  char buf[64];
  for (size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g\n", i + 1, values[i]);
    out << buf;
  }
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

// Holdout block shared by fit and predict: removes the named relation's test
// entries from the schema so both commands agree on the split.
struct HoldoutPlan {
  bool active = false;
  int relation_index = -1;
  cmf::ObservedMatrix test;  // entries withheld from training
};

HoldoutPlan apply_holdout(cmf::RelationalSchema& schema, const json& cfg) {
  HoldoutPlan plan;
  if (!cfg.contains("holdout")) return plan;
  const auto& h = cfg.at("holdout");
  const auto rel = h.at("relation").get<std::string>();
  const int idx = schema.relation_index(rel);
  if (idx < 0) throw UsageError("holdout names unknown relation: " + rel);
  const double frac = h.at("test_fraction").get<double>();
  if (!(frac > 0.0 && frac < 1.0))
    throw UsageError("holdout test_fraction must be in (0,1)");
  const auto seed = h.value("seed", 0ULL);
  auto [train, test] = cmf::split_holdout(schema.matrices[size_t(idx)], frac, seed);
  schema.matrices[size_t(idx)] = std::move(train);
  plan.active = true;
  plan.relation_index = idx;
  plan.test = std::move(test);
  return plan;
}

void apply_standardize(cmf::RelationalSchema& schema, const json& cfg) {
  if (!cfg.contains("standardize")) return;
  for (const auto& rel : cfg.at("standardize")) {
    const int idx = schema.relation_index(rel.get<std::string>());
    if (idx < 0)
      throw UsageError("standardize names unknown relation: " + rel.get<std::string>());
    if (schema.relations[size_t(idx)].family != cmf::Family::Gaussian)
      throw UsageError("standardize applies to Gaussian relations only");
    schema.matrices[size_t(idx)] =
        cmf::standardize_gaussian(schema.matrices[size_t(idx)]);
  }
}

cmf::RelationalSchema load_and_check(const std::string& path) {
  cmf::RelationalSchema schema = cmf::load_schema(path);
  auto report = cmf::validate_schema(schema);
  if (!report.ok()) {
    std::string msg = "schema validation failed: " + report.errors.front();
    if (report.errors.size() > 1)
      msg += " (+" + std::to_string(report.errors.size() - 1) + " more)";
    throw UsageError(msg);
  }
  return schema;
}

json manifest_base(const std::string& command, const json& cfg, uint64_t seed,
                   int threads) {
  json m;
  m["version"] = kVersion;
  m["command"] = command;
  m["seed"] = seed;
  m["threads"] = threads;
  m["config_hash"] = hex64(hash_bytes(cfg.dump()));
  m["config"] = cfg;
  return m;
}

int cmd_synth(const std::string& fixture, const std::string& config_path,
              uint64_t seed, const std::string& out, double y_density,
              double noise) {
  cmf::SynthOutput gen;
  if (!fixture.empty()) {
    if (fixture != "three-type")
      throw UsageError("unknown fixture: " + fixture + " (expected three-type)");
    if (y_density <= 0.0) throw UsageError("density must be positive");
    gen = cmf::three_type_fixture(seed, y_density, noise);
  } else if (!config_path.empty()) {
    const json cfg = load_config(config_path);
    cmf::SynthSpec spec;
    for (const auto& et : cfg.at("entity_types"))
      spec.entity_types.emplace_back(et.at("name").get<std::string>(),
                                     et.at("count").get<long>());
    spec.k_true = cfg.value("k_true", 5);
    spec.noise_scale = cfg.value("noise_scale", 1.0);
    spec.seed = seed;
    for (const auto& r : cfg.at("relations")) {
      cmf::SynthRelationSpec rs;
      rs.id = r.at("id").get<std::string>();
      rs.row_type = r.at("row_type").get<int>();
      rs.col_type = r.at("col_type").get<int>();
      rs.family = cmf::family_from_string(r.at("family").get<std::string>());
      rs.density = r.value("density", 1.0);
      if (rs.density <= 0.0) throw UsageError("density must be positive");
      spec.relations.push_back(std::move(rs));
    }
    gen = cmf::generate(spec);
  } else {
    throw UsageError("synth needs --fixture or --config");
  }

  fs::create_directories(out);
  cmf::save_schema(gen.schema, (fs::path(out) / "schema.json").string(), out);
  const cmf::Dataset ds = cmf::compile(gen.schema);
  cmf::save_checkpoint((fs::path(out) / "truth").string(), ds, gen.truth, seed);

  json m;
  m["version"] = kVersion;
  m["command"] = "synth";
  m["seed"] = seed;
  m["fixture"] = fixture;
  m["schema"] = "schema.json";
  m["truth"] = "truth";
  write_json(fs::path(out) / "manifest.json", m);
  return 0;
}

int cmd_fit(const std::string& config_path, uint64_t seed, bool seed_given,
            int threads, const std::string& out) {
  json cfg = load_config(config_path);
  const fs::path cfg_path(config_path);
  if (seed_given) cfg["seed"] = seed;
  const auto run_seed = cfg.value("seed", 0ULL);

  cmf::RelationalSchema schema =
      load_and_check(resolve(cfg_path, cfg.at("schema").get<std::string>()));
  apply_holdout(schema, cfg);
  apply_standardize(schema, cfg);
  const cmf::Dataset ds = cmf::compile(schema);

  const auto method = cfg.at("method").get<std::string>();
  if (method != "cmf" && method != "hcmf" && method != "hbcmf")
    throw UsageError("method must be cmf, hcmf, or hbcmf");

  json manifest = manifest_base("fit", cfg, run_seed, threads);
  manifest["method"] = method;
  manifest["schema_hash"] = hex64(cmf::schema_fingerprint(ds));
  fs::create_directories(out);

  if (method == "hbcmf") {
    cmf::ChainConfig cc;
    cc.k = cfg.value("k", cc.k);
    cc.seed = run_seed;
    cc.threads = threads;
    if (cfg.contains("chain")) {
      const auto& ch = cfg.at("chain");
      cc.epochs = ch.value("epochs", cc.epochs);
      cc.burn_in = ch.value("burn_in", cc.burn_in);
      cc.thin = ch.value("thin", cc.thin);
      cc.target_samples = ch.value("target_samples", cc.target_samples);
    }
    const auto hyper = cmf::default_hyperpriors(ds, cc.k);
    const cmf::PosteriorChain chain = cmf::run_chain(ds, cc, hyper);
    cmf::save_chain((fs::path(out) / "chain").string(), ds, chain, run_seed);
    write_trace_csv(fs::path(out) / "trace.csv", "epoch", chain.energy);

    long acc = 0, prop = 0;
    for (const auto& st : chain.acceptance)
      for (size_t e = 0; e < st.accepted.size(); ++e) {
        acc += st.accepted[e];
        prop += st.proposed[e];
      }
    manifest["epochs"] = cc.epochs;
    manifest["retained_samples"] = chain.samples.size();
    manifest["acceptance_rate"] = prop ? double(acc) / double(prop) : 0.0;
    manifest["checkpoint"] = "chain";
  } else {
    cmf::MapConfig mc;
    mc.k = cfg.value("k", mc.k);
    mc.hierarchical = (method == "hcmf");
    mc.seed = run_seed;
    mc.threads = threads;
    if (cfg.contains("map")) {
      const auto& mp = cfg.at("map");
      mc.max_sweeps = mp.value("max_sweeps", mc.max_sweeps);
      mc.rel_tol = mp.value("rel_tol", mc.rel_tol);
      mc.max_newton_halvings = mp.value("max_newton_halvings", mc.max_newton_halvings);
    }

    std::vector<cmf::FactorPrior> fixed;
    const std::vector<cmf::FactorPrior>* fixed_ptr = nullptr;
    if (method == "cmf" && cfg.contains("psychic_reference")) {
      const auto ref_dir =
          resolve(cfg_path, cfg.at("psychic_reference").get<std::string>());
      if (!fs::exists(fs::path(ref_dir) / "metadata.json"))
        throw UsageError("psychic reference checkpoint not found: " + ref_dir);
      const cmf::ModelState ref = cmf::load_checkpoint(ref_dir);
      if (ref.k != mc.k)
        throw UsageError("psychic reference has k=" + std::to_string(ref.k) +
                         ", fit wants k=" + std::to_string(mc.k));
      fixed = cmf::psychic_priors(ref);
      fixed_ptr = &fixed;
      json diag = json::array();
      for (const auto& p : fixed) {
        json d = json::array();
        for (Eigen::Index i = 0; i < p.sigma.rows(); ++i) d.push_back(p.sigma(i, i));
        diag.push_back(std::move(d));
      }
      manifest["psychic_sigma_diagonals"] = std::move(diag);
    }

    const cmf::FitResult fit = cmf::fit_map(ds, mc, nullptr, fixed_ptr);
    cmf::save_checkpoint((fs::path(out) / "checkpoint").string(), ds, fit.state,
                         run_seed);
    write_trace_csv(fs::path(out) / "trace.csv", "sweep", fit.trace);
    manifest["converged"] = fit.converged;
    manifest["sweeps"] = fit.trace.size();
    manifest["final_objective"] = fit.trace.empty() ? 0.0 : fit.trace.back();
    manifest["checkpoint"] = "checkpoint";
  }

  write_json(fs::path(out) / "manifest.json", manifest);
  return 0;
}

void write_predictions_csv(const fs::path& path, const std::string& relation,
                           const std::vector<std::pair<long, long>>& cells,
                           const std::vector<double>& predicted,
                           const std::vector<double>& actual, bool append) {
  std::ofstream outf(path, append ? std::ios::app : std::ios::out);
  if (!append) outf << "relation_id,row,col,predicted,actual,squared_error\n";
  char buf[160];
  for (size_t i = 0; i < cells.size(); ++i) {
    const double err = predicted[i] - actual[i];
    std::snprintf(buf, sizeof buf, "%s,%ld,%ld,%.17g,%.17g,%.17g\n",
                  relation.c_str(), cells[i].first + 1, cells[i].second + 1,
                  predicted[i], actual[i], err * err);
    outf << buf;
  }
  if (!outf) throw std::runtime_error("cannot write " + path.string());
}

int cmd_predict(const std::string& config_path, uint64_t seed, bool seed_given,
                int threads, const std::string& out) {
  json cfg = load_config(config_path);
  const fs::path cfg_path(config_path);
  const auto run_seed = seed_given ? seed : cfg.value("seed", 0ULL);

  cmf::RelationalSchema schema =
      load_and_check(resolve(cfg_path, cfg.at("schema").get<std::string>()));
  // The schema carries the full data; training removed the holdout entries, so
  // predict re-derives the identical split from the recorded seed.
  HoldoutPlan plan = apply_holdout(schema, cfg);
  apply_standardize(schema, cfg);
  cmf::Dataset ds = cmf::compile(schema);

  const auto ckpt_dir = resolve(cfg_path, cfg.at("checkpoint").get<std::string>());
  const bool is_chain = fs::exists(fs::path(ckpt_dir) / "chain.json");
  if (!is_chain && !fs::exists(fs::path(ckpt_dir) / "metadata.json"))
    throw UsageError("checkpoint not found: " + ckpt_dir);

  cmf::ModelState map_state;
  cmf::PosteriorChain chain;
  if (is_chain) {
    chain = cmf::load_chain(ckpt_dir);
    if (chain.samples.empty()) throw UsageError("chain has no samples: " + ckpt_dir);
  } else {
    map_state = cmf::load_checkpoint(ckpt_dir);
  }

  const auto mode = cfg.value("mode", std::string("holdout"));
  json manifest = manifest_base("predict", cfg, run_seed, threads);
  manifest["checkpoint"] = ckpt_dir;
  manifest["bayes"] = is_chain;
  fs::create_directories(out);
  const fs::path csv_path = fs::path(out) / "predictions.csv";
  json summary = json::array();

  if (mode == "holdout") {
    if (!plan.active) throw UsageError("holdout mode needs a holdout block");
    const auto& rd = ds.rels[size_t(plan.relation_index)];
    const auto& rel_id = ds.specs[size_t(plan.relation_index)].id;

    cmf::PredictionRequest req;
    req.relation_index = plan.relation_index;
    std::vector<double> actual;
    for (size_t i = 0; i < plan.test.size(); ++i) {
      req.targets.emplace_back(plan.test.rows[i], plan.test.cols[i]);
      // Held entries are stored in the schema's (possibly standardized)
      // units; undo that transform so they compare against the predictions,
      // which predict_point reports in original units.
      actual.push_back(plan.test.std_mean + plan.test.std_stddev * plan.test.vals[i]);
    }

    const std::vector<double> predicted =
        is_chain ? cmf::predict_bayes(ds, chain, req)
                 : cmf::predict_point(ds, map_state, req);
    write_predictions_csv(csv_path, rel_id, req.targets, predicted, actual, false);

    json s;
    s["relation"] = rel_id;
    s["count"] = req.targets.size();
    s["mse"] = cmf::evaluate_mse(predicted, actual);
    s["standardized_mse"] = cmf::evaluate_mse(predicted, actual, rd.std_stddev);
    summary.push_back(std::move(s));
  } else if (mode == "foldin") {
    const auto& fi = cfg.at("foldin");
    const auto rel_id = fi.at("relation").get<std::string>();
    const int rel_idx = schema.relation_index(rel_id);
    if (rel_idx < 0) throw UsageError("foldin names unknown relation: " + rel_id);
    const bool as_row = fi.value("as_row", true);

    cmf::FoldinConfig fc;
    fc.samples_per_state = fi.value("samples_per_state", fc.samples_per_state);
    fc.burn_in = fi.value("burn_in", fc.burn_in);
    fc.thin = fi.value("thin", fc.thin);
    fc.observed_fraction = fi.value("observed_fraction", fc.observed_fraction);
    fc.posterior_states_used = fi.value("posterior_states_used", fc.posterior_states_used);
    fc.seed = run_seed;

    const auto& rd = ds.rels[size_t(rel_idx)];
    const auto& m = schema.matrices[size_t(rel_idx)];
    bool first = true;
    double se_sum = 0.0;
    long se_n = 0;
    for (const auto& ej : fi.at("entities")) {
      const long entity = ej.get<long>() - 1;  // config uses 1-based ids
      cmf::NewEntityObs obs;
      obs.relation_index = rel_idx;
      obs.as_row = as_row;
      for (size_t i = 0; i < m.size(); ++i) {
        const long own = as_row ? m.rows[i] : m.cols[i];
        if (own != entity) continue;
        obs.counterpart.push_back(as_row ? m.cols[i] : m.rows[i]);
        obs.value.push_back(m.vals[i]);
      }
      if (obs.counterpart.empty())
        throw UsageError("foldin entity " + std::to_string(entity + 1) +
                         " has no observations in " + rel_id);

      const cmf::FoldinResult r =
          is_chain ? cmf::fold_in_bayes(ds, chain, obs, fc, uint32_t(entity))
                   : cmf::fold_in_map(ds, map_state, obs, fc, uint32_t(entity));

      std::vector<std::pair<long, long>> cells;
      std::vector<double> actual_raw(r.actual);
      for (size_t i = 0; i < r.eval_counterpart.size(); ++i) {
        cells.emplace_back(as_row ? entity : r.eval_counterpart[i],
                           as_row ? r.eval_counterpart[i] : entity);
        if (rd.family == cmf::Family::Gaussian)
          actual_raw[i] = rd.std_mean + rd.std_stddev * r.actual[i];
      }
      write_predictions_csv(csv_path, rel_id, cells, r.predicted, actual_raw, !first);
      first = false;
      for (size_t i = 0; i < r.predicted.size(); ++i) {
        const double d = (r.predicted[i] - actual_raw[i]) / rd.std_stddev;
        se_sum += d * d;
        ++se_n;
      }
    }
    json s;
    s["relation"] = rel_id;
    s["count"] = se_n;
    s["standardized_mse"] = se_n ? se_sum / double(se_n) : 0.0;
    summary.push_back(std::move(s));
    manifest["row_samples_per_entity"] =
        fc.samples_per_state * fc.posterior_states_used;
  } else {
    throw UsageError("mode must be holdout or foldin");
  }

  json sj;
  sj["relations"] = summary;
  write_json(fs::path(out) / "summary.json", sj);
  write_json(fs::path(out) / "manifest.json", manifest);
  return 0;
}

int cmd_eval(const std::string& csv_path, const std::string& out) {
  std::ifstream in(csv_path);
  if (!in) throw UsageError("cannot open predictions: " + csv_path);
  std::string line;
  if (!std::getline(in, line))
    throw UsageError("empty predictions file: " + csv_path);

  // Accumulate squared error per relation id (column 1 of 6).
  std::vector<std::string> ids;
  std::vector<double> sums;
  std::vector<long> counts;
  long lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c5 = line.rfind(',');
    if (c1 == std::string::npos || c5 == c1)
      throw UsageError("bad CSV at line " + std::to_string(lineno));
    const std::string rel = line.substr(0, c1);
    const double se = std::strtod(line.c_str() + c5 + 1, nullptr);
    size_t i = 0;
    while (i < ids.size() && ids[i] != rel) ++i;
    if (i == ids.size()) {
      ids.push_back(rel);
      sums.push_back(0.0);
      counts.push_back(0);
    }
    sums[i] += se;
    ++counts[i];
  }

  json relations = json::array();
  for (size_t i = 0; i < ids.size(); ++i) {
    json s;
    s["relation"] = ids[i];
    s["count"] = counts[i];
    s["mse"] = counts[i] ? sums[i] / double(counts[i]) : 0.0;
    relations.push_back(s);
    std::printf("%s: n=%ld mse=%.6g\n", ids[i].c_str(), counts[i],
                counts[i] ? sums[i] / double(counts[i]) : 0.0);
  }
  if (!out.empty()) {
    json sj;
    sj["relations"] = relations;
    write_json(fs::path(out) / "summary.json", sj);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Collective matrix factorization trainer and predictor"};
  app.require_subcommand(1);

  std::string config_path, out_dir, fixture, predictions_csv;
  uint64_t seed = 0;
  int threads = 1;
  double y_density = 0.3, noise = 2.0;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  synth->add_option("--fixture", fixture, "Named fixture (three-type)");
  synth->add_option("--config", config_path, "Generator spec JSON");
  synth->add_option("--seed", seed, "RNG seed");
  synth->add_option("--out", out_dir, "Output directory")->required();
  synth->add_option("--y-density", y_density, "Fixture Y density");
  synth->add_option("--noise", noise, "Fixture Gaussian noise scale");

  auto* fit = app.add_subcommand("fit", "Train a model");
  fit->add_option("--config", config_path, "Run config JSON")->required();
  auto* fit_seed = fit->add_option("--seed", seed, "Override config seed");
  fit->add_option("--threads", threads, "Worker threads");
  fit->add_option("--out", out_dir, "Output directory")->required();

  auto* predict = app.add_subcommand("predict", "Predict held or new entries");
  predict->add_option("--config", config_path, "Predict config JSON")->required();
  auto* pred_seed = predict->add_option("--seed", seed, "Override config seed");
  predict->add_option("--threads", threads, "Worker threads");
  predict->add_option("--out", out_dir, "Output directory")->required();

  auto* eval = app.add_subcommand("eval", "Summarize a predictions CSV");
  eval->add_option("--predictions", predictions_csv, "predictions.csv path")
      ->required();
  eval->add_option("--out", out_dir, "Optional summary output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed())
      return cmd_synth(fixture, config_path, seed, out_dir, y_density, noise);
    if (fit->parsed())
      return cmd_fit(config_path, seed, !fit_seed->empty(), threads, out_dir);
    if (predict->parsed())
      return cmd_predict(config_path, seed, !pred_seed->empty(), threads, out_dir);
    if (eval->parsed()) return cmd_eval(predictions_csv, out_dir);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
