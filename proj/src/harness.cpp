#include "netpois/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "netpois/bayesgen.hpp"
#include "netpois/featurize.hpp"
#include "netpois/inject.hpp"

namespace netpois {

std::string_view to_string(Representation r) { return r == Representation::windows ? "windows" : "blocks"; }

Representation parse_representation(std::string_view s) {
  if (s == "windows") return Representation::windows;
  if (s == "blocks") return Representation::blocks;
  throw ConfigError("unknown representation '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- config

std::vector<double> ExperimentConfig::effective_poison_rates() const {
  if (!poison_rates.empty()) return poison_rates;
  if (representation == Representation::windows) return {0.1, 0.25, 0.5, 1.0};
  return {0.5, 1.0, 2.0, 4.0, 5.0, 10.0};
}

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ConfigError("seed list must not be empty");
  for (double p : effective_poison_rates())
    if (!(p >= 0.0 && p <= 100.0)) throw ConfigError("poison rate must lie in [0, 100] percent");
  if (!(percentile > 0.0 && percentile <= 100.0)) throw ConfigError("percentile must lie in (0, 100]");
  if (k == 0) throw ConfigError("k must be at least 1");
  if (!(adversary_fraction > 0.0 && adversary_fraction < 1.0)) throw ConfigError("adversary fraction must lie in (0, 1)");
  if (!(window_seconds > 0.0)) throw ConfigError("window length must be positive");
  if (strategies.empty() || variants.empty()) throw ConfigError("strategies and variants must not be empty");
  if (representation == Representation::blocks) {
    for (auto v : variants)
      if (v != TriggerVariant::full) throw ConfigError("the blocks representation supports the full trigger only");
    for (auto s : strategies)
      if (s == ImportanceStrategy::shap) throw ConfigError("the blocks representation does not support shap");
    if (block_trigger_len == 0 || block_trigger_len > block_len)
      throw ConfigError("block trigger length must lie in [1, block_len]");
  }
  if (threads == 0) throw ConfigError("threads must be at least 1");
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario_path;
  j["train_logs"] = train_logs;
  j["test_logs"] = test_logs;
  j["adversary_fraction"] = adversary_fraction;
  j["window_seconds"] = window_seconds;
  j["representation"] = to_string(representation);
  j["model"] = to_string(model);
  j["gbdt"] = {{"trees", gbdt.n_trees},
               {"max_depth", gbdt.max_depth},
               {"learning_rate", gbdt.learning_rate},
               {"l2", gbdt.l2},
               {"min_child_hessian", gbdt.min_child_hessian},
               {"max_bins", gbdt.max_bins},
               {"row_subsample", gbdt.row_subsample},
               {"class_weighted", gbdt.class_weighted}};
  j["mlp"] = {{"hidden", mlp.hidden},
              {"epochs", mlp.epochs},
              {"batch_size", mlp.batch_size},
              {"learning_rate", mlp.learning_rate},
              {"class_weighted", mlp.class_weighted}};
  j["autoencoder"] = {{"encoder_hidden", autoencoder.encoder_hidden},
                      {"bottleneck", autoencoder.bottleneck},
                      {"epochs", autoencoder.epochs},
                      {"batch_size", autoencoder.batch_size},
                      {"learning_rate", autoencoder.learning_rate}};
  j["block_len"] = block_len;
  nlohmann::json strat = nlohmann::json::array(), vars = nlohmann::json::array();
  for (auto s : strategies) strat.push_back(to_string(s));
  for (auto v : variants) vars.push_back(to_string(v));
  j["strategies"] = strat;
  j["variants"] = vars;
  j["poison_rates"] = effective_poison_rates();
  j["percentile"] = percentile;
  j["k"] = k;
  j["test_points"] = test_points;
  j["max_trigger_length"] = max_trigger_length;
  j["block_trigger_len"] = block_trigger_len;
  j["shap"] = {{"permutations", shap_permutations}, {"points", shap_points}, {"background", shap_background}};
  j["stealth"] = stealth;
  j["detection"] = {{"detector_fraction", detection.detector_fraction},
                    {"trees", detection.trees},
                    {"subsample", detection.subsample},
                    {"pool", detection.pool == EvalPool::all_clean ? "all_clean" : "balanced"}};
  j["seeds"] = seeds;
  j["threads"] = threads;
  return j;
}

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items())
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
      throw ConfigError("unknown key '" + k + "' in " + where);
}

template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    check_keys(j,
               {"scenario", "train_logs", "test_logs", "adversary_fraction", "window_seconds", "representation",
                "model", "gbdt", "mlp", "autoencoder", "block_len", "strategies", "variants", "poison_rates",
                "percentile", "k", "test_points", "max_trigger_length", "block_trigger_len", "shap", "stealth",
                "detection", "seeds", "threads"},
               "experiment config");
    read(j, "scenario", c.scenario_path);
    read(j, "train_logs", c.train_logs);
    read(j, "test_logs", c.test_logs);
    read(j, "adversary_fraction", c.adversary_fraction);
    read(j, "window_seconds", c.window_seconds);
    if (j.contains("representation")) c.representation = parse_representation(j["representation"].get<std::string>());
    if (j.contains("model")) c.model = parse_model_kind(j["model"].get<std::string>());
    if (j.contains("gbdt")) {
      const auto& g = j["gbdt"];
      check_keys(g, {"trees", "max_depth", "learning_rate", "l2", "min_child_hessian", "max_bins", "row_subsample",
                     "class_weighted"}, "gbdt");
      read(g, "trees", c.gbdt.n_trees);
      read(g, "max_depth", c.gbdt.max_depth);
      read(g, "learning_rate", c.gbdt.learning_rate);
      read(g, "l2", c.gbdt.l2);
      read(g, "min_child_hessian", c.gbdt.min_child_hessian);
      read(g, "max_bins", c.gbdt.max_bins);
      read(g, "row_subsample", c.gbdt.row_subsample);
      read(g, "class_weighted", c.gbdt.class_weighted);
    }
    if (j.contains("mlp")) {
      const auto& m = j["mlp"];
      check_keys(m, {"hidden", "epochs", "batch_size", "learning_rate", "class_weighted"}, "mlp");
      read(m, "hidden", c.mlp.hidden);
      read(m, "epochs", c.mlp.epochs);
      read(m, "batch_size", c.mlp.batch_size);
      read(m, "learning_rate", c.mlp.learning_rate);
      read(m, "class_weighted", c.mlp.class_weighted);
    }
    if (j.contains("autoencoder")) {
      const auto& a = j["autoencoder"];
      check_keys(a, {"encoder_hidden", "bottleneck", "epochs", "batch_size", "learning_rate"}, "autoencoder");
      read(a, "encoder_hidden", c.autoencoder.encoder_hidden);
      read(a, "bottleneck", c.autoencoder.bottleneck);
      read(a, "epochs", c.autoencoder.epochs);
      read(a, "batch_size", c.autoencoder.batch_size);
      read(a, "learning_rate", c.autoencoder.learning_rate);
    }
    read(j, "block_len", c.block_len);
    if (j.contains("strategies")) {
      c.strategies.clear();
      for (const auto& s : j["strategies"]) c.strategies.push_back(parse_strategy(s.get<std::string>()));
    }
    if (j.contains("variants")) {
      c.variants.clear();
      for (const auto& s : j["variants"]) c.variants.push_back(parse_trigger_variant(s.get<std::string>()));
    }
    read(j, "poison_rates", c.poison_rates);
    read(j, "percentile", c.percentile);
    read(j, "k", c.k);
    read(j, "test_points", c.test_points);
    read(j, "max_trigger_length", c.max_trigger_length);
    read(j, "block_trigger_len", c.block_trigger_len);
    if (j.contains("shap")) {
      const auto& s = j["shap"];
      check_keys(s, {"permutations", "points", "background"}, "shap");
      read(s, "permutations", c.shap_permutations);
      read(s, "points", c.shap_points);
      read(s, "background", c.shap_background);
    }
    read(j, "stealth", c.stealth);
    if (j.contains("detection")) {
      const auto& d = j["detection"];
      check_keys(d, {"detector_fraction", "trees", "subsample", "pool"}, "detection");
      read(d, "detector_fraction", c.detection.detector_fraction);
      read(d, "trees", c.detection.trees);
      read(d, "subsample", c.detection.subsample);
      if (d.contains("pool")) {
        const auto p = d["pool"].get<std::string>();
        if (p == "all_clean") c.detection.pool = EvalPool::all_clean;
        else if (p == "balanced") c.detection.pool = EvalPool::balanced;
        else throw ConfigError("unknown detection pool '" + p + "'");
      }
    }
    read(j, "seeds", c.seeds);
    read(j, "threads", c.threads);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  auto cfg = from_json(j);
  // Relative data paths resolve against the config's directory.
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).string();
  };
  resolve(cfg.scenario_path);
  for (auto& p : cfg.train_logs) resolve(p);
  for (auto& p : cfg.test_logs) resolve(p);
  return cfg;
}

// ---------------------------------------------------------------- data

Dataset load_records_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string first;
  std::getline(in, first);
  in.clear();
  in.seekg(0);
  if (first.rfind("#netpois-records", 0) == 0) return read_record_dump(in);
  return parse_conn_log(in).dataset;
}

namespace {

Dataset merge_logs(const std::vector<std::string>& paths, const ScenarioConfig& sc) {
  Dataset out;
  out.scenario_name = sc.scenario_name;
  out.internal_subnets = sc.internal_subnets;
  for (const auto& p : paths) {
    auto ds = load_records_file(p);
    out.records.insert(out.records.end(), ds.records.begin(), ds.records.end());
  }
  sort_by_time(out.records);
  if (!sc.labels.infected_hosts.empty()) out = apply_labels(std::move(out), sc.labels);
  return out;
}

}  // namespace

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  if (cfg.scenario_path.empty()) throw ConfigError("config names no scenario");
  if (cfg.train_logs.empty() || cfg.test_logs.empty()) throw ConfigError("config needs train_logs and test_logs");
  const auto sc = load_scenario_config(cfg.scenario_path);
  return {merge_logs(cfg.train_logs, sc), merge_logs(cfg.test_logs, sc)};
}

// ---------------------------------------------------------------- metrics

double f1_score(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw ConfigError("F1 inputs differ in length");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == 1 && truth[i] == 1) ++tp;
    else if (predicted[i] == 1) ++fp;
    else if (truth[i] == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
}

Metrics compute_metrics(std::span<const int> test_truth, std::span<const int> clean_predictions,
                        std::span<const int> poisoned_predictions, std::span<const int> injected_predictions) {
  Metrics m;
  m.f1_clean = f1_score(test_truth, clean_predictions);
  m.f1_poisoned = f1_score(test_truth, poisoned_predictions);
  m.delta_f1 = std::abs(m.f1_poisoned - m.f1_clean);
  if (!injected_predictions.empty()) {
    const auto flipped = std::count(injected_predictions.begin(), injected_predictions.end(), 0);
    m.asr = static_cast<double>(flipped) / static_cast<double>(injected_predictions.size());
  }
  return m;
}

Summary summarize(const std::vector<double>& values) {
  Summary s;
  s.n = values.size();
  if (values.empty()) return s;
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

std::string CellKey::label() const {
  std::ostringstream o;
  o << to_string(strategy) << '/' << to_string(variant) << '/' << poison_rate;
  return o.str();
}

nlohmann::json CellReport::summary_json() const {
  std::map<std::string, std::vector<double>> cols;
  std::size_t ok = 0;
  for (const auto& s : seeds) {
    if (!s.ok) continue;
    ++ok;
    if (s.asr) cols["asr"].push_back(*s.asr);
    cols["f1_clean"].push_back(s.f1_clean);
    cols["f1_poisoned"].push_back(s.f1_poisoned);
    cols["delta_f1"].push_back(s.delta_f1);
    cols["trigger_size"].push_back(static_cast<double>(s.trigger_size));
    if (s.clean_flip_rate) cols["clean_flip_rate"].push_back(*s.clean_flip_rate);
    if (s.stealth) {
      if (s.stealth->detection.pr_auc) cols["if_pr_auc"].push_back(*s.stealth->detection.pr_auc);
      if (s.stealth->detection.f1) cols["if_f1"].push_back(*s.stealth->detection.f1);
      if (s.stealth->js_average) cols["js_average"].push_back(*s.stealth->js_average);
      if (s.stealth->js_reference) cols["js_reference"].push_back(*s.stealth->js_reference);
    }
  }
  nlohmann::json j = nlohmann::json::object();
  j["completed_seeds"] = ok;
  j["failed_seeds"] = seeds.size() - ok;
  for (const auto& [name, v] : cols) {
    const auto s = summarize(v);
    j[name] = {{"n", s.n}, {"mean", s.mean}, {"std", s.std}};
  }
  return j;
}

bool ExperimentReport::all_failed() const {
  for (const auto& c : cells)
    for (const auto& s : c.seeds)
      if (s.ok) return false;
  return true;
}

// ---------------------------------------------------------------- pipeline

namespace {

using Clock = std::chrono::steady_clock;

struct SeedLog {
  std::uint64_t seed;
  std::vector<StageLog> entries;

  template <class F>
  auto stage(const std::string& cell, const std::string& name, F&& f) {
    const auto t0 = Clock::now();
    auto finish = [&](std::string msg) {
      const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
      entries.push_back({seed, cell, name, std::move(msg), secs});
    };
    try {
      if constexpr (std::is_void_v<decltype(f())>) {
        f();
        finish("ok");
      } else {
        auto r = f();
        finish("ok");
        return r;
      }
    } catch (const std::exception& e) {
      finish(std::string("failed: ") + e.what());
      throw;
    }
  }
  void note(const std::string& cell, const std::string& name, std::string msg) {
    entries.push_back({seed, cell, name, std::move(msg), 0.0});
  }
};

std::vector<CellKey> cell_keys(const ExperimentConfig& cfg) {
  std::vector<CellKey> keys;
  for (auto s : cfg.strategies)
    for (auto v : cfg.variants)
      for (double p : cfg.effective_poison_rates()) keys.push_back({s, v, p});
  return keys;
}

std::vector<std::string> schema() {
  std::vector<std::string> s;
  for (auto n : feature_names()) s.emplace_back(n);
  return s;
}

BinaryClassifier train_model(const ExperimentConfig& cfg, const Matrix& x, std::span<const int> y,
                             std::uint64_t seed, std::vector<std::string> names = {}) {
  if (cfg.model == ModelKind::gbdt) return train_gbdt(x, y, cfg.gbdt, seed, std::move(names));
  return train_mlp(x, y, cfg.mlp, seed, std::move(names));
}

template <class T>
std::vector<std::size_t> sample_indices(const std::vector<T>& pool, std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<std::size_t> out;
  std::sample(idx.begin(), idx.end(), std::back_inserter(out), std::min(n, idx.size()), rng);
  return out;
}

ImportanceScores importance(ImportanceStrategy s, const Matrix& x, std::span<const int> y, std::uint64_t seed,
                            const std::function<ImportanceScores()>& shap) {
  switch (s) {
    case ImportanceStrategy::entropy: return importance_proxy_tree(x, y, Criterion::entropy);
    case ImportanceStrategy::gini: return importance_proxy_tree(x, y, Criterion::gini);
    case ImportanceStrategy::random: return importance_random(x.cols(), derive_seed(seed, 51));
    case ImportanceStrategy::shap: return shap();
  }
  throw ConfigError("unknown strategy");
}

std::vector<ConnRecord> records_of(const Dataset& ds, std::span<const std::size_t> idx) {
  std::vector<ConnRecord> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(ds.records[i]);
  return out;
}

std::vector<ConnRecord> benign(std::span<const ConnRecord> records) {
  std::vector<ConnRecord> out;
  for (const auto& r : records)
    if (r.label == Label::target) out.push_back(r);
  return out;
}

Partition split_test_period(const ExperimentConfig& cfg, const ExperimentData& data, std::uint64_t seed) {
  SplitSpec spec;
  spec.test_start_ts = -std::numeric_limits<double>::infinity();
  spec.adversary_fraction = cfg.adversary_fraction;
  spec.window_seconds = cfg.window_seconds;
  spec.seed = seed;
  return partition_dataset(data.test_period, spec);
}

// Shared, seed-independent training-side inputs.
struct Prepared {
  std::vector<FeaturePoint> train_points;
  Matrix train_x;
  std::vector<int> train_y;
  BlockEncoder encoder;
  std::vector<BlockPoint> train_blocks;
  Matrix train_block_x;
  std::vector<int> train_block_y;
};

using CellResults = std::vector<SeedResult>;  // one per cell

void fail_all(CellResults& out, const std::string& why) {
  for (auto& r : out) {
    r.ok = false;
    r.error = why;
  }
}

StealthMetrics stealth_metrics(const ExperimentConfig& cfg, const Matrix& poisoned_x, std::span<const int> flags,
                               std::span<const ConnRecord> poisoned_records, std::span<const ConnRecord> clean_records,
                               std::optional<double> reference, std::uint64_t seed) {
  StealthMetrics m;
  m.detection = evaluate_anomaly_detection(poisoned_x, flags, seed, cfg.detection);
  const auto js = jensen_shannon_report(poisoned_records, clean_records);
  m.js_average = js.average;
  m.js_reference = reference;
  for (std::size_t i = 0; i < js.fields.size(); ++i) m.js_fields.emplace_back(js.fields[i], js.distances[i]);
  return m;
}

// ------------------------------------------------------------ windows path

CellResults run_seed_windows(const ExperimentConfig& cfg, const ExperimentData& data, const Prepared& prep,
                             const std::vector<CellKey>& cells, std::uint64_t seed, SeedLog& log) {
  CellResults out(cells.size());
  for (auto& r : out) r.seed = seed;

  Partition part;
  std::vector<FeaturePoint> test_points, adv_points;
  Matrix test_x, adv_x;
  std::vector<int> test_y, adv_y, clean_pred;
  std::optional<BinaryClassifier> clean;
  std::vector<std::size_t> victims;
  std::optional<double> reference;
  try {
    log.stage("", "partition", [&] {
      part = split_test_period(cfg, data, seed);
      test_points = aggregate_windows(part.test, cfg.window_seconds);
      adv_points = aggregate_windows(part.adversary, cfg.window_seconds);
      if (test_points.empty() || adv_points.empty()) throw AttackError("empty test or adversary feature set");
      test_x = to_matrix(test_points);
      test_y = to_labels(test_points);
      adv_x = to_matrix(adv_points);
      adv_y = to_labels(adv_points);
    });
    log.stage("", "train_clean", [&] {
      clean = train_model(cfg, prep.train_x, prep.train_y, seed, schema());
      clean_pred = clean->predict(test_x);
    });
    for (std::size_t i = 0; i < test_points.size(); ++i)
      if (test_y[i] == 1 && clean_pred[i] == 1) victims.push_back(i);
    log.note("", "victims", std::to_string(victims.size()) + " correctly classified nontarget test points");
    if (cfg.stealth) {
      const auto a = benign(data.train.records), b = benign(part.test.records);
      if (!a.empty() && !b.empty()) reference = jensen_shannon_report(a, b).average;
    }
  } catch (const std::exception& e) {
    fail_all(out, e.what());
    return out;
  }

  std::vector<FeaturePoint> adv_nontarget, adv_target;
  for (const auto& p : adv_points) (p.label == Label::nontarget ? adv_nontarget : adv_target).push_back(p);
  std::optional<BayesNet> bn;

  for (auto strategy : cfg.strategies) {
    const std::string sname(to_string(strategy));
    std::vector<std::size_t> selected;
    std::optional<TriggerProto> proto;
    std::optional<FeatureNormalizer> norm;
    std::optional<Trigger> full;
    Warnings strategy_warnings;
    std::string strategy_error;
    try {
      log.stage(sname, "importance", [&] {
        auto scores = importance(strategy, adv_x, adv_y, seed, [&] {
          Rng rng(derive_seed(seed, 52));
          const ModelQuery query = [&](const Matrix& m) { return clean->predict_proba(m); };
          auto pts = sample_indices(adv_nontarget, cfg.shap_points, rng);
          Matrix points, background;
          for (auto i : pts) points.append_row(adv_nontarget[i].values);
          const auto& bg_pool = adv_target.empty() ? adv_nontarget : adv_target;
          for (auto i : sample_indices(bg_pool, cfg.shap_background, rng)) background.append_row(bg_pool[i].values);
          return importance_shapley_sampled(query, points, background, cfg.shap_permutations,
                                            derive_seed(seed, 53));
        });
        strategy_warnings = scores.warnings;
        selected = select_top_k(scores.scores, cfg.k);
      });
      log.stage(sname, "prototype", [&] {
        const auto assignment = compute_assignment(adv_nontarget, selected, cfg.percentile);
        proto = find_prototype(adv_nontarget, assignment);
        norm = FeatureNormalizer::fit(adv_nontarget, selected);
      });
      log.stage(sname, "full_trigger", [&] {
        const std::size_t lmax = cfg.max_trigger_length ? cfg.max_trigger_length : default_max_length(*proto);
        full = extract_full_trigger(part.adversary, *proto, selected, *norm, lmax);
      });
    } catch (const std::exception& e) {
      strategy_error = e.what();
    }

    for (auto variant : cfg.variants) {
      const std::string vname = sname + "/" + std::string(to_string(variant));
      std::optional<Trigger> trigger;
      std::optional<InjectionResult> test_inj;
      std::vector<int> clean_on_injected;
      Matrix injected_x;
      std::string variant_error = strategy_error;
      if (variant_error.empty()) {
        try {
          log.stage(vname, "trigger", [&] {
            if (variant == TriggerVariant::full) {
              trigger = *full;
            } else if (variant == TriggerVariant::reduced) {
              trigger = reduce_trigger(*full, part.adversary.internal_subnets, *norm);
            } else {
              if (!bn) {
                const auto recs = benign(part.adversary.records);
                if (recs.empty()) throw AttackError("adversary data holds no target-class records");
                bn = BayesNet::fit(recs, part.adversary.internal_subnets);
              }
              GenerateParams gp;
              gp.key_port = proto->point.key.resp_p;
              gp.selected = selected;
              gp.target = full->target;
              // Protocol of the prototype's key-port traffic.
              std::size_t best = 0;
              for (std::size_t p = 1; p < kNumProtos; ++p)
                if (proto->point.values[feat::kProtoCount + p] > proto->point.values[feat::kProtoCount + best])
                  best = p;
              gp.proto = static_cast<Proto>(best);
              trigger = generate_trigger(*bn, gp, part.adversary.internal_subnets, *norm, derive_seed(seed, 54));
            }
          });
          log.stage(vname, "inject_test", [&] {
            test_inj = inject_test_points(part.test, test_points, victims, *trigger, cfg.test_points,
                                          derive_seed(seed, 55), {cfg.window_seconds});
            for (const auto& e : test_inj->manifest) injected_x.append_row(e.after);
            if (!injected_x.empty()) clean_on_injected = clean->predict(injected_x);
          });
        } catch (const std::exception& e) {
          variant_error = e.what();
        }
      }

      for (std::size_t c = 0; c < cells.size(); ++c) {
        if (cells[c].strategy != strategy || cells[c].variant != variant) continue;
        auto& res = out[c];
        const std::string cname = cells[c].label();
        if (!variant_error.empty()) {
          res.error = variant_error;
          continue;
        }
        try {
          res.warnings = strategy_warnings;
          res.warnings.insert(res.warnings.end(), trigger->warnings.begin(), trigger->warnings.end());
          res.warnings.insert(res.warnings.end(), test_inj->warnings.begin(), test_inj->warnings.end());
          for (auto f : selected) res.selected_features.emplace_back(feature_names()[f]);
          res.trigger_size = trigger->records.size();
          res.injected_test_points = test_inj->manifest.size();
          if (!clean_on_injected.empty())
            res.clean_flip_rate = static_cast<double>(std::count(clean_on_injected.begin(), clean_on_injected.end(), 0)) /
                                  static_cast<double>(clean_on_injected.size());

          auto inj = log.stage(cname, "inject_train", [&] {
            return inject_training(data.train, prep.train_points, *trigger, cells[c].poison_rate,
                                   derive_seed(seed, 56), {cfg.window_seconds});
          });
          res.warnings.insert(res.warnings.end(), inj.warnings.begin(), inj.warnings.end());
          res.poisoned_points = inj.manifest.size();

          std::vector<FeaturePoint> ppoints;
          Matrix px;
          std::vector<int> poisoned_pred, injected_pred;
          if (inj.manifest.empty()) {
            poisoned_pred = clean_pred;
            if (!injected_x.empty()) injected_pred = clean_on_injected;
            log.note(cname, "retrain", "no poison injected; reusing the clean model");
          } else {
            log.stage(cname, "retrain", [&] {
              ppoints = aggregate_windows(inj.dataset, cfg.window_seconds);
              px = to_matrix(ppoints);
              const auto py = to_labels(ppoints);
              const auto poisoned = train_model(cfg, px, py, seed, schema());
              poisoned_pred = poisoned.predict(test_x);
              if (!injected_x.empty()) injected_pred = poisoned.predict(injected_x);
            });
          }
          const auto m = compute_metrics(test_y, clean_pred, poisoned_pred, injected_pred);
          res.asr = m.asr;
          res.f1_clean = m.f1_clean;
          res.f1_poisoned = m.f1_poisoned;
          res.delta_f1 = m.delta_f1;

          if (cfg.stealth && !inj.manifest.empty()) {
            res.stealth = log.stage(cname, "stealth", [&] {
              std::set<AggregationKey> keys;
              for (const auto& e : inj.manifest) keys.insert(e.key);
              std::vector<int> flags;
              for (const auto& p : ppoints) flags.push_back(keys.contains(p.key) ? 1 : 0);
              return stealth_metrics(cfg, px, flags, inj.dataset.records, data.train.records, reference,
                                     derive_seed(seed, 57));
            });
          }
          res.ok = true;
        } catch (const std::exception& e) {
          res.ok = false;
          res.error = e.what();
        }
      }
    }
  }
  return out;
}

// ------------------------------------------------------------- blocks path

struct BlockVictim {
  AutoEncoder ae;
  BinaryClassifier model;
};

BlockVictim train_block_victim(const ExperimentConfig& cfg, const Matrix& x, std::span<const int> y,
                               std::uint64_t seed) {
  auto ae = train_autoencoder(x, cfg.autoencoder, derive_seed(seed, 61));
  auto model = train_model(cfg, ae.encode(x), y, seed);
  return {std::move(ae), std::move(model)};
}

std::vector<int> block_predict(const BlockVictim& v, const Matrix& x) { return v.model.predict(v.ae.encode(x)); }

CellResults run_seed_blocks(const ExperimentConfig& cfg, const ExperimentData& data, const Prepared& prep,
                            const std::vector<CellKey>& cells, std::uint64_t seed, SeedLog& log) {
  CellResults out(cells.size());
  for (auto& r : out) r.seed = seed;
  const std::size_t L = cfg.block_len;

  Partition part;
  std::vector<BlockPoint> test_blocks, adv_blocks;
  Matrix test_x, adv_x;
  std::vector<int> test_y, adv_y, clean_pred;
  std::optional<BlockVictim> clean;
  std::optional<AutoEncoder> adv_ae;
  Matrix adv_latent;
  std::vector<std::size_t> victims;
  std::optional<double> reference;
  try {
    log.stage("", "partition", [&] {
      part = split_test_period(cfg, data, seed);
      test_blocks = blockize(part.test, prep.encoder, L);
      adv_blocks = blockize(part.adversary, prep.encoder, L);
      if (test_blocks.empty() || adv_blocks.empty()) throw AttackError("empty test or adversary block set");
      test_x = to_matrix(test_blocks);
      test_y = to_labels(test_blocks);
      adv_x = to_matrix(adv_blocks);
      adv_y = to_labels(adv_blocks);
    });
    log.stage("", "train_clean", [&] {
      clean = train_block_victim(cfg, prep.train_block_x, prep.train_block_y, seed);
      clean_pred = block_predict(*clean, test_x);
    });
    log.stage("", "adversary_encoder", [&] {
      adv_ae = train_autoencoder(adv_x, cfg.autoencoder, derive_seed(seed, 62));
      adv_latent = adv_ae->encode(adv_x);
    });
    for (std::size_t i = 0; i < test_blocks.size(); ++i)
      if (test_y[i] == 1 && clean_pred[i] == 1) victims.push_back(i);
    log.note("", "victims", std::to_string(victims.size()) + " correctly classified nontarget test blocks");
    if (cfg.stealth) {
      const auto a = benign(data.train.records), b = benign(part.test.records);
      if (!a.empty() && !b.empty()) reference = jensen_shannon_report(a, b).average;
    }
  } catch (const std::exception& e) {
    fail_all(out, e.what());
    return out;
  }

  std::vector<std::size_t> adv_nt, adv_t;
  for (std::size_t i = 0; i < adv_blocks.size(); ++i) (adv_y[i] ? adv_nt : adv_t).push_back(i);

  for (auto strategy : cfg.strategies) {
    const std::string sname(to_string(strategy));
    std::vector<ConnRecord> trigger;
    IpAddr source;
    Warnings warnings;
    std::vector<std::string> selected_names;
    Matrix spliced;  // victim blocks with the trigger, rate-independent
    std::vector<int> clean_on_injected;
    std::string error;
    try {
      log.stage(sname, "block_trigger", [&] {
        if (adv_nt.empty()) throw AttackError("adversary data holds no nontarget blocks");
        auto scores = importance(strategy, adv_latent, adv_y, seed, [] () -> ImportanceScores {
          throw ConfigError("shap is not supported for blocks");
        });
        warnings = scores.warnings;
        const auto selected = select_top_k(scores.scores, std::min(cfg.k, adv_latent.cols()));
        for (auto f : selected) selected_names.push_back("latent_" + std::to_string(f));
        const Matrix nt_latent = adv_latent.select_rows(adv_nt);
        const auto assignment = compute_assignment(nt_latent, selected, cfg.percentile);
        const auto norm = FeatureNormalizer::fit(nt_latent, selected);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < nt_latent.rows(); ++i) {
          const double d = norm.row_distance(nt_latent.row(i), assignment.values);
          if (d < best_d) {
            best_d = d;
            best = i;
          }
        }
        const auto& pb = adv_blocks[adv_nt[best]];
        source = pb.host;
        const auto proto_records = records_of(part.adversary, pb.provenance);
        const std::size_t n_probe = std::min<std::size_t>(20, adv_t.size());
        trigger = best_window(proto_records, cfg.block_trigger_len, [&](std::span<const ConnRecord> window) {
          if (n_probe == 0) {
            const auto s = splice_block(proto_records, window, source, source, L / 2);
            return norm.row_distance(adv_ae->encode(make_block(s, source, prep.encoder).values), assignment.values);
          }
          double total = 0;
          for (std::size_t k = 0; k < n_probe; ++k) {
            const auto& tb = adv_blocks[adv_t[k]];
            const auto recs = records_of(part.adversary, tb.provenance);
            const auto s = splice_block(recs, window, source, tb.host, L / 2);
            const auto b = make_block(s, tb.host, prep.encoder);
            total += norm.row_distance(adv_ae->encode(b.values), assignment.values);
          }
          return total / static_cast<double>(n_probe);
        });
      });
      log.stage(sname, "inject_test", [&] {
        Rng rng(derive_seed(seed, 63));
        std::vector<std::size_t> chosen;
        std::sample(victims.begin(), victims.end(), std::back_inserter(chosen), std::min(cfg.test_points, victims.size()),
                    rng);
        if (chosen.size() < cfg.test_points)
          warnings.push_back("only " + std::to_string(chosen.size()) + " eligible test blocks");
        std::uniform_int_distribution<std::size_t> off(0, L);
        for (auto i : chosen) {
          const auto& tb = test_blocks[i];
          const auto s = splice_block(records_of(part.test, tb.provenance), trigger, source, tb.host, off(rng));
          spliced.append_row(make_block(s, tb.host, prep.encoder).values);
        }
        if (!spliced.empty()) clean_on_injected = block_predict(*clean, spliced);
      });
    } catch (const std::exception& e) {
      error = e.what();
    }

    for (std::size_t c = 0; c < cells.size(); ++c) {
      if (cells[c].strategy != strategy) continue;
      auto& res = out[c];
      const std::string cname = cells[c].label();
      if (!error.empty()) {
        res.error = error;
        continue;
      }
      try {
        res.warnings = warnings;
        res.selected_features = selected_names;
        res.trigger_size = trigger.size();
        res.injected_test_points = spliced.rows();
        if (!clean_on_injected.empty())
          res.clean_flip_rate = static_cast<double>(std::count(clean_on_injected.begin(), clean_on_injected.end(), 0)) /
                                static_cast<double>(clean_on_injected.size());

        std::vector<std::size_t> targets;
        for (std::size_t i = 0; i < prep.train_blocks.size(); ++i)
          if (prep.train_block_y[i] == 0) targets.push_back(i);
        const double rate = cells[c].poison_rate;
        const std::size_t wanted = poison_count(prep.train_blocks.size(), rate);
        if (wanted > targets.size()) res.warnings.push_back("fewer target blocks than requested poison points");
        Rng rng(derive_seed(seed, 64));
        std::vector<std::size_t> chosen;
        std::sample(targets.begin(), targets.end(), std::back_inserter(chosen), std::min(wanted, targets.size()), rng);
        res.poisoned_points = chosen.size();

        Matrix px = prep.train_block_x;
        std::vector<int> flags(px.rows(), 0);
        std::vector<ConnRecord> poisoned_records = data.train.records;
        std::uniform_int_distribution<std::size_t> off(0, L);
        for (auto i : chosen) {
          const auto& tb = prep.train_blocks[i];
          const auto spliced_block =
              splice_block(records_of(data.train, tb.provenance), trigger, source, tb.host, off(rng));
          const auto b = make_block(spliced_block, tb.host, prep.encoder);
          std::copy(b.values.begin(), b.values.end(), px.row(i).begin());
          flags[i] = 1;
          const auto extra = rehost_records(trigger, source, tb.host);
          poisoned_records.insert(poisoned_records.end(), extra.begin(), extra.end());
        }

        std::vector<int> poisoned_pred, injected_pred;
        if (chosen.empty()) {
          poisoned_pred = clean_pred;
          injected_pred = clean_on_injected;
          log.note(cname, "retrain", "no poison injected; reusing the clean model");
        } else {
          log.stage(cname, "retrain", [&] {
            const auto poisoned = train_block_victim(cfg, px, prep.train_block_y, seed);
            poisoned_pred = block_predict(poisoned, test_x);
            if (!spliced.empty()) injected_pred = block_predict(poisoned, spliced);
          });
        }
        const auto m = compute_metrics(test_y, clean_pred, poisoned_pred, injected_pred);
        res.asr = m.asr;
        res.f1_clean = m.f1_clean;
        res.f1_poisoned = m.f1_poisoned;
        res.delta_f1 = m.delta_f1;
        if (cfg.stealth && !chosen.empty()) {
          res.stealth = log.stage(cname, "stealth", [&] {
            return stealth_metrics(cfg, px, flags, poisoned_records, data.train.records, reference,
                                   derive_seed(seed, 65));
          });
        }
        res.ok = true;
      } catch (const std::exception& e) {
        res.ok = false;
        res.error = e.what();
      }
    }
  }
  return out;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ExperimentData& data) {
  cfg.validate();
  ExperimentReport report;
  report.version = std::string(kVersion);
  report.config = cfg;
  const auto cells = cell_keys(cfg);

  Prepared prep;
  SeedLog setup{0, {}};
  std::string setup_error;
  try {
  if (cfg.representation == Representation::windows) {
    setup.stage("", "featurize_train", [&] {
      prep.train_points = aggregate_windows(data.train, cfg.window_seconds);
      if (prep.train_points.empty()) throw AttackError("training data yields no feature points");
      prep.train_x = to_matrix(prep.train_points);
      prep.train_y = to_labels(prep.train_points);
    });
  } else {
    setup.stage("", "blockize_train", [&] {
      prep.encoder = BlockEncoder::fit(data.train.records);
      prep.train_blocks = blockize(data.train, prep.encoder, cfg.block_len);
      if (prep.train_blocks.empty()) throw AttackError("training data yields no blocks");
      prep.train_block_x = to_matrix(prep.train_blocks);
      prep.train_block_y = to_labels(prep.train_blocks);
    });
  }
  } catch (const std::exception& e) {
    setup_error = e.what();
  }

  std::vector<CellResults> per_seed(cfg.seeds.size());
  std::vector<SeedLog> logs;
  for (auto s : cfg.seeds) logs.push_back({s, {}});
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cfg.seeds.size();) {
      if (!setup_error.empty()) {
        per_seed[i].resize(cells.size());
        for (auto& r : per_seed[i]) r.seed = cfg.seeds[i];
        fail_all(per_seed[i], setup_error);
        continue;
      }
      per_seed[i] = cfg.representation == Representation::windows
                        ? run_seed_windows(cfg, data, prep, cells, cfg.seeds[i], logs[i])
                        : run_seed_blocks(cfg, data, prep, cells, cfg.seeds[i], logs[i]);
    }
  };
  const std::size_t n_threads = std::min(cfg.threads, cfg.seeds.size());
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  report.logs = setup.entries;
  for (auto& l : logs) report.logs.insert(report.logs.end(), l.entries.begin(), l.entries.end());
  for (std::size_t c = 0; c < cells.size(); ++c) {
    CellReport cr;
    cr.key = cells[c];
    for (auto& s : per_seed) cr.seeds.push_back(s[c]);
    report.cells.push_back(std::move(cr));
  }
  return report;
}

}  // namespace netpois
