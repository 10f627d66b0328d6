// netpois command-line interface.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "netpois/bayesgen.hpp"
#include "netpois/blocks.hpp"
#include "netpois/classifier.hpp"
#include "netpois/explain.hpp"
#include "netpois/featurize.hpp"
#include "netpois/flowlog.hpp"
#include "netpois/harness.hpp"
#include "netpois/inject.hpp"
#include "netpois/report.hpp"
#include "netpois/stealth.hpp"
#include "netpois/trigger.hpp"

namespace fs = std::filesystem;
using namespace netpois;

namespace {

Dataset load_with_scenario(const std::string& path, const std::string& scenario) {
  auto ds = load_records_file(path);
  if (!scenario.empty()) {
    const auto sc = load_scenario_config(scenario);
    ds.internal_subnets = sc.internal_subnets;
    ds.scenario_name = sc.scenario_name;
    if (!sc.labels.infected_hosts.empty()) ds = apply_labels(std::move(ds), sc.labels);
  }
  if (ds.internal_subnets.empty())
    throw ConfigError(path + " carries no internal subnets; pass --scenario");
  return ds;
}

std::ofstream open_out(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + p.string());
  return f;
}

std::vector<FeaturePoint> read_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_feature_points(in);
}

void write_blocks(std::ostream& out, const std::vector<BlockPoint>& blocks) {
  out << "#netpois-blocks\t1\n#fields\thost\tlabel\tprovenance";
  const std::size_t width = blocks.empty() ? 0 : blocks.front().values.size();
  for (std::size_t i = 0; i < width; ++i) out << "\tb" << i;
  out << '\n';
  for (const auto& b : blocks) {
    out << b.host.to_string() << '\t' << to_string(b.label) << '\t';
    for (std::size_t i = 0; i < b.provenance.size(); ++i) out << (i ? "," : "") << b.provenance[i];
    for (double v : b.values) out << '\t' << v;
    out << '\n';
  }
}

std::map<std::string, std::string> parse_fixed(const std::string& spec) {
  std::map<std::string, std::string> fixed;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("expected field=value, got '" + item + "'");
    fixed[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return fixed;
}

void print_warnings(const Warnings& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clean-label backdoor poisoning toolkit for network flow classifiers"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse conn.log files into a labeled record dump");
  std::vector<std::string> ingest_logs;
  std::string ingest_scenario, ingest_out;
  ingest->add_option("--log", ingest_logs, "conn.log file(s)")->required()->check(CLI::ExistingFile);
  ingest->add_option("--scenario", ingest_scenario, "Scenario config (subnets, infected hosts)")
      ->required()
      ->check(CLI::ExistingFile);
  ingest->add_option("--out", ingest_out, "Output record dump")->required();

  // featurize
  auto* featurize = app.add_subcommand("featurize", "Build window features or connection blocks");
  std::string feat_in, feat_out, feat_mode = "windows", feat_scenario;
  double feat_window = kDefaultWindowSeconds;
  std::size_t feat_block = kDefaultBlockLen;
  featurize->add_option("--in", feat_in, "Record dump or conn.log")->required()->check(CLI::ExistingFile);
  featurize->add_option("--mode", feat_mode, "windows or blocks")->check(CLI::IsMember({"windows", "blocks"}));
  featurize->add_option("--out", feat_out, "Output feature file")->required();
  featurize->add_option("--scenario", feat_scenario, "Scenario config when the input lacks subnets");
  featurize->add_option("--window", feat_window, "Window length in seconds");
  featurize->add_option("--block-len", feat_block, "Connections per block");

  // train
  auto* train = app.add_subcommand("train", "Train a classifier on window features");
  std::string train_in, train_out, train_model = "gb";
  std::uint64_t train_seed = 0;
  train->add_option("--features", train_in, "Feature file")->required()->check(CLI::ExistingFile);
  train->add_option("--model", train_model, "gb or ffnn");
  train->add_option("--seed", train_seed, "Seed");
  train->add_option("--out", train_out, "Model file")->required();

  // explain
  auto* explain = app.add_subcommand("explain", "Rank features by importance on adversary data");
  std::string ex_in, ex_model, ex_strategy = "entropy", ex_out;
  std::size_t ex_k = 8, ex_points = 100, ex_background = 100;
  int ex_perm = 200;
  std::uint64_t ex_seed = 0;
  explain->add_option("--features", ex_in, "Adversary feature file")->required()->check(CLI::ExistingFile);
  explain->add_option("--strategy", ex_strategy, "entropy, gini, shap or random");
  explain->add_option("--model", ex_model, "Victim model (shap only)");
  explain->add_option("-k", ex_k, "Features to select");
  explain->add_option("--permutations", ex_perm, "Shapley permutations per point");
  explain->add_option("--points", ex_points, "Explained nontarget points");
  explain->add_option("--background", ex_background, "Background target points");
  explain->add_option("--seed", ex_seed, "Seed");
  explain->add_option("--out", ex_out, "Output JSON (stdout when omitted)");

  // attack
  auto* attack = app.add_subcommand("attack", "Craft a trigger and poison training data");
  std::string at_train, at_adv, at_model, at_strategy = "entropy", at_trigger = "full", at_out, at_scenario;
  double at_pct = 1.0, at_percentile = 95.0;
  std::size_t at_k = 8, at_maxlen = 0;
  std::uint64_t at_seed = 0;
  attack->add_option("--train", at_train, "Training records")->required()->check(CLI::ExistingFile);
  attack->add_option("--adv", at_adv, "Adversary records")->required()->check(CLI::ExistingFile);
  attack->add_option("--scenario", at_scenario, "Scenario config when inputs lack subnets");
  attack->add_option("--model", at_model, "Victim model (shap only)");
  attack->add_option("--strategy", at_strategy, "entropy, gini, shap or random");
  attack->add_option("--trigger", at_trigger, "full, reduced or generated")
      ->check(CLI::IsMember({"full", "reduced", "generated"}));
  attack->add_option("--poison-pct", at_pct, "Poison rate in percent of training points");
  attack->add_option("--percentile", at_percentile, "Assignment percentile");
  attack->add_option("-k", at_k, "Features to select");
  attack->add_option("--max-len", at_maxlen, "Trigger search bound (0 = automatic)");
  attack->add_option("--seed", at_seed, "Seed");
  attack->add_option("--out", at_out, "Output directory")->required();

  // bayesgen
  auto* bayes = app.add_subcommand("bayesgen", "Fit or sample the Bayesian traffic model");
  bayes->require_subcommand(1);
  auto* bfit = bayes->add_subcommand("fit", "Fit on target-class adversary records");
  std::string bf_adv, bf_out, bf_scenario;
  bfit->add_option("--adv", bf_adv, "Adversary records")->required()->check(CLI::ExistingFile);
  bfit->add_option("--scenario", bf_scenario, "Scenario config when the input lacks subnets");
  bfit->add_option("--out", bf_out, "Output model")->required();
  auto* bsample = bayes->add_subcommand("sample", "Sample connections");
  std::string bs_bn, bs_fixed, bs_out;
  std::size_t bs_n = 10;
  std::uint64_t bs_seed = 0;
  bsample->add_option("--bn", bs_bn, "Fitted model")->required()->check(CLI::ExistingFile);
  bsample->add_option("--fixed", bs_fixed, "Comma-separated field=value pairs");
  bsample->add_option("-n", bs_n, "Number of connections");
  bsample->add_option("--seed", bs_seed, "Seed");
  bsample->add_option("--out", bs_out, "Output conn.log (stdout when omitted)");

  // stealth
  auto* stealth = app.add_subcommand("stealth", "Measure detectability of a poisoned training set");
  std::string st_dir, st_clean, st_ref, st_out, st_scenario;
  std::uint64_t st_seed = 0;
  stealth->add_option("--poisoned", st_dir, "Attack output directory")->required()->check(CLI::ExistingDirectory);
  stealth->add_option("--clean", st_clean, "Clean training records")->required()->check(CLI::ExistingFile);
  stealth->add_option("--reference", st_ref, "Clean test records for the reference distance");
  stealth->add_option("--scenario", st_scenario, "Scenario config when inputs lack subnets");
  stealth->add_option("--seed", st_seed, "Seed");
  stealth->add_option("--out", st_out, "Output JSON")->required();

  // run
  auto* run = app.add_subcommand("run", "Run a full experiment from a config");
  std::string run_config, run_out = "results";
  run->add_option("--config", run_config, "Experiment config")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      const auto sc = load_scenario_config(ingest_scenario);
      Dataset ds;
      ds.scenario_name = sc.scenario_name;
      ds.internal_subnets = sc.internal_subnets;
      for (const auto& p : ingest_logs) {
        std::ifstream in(p);
        auto res = parse_conn_log(in);
        std::cerr << p << ": " << res.report.rows_read << " rows, " << res.report.rows_skipped << " skipped\n";
        for (std::size_t i = 0; i < std::min<std::size_t>(res.report.errors.size(), 10); ++i)
          std::cerr << "  line " << res.report.errors[i].line << ": " << res.report.errors[i].message << '\n';
        ds.records.insert(ds.records.end(), res.dataset.records.begin(), res.dataset.records.end());
      }
      sort_by_time(ds.records);
      if (!sc.labels.infected_hosts.empty()) ds = apply_labels(std::move(ds), sc.labels);
      auto f = open_out(ingest_out);
      write_record_dump(f, ds);
      return 0;
    }

    if (*featurize) {
      const auto ds = load_with_scenario(feat_in, feat_scenario);
      auto f = open_out(feat_out);
      if (feat_mode == "windows") {
        const auto pts = aggregate_windows(ds, feat_window);
        write_feature_points(f, pts);
        std::cerr << pts.size() << " feature points\n";
      } else {
        const auto enc = BlockEncoder::fit(ds.records);
        const auto blocks = blockize(ds, enc, feat_block);
        write_blocks(f, blocks);
        std::cerr << blocks.size() << " blocks\n";
      }
      return 0;
    }

    if (*train) {
      const auto pts = read_points(train_in);
      const auto x = to_matrix(pts);
      const auto y = to_labels(pts);
      std::vector<std::string> names;
      for (auto n : feature_names()) names.emplace_back(n);
      const auto kind = parse_model_kind(train_model);
      const auto model = kind == ModelKind::gbdt ? train_gbdt(x, y, {}, train_seed, names)
                                                 : train_mlp(x, y, {}, train_seed, names);
      std::cerr << "training F1 " << f1_score(y, model.predict(x)) << '\n';
      model.save(train_out);
      return 0;
    }

    if (*explain) {
      const auto pts = read_points(ex_in);
      const auto strategy = parse_strategy(ex_strategy);
      const auto x = to_matrix(pts);
      const auto y = to_labels(pts);
      ImportanceScores scores;
      if (strategy == ImportanceStrategy::shap) {
        if (ex_model.empty()) throw ConfigError("shap needs --model");
        const auto model = BinaryClassifier::load(ex_model);
        Matrix points, background;
        for (const auto& p : pts) {
          if (p.label == Label::nontarget && points.rows() < ex_points) points.append_row(p.values);
          if (p.label == Label::target && background.rows() < ex_background) background.append_row(p.values);
        }
        if (points.empty() || background.empty()) throw AttackError("shap needs nontarget and target points");
        scores = importance_shapley_sampled([&](const Matrix& m) { return model.predict_proba(m); }, points,
                                            background, ex_perm, ex_seed);
      } else if (strategy == ImportanceStrategy::random) {
        scores = importance_random(kNumFeatures, ex_seed);
      } else {
        scores = importance_proxy_tree(x, y, strategy == ImportanceStrategy::entropy ? Criterion::entropy : Criterion::gini);
      }
      print_warnings(scores.warnings);
      auto j = scores.to_json(feature_names());
      nlohmann::json sel = nlohmann::json::array();
      for (auto f : select_top_k(scores.scores, ex_k)) sel.push_back(feature_names()[f]);
      j["selected"] = sel;
      if (ex_out.empty()) {
        std::cout << j.dump(2) << '\n';
      } else {
        auto f = open_out(ex_out);
        f << j.dump(2) << '\n';
      }
      return 0;
    }

    if (*attack) {
      const auto train_ds = load_with_scenario(at_train, at_scenario);
      const auto adv = load_with_scenario(at_adv, at_scenario);
      const auto train_points = aggregate_windows(train_ds);
      const auto adv_points = aggregate_windows(adv);
      std::vector<FeaturePoint> nontarget, target;
      for (const auto& p : adv_points) (p.label == Label::nontarget ? nontarget : target).push_back(p);
      const auto strategy = parse_strategy(at_strategy);
      ImportanceScores scores;
      if (strategy == ImportanceStrategy::shap) {
        if (at_model.empty()) throw ConfigError("shap needs --model");
        const auto model = BinaryClassifier::load(at_model);
        Matrix points, background;
        for (std::size_t i = 0; i < nontarget.size() && i < 100; ++i) points.append_row(nontarget[i].values);
        for (std::size_t i = 0; i < target.size() && i < 100; ++i) background.append_row(target[i].values);
        if (points.empty() || background.empty()) throw AttackError("shap needs nontarget and target points");
        scores = importance_shapley_sampled([&](const Matrix& m) { return model.predict_proba(m); }, points,
                                            background, 200, at_seed);
      } else if (strategy == ImportanceStrategy::random) {
        scores = importance_random(kNumFeatures, at_seed);
      } else {
        scores = importance_proxy_tree(to_matrix(adv_points), to_labels(adv_points),
                                       strategy == ImportanceStrategy::entropy ? Criterion::entropy : Criterion::gini);
      }
      print_warnings(scores.warnings);
      const auto selected = select_top_k(scores.scores, at_k);
      const auto assignment = compute_assignment(nontarget, selected, at_percentile);
      const auto proto = find_prototype(nontarget, assignment);
      const auto norm = FeatureNormalizer::fit(nontarget, selected);
      const auto full = extract_full_trigger(adv, proto, selected, norm,
                                             at_maxlen ? at_maxlen : default_max_length(proto));
      Trigger trigger = full;
      const auto variant = parse_trigger_variant(at_trigger);
      if (variant == TriggerVariant::reduced) {
        trigger = reduce_trigger(full, adv.internal_subnets, norm);
      } else if (variant == TriggerVariant::generated) {
        std::vector<ConnRecord> benign;
        for (const auto& r : adv.records)
          if (r.label == Label::target) benign.push_back(r);
        const auto bn = BayesNet::fit(benign, adv.internal_subnets);
        GenerateParams gp;
        gp.key_port = proto.point.key.resp_p;
        gp.selected = selected;
        gp.target = full.target;
        std::size_t best = 0;
        for (std::size_t p = 1; p < kNumProtos; ++p)
          if (proto.point.values[feat::kProtoCount + p] > proto.point.values[feat::kProtoCount + best]) best = p;
        gp.proto = static_cast<Proto>(best);
        trigger = generate_trigger(bn, gp, adv.internal_subnets, norm, derive_seed(at_seed, 54));
      }
      print_warnings(trigger.warnings);
      const auto inj = inject_training(train_ds, train_points, trigger, at_pct, at_seed);
      print_warnings(inj.warnings);

      const fs::path dir(at_out);
      fs::create_directories(dir);
      {
        auto f = open_out(dir / "trigger.json");
        auto j = trigger.to_json();
        j["importance"] = scores.to_json(feature_names());
        f << j.dump(2) << '\n';
      }
      {
        Dataset tds;
        tds.records = trigger.records;
        tds.internal_subnets = adv.internal_subnets;
        auto f = open_out(dir / "trigger.log");
        write_conn_log(f, tds);
      }
      {
        auto f = open_out(dir / "poisoned_train.tsv");
        write_record_dump(f, inj.dataset);
      }
      {
        auto f = open_out(dir / "manifest.jsonl");
        write_manifest(f, inj.manifest, selected);
      }
      std::cerr << "trigger " << trigger.records.size() << " records, " << inj.manifest.size()
                << " poisoned points\n";
      return 0;
    }

    if (*bfit) {
      const auto adv = load_with_scenario(bf_adv, bf_scenario);
      std::vector<ConnRecord> benign;
      for (const auto& r : adv.records)
        if (r.label == Label::target) benign.push_back(r);
      const auto bn = BayesNet::fit(benign, adv.internal_subnets);
      auto f = open_out(bf_out);
      bn.save(f);
      return 0;
    }

    if (*bsample) {
      std::ifstream in(bs_bn);
      const auto bn = BayesNet::load(in);
      const auto fixed = parse_fixed(bs_fixed);
      Rng rng(bs_seed);
      Dataset ds;
      SampleTrace trace;
      for (std::size_t i = 0; i < bs_n; ++i) ds.records.push_back(bn.sample_connection(fixed, rng, &trace));
      print_warnings(trace.warnings);
      if (bs_out.empty()) {
        write_conn_log(std::cout, ds, false);
      } else {
        auto f = open_out(bs_out);
        write_conn_log(f, ds, false);
      }
      return 0;
    }

    if (*stealth) {
      const fs::path dir(st_dir);
      const auto poisoned = load_with_scenario((dir / "poisoned_train.tsv").string(), st_scenario);
      const auto clean = load_with_scenario(st_clean, st_scenario);
      std::set<AggregationKey> keys;
      {
        std::ifstream in(dir / "manifest.jsonl");
        if (!in) throw ConfigError("no manifest.jsonl in " + dir.string());
        std::string line;
        while (std::getline(in, line)) {
          if (line.empty()) continue;
          const auto j = nlohmann::json::parse(line);
          auto ip = IpAddr::parse(j.at("host").get<std::string>());
          if (!ip) throw FormatError("bad host in manifest");
          keys.insert({j.at("window").get<std::int64_t>(), *ip, j.at("port").get<std::uint16_t>()});
        }
      }
      const auto pts = aggregate_windows(poisoned);
      std::vector<int> flags;
      for (const auto& p : pts) flags.push_back(keys.contains(p.key) ? 1 : 0);
      const auto det = evaluate_anomaly_detection(to_matrix(pts), flags, st_seed);
      auto js = jensen_shannon_report(poisoned.records, clean.records);
      if (!st_ref.empty()) {
        const auto ref = load_with_scenario(st_ref, st_scenario);
        std::vector<ConnRecord> a, b;
        for (const auto& r : clean.records)
          if (r.label == Label::target) a.push_back(r);
        for (const auto& r : ref.records)
          if (r.label == Label::target) b.push_back(r);
        if (!a.empty() && !b.empty()) js.reference = jensen_shannon_report(a, b).average;
      }
      auto f = open_out(st_out);
      f << nlohmann::json({{"detection", det.to_json()}, {"jensen_shannon", js.to_json()}}).dump(2) << '\n';
      return 0;
    }

    if (*run) {
      const auto cfg = ExperimentConfig::load(run_config);
      const auto data = load_experiment_data(cfg);
      const auto report = run_experiment(cfg, data);
      emit_report(report, run_out);
      for (const auto& c : report.cells) {
        const auto s = c.summary_json();
        std::cerr << c.key.label() << ": " << s.dump() << '\n';
      }
      return report.all_failed() ? 1 : 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
