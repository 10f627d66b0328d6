#pragma once

// End-to-end experiments: clean baseline, trigger crafting, poisoning,
// retraining and evaluation over seeds and sweep cells.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "netpois/autoencoder.hpp"
#include "netpois/blocks.hpp"
#include "netpois/classifier.hpp"
#include "netpois/explain.hpp"
#include "netpois/flowlog.hpp"
#include "netpois/stealth.hpp"
#include "netpois/trigger.hpp"

namespace netpois {

enum class Representation { windows, blocks };
std::string_view to_string(Representation r);
Representation parse_representation(std::string_view s);

struct ExperimentConfig {
  // Data
  std::string scenario_path;
  std::vector<std::string> train_logs;
  std::vector<std::string> test_logs;
  double adversary_fraction = 0.15;
  double window_seconds = kDefaultWindowSeconds;

  // Victim
  Representation representation = Representation::windows;
  ModelKind model = ModelKind::gbdt;
  GbdtParams gbdt;
  MlpParams mlp;
  AutoEncoderParams autoencoder;
  std::size_t block_len = kDefaultBlockLen;

  // Attack
  std::vector<ImportanceStrategy> strategies = {ImportanceStrategy::entropy};
  std::vector<TriggerVariant> variants = {TriggerVariant::full};
  std::vector<double> poison_rates;  // percent; empty selects the representation default
  double percentile = 95.0;
  std::size_t k = 8;
  std::size_t test_points = 200;
  std::size_t max_trigger_length = 0;  // 0 selects twice the prototype size within [10, 500]
  std::size_t block_trigger_len = 50;
  int shap_permutations = 200;
  std::size_t shap_points = 100;
  std::size_t shap_background = 100;

  // Stealth
  bool stealth = true;
  DetectionParams detection;

  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::size_t threads = 1;

  std::vector<double> effective_poison_rates() const;
  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
};

/// Reads a conn.log or a record dump, chosen by the first line.
Dataset load_records_file(const std::string& path);

/// Train-period and test-period traffic, labeled, with the internal subnets.
struct ExperimentData {
  Dataset train;
  Dataset test_period;
};

ExperimentData load_experiment_data(const ExperimentConfig& cfg);

struct StageLog {
  std::uint64_t seed = 0;
  std::string cell;  // empty for per-seed stages
  std::string stage;
  std::string message;
  double seconds = 0.0;
};

struct StealthMetrics {
  DetectionResult detection;
  std::optional<double> js_average;
  std::optional<double> js_reference;
  std::vector<std::pair<std::string, double>> js_fields;
};

struct SeedResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::optional<double> asr;
  double f1_clean = 0.0;
  double f1_poisoned = 0.0;
  double delta_f1 = 0.0;
  std::optional<double> clean_flip_rate;
  std::size_t trigger_size = 0;
  std::size_t poisoned_points = 0;
  std::size_t injected_test_points = 0;
  std::vector<std::string> selected_features;
  std::optional<StealthMetrics> stealth;
  Warnings warnings;
};

struct CellKey {
  ImportanceStrategy strategy = ImportanceStrategy::entropy;
  TriggerVariant variant = TriggerVariant::full;
  double poison_rate = 0.0;

  std::string label() const;
};

struct Summary {
  std::size_t n = 0;
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for n < 2
};
Summary summarize(const std::vector<double>& values);

struct CellReport {
  CellKey key;
  std::vector<SeedResult> seeds;  // in seed order

  nlohmann::json summary_json() const;
};

struct ExperimentReport {
  std::string version;
  ExperimentConfig config;
  std::vector<CellReport> cells;
  std::vector<StageLog> logs;

  bool all_failed() const;
};

struct Metrics {
  std::optional<double> asr;
  double f1_clean = 0.0;
  double f1_poisoned = 0.0;
  double delta_f1 = 0.0;
};

/// F1 of the positive (nontarget) class.
double f1_score(std::span<const int> truth, std::span<const int> predicted);

/// ASR is the fraction of `injected_predictions` equal to the target class
/// (0); absent when nothing was injected.
Metrics compute_metrics(std::span<const int> test_truth, std::span<const int> clean_predictions,
                        std::span<const int> poisoned_predictions, std::span<const int> injected_predictions);

ExperimentReport run_experiment(const ExperimentConfig& cfg, const ExperimentData& data);

}  // namespace netpois
