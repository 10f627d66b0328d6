#pragma once

// Detectability of poisoning: Isolation Forest detection in feature space and
// Jensen-Shannon distance between field distributions in problem space.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "netpois/flowlog.hpp"
#include "netpois/matrix.hpp"

namespace netpois {

/// Average precision over the ranking induced by `scores` (higher = more
/// anomalous); tied scores form one threshold.
double pr_auc(std::span<const double> scores, std::span<const int> positive);

/// F1 when the `k` highest scores are flagged (stable on ties).
double f1_top_k(std::span<const double> scores, std::span<const int> positive, std::size_t k);

enum class EvalPool {
  all_clean,      // poisoned points plus every clean point outside the detector subset
  balanced        // poisoned points plus an equal number of held-out clean points
};

struct DetectionParams {
  double detector_fraction = 0.10;
  int trees = 100;
  std::size_t subsample = 256;
  EvalPool pool = EvalPool::all_clean;
};

struct DetectionResult {
  std::optional<double> pr_auc;
  std::optional<double> f1;
  std::size_t detector_size = 0;
  std::size_t evaluated = 0;
  std::size_t poisoned = 0;
  std::string threshold_rule = "top-q, q = poisoned fraction of the evaluated pool";

  nlohmann::json to_json() const;
};

/// Fits an Isolation Forest on a clean subset of `features` (never a row
/// flagged in `is_poisoned`) and scores the remaining pool.
DetectionResult evaluate_anomaly_detection(const Matrix& features, std::span<const int> is_poisoned,
                                           std::uint64_t seed, const DetectionParams& params = {});

/// sqrt of the base-2 Jensen-Shannon divergence between two histograms
/// (normalized internally). Result lies in [0, 1].
double js_distance(std::span<const double> p, std::span<const double> q);

struct FieldSpec {
  std::string name;
  bool categorical = false;
};
const std::vector<FieldSpec>& default_js_fields();

/// Histograms of one field for both record sets. Numeric fields use 50 bins
/// uniform in log1p space fit on `clean`, an underflow and an overflow bin,
/// and a bin for absent values.
std::pair<std::vector<double>, std::vector<double>> field_histograms(std::span<const ConnRecord> other,
                                                                     std::span<const ConnRecord> clean,
                                                                     const FieldSpec& field);

struct JsReport {
  std::vector<std::string> fields;
  std::vector<double> distances;
  double average = 0.0;
  std::optional<double> reference;  // JS(train benign, test benign)

  nlohmann::json to_json() const;
};

JsReport jensen_shannon_report(std::span<const ConnRecord> poisoned, std::span<const ConnRecord> clean,
                               const std::vector<FieldSpec>& fields = default_js_fields());

}  // namespace netpois
