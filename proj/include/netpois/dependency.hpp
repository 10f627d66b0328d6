#pragma once

// Pairwise field associations of connection records.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "netpois/flowlog.hpp"

namespace netpois {

inline constexpr std::size_t kNmiBins = 20;

struct DependencyReport {
  std::vector<std::string> fields;
  std::vector<std::vector<double>> nmi;          // symmetric, diagonal 1 unless constant
  std::vector<std::vector<double>> correlation;  // NaN where a field is categorical or constant

  /// The k strongest off-diagonal NMI pairs, ties broken by field order.
  std::vector<std::pair<std::string, std::string>> top_pairs(std::size_t k) const;
  nlohmann::json to_json() const;
};

const std::vector<std::string>& dependency_fields();

/// Integer codes for a field: category ids for categorical fields,
/// equal-frequency bin ids for numeric ones.
std::vector<int> discretize_field(std::span<const ConnRecord> records, const std::string& field,
                                  std::size_t bins = kNmiBins);

/// I(X;Y)/sqrt(H(X)H(Y)); 0 if either variable is constant.
double normalized_mutual_information(std::span<const int> x, std::span<const int> y);

/// Codes for equal-frequency bins of `values`; equal values share a bin.
std::vector<int> equal_frequency_bins(std::span<const double> values, std::size_t bins);

DependencyReport dependency_matrices(std::span<const ConnRecord> records);

}  // namespace netpois
