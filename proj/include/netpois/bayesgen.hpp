#pragma once

// Fixed-structure Bayesian network over conn.log fields and the generated
// trigger built from it.

#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "netpois/featurize.hpp"
#include "netpois/kde.hpp"
#include "netpois/trigger.hpp"

namespace netpois {

/// Categorical node: one smoothed distribution per observed parent context.
struct Cpt {
  std::string node;
  std::vector<std::string> parents;
  std::map<std::string, std::map<std::string, double>> rows;  // context -> value -> p
  std::map<std::string, double> marginal;
};

/// Context key for a CPT row: parent values joined by '|'.
std::string context_key(const std::vector<std::string>& parent_values);

struct SampleTrace {
  std::vector<std::string> fallbacks;  // nodes sampled from their marginal
  Warnings warnings;
};

class BayesNet {
 public:
  static constexpr std::size_t kPktBuckets = 10;
  static constexpr std::size_t kMaxEmpirical = 10000;

  static const std::vector<std::string>& nodes();
  static const std::vector<std::pair<std::string, std::string>>& edges();
  /// Fields accepted by sample_connection as fixed values.
  static const std::vector<std::string>& fixable_fields();

  /// Fit on target-class records of the adversary's data.
  static BayesNet fit(std::span<const ConnRecord> records, std::span<const Cidr> internal_subnets);

  /// Samples the fields not in `fixed` in topological order. Fixed values are
  /// never altered; values unseen at fit time are kept and reported.
  ConnRecord sample_connection(const std::map<std::string, std::string>& fixed, Rng& rng,
                               SampleTrace* trace = nullptr) const;

  const Cpt& cpt(const std::string& node) const;
  const GaussianKde& orig_pkts_kde() const { return orig_pkts_; }
  const std::optional<GaussianKde>& orig_bpp_kde() const { return orig_bpp_; }
  const std::optional<GaussianKde>& resp_bpp_kde() const { return resp_bpp_; }
  std::size_t pkt_bucket(double orig_pkts) const;
  std::size_t record_count() const { return n_records_; }
  const std::vector<std::string>& notes() const { return notes_; }
  const std::vector<IpAddr>& responders() const { return responders_; }

  nlohmann::json to_json() const;
  static BayesNet from_json(const nlohmann::json& j);
  void save(std::ostream& out) const;
  static BayesNet load(std::istream& in);

 private:
  std::map<std::string, Cpt> cpts_;
  GaussianKde orig_pkts_;
  std::vector<double> bucket_cuts_;
  std::vector<std::optional<GaussianKde>> resp_pkts_by_bucket_;
  GaussianKde resp_pkts_;
  std::optional<GaussianKde> orig_bpp_, resp_bpp_;
  std::vector<std::optional<double>> durations_;
  std::vector<IpAddr> responders_;
  std::size_t n_records_ = 0;
  std::vector<std::string> notes_;
};

struct GenerateParams {
  Proto proto = Proto::tcp;
  std::uint16_t key_port = 0;
  std::vector<std::size_t> selected;
  std::vector<double> target;  // prototype values on the selected features
};

/// Smallest set of sampled connections whose selected count, sum and
/// distinct features equal the prototype's. Min and max features are not
/// enforced.
Trigger generate_trigger(const BayesNet& bn, const GenerateParams& params, std::span<const Cidr> internal_subnets,
                         const FeatureNormalizer& normalizer, std::uint64_t seed);

}  // namespace netpois
