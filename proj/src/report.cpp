#include "netpois/report.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <ostream>

namespace netpois {
namespace {

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string num(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

nlohmann::json seed_json(const SeedResult& s) {
  nlohmann::json j = {{"seed", s.seed},
                      {"ok", s.ok},
                      {"asr", opt(s.asr)},
                      {"f1_clean", s.f1_clean},
                      {"f1_poisoned", s.f1_poisoned},
                      {"delta_f1", s.delta_f1},
                      {"clean_flip_rate", opt(s.clean_flip_rate)},
                      {"trigger_size", s.trigger_size},
                      {"poisoned_points", s.poisoned_points},
                      {"injected_test_points", s.injected_test_points},
                      {"selected_features", s.selected_features},
                      {"warnings", s.warnings}};
  if (!s.ok) j["error"] = s.error;
  if (s.stealth) {
    nlohmann::json fields = nlohmann::json::object();
    for (const auto& [name, d] : s.stealth->js_fields) fields[name] = d;
    j["stealth"] = {{"detection", s.stealth->detection.to_json()},
                    {"js_average", opt(s.stealth->js_average)},
                    {"js_reference", opt(s.stealth->js_reference)},
                    {"js_fields", fields}};
  } else {
    j["stealth"] = nullptr;
  }
  return j;
}

}  // namespace

nlohmann::json report_to_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["version"] = report.version;
  j["config"] = report.config.to_json();
  auto& cells = j["cells"] = nlohmann::json::array();
  for (const auto& c : report.cells) {
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& s : c.seeds) seeds.push_back(seed_json(s));
    cells.push_back({{"strategy", to_string(c.key.strategy)},
                     {"variant", to_string(c.key.variant)},
                     {"poison_rate", c.key.poison_rate},
                     {"summary", c.summary_json()},
                     {"seeds", seeds}});
  }
  return j;
}

void write_results_csv(std::ostream& out, const ExperimentReport& report) {
  out << "strategy,variant,poison_rate,seed,ok,asr,f1_clean,f1_poisoned,delta_f1,trigger_size,poisoned_points,"
         "injected_test_points,clean_flip_rate,if_pr_auc,if_f1,js_average,js_reference,error\n";
  for (const auto& c : report.cells) {
    for (const auto& s : c.seeds) {
      out << to_string(c.key.strategy) << ',' << to_string(c.key.variant) << ',' << num(c.key.poison_rate) << ','
          << s.seed << ',' << (s.ok ? 1 : 0) << ',' << num(s.asr) << ',' << num(s.f1_clean) << ','
          << num(s.f1_poisoned) << ',' << num(s.delta_f1) << ',' << s.trigger_size << ',' << s.poisoned_points << ','
          << s.injected_test_points << ',' << num(s.clean_flip_rate) << ',';
      if (s.stealth) {
        out << num(s.stealth->detection.pr_auc) << ',' << num(s.stealth->detection.f1) << ','
            << num(s.stealth->js_average) << ',' << num(s.stealth->js_reference) << ',';
      } else {
        out << ",,,,";
      }
      out << csv_field(s.ok ? std::string() : s.error) << '\n';
    }
  }
}

void write_stage_log(std::ostream& out, const ExperimentReport& report) {
  for (const auto& l : report.logs) {
    nlohmann::json j = {{"seed", l.seed}, {"cell", l.cell},       {"stage", l.stage},
                        {"message", l.message}, {"seconds", l.seconds}};
    out << j.dump() << '\n';
  }
}

void emit_report(const ExperimentReport& report, const std::string& dir) {
  if (report.cells.empty()) throw ConfigError("report has no cells");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir + ": " + ec.message());
  auto open = [&](const char* name) {
    std::ofstream f(std::filesystem::path(dir) / name, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + (std::filesystem::path(dir) / name).string());
    return f;
  };
  {
    auto f = open("report.json");
    f << report_to_json(report).dump(2) << '\n';
  }
  {
    auto f = open("results.csv");
    write_results_csv(f, report);
  }
  {
    auto f = open("stages.log");
    write_stage_log(f, report);
  }
}

}  // namespace netpois
