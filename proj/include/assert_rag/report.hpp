#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include <json.hpp>

#include "assert_rag/corpus.hpp"
#include "assert_rag/error.hpp"
#include "assert_rag/harness.hpp"

namespace assert_rag {

enum class ReportFormat { Json, Csv, Table };

inline std::optional<ReportFormat> parse_report_format(std::string_view s) noexcept {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "table" || s == "text-table") return ReportFormat::Table;
  return std::nullopt;
}

namespace detail {

template <typename T>
nlohmann::json optional_json(const std::optional<T>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

}  // namespace detail

inline nlohmann::json to_json(const EvalRecord& r) {
  nlohmann::json j{{"query_id", r.query_id},
                   {"prediction", r.prediction},
                   {"reference", r.reference},
                   {"exact", r.exact},
                   {"codebleu", r.codebleu_total},
                   {"assert_type", std::string(to_string(r.assert_type))},
                   {"retrieved_id", detail::optional_json(r.retrieved_id)},
                   {"jac", detail::optional_json(r.jac)},
                   {"cos", detail::optional_json(r.cos)},
                   {"sim", detail::optional_json(r.sim)}};
  if (r.error) j["error"] = *r.error;
  return j;
}

/// Canonical form excludes wall-clock data so identical runs serialize to
/// identical bytes.
inline nlohmann::json to_json(const EvalReport& report, bool include_timing = false) {
  nlohmann::json per_type = nlohmann::json::object();
  for (const auto& [type, tally] : report.per_type)
    per_type[std::string(to_string(type))] = {{"correct", tally.correct}, {"total", tally.total}};
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : report.records) records.push_back(to_json(r));
  nlohmann::json j{{"run_name", report.run_name},
                   {"config", report.config},
                   {"records", std::move(records)},
                   {"aggregates",
                    {{"count", report.records.size()},
                     {"exact", report.exact_count()},
                     {"accuracy", report.accuracy},
                     {"codebleu_mean", report.codebleu_mean},
                     {"per_type", std::move(per_type)}}}};
  if (include_timing) j["timing"] = {{"elapsed_seconds", report.elapsed_seconds}};
  return j;
}

inline std::string canonical_json(const EvalReport& report) { return to_json(report, false).dump(2) + "\n"; }

/// Parses a report and checks that the stored aggregates agree with the ones
/// recomputed from its records.
inline EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.run_name = j.at("run_name").get<std::string>();
    r.config = j.at("config");
    for (const auto& jr : j.at("records")) {
      EvalRecord rec;
      rec.query_id = jr.at("query_id").get<PairId>();
      rec.prediction = jr.at("prediction").get<std::string>();
      rec.reference = jr.at("reference").get<std::string>();
      rec.exact = jr.at("exact").get<bool>();
      rec.codebleu_total = jr.at("codebleu").get<double>();
      const auto type = parse_assert_type(jr.at("assert_type").get<std::string>());
      if (!type) throw Error(ErrorCode::MalformedRecord, "unknown assert_type in report");
      rec.assert_type = *type;
      rec.retrieved_id = detail::optional_from<PairId>(jr, "retrieved_id");
      rec.jac = detail::optional_from<double>(jr, "jac");
      rec.cos = detail::optional_from<double>(jr, "cos");
      rec.sim = detail::optional_from<double>(jr, "sim");
      rec.error = detail::optional_from<std::string>(jr, "error");
      r.records.push_back(std::move(rec));
    }
    if (j.contains("timing")) r.elapsed_seconds = j["timing"].value("elapsed_seconds", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedRecord, std::string("bad report: ") + e.what());
  }
  compute_aggregates(r);

  const auto& agg = j.at("aggregates");
  bool consistent = agg.at("count").get<std::size_t>() == r.records.size() &&
                    agg.at("exact").get<std::size_t>() == r.exact_count() &&
                    agg.at("accuracy").get<double>() == r.accuracy &&
                    std::abs(agg.at("codebleu_mean").get<double>() - r.codebleu_mean) <= 1e-12;
  for (const auto& [type, tally] : r.per_type) {
    const auto& t = agg.at("per_type").at(std::string(to_string(type)));
    consistent = consistent && t.at("correct").get<std::size_t>() == tally.correct &&
                 t.at("total").get<std::size_t>() == tally.total;
  }
  if (!consistent) throw Error(ErrorCode::MalformedRecord, "report aggregates disagree with its records");
  return r;
}

inline EvalReport load_report(const std::filesystem::path& path) {
  try {
    return report_from_json(nlohmann::json::parse(detail::read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::MalformedRecord, path.string() + ": " + e.what());
  }
}

namespace detail {

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string fmt_double(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, v);
  return buf;
}

template <typename T>
std::string csv_optional(const std::optional<T>& v) {
  if (!v) return "";
  if constexpr (std::is_floating_point_v<T>) {
    nlohmann::json j = *v;
    return j.dump();
  } else {
    return std::to_string(*v);
  }
}

}  // namespace detail

inline std::string to_csv(const EvalReport& report) {
  std::string out = "query_id,assert_type,exact,codebleu,retrieved_id,jac,cos,sim,prediction,reference,error\n";
  for (const auto& r : report.records) {
    out += std::to_string(r.query_id) + ',';
    out += std::string(to_string(r.assert_type)) + ',';
    out += r.exact ? "1," : "0,";
    out += nlohmann::json(r.codebleu_total).dump() + ',';
    out += detail::csv_optional(r.retrieved_id) + ',';
    out += detail::csv_optional(r.jac) + ',';
    out += detail::csv_optional(r.cos) + ',';
    out += detail::csv_optional(r.sim) + ',';
    out += detail::csv_field(r.prediction) + ',';
    out += detail::csv_field(r.reference) + ',';
    out += detail::csv_field(r.error.value_or(""));
    out += '\n';
  }
  return out;
}

/// Aggregates plus the per-assertion-type breakdown (correct, total, ratio).
inline std::string to_table(const EvalReport& report) {
  std::ostringstream os;
  const auto row = [&os](std::string_view label, const std::string& correct, const std::string& total,
                         const std::string& ratio) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-12.*s %9s %9s %9s\n", static_cast<int>(label.size()), label.data(),
                  correct.c_str(), total.c_str(), ratio.c_str());
    os << buf;
  };
  const auto pct = [](std::size_t a, std::size_t b) {
    return b == 0 ? std::string("-") : detail::fmt_double(100.0 * static_cast<double>(a) / static_cast<double>(b), 2) + "%";
  };
  os << "run: " << report.run_name << "\n";
  if (report.config.is_object()) {
    os << "mode: " << report.config.value("mode", std::string("?"))
       << "  lambda: " << report.config.value("lambda", 0.0)
       << "  backend: " << report.config.value("backend", std::string("?")) << "\n";
  }
  row("AssertType", "Correct", "Total", "Ratio");
  std::size_t correct = 0;
  std::size_t total = 0;
  for (const auto t : kAllAssertTypes) {
    const auto it = report.per_type.find(t);
    const TypeTally tally = it == report.per_type.end() ? TypeTally{} : it->second;
    row(to_string(t), std::to_string(tally.correct), std::to_string(tally.total), pct(tally.correct, tally.total));
    correct += tally.correct;
    total += tally.total;
  }
  row("Total", std::to_string(correct), std::to_string(total), pct(correct, total));
  os << "accuracy: " << detail::fmt_double(100.0 * report.accuracy, 2) << "%\n";
  os << "codebleu: " << detail::fmt_double(100.0 * report.codebleu_mean, 2) << "%\n";
  return os.str();
}

inline std::string render(const EvalReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Json: return to_json(report, true).dump(2) + "\n";
    case ReportFormat::Csv: return to_csv(report);
    case ReportFormat::Table: return to_table(report);
  }
  return {};
}

inline void report_emit(const EvalReport& report, ReportFormat format, const std::filesystem::path& path) {
  detail::write_file(path, render(report, format));
}

inline nlohmann::json to_json(const OverlapReport& o) {
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : o.cells) {
    nlohmann::json names = nlohmann::json::array();
    for (const auto i : c.runs) names.push_back(o.run_names[i]);
    cells.push_back({{"runs", c.runs}, {"names", std::move(names)}, {"count", c.count}});
  }
  return nlohmann::json{{"runs", o.run_names},       {"queries", o.queries},
                        {"correct", o.correct},      {"unique", o.unique},
                        {"correct_in_any", o.correct_in_any}, {"correct_in_all", o.correct_in_all},
                        {"cells", std::move(cells)}};
}

}  // namespace assert_rag
