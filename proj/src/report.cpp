#include "e4s/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "e4s/error.hpp"

namespace e4s {
namespace {

using json = nlohmann::json;

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  return out;
}

std::string cell(const std::optional<double>& v) { return v ? format3(*v) : ""; }
std::string cell(const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : ""; }

std::optional<double> detail_number(const std::optional<DimensionResult>& d, const char* key) {
  if (!d || !d->detail.contains(key) || !d->detail[key].is_number()) return std::nullopt;
  return d->detail[key].get<double>();
}

std::optional<double> similarity(const std::optional<DimensionResult>& d) {
  if (!d) return std::nullopt;
  return d->similarity;
}

std::optional<double> offset(const std::optional<DimensionResult>& d) {
  if (!d) return std::nullopt;
  return d->offset_percent;
}

void write_consistency_csv(const RunReport& r, std::ostream& out) {
  out << "dataset,f1,auc,brier,c_at_1,f05u,consistency,similarity,offset\n";
  for (const auto& d : r.datasets) {
    const auto& c = d.at(Dimension::Consistency);
    if (!c) continue;
    out << d.dataset;
    for (const char* k : {"f1", "auc", "brier", "c_at_1", "f05u", "consistency"}) out << ',' << cell(detail_number(c, k));
    out << ',' << cell(similarity(c)) << ',' << cell(offset(c)) << '\n';
  }
}

void write_naturalness_csv(const RunReport& r, std::ostream& out) {
  out << "dataset,cs,pcr,scr,er,nr,cr,naturalness,similarity,offset\n";
  for (const auto& d : r.datasets) {
    const auto& n = d.at(Dimension::Naturalness);
    if (!n) continue;
    out << d.dataset;
    for (const char* k : {"cs", "pcr", "scr", "er", "nr", "cr", "naturalness"}) out << ',' << cell(detail_number(n, k));
    out << ',' << cell(similarity(n)) << ',' << cell(offset(n)) << '\n';
  }
}

void write_e4s_csv(const RunReport& r, std::ostream& out) {
  out << "dataset";
  for (Dimension dim : kDimensions) {
    const std::string n(to_string(dim));
    out << ',' << n << "_similarity," << n << "_offset," << n << "_position";
  }
  out << ",e4s,e4s_offset,position\n";
  for (const auto& d : r.datasets) {
    out << d.dataset;
    for (Dimension dim : kDimensions) {
      const auto& x = d.at(dim);
      out << ',' << cell(similarity(x)) << ',' << cell(offset(x)) << ',' << cell(d.positions[static_cast<std::size_t>(dim)]);
    }
    std::optional<double> e_off;
    if (d.e4s) e_off = offset_percent(*d.e4s);
    out << ',' << cell(d.e4s) << ',' << cell(e_off) << ',' << cell(d.position) << '\n';
  }
}

void write_summary_md(const RunReport& r, std::ostream& out) {
  std::vector<const E4sReport*> rows;
  for (const auto& d : r.datasets) rows.push_back(&d);
  std::stable_sort(rows.begin(), rows.end(), [](const E4sReport* a, const E4sReport* b) {
    if (a->e4s.has_value() != b->e4s.has_value()) return a->e4s.has_value();
    if (a->e4s && *a->e4s != *b->e4s) return *a->e4s > *b->e4s;
    return a->dataset < b->dataset;
  });
  out << "| Dataset | Adherence | Consistency | Naturalness | e4s | Position |\n";
  out << "|---|---|---|---|---|---|\n";
  auto md = [](const std::string& s) { return s.empty() ? std::string("n/a") : s; };
  for (const E4sReport* d : rows) {
    out << "| " << d->dataset << (d->reference ? " (reference)" : "");
    for (Dimension dim : kDimensions) out << " | " << md(cell(similarity(d->at(dim))));
    out << " | " << md(cell(d->e4s)) << " | " << (d->reference ? "-" : md(cell(d->position))) << " |\n";
  }
  if (!r.failures.empty()) {
    out << "\nFailures:\n\n";
    for (const auto& f : r.failures) out << "- " << f.dataset << " / " << f.dimension << ": " << f.message << '\n';
  }
  if (!r.warnings.empty()) {
    out << "\nWarnings:\n\n";
    for (const auto& w : r.warnings) out << "- " << w << '\n';
  }
}

json dimension_json(const DimensionResult& d) {
  return json{{"dimension", to_string(d.dimension)}, {"raw_score", d.raw_score},   {"similarity", d.similarity},
              {"offset_percent", d.offset_percent},  {"artifacts", d.artifacts}, {"detail", d.detail}};
}

json optional_json(const auto& v) { return v ? json(*v) : json(nullptr); }

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<T>();
}

json failures_json(const std::vector<Failure>& failures) {
  json arr = json::array();
  for (const auto& f : failures) {
    arr.push_back({{"dataset", f.dataset}, {"dimension", f.dimension}, {"kind", f.kind}, {"message", f.message}});
  }
  return arr;
}

}  // namespace

std::string_view to_string(Dimension d) {
  switch (d) {
    case Dimension::Adherence: return "adherence";
    case Dimension::Consistency: return "consistency";
    case Dimension::Naturalness: return "naturalness";
  }
  return "adherence";
}

std::optional<Dimension> parse_dimension(std::string_view s) {
  for (Dimension d : kDimensions) {
    if (to_string(d) == s) return d;
  }
  return std::nullopt;
}

double offset_percent(double similarity) { return (similarity - 1.0) * 100.0; }

DimensionResult DimensionResult::make(Dimension d, double raw, double sim) {
  DimensionResult r;
  r.dimension = d;
  r.raw_score = raw;
  r.similarity = sim;
  r.offset_percent = e4s::offset_percent(sim);
  return r;
}

double aggregate_e4s(double a, double c, double n) {
  if (!std::isfinite(a) || !std::isfinite(c) || !std::isfinite(n)) throw DataError("e4s: non-finite similarity");
  return (a + c + n) / 3.0;
}

std::vector<std::size_t> competition_ranks(std::span<const double> values) {
  std::vector<std::size_t> ranks(values.size(), 1);
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (double v : values) ranks[i] += v > values[i];
  }
  return ranks;
}

void rank_datasets(std::vector<E4sReport>& reports) {
  auto rank_by = [&](auto get, auto set) {
    std::vector<std::size_t> who;
    std::vector<double> vals;
    for (std::size_t i = 0; i < reports.size(); ++i) {
      set(reports[i], std::nullopt);
      if (reports[i].reference) continue;
      if (auto v = get(reports[i])) {
        who.push_back(i);
        vals.push_back(*v);
      }
    }
    const auto ranks = competition_ranks(vals);
    for (std::size_t k = 0; k < who.size(); ++k) set(reports[who[k]], ranks[k]);
  };
  for (Dimension dim : kDimensions) {
    const auto idx = static_cast<std::size_t>(dim);
    rank_by([&](const E4sReport& r) { return similarity(r.dimensions[idx]); },
            [&](E4sReport& r, std::optional<std::size_t> p) { r.positions[idx] = p; });
  }
  rank_by([](const E4sReport& r) { return r.e4s; },
          [](E4sReport& r, std::optional<std::size_t> p) { r.position = p; });
}

json to_json(const RunReport& report) {
  json datasets = json::array();
  for (const auto& d : report.datasets) {
    json dims = json::object();
    json positions = json::object();
    for (Dimension dim : kDimensions) {
      const auto idx = static_cast<std::size_t>(dim);
      dims[std::string(to_string(dim))] = d.dimensions[idx] ? dimension_json(*d.dimensions[idx]) : json(nullptr);
      positions[std::string(to_string(dim))] = optional_json(d.positions[idx]);
    }
    positions["e4s"] = optional_json(d.position);
    json e = {{"dataset", d.dataset}, {"reference", d.reference}, {"dimensions", dims},
              {"e4s", optional_json(d.e4s)}, {"positions", positions}};
    e["e4s_offset_percent"] = d.e4s ? json(offset_percent(*d.e4s)) : json(nullptr);
    datasets.push_back(std::move(e));
  }
  json j = report.metadata;
  j["datasets"] = std::move(datasets);
  j["failures"] = failures_json(report.failures);
  j["warnings"] = report.warnings;
  return j;
}

RunReport run_report_from_json(const json& j) {
  if (!j.is_object() || !j.contains("datasets")) throw DataError("report document has no datasets");
  RunReport r;
  try {
    for (const auto& [k, v] : j.items()) {
      if (k != "datasets" && k != "failures" && k != "warnings") r.metadata[k] = v;
    }
    for (const auto& e : j.at("datasets")) {
      E4sReport d;
      d.dataset = e.at("dataset").get<std::string>();
      d.reference = e.at("reference").get<bool>();
      for (Dimension dim : kDimensions) {
        const auto idx = static_cast<std::size_t>(dim);
        const std::string name(to_string(dim));
        const json& x = e.at("dimensions").at(name);
        if (!x.is_null()) {
          DimensionResult res;
          res.dimension = dim;
          res.raw_score = x.at("raw_score").get<double>();
          res.similarity = x.at("similarity").get<double>();
          res.offset_percent = x.at("offset_percent").get<double>();
          res.artifacts = x.at("artifacts").get<std::map<std::string, std::string>>();
          res.detail = x.at("detail");
          d.dimensions[idx] = std::move(res);
        }
        d.positions[idx] = optional_from<std::size_t>(e.at("positions"), name.c_str());
      }
      d.e4s = optional_from<double>(e, "e4s");
      d.position = optional_from<std::size_t>(e.at("positions"), "e4s");
      r.datasets.push_back(std::move(d));
    }
    if (j.contains("failures")) {
      for (const auto& f : j["failures"]) {
        r.failures.push_back({f.at("dataset").get<std::string>(), f.at("dimension").get<std::string>(),
                              f.at("kind").get<std::string>(), f.at("message").get<std::string>()});
      }
    }
    if (j.contains("warnings")) r.warnings = j["warnings"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report document: ") + e.what());
  }
  return r;
}

std::optional<ReportFormat> parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "markdown" || s == "md") return ReportFormat::Markdown;
  return std::nullopt;
}

std::vector<std::filesystem::path> emit_report(const RunReport& report, const std::filesystem::path& dir,
                                               const std::set<ReportFormat>& formats) {
  if (report.datasets.empty()) throw DataError("no reports to emit");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;
  auto emit = [&](const char* name, auto&& writer) {
    const auto p = dir / name;
    auto out = open_out(p);
    writer(out);
    if (!out) throw ConfigError("failed writing " + p.string());
    written.push_back(p);
  };
  if (formats.contains(ReportFormat::Json)) {
    emit("report.json", [&](std::ostream& o) { o << to_json(report).dump(2) << '\n'; });
  }
  if (formats.contains(ReportFormat::Csv)) {
    emit("consistency.csv", [&](std::ostream& o) { write_consistency_csv(report, o); });
    emit("naturalness.csv", [&](std::ostream& o) { write_naturalness_csv(report, o); });
    emit("e4s.csv", [&](std::ostream& o) { write_e4s_csv(report, o); });
  }
  if (formats.contains(ReportFormat::Markdown)) {
    emit("summary.md", [&](std::ostream& o) { write_summary_md(report, o); });
  }
  if (!report.failures.empty()) {
    emit("failures.json", [&](std::ostream& o) { o << failures_json(report.failures).dump(2) << '\n'; });
  }
  return written;
}

std::string format3(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s(buf);
  if (s == "-0.000") s = "0.000";
  return s;
}

}  // namespace e4s
