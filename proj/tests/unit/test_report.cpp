#include <doctest.h>

#include <fstream>
#include <sstream>

#include "e4s/error.hpp"
#include "e4s/report.hpp"
#include "published.hpp"
#include "synthetic.hpp"

using namespace e4s;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

E4sReport dataset(const std::string& name, double a, double c, double n, bool reference = false) {
  E4sReport r;
  r.dataset = name;
  r.reference = reference;
  r.at(Dimension::Adherence) = DimensionResult::make(Dimension::Adherence, a, a);
  r.at(Dimension::Consistency) = DimensionResult::make(Dimension::Consistency, 0.5, c);
  r.at(Dimension::Consistency)->detail = {{"f1", 0.1}, {"auc", 0.2}, {"brier", 0.3}, {"c_at_1", 0.4},
                                          {"f05u", 0.5}, {"consistency", 0.3}};
  r.at(Dimension::Naturalness) = DimensionResult::make(Dimension::Naturalness, 0.7, n);
  r.at(Dimension::Naturalness)->detail = {{"cs", 0.5}, {"pcr", 0.0}, {"scr", 0.0}, {"er", 0.0},
                                          {"nr", 1.0}, {"cr", 0.0}, {"naturalness", 0.7}};
  r.e4s = aggregate_e4s(a, c, n);
  return r;
}

std::vector<E4sReport> published_reports() {
  std::vector<E4sReport> v{dataset("PersonaChat", 1, 1, 1, true)};
  for (const auto& row : testing::kPublishedRows) {
    v.push_back(dataset(row.dataset, row.adherence, row.consistency, row.naturalness));
  }
  return v;
}

}  // namespace

TEST_CASE("e4s aggregate") {
  CHECK(aggregate_e4s(0.974, 0.917, 0.960) == doctest::Approx(0.9503).epsilon(1e-4));
  CHECK(aggregate_e4s(0.983, 0.877, 0.953) == doctest::Approx(0.9377).epsilon(1e-4));
  CHECK(aggregate_e4s(1, 1, 1) == 1.0);
  CHECK_THROWS_AS(aggregate_e4s(std::nan(""), 1, 1), DataError);
  CHECK(offset_percent(0.974) == doctest::Approx(-2.6));
  CHECK(offset_percent(1.0) == 0.0);
}

TEST_CASE("competition ranking") {
  const std::vector<double> v{0.9, 0.95, 0.9, 0.8};
  CHECK(competition_ranks(v) == std::vector<std::size_t>{2, 1, 2, 4});
  const std::vector<double> tie{0.5, 0.5, 0.4};
  CHECK(competition_ranks(tie) == std::vector<std::size_t>{1, 1, 3});
  CHECK(competition_ranks(std::vector<double>{}).empty());
}

TEST_CASE("published similarity columns reproduce e4s and positions") {
  auto reports = published_reports();
  rank_datasets(reports);
  CHECK_FALSE(reports[0].position.has_value());
  for (std::size_t i = 0; i < testing::kPublishedRows.size(); ++i) {
    const auto& row = testing::kPublishedRows[i];
    const auto& r = reports[i + 1];
    INFO(row.dataset);
    CHECK(*r.e4s == doctest::Approx(row.e4s).epsilon(0.001 / row.e4s));
    CHECK(*r.position == row.e4s_pos);
    CHECK(*r.positions[1] == row.consistency_pos);
    CHECK(*r.positions[2] == row.naturalness_pos);
  }
}

TEST_CASE("missing dimension leaves no e4s position") {
  std::vector<E4sReport> reports{dataset("ref", 1, 1, 1, true), dataset("a", 0.9, 0.9, 0.9), dataset("b", 0.8, 0.8, 0.8)};
  reports[1].at(Dimension::Naturalness).reset();
  reports[1].e4s.reset();
  rank_datasets(reports);
  CHECK_FALSE(reports[1].position.has_value());
  CHECK(*reports[2].position == 1);
  CHECK(*reports[1].positions[0] == 1);
  CHECK(*reports[2].positions[0] == 2);
  CHECK_FALSE(reports[1].positions[2].has_value());
  CHECK(*reports[2].positions[2] == 1);
}

TEST_CASE("format3") {
  CHECK(format3(0.9503) == "0.950");
  CHECK(format3(-0.0001) == "0.000");
  CHECK(format3(1.0) == "1.000");
}

TEST_CASE("emitted files") {
  RunReport run;
  run.datasets = published_reports();
  rank_datasets(run.datasets);
  run.metadata = {{"tool", "e4s"}, {"seed", 0}};
  run.failures.push_back({"broken", "naturalness", "provider", "missing NLI record"});
  const fs::path dir = fs::temp_directory_path() / "e4s-tests" / "report";
  fs::remove_all(dir);
  const auto written = emit_report(run, dir);
  for (const char* f : {"report.json", "consistency.csv", "naturalness.csv", "e4s.csv", "summary.md", "failures.json"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK(written.size() == 6);

  const auto cons = slurp(dir / "consistency.csv");
  CHECK(cons.rfind("dataset,f1,auc,brier,c_at_1,f05u,consistency,similarity,offset\n", 0) == 0);
  const auto nat = slurp(dir / "naturalness.csv");
  CHECK(nat.rfind("dataset,cs,pcr,scr,er,nr,cr,naturalness,similarity,offset\n", 0) == 0);
  std::istringstream lines(cons);
  std::size_t n = 0;
  for (std::string l; std::getline(lines, l);) ++n;
  CHECK(n == 12);

  // Summary rows follow descending e4s.
  const auto md = slurp(dir / "summary.md");
  std::size_t last = 0;
  for (const auto& row : testing::kPublishedRows) {
    const auto at = md.find(std::string("| ") + row.dataset + " |");
    REQUIRE(at != std::string::npos);
    CHECK(at > last);
    last = at;
  }
  CHECK(md.find("0.950") != std::string::npos);

  std::ifstream in(dir / "report.json");
  const auto j = nlohmann::json::parse(in);
  const auto back = run_report_from_json(j);
  CHECK(to_json(back) == j);
  CHECK(back.failures.size() == 1);
  CHECK(back.failures[0].kind == "provider");

  // Re-rendering from JSON reproduces the CSV byte for byte.
  const fs::path again = dir / "again";
  emit_report(back, again, {ReportFormat::Csv});
  CHECK(slurp(again / "e4s.csv") == slurp(dir / "e4s.csv"));
  CHECK_FALSE(fs::exists(again / "report.json"));
}

TEST_CASE("malformed report json") {
  CHECK_THROWS_AS(run_report_from_json(nlohmann::json::array()), DataError);
  CHECK_THROWS_AS(run_report_from_json({{"datasets", 3}}), DataError);
  CHECK(parse_report_format("markdown") == ReportFormat::Markdown);
  CHECK_FALSE(parse_report_format("xml").has_value());
}
