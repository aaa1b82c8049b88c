// One line per acceptance criterion; exit status is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "e4s/adherence.hpp"
#include "e4s/consistency.hpp"
#include "e4s/naturalness.hpp"
#include "e4s/pipeline.hpp"
#include "e4s/report.hpp"
#include "published.hpp"
#include "synthetic.hpp"

using namespace e4s;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::string detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) detail = what;
    ok = ok && cond;
  }
  void near(double got, double want, double tol, const std::string& what) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: got %.12g, want %.12g +- %.1g", what.c_str(), got, want, tol);
    expect(std::abs(got - want) <= tol, buf);
  }
};

int failures = 0;

void criterion(const char* name, const std::function<void(Check&)>& body) {
  Check c;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.expect(false, std::string("exception: ") + e.what());
  }
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%s  %-44s %9.1f ms  %s\n", c.ok ? "PASS" : "FAIL", name, ms, c.detail.c_str());
  std::fflush(stdout);
  if (!c.ok) ++failures;
}

MrrCurve make_curve(const std::vector<std::size_t>& sizes, const std::vector<double>& mrr) {
  MrrCurve c;
  for (std::size_t i = 0; i < sizes.size(); ++i) c.points.push_back({sizes[i], mrr[i], 0, 1, mrr[i], mrr[i]});
  return c;
}

std::string corpus_file(const std::string& name, const testing::SyntheticOptions& opts) {
  std::ostringstream out;
  write_jsonl(testing::synthetic_corpus(opts), out);
  return testing::write_temp(name, out.str());
}

}  // namespace

int main() {
  criterion("curve similarity properties", [](Check& c) {
    const std::vector<double> w = span_weights(std::vector<std::size_t>{1, 5, 10});
    c.expect(w == std::vector<double>{4, 4.5, 5}, "span weights of {1,5,10}");
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    const auto sizes = default_pool_sizes();
    for (int t = 0; t < 100; ++t) {
      std::vector<double> a(sizes.size()), b(sizes.size());
      for (auto& x : a) x = u(rng);
      for (auto& x : b) x = u(rng);
      const auto ca = make_curve(sizes, a), cb = make_curve(sizes, b);
      c.near(curve_similarity(ca, ca), 1.0, 1e-12, "identity");
      c.near(curve_similarity(ca, cb), curve_similarity(cb, ca), 1e-12, "symmetry");
      for (double k : {0.1, 0.5, 2.0, 10.0}) {
        std::vector<double> s = a;
        for (auto& x : s) x *= k;
        c.near(curve_similarity(ca, make_curve(sizes, s)), std::min(k, 1 / k), 1e-9, "scale law");
      }
    }
  });

  criterion("speaker-aware interpolation", [](Check& c) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 1);
    for (int t = 0; t < 100; ++t) {
      const double f = u(rng), g = u(rng);
      c.expect(blend_scores(f, g, 0.0) == f, "alpha = 0 reproduces the full-index score");
      c.expect(blend_scores(f, g, 1.0) == g, "alpha = 1 reproduces the target-index score");
      double prev = blend_scores(f, g, 0.0);
      for (int i = 1; i <= 100; ++i) {
        const double v = blend_scores(f, g, i / 100.0);
        c.expect(g >= f ? v >= prev - 1e-15 : v <= prev + 1e-15, "monotone in alpha");
        prev = v;
      }
    }
  });

  criterion("consistency arithmetic", [](Check& c) {
    c.near((0.662 + 0.442 + 0.743 + 0.495 + 0.551) / 5, 0.578, 0.001, "reference consistency");
    c.near(consistency_similarity(0.592, 0.578), 0.976, 0.001, "similarity(0.592, 0.578)");
    c.near(consistency_similarity(0.625, 0.578), 0.919, 0.001, "similarity(0.625, 0.578)");
  });

  criterion("naturalness arithmetic", [](Check& c) {
    c.near(naturalness_score(0.555, 0.006, 0.017), 0.729, 0.001, "reference naturalness");
    c.near(naturalness_score(0.601, 0.004, 0.011), 0.758, 0.001, "naturalness of 0.601/0.004/0.011");
    c.near(naturalness_similarity(0.758, 0.729), 0.960, 0.001, "similarity(0.758, 0.729)");
    c.near(naturalness_similarity(0.828, 0.729), 0.864, 0.001, "similarity(0.828, 0.729)");
    // Coherence against the turn-pair label mix, on mocked runs.
    const auto corpus = testing::synthetic_corpus({.conversations = 20});
    for (int run = 0; run < 4; ++run) {
      std::shared_ptr<NliProvider> p;
      MockNli m = run == 0   ? MockNli::hashed()
                  : run == 1 ? MockNli::fixed({NliLabel::Neutral, 1.0})
                  : run == 2 ? MockNli::fixed({NliLabel::Entailment, 0.8})
                             : MockNli::fixed({NliLabel::Contradiction, 0.9});
      const auto r = evaluate_naturalness(corpus, m).report;
      const std::size_t n = r.turn_pairs;
      // 2 * cs * n == 2 * e + nu, all integers.
      c.expect(std::llround(2 * r.cs * static_cast<double>(n)) == static_cast<long long>(2 * r.entailments + r.neutrals),
               "cs = er + 0.5 nr on counts");
      c.near(r.cs, r.er + 0.5 * r.nr, 4e-16, "cs = er + 0.5 nr");
    }
  });

  criterion("overall scores and ranking", [](Check& c) {
    std::vector<E4sReport> reports(1);
    reports[0].dataset = "reference";
    reports[0].reference = true;
    for (const auto& row : testing::kPublishedRows) {
      E4sReport r;
      r.dataset = row.dataset;
      r.at(Dimension::Adherence) = DimensionResult::make(Dimension::Adherence, 0, row.adherence);
      r.at(Dimension::Consistency) = DimensionResult::make(Dimension::Consistency, 0, row.consistency);
      r.at(Dimension::Naturalness) = DimensionResult::make(Dimension::Naturalness, 0, row.naturalness);
      r.e4s = aggregate_e4s(row.adherence, row.consistency, row.naturalness);
      reports.push_back(std::move(r));
    }
    rank_datasets(reports);
    c.near(*reports[1].e4s, 0.950, 0.001, "e4s of the first row");
    c.near(*reports[2].e4s, 0.938, 0.001, "e4s of the second row");
    c.near(*reports[10].e4s, 0.885, 0.001, "e4s of the last row");
    for (std::size_t i = 0; i < testing::kPublishedRows.size(); ++i) {
      c.expect(*reports[i + 1].position == testing::kPublishedRows[i].e4s_pos,
               std::string("overall position of ") + testing::kPublishedRows[i].dataset);
    }
  });

  criterion("PAN metric oracles", [](Check& c) {
    using T = PairTruth;
    const std::vector<double> s10{0.9, 0.9, 0.9, 0.9, 0.1, 0.1, 0.9, 0.1, 0.5, 0.5};
    const std::vector<T> y10{T::Same, T::Same, T::Same, T::Different, T::Different, T::Different, T::Different,
                             T::Different, T::Same, T::Different};
    c.expect(pan_metrics(s10, y10).c_at_1 == 0.72, "c@1 toy case is 0.72");
    const std::vector<double> s2{0.8, 0.3};
    const std::vector<T> y2{T::Same, T::Different};
    c.near(pan_metrics(s2, y2).brier, 0.935, 0.0, "brier complement toy case");
    const std::vector<double> sp{1, 1, 0, 0};
    const std::vector<T> yp{T::Same, T::Same, T::Different, T::Different};
    const auto m = pan_metrics(sp, yp);
    c.expect(m.f1 == 1 && m.auc == 1 && m.brier == 1 && m.c_at_1 == 1 && m.f05u == 1 && m.consistency == 1,
             "perfect predictions give 1.0 everywhere");
    // Counting the 0.5 pair as a miss would give F1 = 2/3.
    const std::vector<double> su{0.9, 0.5, 0.1};
    const std::vector<T> yu{T::Same, T::Same, T::Different};
    c.expect(pan_metrics(su, yu).f1 == 1.0, "F1 excludes non-decisions");
  });

  criterion("calibration contract", [](Check& c) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> grid(0.01, 0.99), u(0, 1);
    for (int t = 0; t < 1000; ++t) {
      double p1 = grid(rng), p2 = grid(rng);
      if (p1 > p2) std::swap(p1, p2);
      const CalibrationParams p{p1, p2};
      double a = u(rng), b = u(rng);
      if (a > b) std::swap(a, b);
      const double ca = calibrate_score(a, p), cb = calibrate_score(b, p);
      c.expect(ca <= cb, "monotone");
      c.expect(ca >= 0 && cb <= 1, "within [0, 1]");
      const double mid = p1 + (p2 - p1) * u(rng);
      c.expect(calibrate_score(mid, p) == 0.5 && calibrate_score(p1, p) == 0.5 && calibrate_score(p2, p) == 0.5,
               "0.5 on [p1, p2]");
    }
  });

  criterion("self-comparison on 200 conversations", [](Check& c) {
    const auto t0 = std::chrono::steady_clock::now();
    RunConfig cfg;
    cfg.reference = corpus_file("accept-ref.jsonl", {.conversations = 200});
    cfg.simulations = {corpus_file("accept-copy.jsonl", {.conversations = 200})};
    cfg.adherence.pool_sizes = {1, 2, 5, 10, 25, 50, 100, 150, 199};
    cfg.nli.provider = "mock";
    cfg.nli.mock = "hashed";
    cfg.seed = 2024;
    cfg.output_dir = fs::temp_directory_path() / "e4s-tests" / "accept-self";
    const auto r = run_pipeline(cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    c.expect(r.failures.empty(), "run without failures");
    const auto& sim = r.datasets.at(1);
    c.expect(sim.at(Dimension::Adherence) && sim.at(Dimension::Adherence)->similarity == 1.0,
             "adherence similarity is exactly 1");
    c.expect(sim.e4s && *sim.e4s >= 0.99, "e4s >= 0.99");
    c.expect(secs < 60.0, "runtime under one minute");
  });

  criterion("synthetic adherence sanity", [](Check& c) {
    const std::vector<std::size_t> sizes{1, 2, 5, 10, 25, 50, 100, 150, 199};
    AdherenceConfig cfg;
    cfg.pool_sizes = sizes;
    cfg.repetitions = 10;
    cfg.seed = 77;
    for (bool shuffled : {false, true}) {
      const auto corpus = testing::synthetic_corpus({.conversations = 200, .shuffle_personas = shuffled});
      RunConfig rc;
      rc.adherence = cfg;
      const auto curve = run_adherence(corpus, rc);
      for (const auto& p : curve.points) {
        if (!shuffled) c.near(p.mrr_mean, 1.0, 0.0, "MRR at " + std::to_string(p.pool_size) + " distractors");
        if (shuffled && p.pool_size == 50) c.expect(p.mrr_mean < 0.5, "shuffled MRR at 50 distractors < 0.5");
      }
    }
  });

  std::printf("%d failing criteria\n", failures);
  return failures == 0 ? 0 : 1;
}
