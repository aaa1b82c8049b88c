#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "e4s/error.hpp"
#include "e4s/naturalness.hpp"
#include "e4s/pipeline.hpp"
#include "e4s/report.hpp"
#include "e4s/text.hpp"

namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

constexpr int kExitUsage = 1;
constexpr int kExitPartial = 4;

struct CommonFlags {
  std::string config;
  std::string reference;
  std::vector<std::string> simulations;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string backend;
  std::optional<bool> strict;
  std::string format;
  std::optional<std::size_t> threads;
  std::string nli;
  std::vector<std::string> nli_files;
  std::string mock;
  std::string remote_url;
  std::vector<std::size_t> pool_sizes;
  std::optional<std::size_t> repetitions;
  std::optional<double> alpha;
};

void add_corpus_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration");
  cmd->add_option("--reference", f.reference, "Reference (human) corpus");
  cmd->add_option("--simulation", f.simulations, "Simulation corpus; repeatable")->take_all();
  cmd->add_option("--format", f.format, "canonical-jsonl or plain-text-blocks (default: by extension)");
  auto* strict = cmd->add_flag_function(
      "--strict", [&f](std::int64_t) { f.strict = true; }, "Abort on the first malformed record (default)");
  cmd->add_flag_function("--lenient", [&f](std::int64_t) { f.strict = false; }, "Skip malformed records")
      ->excludes(strict);
}

void add_run_flags(CLI::App* cmd, CommonFlags& f) {
  add_corpus_flags(cmd, f);
  cmd->add_option("--seed", f.seed, "Global seed");
  cmd->add_option("--out", f.out, "Output directory");
  cmd->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
  cmd->add_option("--backend", f.backend, "tfidf-word, tfidf-char, bm25 or late-interaction");
  cmd->add_option("--pool-sizes", f.pool_sizes, "Distractor counts")->delimiter(',');
  cmd->add_option("--repetitions", f.repetitions, "Samples per pool size");
  cmd->add_option("--alpha", f.alpha, "Speaker-aware interpolation parameter");
  cmd->add_option("--nli", f.nli, "NLI provider: precomputed, remote or mock");
  cmd->add_option("--nli-file", f.nli_files, "Precomputed NLI JSON-Lines; repeatable");
  cmd->add_option("--mock-label", f.mock, "Mock NLI label, or 'hashed'");
  cmd->add_option("--remote-url", f.remote_url, "Inference service base URL");
}

e4s::RunConfig build_config(const CommonFlags& f) {
  e4s::RunConfig c = f.config.empty() ? e4s::RunConfig{} : e4s::load_run_config(f.config);
  if (!f.reference.empty()) c.reference = f.reference;
  if (!f.simulations.empty()) c.simulations.assign(f.simulations.begin(), f.simulations.end());
  if (f.seed) c.seed = *f.seed;
  if (!f.out.empty()) c.output_dir = f.out;
  if (f.threads) c.threads = *f.threads;
  if (f.strict) c.strict = *f.strict;
  if (!f.format.empty()) {
    c.format = e4s::parse_format(f.format);
    if (!c.format) throw e4s::ConfigError("unknown corpus format \"" + f.format + "\"");
  }
  if (!f.backend.empty()) c.backend = f.backend;
  if (!f.pool_sizes.empty()) c.adherence.pool_sizes = f.pool_sizes;
  if (f.repetitions) c.adherence.repetitions = *f.repetitions;
  if (f.alpha) c.adherence.alpha = *f.alpha;
  if (!f.nli.empty()) c.nli.provider = f.nli;
  if (!f.nli_files.empty()) c.nli.precomputed.assign(f.nli_files.begin(), f.nli_files.end());
  if (!f.mock.empty()) {
    c.nli.mock = f.mock;
    if (f.nli.empty()) c.nli.provider = "mock";
  }
  if (!f.remote_url.empty()) c.remote.url = f.remote_url;
  return c;
}

void print_summary(const e4s::RunReport& r) {
  for (const auto& d : r.datasets) {
    std::cout << d.dataset << (d.reference ? " (reference)" : "");
    for (e4s::Dimension dim : e4s::kDimensions) {
      if (const auto& x = d.at(dim)) {
        std::cout << "  " << e4s::to_string(dim) << "=" << e4s::format3(x->similarity);
      }
    }
    if (d.e4s) std::cout << "  e4s=" << e4s::format3(*d.e4s);
    if (d.position) std::cout << "  position=" << *d.position;
    std::cout << '\n';
  }
  for (const auto& f : r.failures) {
    std::cerr << "failed: " << f.dataset << " / " << f.dimension << " (" << f.kind << "): " << f.message << '\n';
  }
}

int run(const CommonFlags& f, std::set<e4s::Dimension> dims) {
  auto config = build_config(f);
  config.dimensions = std::move(dims);
  const auto report = e4s::run_pipeline(config);
  print_summary(report);
  std::cout << "wrote " << (config.output_dir / "report.json").string() << '\n';
  return report.failures.empty() ? 0 : kExitPartial;
}

int validate(const CommonFlags& f) {
  std::vector<std::string> paths;
  if (!f.reference.empty()) paths.push_back(f.reference);
  paths.insert(paths.end(), f.simulations.begin(), f.simulations.end());
  if (paths.empty()) throw e4s::ConfigError("validate needs --reference or --simulation");
  const auto config = build_config(f);
  bool ok = true;
  for (const auto& p : paths) {
    std::vector<std::string> diagnostics;
    const auto corpus = e4s::load_corpus(p, config, &diagnostics);
    const auto rep = e4s::validate(corpus);
    std::cout << p << ": " << rep.conversations << " conversations, " << rep.turns << " turns, "
              << rep.persona_sentences << " persona sentences, " << rep.errors.size() << " errors, "
              << rep.warnings.size() << " warnings\n";
    for (const auto& d : diagnostics) std::cout << "  skipped: " << d << '\n';
    for (const auto& e : rep.errors) std::cout << "  error: " << e << '\n';
    for (const auto& w : rep.warnings) std::cout << "  warning: " << w << '\n';
    ok = ok && rep.ok();
  }
  return ok ? 0 : static_cast<int>(e4s::ErrorKind::Data);
}

int rerender(const std::string& from, const std::string& out, const std::vector<std::string>& formats) {
  std::ifstream in(from);
  if (!in) throw e4s::ConfigError("cannot read " + from);
  const json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw e4s::DataError(from + " is not valid JSON");
  const auto report = e4s::run_report_from_json(j);
  std::set<e4s::ReportFormat> fmts;
  for (const auto& s : formats) {
    auto fm = e4s::parse_report_format(s);
    if (!fm) throw e4s::ConfigError("unknown report format \"" + s + "\"");
    fmts.insert(*fm);
  }
  if (fmts.empty()) fmts = {e4s::ReportFormat::Csv, e4s::ReportFormat::Markdown};
  const fs::path dir = out.empty() ? fs::path(from).parent_path() : fs::path(out);
  for (const auto& p : e4s::emit_report(report, dir, fmts)) std::cout << "wrote " << p.string() << '\n';
  return 0;
}

// Inputs for the inference service: embedding units and NLI pairs per corpus.
int manifest(const CommonFlags& f) {
  auto config = build_config(f);
  std::vector<fs::path> paths;
  if (!config.reference.empty()) paths.push_back(config.reference);
  paths.insert(paths.end(), config.simulations.begin(), config.simulations.end());
  if (paths.empty()) throw e4s::ConfigError("manifest needs --reference or --simulation");
  fs::create_directories(config.output_dir);
  for (const auto& p : paths) {
    const auto corpus = e4s::load_corpus(p, config);
    const std::string name = e4s::dataset_name(p);
    const auto units_path = config.output_dir / (name + ".embed_units.jsonl");
    const auto pairs_path = config.output_dir / (name + ".nli_manifest.jsonl");
    std::ofstream units(units_path), pairs(pairs_path);
    if (!units || !pairs) throw e4s::ConfigError("cannot write to " + config.output_dir.string());
    std::size_t n_units = 0, n_pairs = 0;
    for (const auto& u : e4s::embed_units(corpus, config.adherence_role, config.merge_identical_personas)) {
      units << json{{"unit_id", u.unit_id}, {"text", u.text}}.dump() << '\n';
      ++n_units;
    }
    for (const auto& pr : e4s::unique_nli_pairs(corpus, config.naturalness)) {
      const auto key = e4s::pair_key(pr);
      pairs << json{{"premise", pr.premise},
                    {"hypothesis", pr.hypothesis},
                    {"premise_key", key.premise_key},
                    {"hypothesis_key", key.hypothesis_key}}
                   .dump()
            << '\n';
      ++n_pairs;
    }
    std::cout << name << ": " << n_units << " embedding units, " << n_pairs << " NLI pairs\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"e4s: evaluate persona-grounded conversation simulations against a human reference corpus"};
  app.set_version_flag("--version", std::string(E4S_VERSION));
  app.require_subcommand(1);

  CommonFlags flags;
  auto* val = app.add_subcommand("validate", "Parse and check corpora");
  add_corpus_flags(val, flags);
  auto* adh = app.add_subcommand("adherence", "MRR degradation curves and curve similarity");
  auto* con = app.add_subcommand("consistency", "Authorship-verification consistency");
  auto* nat = app.add_subcommand("naturalness", "NLI-based naturalness");
  auto* all = app.add_subcommand("e4s", "All three dimensions and the e4s score");
  for (auto* cmd : {adh, con, nat, all}) add_run_flags(cmd, flags);

  std::string from, out;
  std::vector<std::string> formats;
  auto* rep = app.add_subcommand("report", "Re-render CSV and markdown from report.json");
  rep->add_option("--from", from, "report.json of an earlier run")->required();
  rep->add_option("--out", out, "Output directory (default: next to report.json)");
  rep->add_option("--formats", formats, "json, csv, markdown")->delimiter(',');

  auto* man = app.add_subcommand("manifest", "Write embedding-unit and NLI-pair manifests for the inference service");
  add_corpus_flags(man, flags);
  man->add_option("--out", flags.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*val) return validate(flags);
    if (*adh) return run(flags, {e4s::Dimension::Adherence});
    if (*con) return run(flags, {e4s::Dimension::Consistency});
    if (*nat) return run(flags, {e4s::Dimension::Naturalness});
    if (*all) return run(flags, {e4s::Dimension::Adherence, e4s::Dimension::Consistency, e4s::Dimension::Naturalness});
    if (*rep) return rerender(from, out, formats);
    if (*man) return manifest(flags);
  } catch (const e4s::Error& e) {
    std::cerr << "e4s: " << e.what() << '\n';
    return static_cast<int>(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "e4s: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
