#include "e4s/pipeline.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>

#include "e4s/error.hpp"
#include "e4s/text.hpp"

namespace e4s {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

// Reads one JSON object section and rejects keys it was never asked about.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError(name_ + ": expected an object");
  }
  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.contains(k)) throw ConfigError(name_ + ": unknown key \"" + k + "\"");
    }
  }

  template <typename T>
  void get(const char* key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_[key].get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
  }
  const json* sub(const char* key) {
    used_.insert(key);
    return j_.contains(key) ? &j_[key] : nullptr;
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> used_;
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  if (path.is_relative() && !base.empty()) path = base / path;
  return path.lexically_normal();
}

SpeakerRole role_or_throw(const std::string& s) {
  auto r = parse_role(s);
  if (!r) throw ConfigError("unknown speaker role \"" + s + "\"");
  return *r;
}

std::string iso_timestamp() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string kind_name(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->kind()) {
      case ErrorKind::Config: return "config";
      case ErrorKind::Data: return "data";
      case ErrorKind::Provider: return "provider";
    }
  }
  return "internal";
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::ofstream open_artifact(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + p.string());
  return out;
}

struct Dataset {
  std::string name;
  fs::path path;
  bool reference = false;
  std::optional<Corpus> corpus;
};

struct RawResults {
  std::optional<MrrCurve> curve;
  std::optional<ConsistencyResult> consistency;
  std::optional<NaturalnessResult> naturalness;
};

}  // namespace

RunConfig RunConfig::from_json(const json& j, const fs::path& base) {
  RunConfig c;
  Section top(j, "config");
  std::string reference;
  std::vector<std::string> simulations;
  std::string format = "auto";
  std::string output_dir;
  std::vector<std::string> dims;
  top.get("reference", reference);
  top.get("simulations", simulations);
  top.get("format", format);
  top.get("strict", c.strict);
  top.get("seed", c.seed);
  top.get("output_dir", output_dir);
  top.get("threads", c.threads);
  top.get("dimensions", dims);
  if (!reference.empty()) c.reference = resolve(base, reference);
  for (const auto& s : simulations) c.simulations.push_back(resolve(base, s));
  if (format != "auto") {
    c.format = parse_format(format);
    if (!c.format) throw ConfigError("unknown corpus format \"" + format + "\"");
  }
  if (!output_dir.empty()) c.output_dir = resolve(base, output_dir);
  if (top.sub("dimensions")) {
    c.dimensions.clear();
    for (const auto& d : dims) {
      auto dim = parse_dimension(d);
      if (!dim) throw ConfigError("unknown dimension \"" + d + "\"");
      c.dimensions.insert(*dim);
    }
  }

  if (const json* a = top.sub("adherence")) {
    Section s(*a, "adherence");
    std::string role = std::string(to_string(c.adherence_role));
    std::map<std::string, std::string> files;
    s.get("alpha", c.adherence.alpha);
    s.get("pool_sizes", c.adherence.pool_sizes);
    s.get("repetitions", c.adherence.repetitions);
    s.get("relevant_per_pool", c.adherence.relevant_per_pool);
    s.get("evaluated_role", role);
    s.get("merge_identical_personas", c.merge_identical_personas);
    s.get("backend", c.backend);
    s.get("char_ngram", c.sparse.char_ngram);
    s.get("max_features", c.sparse.max_features);
    s.get("k1", c.sparse.k1);
    s.get("b", c.sparse.b);
    s.get("extra_columns", c.extra_columns);
    s.get("embeddings", files);
    s.get("remote_embeddings", c.embeddings.remote);
    c.adherence_role = role_or_throw(role);
    for (const auto& [k, v] : files) c.embeddings.files[k] = resolve(base, v);
    s.finish();
  }
  if (const json* a = top.sub("consistency")) {
    Section s(*a, "consistency");
    std::vector<std::string> roles;
    s.get("roles", roles);
    s.get("ngram", c.consistency.verifier.ngram);
    s.get("vocab_size", c.consistency.verifier.vocab_size);
    s.get("grid_step", c.consistency.verifier.grid_step);
    s.get("train_ratio", c.consistency.pairs.train_ratio);
    if (s.sub("roles")) {
      c.consistency.pairs.roles.clear();
      for (const auto& r : roles) c.consistency.pairs.roles.push_back(role_or_throw(r));
    }
    s.finish();
  }
  if (const json* a = top.sub("naturalness")) {
    Section s(*a, "naturalness");
    std::vector<std::string> files;
    s.get("contradiction_threshold", c.naturalness.contradiction_threshold);
    s.get("history_window", c.naturalness.history_window);
    if (const json* w = s.sub("weights")) {
      Section ws(*w, "naturalness.weights");
      ws.get("cs", c.naturalness.w_cs);
      ws.get("pcr", c.naturalness.w_pcr);
      ws.get("scr", c.naturalness.w_scr);
      ws.finish();
    }
    if (const json* v = s.sub("cs_values")) {
      Section vs(*v, "naturalness.cs_values");
      vs.get("entailment", c.naturalness.cs_entailment);
      vs.get("neutral", c.naturalness.cs_neutral);
      vs.get("contradiction", c.naturalness.cs_contradiction);
      vs.finish();
    }
    s.get("provider", c.nli.provider);
    s.get("mock", c.nli.mock);
    s.get("precomputed", files);
    for (const auto& f : files) c.nli.precomputed.push_back(resolve(base, f));
    s.finish();
  }
  if (const json* a = top.sub("remote")) {
    Section s(*a, "remote");
    long backoff_ms = c.remote.backoff.count();
    long timeout_s = c.remote.timeout.count();
    s.get("url", c.remote.url);
    s.get("batch_size", c.remote.batch_size);
    s.get("parallelism", c.remote.parallelism);
    s.get("attempts", c.remote.attempts);
    s.get("backoff_ms", backoff_ms);
    s.get("timeout_s", timeout_s);
    c.remote.backoff = std::chrono::milliseconds(backoff_ms);
    c.remote.timeout = std::chrono::seconds(timeout_s);
    s.finish();
  }
  top.finish();
  return c;
}

json RunConfig::to_json() const {
  std::vector<std::string> sims, dims, roles, nli_files;
  for (const auto& s : simulations) sims.push_back(s.string());
  for (Dimension d : dimensions) dims.emplace_back(to_string(d));
  for (SpeakerRole r : consistency.pairs.roles) roles.emplace_back(to_string(r));
  for (const auto& f : nli.precomputed) nli_files.push_back(f.string());
  std::map<std::string, std::string> emb;
  for (const auto& [k, v] : embeddings.files) emb[k] = v.string();
  return json{
      {"reference", reference.string()},
      {"simulations", sims},
      {"format", format ? (*format == CorpusFormat::CanonicalJsonl ? "canonical-jsonl" : "plain-text-blocks") : "auto"},
      {"strict", strict},
      {"seed", seed},
      {"output_dir", output_dir.string()},
      {"threads", threads},
      {"dimensions", dims},
      {"adherence",
       {{"alpha", adherence.alpha},
        {"pool_sizes", adherence.pool_sizes},
        {"repetitions", adherence.repetitions},
        {"relevant_per_pool", adherence.relevant_per_pool},
        {"evaluated_role", to_string(adherence_role)},
        {"merge_identical_personas", merge_identical_personas},
        {"backend", backend},
        {"char_ngram", sparse.char_ngram},
        {"max_features", sparse.max_features},
        {"k1", sparse.k1},
        {"b", sparse.b},
        {"extra_columns", extra_columns},
        {"embeddings", emb},
        {"remote_embeddings", embeddings.remote}}},
      {"consistency",
       {{"roles", roles},
        {"ngram", consistency.verifier.ngram},
        {"vocab_size", consistency.verifier.vocab_size},
        {"grid_step", consistency.verifier.grid_step},
        {"train_ratio", consistency.pairs.train_ratio}}},
      {"naturalness",
       {{"contradiction_threshold", naturalness.contradiction_threshold},
        {"history_window", naturalness.history_window},
        {"weights", {{"cs", naturalness.w_cs}, {"pcr", naturalness.w_pcr}, {"scr", naturalness.w_scr}}},
        {"cs_values",
         {{"entailment", naturalness.cs_entailment},
          {"neutral", naturalness.cs_neutral},
          {"contradiction", naturalness.cs_contradiction}}},
        {"provider", nli.provider},
        {"mock", nli.mock},
        {"precomputed", nli_files}}},
      {"remote",
       {{"url", remote.url},
        {"batch_size", remote.batch_size},
        {"parallelism", remote.parallelism},
        {"attempts", remote.attempts},
        {"backoff_ms", remote.backoff.count()},
        {"timeout_s", remote.timeout.count()}}},
  };
}

void RunConfig::check() const {
  if (reference.empty()) throw ConfigError("no reference corpus configured");
  auto must_exist = [](const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
  };
  must_exist(reference, "reference corpus");
  for (const auto& s : simulations) must_exist(s, "simulation corpus");
  if (dimensions.contains(Dimension::Adherence)) {
    adherence.check();
    if (adherence.pool_sizes.size() < 2) throw ConfigError("adherence needs at least 2 pool sizes");
    if (backend == "late-interaction") {
      for (const auto& [k, v] : embeddings.files) must_exist(v, "embedding file");
    } else if (!parse_sparse_scheme(backend)) {
      throw ConfigError("unknown backend \"" + backend + "\"");
    }
  }
  if (dimensions.contains(Dimension::Consistency)) {
    const double r = consistency.pairs.train_ratio;
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("consistency train_ratio must be in (0, 1)");
    if (consistency.pairs.roles.empty()) throw ConfigError("consistency needs at least one role");
  }
  if (dimensions.contains(Dimension::Naturalness)) {
    naturalness.check();
    if (nli.provider == "precomputed") {
      for (const auto& f : nli.precomputed) must_exist(f, "precomputed NLI file");
    } else if (nli.provider == "mock") {
      if (nli.mock != "hashed" && !parse_nli_label(nli.mock)) throw ConfigError("unknown mock label \"" + nli.mock + "\"");
    } else if (nli.provider != "remote") {
      throw ConfigError("unknown NLI provider \"" + nli.provider + "\"");
    }
  }
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j = json::parse(in, nullptr, false, true);
  if (j.is_discarded()) throw ConfigError("config " + path.string() + " is not valid JSON");
  return RunConfig::from_json(j, fs::absolute(path).parent_path());
}

std::string dataset_name(const fs::path& path) { return path.stem().string(); }

Corpus load_corpus(const fs::path& path, const RunConfig& config, std::vector<std::string>* diagnostics) {
  ParseOptions opts;
  opts.format = config.format.value_or(guess_format(path.string()));
  opts.strict = config.strict;
  auto result = parse_corpus_file(path.string(), opts);
  if (diagnostics) {
    for (const auto& d : result.diagnostics) {
      diagnostics->push_back(path.filename().string() + " record " + std::to_string(d.record) + ": " + d.message);
    }
  }
  return std::move(result.corpus);
}

MrrCurve run_adherence(const Corpus& corpus, const RunConfig& config, std::shared_ptr<const EmbeddingStore> store) {
  AdherenceConfig ac = config.adherence;
  ac.seed = config.seed;
  ac.threads = config.threads;
  const auto relevance = build_relevance(corpus, config.adherence_role, config.merge_identical_personas);
  std::unique_ptr<ConversationScorer> full, target;
  if (config.backend == "late-interaction") {
    full = make_late_interaction_scorer(corpus, IndexScope::Full, config.adherence_role, store);
    target = make_late_interaction_scorer(corpus, IndexScope::TargetSpeaker, config.adherence_role, store);
  } else {
    auto scheme = parse_sparse_scheme(config.backend);
    if (!scheme) throw ConfigError("unknown backend \"" + config.backend + "\"");
    full = make_sparse_scorer(corpus, IndexScope::Full, config.adherence_role, *scheme, config.sparse);
    target = make_sparse_scorer(corpus, IndexScope::TargetSpeaker, config.adherence_role, *scheme, config.sparse);
  }
  return evaluate_curve(corpus, relevance, ac, *full, *target);
}

std::shared_ptr<NliProvider> make_nli_provider(const RunConfig& config) {
  std::shared_ptr<NliProvider> inner;
  if (config.nli.provider == "precomputed") {
    auto store = std::make_shared<PrecomputedNli>();
    for (const auto& f : config.nli.precomputed) {
      auto part = load_precomputed_nli(f.string(), config.strict);
      for (const auto& d : part.diagnostics) store->diagnostics.push_back(d);
      // Merging goes through insert so conflicts across files are caught.
      for (const auto& [key, label] : part.records()) store->insert(key, label);
    }
    inner = store;
  } else if (config.nli.provider == "remote") {
    inner = std::make_shared<RemoteNli>(config.remote);
  } else if (config.nli.provider == "mock") {
    if (config.nli.mock == "hashed") {
      inner = std::make_shared<MockNli>(MockNli::hashed());
    } else {
      auto label = parse_nli_label(config.nli.mock);
      if (!label) throw ConfigError("unknown mock label \"" + config.nli.mock + "\"");
      inner = std::make_shared<MockNli>(MockNli::fixed({*label, 1.0}));
    }
  } else {
    throw ConfigError("unknown NLI provider \"" + config.nli.provider + "\"");
  }
  return std::make_shared<CachedNli>(inner);
}

std::vector<EmbedUnit> embed_units(const Corpus& corpus, SpeakerRole role, bool merge_identical) {
  std::vector<EmbedUnit> units;
  for (const auto& e : build_relevance(corpus, role, merge_identical).entries) {
    units.push_back({query_unit_id(e.key), make_query(e).text});
  }
  for (const auto& c : corpus.conversations) {
    for (const auto& t : c.turns) units.push_back({chunk_unit_id(c.id, t.index), t.text});
  }
  return units;
}

json curve_json(const MrrCurve& curve) {
  json pts = json::array();
  for (const auto& p : curve.points) {
    pts.push_back({{"pool_size", p.pool_size},
                   {"mrr_mean", p.mrr_mean},
                   {"mrr_std", p.mrr_std},
                   {"repetitions", p.repetitions},
                   {"map_mean", p.map_mean},
                   {"ndcg_mean", p.ndcg_mean}});
  }
  return json{{"points", pts}, {"normalized_auc", normalized_auc(curve)}};
}

json consistency_json(const ConsistencyResult& r) {
  return json{{"f1", r.metrics.f1},
              {"auc", r.metrics.auc},
              {"brier", r.metrics.brier},
              {"c_at_1", r.metrics.c_at_1},
              {"f05u", r.metrics.f05u},
              {"consistency", r.metrics.consistency},
              {"p1", r.params.p1},
              {"p2", r.params.p2},
              {"train_objective", r.train_objective},
              {"vocabulary_size", r.vocabulary_size},
              {"train_pairs", r.train_pairs},
              {"test_pairs", r.test_pairs},
              {"usable_personas", r.usable_personas},
              {"diagnostics", r.diagnostics}};
}

json naturalness_json(const NaturalnessReport& r) {
  return json{{"cs", r.cs},
              {"pcr", r.pcr},
              {"scr", r.scr},
              {"er", r.er},
              {"nr", r.nr},
              {"cr", r.cr},
              {"naturalness", r.naturalness},
              {"turn_pairs", r.turn_pairs},
              {"persona_pairs", r.persona_pairs},
              {"history_pairs", r.history_pairs},
              {"entailments", r.entailments},
              {"neutrals", r.neutrals},
              {"contradictions", r.contradictions}};
}

RunReport run_pipeline(const RunConfig& config, bool write) {
  config.check();
  RunReport report;

  std::vector<Dataset> datasets;
  std::set<std::string> names;
  auto add = [&](const fs::path& p, bool ref) {
    std::string name = dataset_name(p);
    for (int k = 2; names.contains(name); ++k) name = dataset_name(p) + "-" + std::to_string(k);
    names.insert(name);
    datasets.push_back({name, p, ref, std::nullopt});
  };
  add(config.reference, true);
  for (const auto& s : config.simulations) add(s, false);

  for (auto& d : datasets) {
    try {
      d.corpus = load_corpus(d.path, config, &report.warnings);
      d.corpus->name = d.name;
    } catch (const std::exception& e) {
      if (d.reference) throw;
      report.failures.push_back({d.name, "corpus", kind_name(e), e.what()});
    }
  }

  const bool adh = config.dimensions.contains(Dimension::Adherence);
  const bool con = config.dimensions.contains(Dimension::Consistency);
  const bool nat = config.dimensions.contains(Dimension::Naturalness);
  std::shared_ptr<NliProvider> nli;
  if (nat) {
    try {
      nli = make_nli_provider(config);
    } catch (const std::exception& e) {
      report.failures.push_back({datasets.front().name, "naturalness", kind_name(e), e.what()});
    }
  }

  auto embeddings_for = [&](const Dataset& d) -> std::shared_ptr<const EmbeddingStore> {
    if (config.backend != "late-interaction") return nullptr;
    if (auto it = config.embeddings.files.find(d.name); it != config.embeddings.files.end()) {
      return std::make_shared<EmbeddingStore>(load_embeddings(it->second.string(), config.strict));
    }
    if (config.embeddings.remote) {
      const auto units = embed_units(*d.corpus, config.adherence_role, config.merge_identical_personas);
      return std::make_shared<EmbeddingStore>(fetch_embeddings(units, config.remote));
    }
    throw ConfigError("no embeddings configured for dataset " + d.name);
  };

  // Raw scores per dataset, reference at index 0.
  std::vector<RawResults> raw(datasets.size());
  auto attempt = [&](const Dataset& d, Dimension dim, const std::function<void()>& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      report.failures.push_back({d.name, std::string(to_string(dim)), kind_name(e), e.what()});
    }
  };
  const ConsistencyOptions con_opts = [&] {
    ConsistencyOptions o = config.consistency;
    o.seed = mix_seed(config.seed, 1);
    o.verifier.threads = config.threads;
    return o;
  }();

  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const Dataset& d = datasets[i];
    if (!d.corpus) continue;
    if (adh) attempt(d, Dimension::Adherence, [&] { raw[i].curve = run_adherence(*d.corpus, config, embeddings_for(d)); });
    if (con) attempt(d, Dimension::Consistency, [&] { raw[i].consistency = evaluate_consistency(*d.corpus, con_opts); });
    if (nat && nli) {
      attempt(d, Dimension::Naturalness, [&] { raw[i].naturalness = evaluate_naturalness(*d.corpus, *nli, config.naturalness); });
    }
  }

  const RawResults& ref = raw.front();
  for (std::size_t i = 0; i < datasets.size(); ++i) {
    const Dataset& d = datasets[i];
    E4sReport rep;
    rep.dataset = d.name;
    rep.reference = d.reference;
    const fs::path dir = config.output_dir / d.name;
    if (write && d.corpus) fs::create_directories(dir);

    auto similarity_of = [&](Dimension dim, bool have_ref, const std::function<double()>& fn) -> std::optional<double> {
      if (d.reference) return 1.0;
      if (!have_ref) {
        report.failures.push_back({d.name, std::string(to_string(dim)), "data", "reference result unavailable"});
        return std::nullopt;
      }
      std::optional<double> s;
      attempt(d, dim, [&] { s = fn(); });
      return s;
    };

    if (const auto& curve = raw[i].curve) {
      auto sim = similarity_of(Dimension::Adherence, ref.curve.has_value(),
                               [&] { return curve_similarity(*ref.curve, *curve); });
      if (sim) {
        auto r = DimensionResult::make(Dimension::Adherence, normalized_auc(*curve), *sim);
        r.detail = curve_json(*curve);
        r.detail["backend"] = config.backend;
        if (write) {
          const auto p = dir / "adherence_curve.csv";
          auto out = open_artifact(p);
          write_curve_csv(*curve, out, config.extra_columns);
          r.artifacts["curve"] = p.string();
        }
        rep.at(Dimension::Adherence) = std::move(r);
      }
    }
    if (const auto& cr = raw[i].consistency) {
      auto sim = similarity_of(Dimension::Consistency, ref.consistency.has_value(), [&] {
        return consistency_similarity(cr->metrics.consistency, ref.consistency->metrics.consistency);
      });
      if (sim) {
        auto r = DimensionResult::make(Dimension::Consistency, cr->metrics.consistency, *sim);
        r.detail = consistency_json(*cr);
        if (write) {
          const auto p = dir / "pairs.jsonl";
          auto out = open_artifact(p);
          write_pairs_jsonl(cr->pairs, out);
          r.artifacts["pairs"] = p.string();
        }
        rep.at(Dimension::Consistency) = std::move(r);
      }
    }
    if (const auto& nr = raw[i].naturalness) {
      auto sim = similarity_of(Dimension::Naturalness, ref.naturalness.has_value(), [&] {
        return naturalness_similarity(nr->report.naturalness, ref.naturalness->report.naturalness);
      });
      if (sim) {
        auto r = DimensionResult::make(Dimension::Naturalness, nr->report.naturalness, *sim);
        r.detail = naturalness_json(nr->report);
        r.detail["provider"] = nli->describe();
        if (write) {
          const auto p = dir / "nli_pairs.jsonl";
          auto out = open_artifact(p);
          write_pair_labels(nr->records, out);
          r.artifacts["nli_pairs"] = p.string();
        }
        rep.at(Dimension::Naturalness) = std::move(r);
      }
    }

    if (rep.at(Dimension::Adherence) && rep.at(Dimension::Consistency) && rep.at(Dimension::Naturalness)) {
      rep.e4s = aggregate_e4s(rep.at(Dimension::Adherence)->similarity, rep.at(Dimension::Consistency)->similarity,
                              rep.at(Dimension::Naturalness)->similarity);
    }
    for (Dimension dim : kDimensions) {
      if (rep.at(dim) && rep.at(dim)->similarity < 0.0) {
        report.warnings.push_back(d.name + ": negative " + std::string(to_string(dim)) +
                                  " similarity averaged without clamping");
      }
    }
    report.datasets.push_back(std::move(rep));
  }
  rank_datasets(report.datasets);

  const json resolved = config.to_json();
  report.metadata = json{{"tool", "e4s"},
                         {"version", E4S_VERSION},
                         {"generated_at", iso_timestamp()},
                         {"seed", config.seed},
                         {"config", resolved},
                         {"config_hash", text::sha256_hex(resolved.dump())},
                         {"pool_sizes", config.adherence.pool_sizes}};
  if (write) emit_report(report, config.output_dir);
  return report;
}

}  // namespace e4s
