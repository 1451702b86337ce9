// Command-line front end: synth-data, preprocess, build-vocab, train, decode,
// eval, analyze-embeddings, export-attention. One JSON config file plus flag
// overrides; every run writes its resolved config next to its outputs.
// Exit codes: 0 success, 1 module error, 2 config/usage error.

#include <CLI11.hpp>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <thread>

#include "isarforge/checkpoint.hpp"
#include "isarforge/decode.hpp"
#include "isarforge/eval.hpp"
#include "isarforge/normalize.hpp"
#include "isarforge/synthetic.hpp"
#include "isarforge/train.hpp"

using json = nlohmann::json;
using namespace isarforge;

namespace {

bool deterministic_mode() {
  const char* v = std::getenv("ISARFORGE_DETERMINISTIC");
  return v && std::string(v) == "1";
}

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& context) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw ConfigError("unknown config key '" + it.key() + "' in " + context);
  }
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  check_keys(j, {"data", "model", "train", "decode", "eval"}, "top level");
  if (j.contains("data"))
    check_keys(j["data"], {"include_f5", "scope", "min_count"}, "data");
  if (j.contains("model"))
    check_keys(j["model"],
               {"arch", "model_dim", "ffn_dim", "heads", "enc_layers", "local_layers",
                "global_layers", "dec_layers", "dropout", "share_embeddings",
                "use_category_embedding", "max_positions", "ln_eps"},
               "model");
  if (j.contains("train"))
    check_keys(j["train"],
               {"steps", "warmup_steps", "adam_beta1", "adam_beta2", "adam_eps",
                "label_smoothing", "tokens_per_batch", "train_src_len_cap", "seed",
                "eval_every", "lr_scale"},
               "train");
  if (j.contains("decode"))
    check_keys(j["decode"], {"beam", "alpha", "max_len", "workers"}, "decode");
  if (j.contains("eval")) check_keys(j["eval"], {}, "eval");
  return j;
}

template <class T>
void merge_field(const json& section, const char* key, T& into) {
  if (section.contains(key)) into = section.at(key).get<T>();
}

struct DataOptions {
  bool include_f5 = true;
  NormalizeScope scope = NormalizeScope::PerProposition;
  int min_count = 1;

  void merge(const json& cfg) {
    if (!cfg.contains("data")) return;
    const json& d = cfg["data"];
    merge_field(d, "include_f5", include_f5);
    merge_field(d, "min_count", min_count);
    if (d.contains("scope")) {
      std::string s = d["scope"].get<std::string>();
      if (s == "per-proposition") scope = NormalizeScope::PerProposition;
      else if (s == "per-example") scope = NormalizeScope::PerExample;
      else throw ConfigError("data.scope must be per-proposition or per-example");
    }
  }

  json resolved() const {
    return {{"include_f5", include_f5},
            {"scope", scope == NormalizeScope::PerExample ? "per-example" : "per-proposition"},
            {"min_count", min_count}};
  }
};

ModelConfig model_config_from(const json& cfg) {
  ModelConfig mc;
  if (!cfg.contains("model")) return mc;
  const json& m = cfg["model"];
  if (m.contains("arch")) mc.arch = arch_from_name(m["arch"].get<std::string>());
  merge_field(m, "model_dim", mc.model_dim);
  merge_field(m, "ffn_dim", mc.ffn_dim);
  merge_field(m, "heads", mc.heads);
  merge_field(m, "enc_layers", mc.enc_layers);
  merge_field(m, "local_layers", mc.local_layers);
  merge_field(m, "global_layers", mc.global_layers);
  merge_field(m, "dec_layers", mc.dec_layers);
  merge_field(m, "dropout", mc.dropout);
  merge_field(m, "share_embeddings", mc.share_embeddings);
  merge_field(m, "use_category_embedding", mc.use_category_embedding);
  merge_field(m, "max_positions", mc.max_positions);
  merge_field(m, "ln_eps", mc.ln_eps);
  return mc;
}

TrainConfig train_config_from(const json& cfg) {
  TrainConfig tc;
  if (!cfg.contains("train")) return tc;
  const json& t = cfg["train"];
  merge_field(t, "steps", tc.steps);
  merge_field(t, "warmup_steps", tc.warmup_steps);
  merge_field(t, "adam_beta1", tc.adam_beta1);
  merge_field(t, "adam_beta2", tc.adam_beta2);
  merge_field(t, "adam_eps", tc.adam_eps);
  merge_field(t, "label_smoothing", tc.label_smoothing);
  merge_field(t, "tokens_per_batch", tc.tokens_per_batch);
  merge_field(t, "train_src_len_cap", tc.train_src_len_cap);
  merge_field(t, "seed", tc.seed);
  merge_field(t, "eval_every", tc.eval_every);
  merge_field(t, "lr_scale", tc.lr_scale);
  return tc;
}

json train_config_to_json(const TrainConfig& tc) {
  return {{"steps", tc.steps},
          {"warmup_steps", tc.warmup_steps},
          {"adam_beta1", tc.adam_beta1},
          {"adam_beta2", tc.adam_beta2},
          {"adam_eps", tc.adam_eps},
          {"label_smoothing", tc.label_smoothing},
          {"tokens_per_batch", tc.tokens_per_batch},
          {"train_src_len_cap", tc.train_src_len_cap},
          {"seed", tc.seed},
          {"eval_every", tc.eval_every},
          {"lr_scale", tc.lr_scale}};
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << j.dump(2) << '\n';
}

void write_resolved_config(const std::string& out_base, const json& resolved) {
  write_json(out_base + ".config.json", resolved);
}

std::vector<TokenSeq> read_token_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::vector<TokenSeq> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(split_tokens(line));
  return lines;
}

std::vector<PreparedExample> prepare_all(const std::vector<Example>& examples,
                                         const Vocabulary& vocab, Arch arch, bool include_f5) {
  std::vector<PreparedExample> prepared;
  prepared.reserve(examples.size());
  for (const auto& ex : examples)
    prepared.push_back(prepare_example(ex, vocab, arch, include_f5));
  return prepared;
}

// ---- subcommand bodies ----

int run_synth(std::uint64_t seed, std::size_t n, const std::string& profile,
              const std::string& out, bool heldout) {
  auto examples = generate_synthetic(seed, n, synthetic_profile_from_name(profile), heldout);
  write_parallel(out, examples);
  write_resolved_config(out, {{"seed", seed}, {"n", n}, {"profile", profile},
                              {"heldout_pool", heldout}});
  std::cout << json({{"written", examples.size()}, {"prefix", out}}).dump() << '\n';
  return 0;
}

int run_preprocess(const json& cfg, const DataOptions& data, const std::string& in,
                   const std::string& out, const std::vector<std::string>& heldout_prefixes) {
  auto examples = read_parallel(in);
  std::vector<Example> normalized;
  std::size_t filtered_length = 0;
  for (const auto& ex : examples) {
    Example norm = normalize_example(ex, data.scope);
    if (!example_passes_length_filter(flat_source_length(norm, data.include_f5),
                                      norm.target.size())) {
      ++filtered_length;
      continue;
    }
    normalized.push_back(std::move(norm));
  }
  std::vector<Example> heldout;
  for (const auto& prefix : heldout_prefixes) {
    auto h = read_parallel(prefix);
    for (auto& ex : h) heldout.push_back(normalize_example(ex, data.scope));
  }
  CleanStats stats;
  auto survivors = clean_training_set(
      normalized, heldout, &stats,
      [](const std::string& w) { std::cerr << "warn: " << w << '\n'; });
  write_parallel(out, survivors);
  json report = {{"read", examples.size()},
                 {"filtered_length", filtered_length},
                 {"duplicates", stats.duplicates},
                 {"heldout_target_overlap", stats.heldout_target_overlap},
                 {"heldout_theorem_overlap", stats.heldout_theorem_overlap},
                 {"missing_theorem_id", stats.missing_theorem_id},
                 {"written", survivors.size()}};
  json resolved = {{"data", data.resolved()}, {"in", in}, {"heldout", heldout_prefixes}};
  (void)cfg;
  write_resolved_config(out, resolved);
  write_json(out + ".stats.json", report);
  std::cout << report.dump() << '\n';
  return 0;
}

int run_build_vocab(const DataOptions& data, const std::vector<std::string>& prefixes,
                    const std::string& out) {
  std::vector<TokenSeq> corpus;
  for (const auto& prefix : prefixes) {
    for (const auto& ex : read_parallel(prefix)) {
      corpus.push_back(assemble_flat(ex, data.include_f5).tokens);
      corpus.push_back(ex.target);
    }
  }
  Vocabulary vocab = build_vocab(corpus, data.min_count);
  vocab.save(out);
  write_resolved_config(out, {{"data", data.resolved()}, {"in", prefixes}});
  std::cout << json({{"size", vocab.size()},
                     {"size_without_reserved", vocab.size_without_reserved()},
                     {"hash", vocab.hash()}})
                   .dump()
            << '\n';
  return 0;
}

template <class T>
int run_train(const json& cfg, const DataOptions& data, ModelConfig mc, TrainConfig tc,
              const std::string& train_prefix, const std::string& valid_prefix,
              const std::string& vocab_path, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  Vocabulary vocab = Vocabulary::load(vocab_path);
  mc.vocab_size = vocab.size();

  auto train_ex = read_parallel(train_prefix);
  auto valid_ex = read_parallel(valid_prefix);
  auto train_prep = prepare_all(train_ex, vocab, mc.arch, data.include_f5);
  auto valid_prep = prepare_all(valid_ex, vocab, mc.arch, data.include_f5);

  Model<T> model(mc, tc.seed);
  json log_entries = json::array();
  auto result = train_loop<T>(model, train_prep, valid_prep, vocab, tc,
                              [&](const TrainLogEntry& e) {
                                log_entries.push_back({{"step", e.step},
                                                       {"loss", e.loss},
                                                       {"lr", e.lr},
                                                       {"valid_bleu", e.valid_bleu}});
                                if (e.valid_bleu >= 0)
                                  std::cerr << "step " << e.step << " loss " << e.loss
                                            << " valid_bleu " << e.valid_bleu << '\n';
                              });
  const auto& best = select_best(result.checkpoints);
  restore(model, best);

  std::string ckpt_path = out_dir + "/model.isfc";
  save_checkpoint(ckpt_path, model, vocab.hash(),
                  json{{"step", best.step}, {"valid_bleu", best.valid_bleu},
                       {"diverged", result.diverged}});
  write_json(out_dir + "/train_log.json",
             {{"entries", log_entries},
              {"diverged", result.diverged},
              {"steps_run", result.steps_run},
              {"best_step", best.step},
              {"best_valid_bleu", best.valid_bleu}});
  json resolved = {{"data", data.resolved()},
                   {"model", model_config_to_json(mc)},
                   {"train", train_config_to_json(tc)}};
  (void)cfg;
  write_json(out_dir + "/resolved_config.json", resolved);
  std::cout << json({{"checkpoint", ckpt_path},
                     {"best_step", best.step},
                     {"best_valid_bleu", best.valid_bleu},
                     {"diverged", result.diverged}})
                   .dump()
            << '\n';
  return 0;
}

template <class T>
int run_decode(const json& cfg, const DataOptions& data, const std::string& ckpt_path,
               const std::string& vocab_path, const std::string& in,
               const std::string& out, DecodeOptions opts, std::size_t workers) {
  Vocabulary vocab = Vocabulary::load(vocab_path);
  Model<T> model = load_checkpoint<T>(ckpt_path, vocab.hash());
  auto examples = read_parallel(in);
  auto prepared = prepare_all(examples, vocab, model.config().arch, data.include_f5);

  if (deterministic_mode()) workers = 1;
  if (workers < 1) throw ConfigError("--workers must be >= 1");
  workers = std::min<std::size_t>(workers, prepared.size() ? prepared.size() : 1);

  std::vector<std::vector<Hypothesis>> results(prepared.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < prepared.size(); i = next.fetch_add(1))
      results[i] = beam_search(model, prepared[i].input, opts);
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  json nbest = json::array();
  std::ofstream top1(out + ".top1.txt");
  if (!top1) throw IoError("cannot write " + out + ".top1.txt");
  for (const auto& hyps : results) {
    json entry = json::array();
    for (const auto& hyp : hyps)
      entry.push_back({{"tokens", hypothesis_tokens(hyp, vocab)},
                       {"log_prob", hyp.log_prob},
                       {"score", hyp.normalized_score},
                       {"complete", hyp.complete}});
    nbest.push_back(std::move(entry));
    top1 << join_tokens(hypothesis_tokens(hyps.front(), vocab)) << '\n';
  }
  write_json(out + ".nbest.json", nbest);
  json resolved = {{"decode",
                    {{"beam", opts.beam_size},
                     {"alpha", opts.length_alpha},
                     {"max_len", opts.max_len},
                     {"workers", workers}}},
                   {"checkpoint", ckpt_path}};
  (void)cfg;
  write_resolved_config(out, resolved);
  std::cout << json({{"decoded", results.size()}, {"prefix", out}}).dump() << '\n';
  return 0;
}

int run_eval(const std::string& hyps_path, const std::string& refs_path,
             const std::string& srcs_path, const std::string& out) {
  std::vector<std::vector<TokenSeq>> nbest;
  if (hyps_path.size() > 5 && hyps_path.substr(hyps_path.size() - 5) == ".json") {
    std::ifstream in(hyps_path);
    if (!in) throw IoError("cannot read " + hyps_path);
    json j;
    in >> j;
    for (const auto& entry : j) {
      std::vector<TokenSeq> hyps;
      for (const auto& hyp : entry) hyps.push_back(hyp.at("tokens").get<TokenSeq>());
      nbest.push_back(std::move(hyps));
    }
  } else {
    for (auto& line : read_token_lines(hyps_path)) nbest.push_back({std::move(line)});
  }
  auto refs = read_token_lines(refs_path);
  if (nbest.size() != refs.size()) throw LineCountMismatch(nbest.size(), refs.size());
  std::vector<TokenSeq> srcs;
  if (!srcs_path.empty()) {
    srcs = read_token_lines(srcs_path);
    if (srcs.size() != refs.size()) throw LineCountMismatch(srcs.size(), refs.size());
  }

  std::vector<ExampleResult> results;
  std::vector<TokenSeq> top1_hyps;
  for (std::size_t i = 0; i < nbest.size(); ++i) {
    ExampleResult r;
    r.src_len = srcs.empty() ? 0 : srcs[i].size();
    r.top1 = exact_match(nbest[i], refs[i], 1);
    r.top10 = exact_match(nbest[i], refs[i], 10);
    r.parses = !nbest[i].empty() && parses_as_term(nbest[i].front());
    results.push_back(r);
    top1_hyps.push_back(nbest[i].empty() ? TokenSeq{} : nbest[i].front());
  }
  EvalReport report = make_eval_report(results, corpus_bleu(top1_hyps, refs));
  json j = report.to_json();
  if (!out.empty()) {
    write_json(out, j);
    write_resolved_config(out, {{"hyps", hyps_path}, {"refs", refs_path}, {"srcs", srcs_path}});
  }
  std::cout << j.dump() << '\n';
  return 0;
}

template <class T>
int run_analyze_embeddings(const std::string& ckpt_path, const std::string& vocab_path,
                           const std::vector<std::string>& tokens, std::size_t k,
                           std::size_t pca_dims, const std::string& out) {
  Vocabulary vocab = Vocabulary::load(vocab_path);
  Model<T> model = load_checkpoint<T>(ckpt_path, vocab.hash());
  const NDArray<T>& emb = model.token_embedding().value;

  json neighbors_json = json::object();
  for (const auto& token : tokens) {
    json list = json::array();
    for (const auto& nb : nearest_neighbors(emb, vocab, token, k))
      list.push_back({{"token", nb.token}, {"cosine", nb.cosine}});
    neighbors_json[token] = std::move(list);
  }
  PcaResult pca = pca_project(emb, pca_dims);
  json coords = json::array();
  for (std::size_t r = 0; r < pca.coordinates.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < pca.coordinates.cols(); ++c)
      row.push_back(pca.coordinates.at(r, c));
    coords.push_back({{"token", vocab.decode(static_cast<int>(r))}, {"coords", row}});
  }
  json j = {{"neighbors", neighbors_json},
            {"pca", {{"eigenvalues", pca.eigenvalues}, {"points", coords}}}};
  write_json(out, j);
  write_resolved_config(out, {{"checkpoint", ckpt_path}, {"tokens", tokens},
                              {"k", k}, {"pca_dims", pca_dims}});
  std::cout << json({{"written", out}}).dump() << '\n';
  return 0;
}

template <class T>
int run_export_attention(const DataOptions& data, const std::string& ckpt_path,
                         const std::string& vocab_path, const std::string& in,
                         std::size_t index, std::size_t layer, const std::string& out) {
  Vocabulary vocab = Vocabulary::load(vocab_path);
  Model<T> model = load_checkpoint<T>(ckpt_path, vocab.hash());
  auto examples = read_parallel(in);
  if (index >= examples.size())
    throw ConfigError("--index " + std::to_string(index) + " out of range (have " +
                      std::to_string(examples.size()) + " examples)");
  ModelInput input =
      make_model_input(examples[index], vocab, model.config().arch, data.include_f5);
  export_attention(model, input, vocab, out, layer);
  write_resolved_config(out, {{"checkpoint", ckpt_path}, {"in", in}, {"index", index},
                              {"layer", layer}, {"data", data.resolved()}});
  std::cout << json({{"written", out}}).dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lambda-term seq2seq workbench"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 1;
  std::string precision = "f32";
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--seed", seed, "global random seed");
  app.add_option("--precision", precision, "float width: f32 or f64")
      ->check(CLI::IsMember({"f32", "f64"}));

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "generate a synthetic corpus");
  std::size_t synth_n = 1000;
  std::string synth_profile = "mixed", synth_out = "synth";
  bool synth_heldout = false;
  synth->add_option("--n", synth_n, "number of examples");
  synth->add_option("--profile", synth_profile, "subset_chain | antisym | mixed");
  synth->add_option("--out", synth_out, "output path prefix")->required();
  synth->add_flag("--heldout", synth_heldout, "draw names from the held-out pool");

  // preprocess
  auto* prep = app.add_subcommand("preprocess", "normalize, filter, deduplicate");
  std::string prep_in, prep_out;
  std::vector<std::string> prep_heldout;
  prep->add_option("--in", prep_in, "input path prefix")->required();
  prep->add_option("--out", prep_out, "output path prefix")->required();
  prep->add_option("--heldout", prep_heldout, "held-out prefixes to clean against");

  // build-vocab
  auto* bv = app.add_subcommand("build-vocab", "frequency vocabulary from corpora");
  std::vector<std::string> bv_in;
  std::string bv_out;
  bv->add_option("--in", bv_in, "input path prefixes")->required();
  bv->add_option("--out", bv_out, "vocabulary file")->required();

  // train
  auto* train = app.add_subcommand("train", "train a model");
  std::string train_in, train_valid, train_vocab, train_out;
  train->add_option("--train", train_in, "training path prefix")->required();
  train->add_option("--valid", train_valid, "validation path prefix")->required();
  train->add_option("--vocab", train_vocab, "vocabulary file")->required();
  train->add_option("--out", train_out, "output directory")->required();
  std::string arch_flag, f5_flag, cat_flag;
  std::int64_t steps_flag = -1;
  app.add_option("--arch", arch_flag, "flat | hat")->check(CLI::IsMember({"flat", "hat"}));
  app.add_option("--include-f5", f5_flag, "on | off")->check(CLI::IsMember({"on", "off"}));
  app.add_option("--use-category-emb", cat_flag, "on | off")
      ->check(CLI::IsMember({"on", "off"}));
  train->add_option("--steps", steps_flag, "override train.steps");

  // decode
  auto* dec = app.add_subcommand("decode", "beam-search decode a corpus");
  std::string dec_ckpt, dec_vocab, dec_in, dec_out;
  std::int64_t beam_flag = -1, maxlen_flag = -1;
  double alpha_flag = -1.0;
  std::size_t workers_flag = 0;
  dec->add_option("--ckpt", dec_ckpt, "checkpoint file")->required();
  dec->add_option("--vocab", dec_vocab, "vocabulary file")->required();
  dec->add_option("--in", dec_in, "input path prefix")->required();
  dec->add_option("--out", dec_out, "output path prefix")->required();
  app.add_option("--beam", beam_flag, "beam size");
  app.add_option("--alpha", alpha_flag, "length-normalization exponent");
  dec->add_option("--max-len", maxlen_flag, "decode length cap");
  dec->add_option("--workers", workers_flag, "example-parallel decode threads");

  // eval
  auto* ev = app.add_subcommand("eval", "score hypotheses against references");
  std::string ev_hyps, ev_refs, ev_srcs, ev_out;
  ev->add_option("--hyps", ev_hyps, "nbest .json or plain text hypotheses")->required();
  ev->add_option("--refs", ev_refs, "reference target file")->required();
  ev->add_option("--srcs", ev_srcs, "source file (for length buckets)");
  ev->add_option("--out", ev_out, "report path");

  // analyze-embeddings
  auto* an = app.add_subcommand("analyze-embeddings", "nearest neighbors + PCA export");
  std::string an_ckpt, an_vocab, an_out;
  std::vector<std::string> an_tokens;
  std::size_t an_k = 50, an_dims = 3;
  an->add_option("--ckpt", an_ckpt, "checkpoint file")->required();
  an->add_option("--vocab", an_vocab, "vocabulary file")->required();
  an->add_option("--token", an_tokens, "query tokens for nearest neighbors");
  an->add_option("--k", an_k, "neighbors per query");
  an->add_option("--pca-dims", an_dims, "projected dimensions");
  an->add_option("--out", an_out, "output json")->required();

  // export-attention
  auto* ea = app.add_subcommand("export-attention", "dump encoder attention as CSV");
  std::string ea_ckpt, ea_vocab, ea_in, ea_out;
  std::size_t ea_index = 0, ea_layer = 0;
  ea->add_option("--ckpt", ea_ckpt, "checkpoint file")->required();
  ea->add_option("--vocab", ea_vocab, "vocabulary file")->required();
  ea->add_option("--in", ea_in, "input path prefix")->required();
  ea->add_option("--index", ea_index, "example index");
  ea->add_option("--layer", ea_layer, "encoder layer");
  ea->add_option("--out", ea_out, "output csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    json cfg = load_config(config_path);
    DataOptions data;
    data.merge(cfg);
    if (!f5_flag.empty()) data.include_f5 = f5_flag == "on";
    bool f64 = precision == "f64";

    if (*synth) return run_synth(seed, synth_n, synth_profile, synth_out, synth_heldout);
    if (*prep) return run_preprocess(cfg, data, prep_in, prep_out, prep_heldout);
    if (*bv) return run_build_vocab(data, bv_in, bv_out);
    if (*train) {
      ModelConfig mc = model_config_from(cfg);
      TrainConfig tc = train_config_from(cfg);
      tc.seed = seed;
      if (cfg.contains("train") && cfg["train"].contains("seed"))
        tc.seed = cfg["train"]["seed"].get<std::uint64_t>();
      if (!arch_flag.empty()) mc.arch = arch_from_name(arch_flag);
      if (!cat_flag.empty()) mc.use_category_embedding = cat_flag == "on";
      if (steps_flag >= 0) tc.steps = static_cast<std::size_t>(steps_flag);
      return f64 ? run_train<double>(cfg, data, mc, tc, train_in, train_valid, train_vocab,
                                     train_out)
                 : run_train<float>(cfg, data, mc, tc, train_in, train_valid, train_vocab,
                                    train_out);
    }
    if (*dec) {
      DecodeOptions opts;
      std::size_t workers = 1;
      if (cfg.contains("decode")) {
        const json& d = cfg["decode"];
        if (d.contains("beam")) opts.beam_size = d["beam"].get<std::size_t>();
        if (d.contains("alpha")) opts.length_alpha = d["alpha"].get<double>();
        if (d.contains("max_len")) opts.max_len = d["max_len"].get<std::size_t>();
        if (d.contains("workers")) workers = d["workers"].get<std::size_t>();
      }
      if (beam_flag >= 0) opts.beam_size = static_cast<std::size_t>(beam_flag);
      if (alpha_flag >= 0) opts.length_alpha = alpha_flag;
      if (maxlen_flag >= 0) opts.max_len = static_cast<std::size_t>(maxlen_flag);
      if (workers_flag > 0) workers = workers_flag;
      return f64 ? run_decode<double>(cfg, data, dec_ckpt, dec_vocab, dec_in, dec_out, opts,
                                      workers)
                 : run_decode<float>(cfg, data, dec_ckpt, dec_vocab, dec_in, dec_out, opts,
                                     workers);
    }
    if (*ev) return run_eval(ev_hyps, ev_refs, ev_srcs, ev_out);
    if (*an)
      return f64 ? run_analyze_embeddings<double>(an_ckpt, an_vocab, an_tokens, an_k, an_dims,
                                                  an_out)
                 : run_analyze_embeddings<float>(an_ckpt, an_vocab, an_tokens, an_k, an_dims,
                                                 an_out);
    if (*ea)
      return f64 ? run_export_attention<double>(data, ea_ckpt, ea_vocab, ea_in, ea_index,
                                                ea_layer, ea_out)
                 : run_export_attention<float>(data, ea_ckpt, ea_vocab, ea_in, ea_index,
                                               ea_layer, ea_out);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
