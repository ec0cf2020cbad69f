#include "ctxlm/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ctxlm/generator.hpp"
#include "ctxlm/pipeline.hpp"
#include "ctxlm/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace ctxlm {

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument(path + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Collects what a command produced and writes manifest.json last.
class Manifest {
 public:
  Manifest(std::string command, const std::vector<std::string>& args, fs::path out_dir)
      : out_dir_(std::move(out_dir)) {
    doc_["command"] = std::move(command);
    doc_["argv"] = args;
    doc_["output_dir"] = out_dir_.string();
    doc_["started_at"] = utc_now();
    fs::create_directories(out_dir_);
  }
  const fs::path& dir() const { return out_dir_; }
  json& operator[](const char* key) { return doc_[key]; }
  fs::path artifact(const std::string& name, const std::string& file) {
    files_[name] = (out_dir_ / file).string();
    return out_dir_ / file;
  }
  void record(const std::string& name, const fs::path& path) { files_[name] = path.string(); }
  void write() {
    json artifacts = json::object();
    for (const auto& [name, path] : files_) artifacts[name] = {{"path", path}, {"hash", file_hash(path)}};
    doc_["artifacts"] = artifacts;
    doc_["finished_at"] = utc_now();
    write_json(out_dir_ / "manifest.json", doc_);
  }

 private:
  fs::path out_dir_;
  json doc_;
  std::map<std::string, std::string> files_;
};

std::string default_out_dir(const std::string& command) {
  const char* root = std::getenv("CTXLM_OUTPUT_ROOT");
  return (fs::path(root && *root ? root : "runs") / command).string();
}

/// Model, training and data flags shared by train, ablate and ci. Values set
/// on the command line override those from --config.
struct ExperimentFlags {
  std::string config_path;
  std::string corpus;
  std::string arch, attention, repr, context;
  std::size_t embed_dim = 0, hidden_dim = 0, context_dim = 0, rank = 0;
  bool no_zero_gate = false;
  double lr = 0, clip = 0;
  std::size_t batch_size = 0, steps = 0, eval_every = 0, min_count = 0, run = 0;
  std::uint64_t seed = 0;
  std::vector<unsigned> split;
  bool shuffle = false;
  std::map<std::string, CLI::Option*> opts;

  void add(CLI::App* app) {
    opts["config"] = app->add_option("--config", config_path, "JSON config or a previous run's manifest.json");
    opts["corpus"] = app->add_option("--corpus", corpus, "Corpus file (one 'YYYY-MM-DD HH:MM<TAB>text' per line)");
    opts["arch"] = app->add_option("--arch", arch, "default | prepend | concat | factor");
    opts["attention"] = app->add_option("--attention", attention, "none | word | hidden");
    opts["repr"] = app->add_option("--repr", repr, "learned | feature (datetime only)");
    opts["context"] = app->add_option("--context", context, "datetime | geo | prompt");
    opts["embed_dim"] = app->add_option("--embed-dim", embed_dim, "Word embedding size e (default 64)");
    opts["hidden_dim"] = app->add_option("--hidden-dim", hidden_dim, "LSTM state size d (default 64)");
    opts["context_dim"] = app->add_option("--context-dim", context_dim, "Context size f (32 learned, 8 feature)");
    opts["rank"] = app->add_option("--rank", rank, "Factorization rank r (default 5)");
    opts["no_zero_gate"] = app->add_flag("--no-zero-gate", no_zero_gate, "Drop the zero member of feature sets");
    opts["lr"] = app->add_option("--lr", lr, "Adam learning rate (default 0.001)");
    opts["batch_size"] = app->add_option("--batch-size", batch_size, "Utterances per batch (default 32)");
    opts["steps"] = app->add_option("--steps", steps, "Batch updates (default 5000)");
    opts["clip"] = app->add_option("--clip", clip, "Global gradient-norm clip, 0 disables (default 5)");
    opts["eval_every"] = app->add_option("--eval-every", eval_every, "Dev evaluation interval (default 250)");
    opts["min_count"] = app->add_option("--min-count", min_count, "Vocabulary frequency cutoff (default 1)");
    opts["seed"] = app->add_option("--seed", seed, "Root seed for split, init, batching and shuffling");
    opts["run"] = app->add_option("--run", run, "Run index; varies init and batching, keeps the split");
    opts["split"] = app->add_option("--split", split, "train dev test percentages (default 90 5 5)")->expected(3);
    opts["shuffle"] = app->add_flag("--shuffle-contexts", shuffle, "Permute context records within each split");
  }

  bool given(const char* name) const { return opts.at(name)->count() > 0; }

  ExperimentConfig resolve(std::string& corpus_path) const {
    ExperimentConfig cfg;
    if (given("config")) {
      json j = read_json(config_path);
      if (j.contains("config")) {  // a manifest
        if (j.contains("corpus") && !given("corpus")) corpus_path = j.at("corpus").get<std::string>();
        j = j.at("config");
      }
      cfg = ExperimentConfig::from_json(j);
    }
    if (given("corpus")) corpus_path = corpus;
    if (given("arch")) cfg.model.architecture = parse_architecture(arch);
    if (given("attention")) cfg.model.attention = parse_attention(attention);
    if (given("repr")) {
      cfg.model.context_repr = parse_repr(repr);
      if (cfg.model.context_repr == ContextRepr::Feature && !given("context_dim")) cfg.model.context_dim = 8;
    }
    if (given("context")) cfg.model.context_type = parse_context_type(context);
    if (given("embed_dim")) cfg.model.embed_dim = embed_dim;
    if (given("hidden_dim")) cfg.model.hidden_dim = hidden_dim;
    if (given("context_dim")) cfg.model.context_dim = context_dim;
    if (given("rank")) cfg.model.factor_rank = rank;
    if (given("no_zero_gate")) cfg.model.zero_gate = !no_zero_gate;
    if (given("lr")) cfg.train.learning_rate = lr;
    if (given("batch_size")) cfg.train.batch_size = batch_size;
    if (given("steps")) cfg.train.max_steps = steps;
    if (given("clip")) cfg.train.grad_clip_norm = clip;
    if (given("eval_every")) cfg.train.eval_every = eval_every;
    if (given("min_count")) cfg.min_count = min_count;
    if (given("seed")) cfg.seed = seed;
    if (given("run")) cfg.run = run;
    if (given("split")) {
      cfg.split.train = split.at(0);
      cfg.split.dev = split.at(1);
      cfg.split.test = split.at(2);
    }
    if (given("shuffle")) cfg.shuffle_contexts = shuffle;

    // vocab_size is only known after reading the corpus; validate the rest now.
    ModelConfig probe = cfg.model;
    probe.vocab_size = 1;
    probe.validate();
    cfg.train.validate();
    cfg.split.validate();
    if (corpus_path.empty()) throw ConfigError("no corpus given (--corpus)");
    return cfg;
  }
};

std::string absolute(const std::string& p) { return fs::absolute(p).lexically_normal().string(); }

// --- generate ---

int cmd_generate(const std::vector<std::string>& args, const std::string& config_path, std::uint64_t seed,
                 std::size_t utterances, bool independent, const std::string& out_path, const std::string& out_dir,
                 std::ostream& out) {
  GeneratorConfig gen = config_path.empty() ? default_generator_config()
                                            : GeneratorConfig::from_json(read_json(config_path));
  if (utterances) gen.utterances = utterances;
  if (independent) gen = gen.without_planted_effects();
  gen.validate();

  Manifest manifest("generate", args, out_dir);
  const Corpus corpus = generate_synthetic(gen, seed);
  const fs::path corpus_file = out_path.empty() ? manifest.dir() / "corpus.txt" : fs::path(out_path);
  if (corpus_file.has_parent_path()) fs::create_directories(corpus_file.parent_path());
  manifest.record("corpus", corpus_file);
  save_corpus(corpus_file.string(), corpus);
  const fs::path gen_file = manifest.artifact("generator_config", "generator.json");
  write_json(gen_file, gen.to_json());

  const auto freq = text_frequencies(corpus);
  const auto labels = partition_head_tail(corpus, freq);
  SplitSpec spec;
  spec.seed = derive_seed(seed, "split");
  const Splits splits = split_corpus(corpus, spec);
  const std::string hash = corpus_hash(corpus);

  out << "utterances " << corpus.size() << "\n"
      << "unique texts " << freq.size() << "\n"
      << "head utterances " << labels.head_count() << ", tail utterances " << labels.tail_count() << "\n"
      << "split train=" << splits.train.size() << " dev=" << splits.dev.size() << " test=" << splits.test.size()
      << "\n"
      << "corpus hash " << hash << "\n"
      << "wrote " << corpus_file.string() << "\n";

  manifest["seed"] = seed;
  manifest["config"] = gen.to_json();
  manifest["config_path"] = config_path.empty() ? json(nullptr) : json(absolute(config_path));
  manifest["corpus"] = absolute(corpus_file.string());
  manifest["corpus_hash"] = hash;
  manifest.write();
  return kExitOk;
}

// --- train ---

int cmd_train(const std::vector<std::string>& args, const ExperimentFlags& flags, const std::string& out_dir,
              std::ostream& out, std::ostream& err) {
  std::string corpus_path;
  const ExperimentConfig cfg = flags.resolve(corpus_path);
  const Corpus corpus = load_corpus(corpus_path);
  const PreparedData data = prepare_data(corpus, cfg);

  Manifest manifest("train", args, out_dir);
  auto progress = [&](const CurvePoint& p) {
    err << "step " << p.step << " train_loss " << p.train_loss << " dev_ppl " << p.dev_ppl << "\n";
  };
  RunOutput run = run_experiment(data, cfg, progress);

  json meta = {{"experiment", cfg.to_json()}, {"corpus_hash", data.corpus_hash}};
  const auto ckpt = manifest.artifact("checkpoint", "model.ckpt");
  save_checkpoint(ckpt.string(), run.model, data.vocab, meta);
  write_curve_csv(manifest.artifact("loss_curve", "loss.csv").string(), run.training.curve);
  write_json(manifest.artifact("report", "report.json"), run.report.to_json());
  const std::string table = format_table({run.report});
  write_text(manifest.artifact("report_table", "report.txt"), table);
  out << table;

  manifest["seed"] = cfg.seed;
  manifest["config"] = cfg.to_json();
  manifest["config_path"] = flags.given("config") ? json(absolute(flags.config_path)) : json(nullptr);
  manifest["corpus"] = absolute(corpus_path);
  manifest["corpus_hash"] = data.corpus_hash;
  manifest.write();
  return kExitOk;
}

// --- eval ---

int cmd_eval(const std::vector<std::string>& args, const std::string& checkpoint, std::string corpus_path,
             const std::string& baseline, const std::string& out_dir, std::ostream& out) {
  Checkpoint ck = load_checkpoint(checkpoint);
  if (!ck.metadata.contains("experiment")) throw CheckpointError(checkpoint + ": no experiment metadata");
  const ExperimentConfig cfg = ExperimentConfig::from_json(ck.metadata.at("experiment"));
  if (corpus_path.empty()) throw ConfigError("no corpus given (--corpus)");
  const Corpus corpus = load_corpus(corpus_path);
  const PreparedData data = prepare_data(corpus, cfg);
  if (!(data.vocab == ck.vocab))
    throw CorpusMismatchError("the corpus does not reproduce the checkpoint's vocabulary");

  EvalReport report = evaluate(ck.model, data.test, data.test_labels, data.corpus_hash);
  report.metadata["seed"] = cfg.seed;
  report.metadata["run"] = cfg.run;
  std::vector<EvalReport> rows;
  json doc = report.to_json();
  if (!baseline.empty()) {
    const EvalReport base = EvalReport::from_json(read_json(baseline));
    const auto red = relative_reduction(report, base);
    json r = json::object();
    for (const auto& [p, v] : red) r[partition_name(p)] = v ? json(*v) : json(nullptr);
    doc["relative_reduction"] = r;
    doc["baseline"] = base.model;
    rows.push_back(base);
  }
  rows.push_back(report);
  Manifest manifest("eval", args, out_dir);
  write_json(manifest.artifact("report", "eval.json"), doc);
  const std::string table = format_table(rows, !baseline.empty());
  write_text(manifest.artifact("report_table", "eval.txt"), table);
  out << table;
  manifest["seed"] = cfg.seed;
  manifest["config"] = cfg.to_json();
  manifest["checkpoint"] = absolute(checkpoint);
  manifest["corpus"] = absolute(corpus_path);
  manifest["corpus_hash"] = data.corpus_hash;
  manifest.write();
  return kExitOk;
}

// --- ablate ---

int cmd_ablate(const std::vector<std::string>& args, const ExperimentFlags& flags, const std::string& out_dir,
               std::ostream& out) {
  std::string corpus_path;
  const ExperimentConfig cfg = flags.resolve(corpus_path);
  if (!cfg.model.adapts() && cfg.model.architecture != Architecture::Prepend)
    throw ConfigError("ablate needs a contextual architecture, not " + to_string(cfg.model.architecture));
  const Corpus corpus = load_corpus(corpus_path);
  AblationResult result = shuffled_ablation(corpus, cfg);
  result.true_context.model += " (true contexts)";
  result.shuffled.model += " (shuffled contexts)";

  Manifest manifest("ablate", args, out_dir);
  json delta = json::object();
  for (const auto& [p, v] : result.delta) delta[partition_name(p)] = v ? json(*v) : json(nullptr);
  write_json(manifest.artifact("report", "ablation.json"),
             {{"true_context", result.true_context.to_json()},
              {"shuffled", result.shuffled.to_json()},
              {"reduction_vs_shuffled", delta}});
  const std::string table = format_table({result.shuffled, result.true_context}, true);
  write_text(manifest.artifact("report_table", "ablation.txt"), table);
  out << table;
  manifest["seed"] = cfg.seed;
  manifest["config"] = cfg.to_json();
  manifest["corpus"] = absolute(corpus_path);
  manifest["corpus_hash"] = result.true_context.corpus_hash;
  manifest.write();
  return kExitOk;
}

// --- ci ---

int cmd_ci(const std::vector<std::string>& args, const ExperimentFlags& flags, std::size_t runs, std::size_t jobs,
           double level, const std::string& out_dir, std::ostream& out, std::ostream& err) {
  std::string corpus_path;
  const ExperimentConfig cfg = flags.resolve(corpus_path);
  if (runs < 2) throw ConfigError("ci needs at least 2 runs");
  if (jobs == 0) jobs = 1;
  const Corpus corpus = load_corpus(corpus_path);
  const PreparedData data = prepare_data(corpus, cfg);

  std::vector<EvalReport> reports(runs);
  std::vector<std::exception_ptr> errors(runs);
  std::mutex log_mutex;
  std::size_t next = 0;
  std::mutex next_mutex;
  auto worker = [&] {
    for (;;) {
      std::size_t r;
      {
        std::lock_guard<std::mutex> lock(next_mutex);
        if (next == runs) return;
        r = next++;
      }
      try {
        ExperimentConfig rc = cfg;
        rc.run = cfg.run + r;
        reports[r] = run_experiment(data, rc).report;
        std::lock_guard<std::mutex> lock(log_mutex);
        err << "run " << rc.run << " full ppl " << *reports[r].ppl(Partition::Full) << "\n";
      } catch (...) {
        errors[r] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (std::size_t j = 0; j < std::min(jobs, runs); ++j) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  Manifest manifest("ci", args, out_dir);
  json doc = {{"runs", json::array()}, {"level", level}, {"intervals", json::object()}};
  for (const auto& r : reports) doc["runs"].push_back(r.to_json());
  std::ostringstream table;
  table << "partition  mean  half_width  n\n";
  for (Partition p : {Partition::Full, Partition::Head, Partition::Tail}) {
    std::vector<double> values;
    for (const auto& r : reports)
      if (auto v = r.ppl(p)) values.push_back(*v);
    if (values.size() < 2) {
      doc["intervals"][partition_name(p)] = nullptr;
      table << partition_name(p) << "  absent\n";
      continue;
    }
    const auto ci = confidence_interval(values, level);
    doc["intervals"][partition_name(p)] = {
        {"mean", ci.mean}, {"half_width", ci.half_width}, {"level", ci.level}, {"n_runs", ci.n_runs}};
    table << partition_name(p) << "  " << ci.mean << "  " << ci.half_width << "  " << ci.n_runs << "\n";
  }
  write_json(manifest.artifact("report", "ci.json"), doc);
  write_text(manifest.artifact("report_table", "ci.txt"), table.str());
  out << table.str();
  manifest["seed"] = cfg.seed;
  manifest["config"] = cfg.to_json();
  manifest["runs"] = runs;
  manifest["corpus"] = absolute(corpus_path);
  manifest["corpus_hash"] = data.corpus_hash;
  manifest.write();
  return kExitOk;
}

// --- sweep / trace ---

ContextRecord parse_time(const std::string& time, const std::string& geo, const std::string& prompt) {
  ContextExtras extras;
  if (!geo.empty()) extras.geo_hash = geo;
  if (!prompt.empty()) extras.prompt = parse_prompt(prompt);
  return parse_context(time, extras);
}

std::vector<std::string> split_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> words;
  for (std::string w; in >> w;) words.push_back(w);
  return words;
}

int cmd_sweep(const std::vector<std::string>& args, const std::string& checkpoint, const std::string& baseline,
              const std::string& word, const std::string& prefix, const std::string& field_name_arg,
              const std::string& time, const std::string& out_dir, std::ostream& out) {
  const ContextField field = parse_field(field_name_arg);
  const auto values = field_values(field);
  const ContextRecord base = parse_time(time, "", "");
  Checkpoint ck = load_checkpoint(checkpoint);
  const auto target = ck.vocab.find(word);
  if (!target) throw std::invalid_argument("'" + word + "' is not in the model vocabulary");
  const auto curve = probability_sweep(ck.model, ck.vocab.encode(split_words(prefix)), *target, base, field, values);
  std::vector<double> base_curve;
  if (!baseline.empty()) {
    Checkpoint bk = load_checkpoint(baseline);
    const auto bt = bk.vocab.find(word);
    if (!bt) throw std::invalid_argument("'" + word + "' is not in the baseline vocabulary");
    base_curve = probability_sweep(bk.model, bk.vocab.encode(split_words(prefix)), *bt, base, field, values);
  }
  Manifest manifest("sweep", args, out_dir);
  const std::string csv = sweep_csv(field, values, curve, baseline.empty() ? nullptr : &base_curve);
  write_text(manifest.artifact("curve", "sweep.csv"), csv);
  out << csv;
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i] > curve[best]) best = i;
  out << "argmax " << field_name(field) << " = " << values[best] << "\n";
  manifest["checkpoint"] = absolute(checkpoint);
  manifest["baseline"] = baseline.empty() ? json(nullptr) : json(absolute(baseline));
  manifest["config"] = {{"word", word}, {"prefix", prefix}, {"field", field_name(field)}, {"time", time}};
  manifest.write();
  return kExitOk;
}

int cmd_trace(const std::vector<std::string>& args, const std::string& checkpoint, const std::string& text,
              const std::string& time, const std::string& geo, const std::string& prompt, const std::string& out_dir,
              std::ostream& out) {
  Checkpoint ck = load_checkpoint(checkpoint);
  if (ck.model.config().attention == AttentionQuery::None)
    throw ConfigError("trace needs a model trained with attention");
  const auto trace = attention_trace(ck.model, ck.vocab, split_words(text), parse_time(time, geo, prompt));
  Manifest manifest("trace", args, out_dir);
  const std::string csv = trace_csv(trace);
  write_text(manifest.artifact("trace", "trace.csv"), csv);
  out << csv;
  manifest["checkpoint"] = absolute(checkpoint);
  manifest["config"] = {{"text", text}, {"time", time}, {"geo", geo}, {"prompt", prompt}};
  manifest.write();
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Contextual LSTM language models conditioned on datetime, location and dialogue state", "ctxlm"};
  app.require_subcommand(1);

  std::string out_dir;
  auto add_out = [&](CLI::App* sub, const std::string& name) {
    sub->add_option("--out-dir", out_dir, "Output directory (default $CTXLM_OUTPUT_ROOT/" + name + " or runs/" +
                                              name + ")");
  };

  auto* gen = app.add_subcommand("generate", "Write a synthetic corpus with planted context effects");
  std::string gen_config, gen_out;
  std::uint64_t gen_seed = 0;
  std::size_t gen_utterances = 0;
  bool gen_independent = false;
  gen->add_option("--config", gen_config, "Generator config JSON (default: built-in planted config)");
  gen->add_option("--seed", gen_seed, "Sampling seed");
  gen->add_option("--utterances", gen_utterances, "Override the number of utterances");
  gen->add_flag("--independent", gen_independent, "Average all tables so text is independent of context");
  gen->add_option("--out", gen_out, "Corpus path (default <out-dir>/corpus.txt)");
  add_out(gen, "generate");

  ExperimentFlags train_flags, ablate_flags, ci_flags;
  auto* train_cmd = app.add_subcommand("train", "Train one model and evaluate it on the test split");
  train_flags.add(train_cmd);
  add_out(train_cmd, "train");

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on its test split");
  std::string eval_ckpt, eval_corpus, eval_baseline;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "Checkpoint written by train")->required();
  eval_cmd->add_option("--corpus", eval_corpus, "Corpus the checkpoint was trained on")->required();
  eval_cmd->add_option("--baseline", eval_baseline, "Baseline report.json for relative reductions");
  add_out(eval_cmd, "eval");

  auto* ablate_cmd = app.add_subcommand("ablate", "Retrain on shuffled contexts and compare");
  ablate_flags.add(ablate_cmd);
  add_out(ablate_cmd, "ablate");

  auto* ci_cmd = app.add_subcommand("ci", "Repeat training over run seeds and report confidence intervals");
  ci_flags.add(ci_cmd);
  std::size_t ci_runs = 5, ci_jobs = 1;
  double ci_level = 0.95;
  ci_cmd->add_option("--runs", ci_runs, "Number of runs (default 5)");
  ci_cmd->add_option("--jobs", ci_jobs, "Runs trained in parallel (default 1)");
  ci_cmd->add_option("--level", ci_level, "Confidence level (default 0.95)");
  add_out(ci_cmd, "ci");

  auto* sweep_cmd = app.add_subcommand("sweep", "P(word | prefix, context) over the values of one field");
  std::string sweep_ckpt, sweep_base, sweep_word, sweep_prefix, sweep_field = "hour",
                                                                sweep_time = "2020-06-10 00:00";
  sweep_cmd->add_option("--checkpoint", sweep_ckpt, "Contextual model checkpoint")->required();
  sweep_cmd->add_option("--baseline", sweep_base, "Context-free checkpoint for the constant reference line");
  sweep_cmd->add_option("--word", sweep_word, "Target word")->required();
  sweep_cmd->add_option("--prefix", sweep_prefix, "Words after <s> preceding the target (default none)");
  sweep_cmd->add_option("--field", sweep_field, "month | week | weekday | hour (default hour)");
  sweep_cmd->add_option("--time", sweep_time, "Base timestamp for the fields held fixed");
  add_out(sweep_cmd, "sweep");

  auto* trace_cmd = app.add_subcommand("trace", "Per-step attention weights over the context members");
  std::string trace_ckpt, trace_text, trace_time = "2020-12-23 07:00", trace_geo, trace_prompt;
  trace_cmd->add_option("--checkpoint", trace_ckpt, "Checkpoint of a model with attention")->required();
  trace_cmd->add_option("--text", trace_text, "Utterance text")->required();
  trace_cmd->add_option("--time", trace_time, "Timestamp 'YYYY-MM-DD HH:MM'");
  trace_cmd->add_option("--geo", trace_geo, "Geo-hash");
  trace_cmd->add_option("--prompt", trace_prompt, "initial | follow_up");
  add_out(trace_cmd, "trace");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    auto dir = [&](const char* name) { return out_dir.empty() ? default_out_dir(name) : out_dir; };
    if (*gen) return cmd_generate(args, gen_config, gen_seed, gen_utterances, gen_independent, gen_out,
                                  dir("generate"), out);
    if (*train_cmd) return cmd_train(args, train_flags, dir("train"), out, err);
    if (*eval_cmd) return cmd_eval(args, eval_ckpt, eval_corpus, eval_baseline, dir("eval"), out);
    if (*ablate_cmd) return cmd_ablate(args, ablate_flags, dir("ablate"), out);
    if (*ci_cmd) return cmd_ci(args, ci_flags, ci_runs, ci_jobs, ci_level, dir("ci"), out, err);
    if (*sweep_cmd)
      return cmd_sweep(args, sweep_ckpt, sweep_base, sweep_word, sweep_prefix, sweep_field, sweep_time,
                       dir("sweep"), out);
    if (*trace_cmd)
      return cmd_trace(args, trace_ckpt, trace_text, trace_time, trace_geo, trace_prompt, dir("trace"), out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace ctxlm
