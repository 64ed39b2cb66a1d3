#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "httn/checkpoint.hpp"
#include "httn/pipeline.hpp"

namespace fs = std::filesystem;
using namespace httn;

namespace {

constexpr int kUsage = 2;
constexpr int kRuntime = 3;

std::string dashed(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

// Every RunConfig key as a --flag; booleans also accept --no-flag.
// Resolution order: defaults < base text (checkpoint) < --config file < flags.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::map<std::string, std::optional<bool>> switches;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key=value config file (flags win)");
    cmd->add_option("--set", sets, "extra key=value override (repeatable)");
    RunConfig probe;
    probe.visit([&](const char* name, auto& field) {
      using T = std::decay_t<decltype(field)>;
      if constexpr (std::is_same_v<T, bool>) {
        auto& slot = switches[name];
        cmd->add_flag_callback("--" + dashed(name), [&slot] { slot = true; }, std::string("set ") + name + "=true");
        cmd->add_flag_callback("--no-" + dashed(name), [&slot] { slot = false; }, std::string("set ") + name + "=false");
      } else {
        cmd->add_option("--" + dashed(name), values[name], std::string("config key ") + name);
      }
    });
  }

  RunConfig resolve(const std::string& base = {}) const {
    RunConfig cfg;
    if (!base.empty()) cfg.apply_text(base);
    if (!config_file.empty()) cfg.apply_text(read_file(config_file));
    for (const auto& [k, v] : values)
      if (!v.empty()) cfg.set(k, v);
    for (const auto& [k, v] : switches)
      if (v) cfg.set(k, *v ? "true" : "false");
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got \"" + kv + "\"");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ConfigError(what + " path is required");
  if (!fs::exists(path)) throw ConfigError(what + " not found: " + path);
}

void require_corpus(const RunConfig& cfg, bool with_test) {
  require_file(cfg.train_documents, "train_documents");
  require_file(cfg.train_labels, "train_labels");
  if (with_test || !cfg.test_documents.empty()) {
    require_file(cfg.test_documents, "test_documents");
    require_file(cfg.test_labels, "test_labels");
  }
  if (!cfg.embeddings.empty()) require_file(cfg.embeddings, "embeddings");
}

struct Loaded {
  Corpus corpus;
  Matrix embeddings;
};

Loaded load_inputs(const RunConfig& cfg, bool with_test) {
  require_corpus(cfg, with_test);
  Loaded in;
  in.corpus = load_run_corpus(cfg, true);
  std::vector<std::string> warnings;
  in.embeddings = embedding_matrix(cfg, in.corpus, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return in;
}

std::string variant_name(const RunConfig& cfg) {
  if (cfg.members > 1) return "EH";
  if (cfg.attention && cfg.finetune) return "H";
  if (cfg.attention) return "H-F";
  if (cfg.finetune) return "H-A";
  return "H-F-A";
}

void write_loss_csv(const fs::path& path, const std::vector<double>& trace) {
  std::ostringstream os;
  os << "epoch,loss\n";
  os.precision(17);
  for (std::size_t e = 0; e < trace.size(); ++e) os << e + 1 << ',' << trace[e] << '\n';
  write_text(path, os.str());
}

// synth ----------------------------------------------------------------------

struct SynthArgs {
  SyntheticSpec spec;
  std::size_t embed_dim = 32;
  double spread = 0.5;
  std::string out_dir = ".";

  void attach(CLI::App* cmd) {
    cmd->add_option("--labels", spec.num_labels, "number of labels l");
    cmd->add_option("--tail-labels", spec.tail_labels, "number of tail labels");
    cmd->add_option("--zipf", spec.zipf_exponent, "Zipf exponent");
    cmd->add_option("--correlation", spec.correlation, "head-tail co-occurrence strength in [0,1]");
    cmd->add_option("--train-docs", spec.train_documents, "training documents");
    cmd->add_option("--test-docs", spec.test_documents, "test documents");
    cmd->add_option("--vocab", spec.vocabulary_size, "vocabulary size");
    cmd->add_option("--tokens", spec.tokens_per_document, "mean tokens per document");
    cmd->add_option("--signature-tokens", spec.signature_tokens, "planted tokens per label");
    cmd->add_option("--signal-rate", spec.signal_rate, "share of signature tokens");
    cmd->add_option("--extra-label-rate", spec.extra_label_rate, "chance of an extra head label");
    cmd->add_option("--tail-shots", spec.tail_shots, "exact training documents per tail label (0: Zipf)");
    cmd->add_option("--embed-dim", embed_dim, "word-vector dimension");
    cmd->add_option("--spread", spread, "signature word-vector spread");
    cmd->add_option("--seed", spec.seed, "generator seed");
    cmd->add_option("--out", out_dir, "output directory");
  }
};

// Writes the corpus, word vectors and a config file pointing at them.
RunConfig do_synth(const SynthArgs& a, std::ostream& log) {
  try {
    a.spec.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (a.embed_dim == 0) throw ConfigError("--embed-dim must be positive");
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  const SyntheticCorpus syn = synthesize_longtail(a.spec);
  write_corpus(syn.corpus, SplitTag::train, dir / "train.docs", dir / "train.labels");
  write_corpus(syn.corpus, SplitTag::test, dir / "test.docs", dir / "test.labels");
  write_embeddings(synthesize_embeddings(a.spec, a.embed_dim, a.spread), dir / "embeddings.txt");

  RunConfig cfg;
  cfg.train_documents = (dir / "train.docs").string();
  cfg.train_labels = (dir / "train.labels").string();
  cfg.test_documents = (dir / "test.docs").string();
  cfg.test_labels = (dir / "test.labels").string();
  cfg.embeddings = (dir / "embeddings.txt").string();
  cfg.embed_dim = a.embed_dim;
  cfg.tail_labels = a.spec.tail_labels;
  cfg.seed = a.spec.seed;
  write_text(dir / "corpus.cfg", cfg.to_text());

  const auto freq = label_frequency(syn.corpus);
  log << "label  train_docs  target\n";
  for (std::size_t j = 0; j < freq.size(); ++j) {
    char line[64];
    std::snprintf(line, sizeof line, "%5zu  %10zu  %6.1f%s\n", j, freq[j], syn.target_counts[j],
                  j >= a.spec.head_labels() ? "  tail" : "");
    log << line;
  }
  log << "wrote " << (dir / "corpus.cfg").string() << '\n';
  return cfg;
}

// train-head / train-joint -----------------------------------------------------

void do_train_head(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const Loaded in = load_inputs(cfg, false);
  const StageOne s1 = run_stage_one(in.corpus, in.embeddings, cfg);
  Checkpoint ck;
  store_encoder(ck, s1.head.encoder);
  store_split(ck, s1.split);
  ck.put("head/weights", s1.head.weights);
  ck.put("head/loss", detail::trace_row(s1.head.loss_trace));
  ck.config = cfg.to_text();
  ck.save(out);
  write_loss_csv(fs::path(out.string() + ".loss.csv"), s1.head.loss_trace);
  log << "head labels " << s1.split.head_labels.size() << ", tail labels " << s1.split.tail_labels.size()
      << ", loss " << s1.head.loss_trace.front() << " -> " << s1.head.loss_trace.back() << '\n';
}

void do_train_joint(const RunConfig& cfg, const fs::path& out, std::ostream& log) {
  const Loaded in = load_inputs(cfg, false);
  const TrainResult joint = run_joint(in.corpus, in.embeddings, cfg);
  const HeadTailSplit split = split_head_tail(in.corpus, cfg.tail_labels);
  Checkpoint ck;
  store_encoder(ck, joint.encoder);
  store_split(ck, split);
  ck.put("joint/weights", joint.weights);
  ck.put("joint/loss", detail::trace_row(joint.loss_trace));
  ck.config = cfg.to_text();
  ck.save(out);
  write_loss_csv(fs::path(out.string() + ".loss.csv"), joint.loss_trace);
  log << "joint loss " << joint.loss_trace.front() << " -> " << joint.loss_trace.back() << '\n';
}

// build-tail -------------------------------------------------------------------

Checkpoint load_stage(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path.string());
  return Checkpoint::load(path);
}

void do_build_tail(const RunConfig& cfg, Checkpoint ck, const fs::path& out, std::ostream& log) {
  if (!ck.has("head/weights")) throw DataError("checkpoint has no head classifier (run train-head first)");
  const Loaded in = load_inputs(cfg, false);
  const EncoderParams encoder = load_encoder(ck, in.corpus);
  const HeadTailSplit split = load_split(ck, in.corpus);
  const auto reps = encode_training_documents(encoder, in.corpus);
  const HttnModel model = build_tail(in.corpus, split, reps, ck.get("head/weights"), cfg);
  store_model(ck, model);
  for (std::size_t g = 0; g < model.finetune_traces.size(); ++g)
    ck.put("finetune/loss/" + std::to_string(g), detail::trace_row(model.finetune_traces[g]));
  ck.config = cfg.to_text();
  ck.save(out);
  log << variant_name(cfg) << ": G=" << model.ensemble.size() << ", transfer objective " << model.map.objective
      << '\n';
  if (!split.zero_document_labels.empty()) {
    log << "tail labels without training documents (zero prototype):";
    for (LabelId z : split.zero_document_labels) log << ' ' << z;
    log << '\n';
  }
}

// evaluate ---------------------------------------------------------------------

struct Evaluation {
  std::string method;
  EvalReport report;
};

Evaluation evaluate_checkpoint(const RunConfig& cfg, const Checkpoint& ck) {
  const Loaded in = load_inputs(cfg, true);
  const EncoderParams encoder = load_encoder(ck, in.corpus);
  const HeadTailSplit split = load_split(ck, in.corpus);
  if (ck.has("ensemble/size")) {
    const EnsembleModel model = load_ensemble(ck, cfg.aggregation);
    return {variant_name(cfg), evaluate_model(encoder, model, in.corpus, split, cfg.eval_options())};
  }
  if (ck.has("joint/weights")) {
    return {"Joint", evaluate_weights(encoder, ck.get("joint/weights"), in.corpus, split, cfg.eval_options())};
  }
  throw DataError("checkpoint has no assembled classifier (run build-tail or train-joint)");
}

void write_reports(const Evaluation& ev, const std::string& prefix, std::ostream& log) {
  std::ostringstream csv, per_label, table;
  write_report_csv(csv, ev.method, ev.report);
  write_per_label_csv(per_label, ev.report);
  write_report_table(table, {{ev.method + " overall", ev.report.overall},
                             {ev.method + " head", ev.report.head},
                             {ev.method + " tail", ev.report.tail}});
  write_text(prefix + ".csv", csv.str());
  write_text(prefix + "_per_label.csv", per_label.str());
  write_text(prefix + ".txt", table.str());
  log << table.str();
}

// sweep-s ----------------------------------------------------------------------

std::vector<std::size_t> parse_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stoull(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(what + ": bad list entry \"" + item + "\"");
    }
  }
  if (out.empty()) throw ConfigError(what + " must not be empty");
  return out;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void do_sweep(const RunConfig& cfg, const Checkpoint* stage, const std::vector<std::size_t>& s_values,
              const std::vector<std::size_t>& seeds, const fs::path& out, std::ostream& log) {
  const Loaded in = load_inputs(cfg, true);
  EncoderParams encoder;
  HeadTailSplit split;
  Matrix head_weights;
  if (stage) {
    encoder = load_encoder(*stage, in.corpus);
    split = load_split(*stage, in.corpus);
    head_weights = stage->get("head/weights");
  } else {
    StageOne s1 = run_stage_one(in.corpus, in.embeddings, cfg);
    encoder = std::move(s1.head.encoder);
    split = std::move(s1.split);
    head_weights = std::move(s1.head.weights);
  }
  const auto reps = encode_training_documents(encoder, in.corpus);

  std::ostringstream csv;
  csv << "S,seed,micro_F1,tail_macro_F1\n";
  std::map<std::size_t, std::vector<double>> micro, tail;
  for (std::size_t s : s_values) {
    for (std::size_t seed : seeds) {
      RunConfig run = cfg;
      run.samples = s;
      run.seed = seed;
      const HttnModel model = build_tail(in.corpus, split, reps, head_weights, run);
      const EvalReport rep = evaluate_model(encoder, model.ensemble, in.corpus, split, run.eval_options());
      csv << s << ',' << seed << ',' << detail::fixed(rep.overall.micro_f1, 6) << ','
          << detail::fixed(rep.tail.macro_f1, 6) << '\n';
      micro[s].push_back(rep.overall.micro_f1);
      tail[s].push_back(rep.tail.macro_f1);
    }
  }
  write_text(out, csv.str());
  log << "S      median_micro_F1  median_tail_macro_F1\n";
  for (std::size_t s : s_values) {
    char line[96];
    std::snprintf(line, sizeof line, "%-6zu %15.4f  %20.4f\n", s, median(micro[s]), median(tail[s]));
    log << line;
  }
}

// ensemble-report ----------------------------------------------------------------

void do_ensemble_report(const RunConfig& cfg, const Checkpoint& ck, const fs::path& out, std::ostream& log) {
  if (!ck.has("ensemble/size")) throw DataError("checkpoint has no ensemble (run build-tail first)");
  const EnsembleModel model = load_ensemble(ck, cfg.aggregation);
  if (model.size() < 2) throw ConfigError("ensemble-report needs G >= 2 members, checkpoint has " +
                                          std::to_string(model.size()));
  const Loaded in = load_inputs(cfg, true);
  const EncoderParams encoder = load_encoder(ck, in.corpus);
  const HeadTailSplit split = load_split(ck, in.corpus);
  const EvalOptions opts = cfg.eval_options();

  std::ostringstream csv;
  csv << "member,micro_F1,tail_macro_F1,tail_micro_F1\n";
  std::vector<double> tails;
  for (std::size_t g = 0; g < model.size(); ++g) {
    const EvalReport rep = evaluate_weights(encoder, model.members[g], in.corpus, split, opts);
    csv << g << ',' << detail::fixed(rep.overall.micro_f1, 6) << ',' << detail::fixed(rep.tail.macro_f1, 6) << ','
        << detail::fixed(rep.tail.micro_f1, 6) << '\n';
    tails.push_back(rep.tail.macro_f1);
  }
  const EvalReport ens = evaluate_model(encoder, model, in.corpus, split, opts);
  csv << "ensemble," << detail::fixed(ens.overall.micro_f1, 6) << ',' << detail::fixed(ens.tail.macro_f1, 6) << ','
      << detail::fixed(ens.tail.micro_f1, 6) << '\n';
  write_text(out, csv.str());

  double avg = 0.0;
  for (double v : tails) avg += v;
  avg /= static_cast<double>(tails.size());
  log << "tail macro-F1: min " << detail::fixed(*std::min_element(tails.begin(), tails.end())) << "  avg "
      << detail::fixed(avg) << "  max " << detail::fixed(*std::max_element(tails.begin(), tails.end()))
      << "  ensemble " << detail::fixed(ens.tail.macro_f1) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"httn: head-to-tail network for long-tailed multi-label text classification"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "generate a synthetic long-tail corpus and word vectors");
  synth_args.attach(synth);

  ConfigFlags head_flags;
  std::string head_out = "head.ckpt";
  auto* train_head = app.add_subcommand("train-head", "train the encoder and head classifier");
  head_flags.attach(train_head);
  train_head->add_option("--out", head_out, "checkpoint to write");

  ConfigFlags joint_flags;
  std::string joint_out = "joint.ckpt";
  auto* train_joint = app.add_subcommand("train-joint", "train the joint baseline over all labels");
  joint_flags.attach(train_joint);
  train_joint->add_option("--out", joint_out, "checkpoint to write");

  ConfigFlags tail_flags;
  std::string tail_in, tail_out = "httn.ckpt";
  auto* build = app.add_subcommand("build-tail", "fit the transfer map and synthesize tail classifiers");
  tail_flags.attach(build);
  build->add_option("--checkpoint", tail_in, "stage-1 checkpoint")->required();
  build->add_option("--out", tail_out, "checkpoint to write");

  ConfigFlags eval_flags;
  std::string eval_in, eval_prefix = "report";
  auto* eval = app.add_subcommand("evaluate", "evaluate an HTTN or joint checkpoint on the test split");
  eval_flags.attach(eval);
  eval->add_option("--checkpoint", eval_in, "checkpoint to evaluate")->required();
  eval->add_option("--out-prefix", eval_prefix, "writes PREFIX.csv, PREFIX_per_label.csv, PREFIX.txt");

  ConfigFlags sweep_flags;
  std::string sweep_in, sweep_s = "5,20,40", sweep_seeds = "1,2,3", sweep_out = "sweep_s.csv";
  auto* sweep = app.add_subcommand("sweep-s", "F1 as a function of the number of prototype draws S");
  sweep_flags.attach(sweep);
  sweep->add_option("--checkpoint", sweep_in, "stage-1 checkpoint (trained if omitted)");
  sweep->add_option("--s-values", sweep_s, "comma-separated S values");
  sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds");
  sweep->add_option("--out", sweep_out, "CSV to write");

  ConfigFlags ens_flags;
  std::string ens_in, ens_out = "ensemble.csv";
  auto* ens = app.add_subcommand("ensemble-report", "per-member and ensemble F1");
  ens_flags.attach(ens);
  ens->add_option("--checkpoint", ens_in, "checkpoint with G >= 2 members")->required();
  ens->add_option("--out", ens_out, "CSV to write");

  ConfigFlags all_flags;
  SynthArgs all_synth;
  std::string all_dir = "run";
  auto* run_all = app.add_subcommand("run-all", "synth (if no corpus given), train-head, build-tail, evaluate");
  all_flags.attach(run_all);
  run_all->add_option("--out-dir", all_dir, "directory for all artifacts");
  run_all->add_option("--synth-labels", all_synth.spec.num_labels, "synthetic l");
  run_all->add_option("--synth-correlation", all_synth.spec.correlation, "synthetic correlation strength");
  run_all->add_option("--synth-tail-shots", all_synth.spec.tail_shots, "synthetic tail-shot count");
  run_all->add_option("--synth-train-docs", all_synth.spec.train_documents, "synthetic training documents");
  run_all->add_option("--synth-test-docs", all_synth.spec.test_documents, "synthetic test documents");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  try {
    if (*synth) {
      do_synth(synth_args, std::cout);
    } else if (*train_head) {
      do_train_head(head_flags.resolve(), head_out, std::cout);
    } else if (*train_joint) {
      do_train_joint(joint_flags.resolve(), joint_out, std::cout);
    } else if (*build) {
      const Checkpoint ck = load_stage(tail_in);
      do_build_tail(tail_flags.resolve(ck.config), ck, tail_out, std::cout);
    } else if (*eval) {
      const Checkpoint ck = load_stage(eval_in);
      const RunConfig cfg = eval_flags.resolve(ck.config);
      write_reports(evaluate_checkpoint(cfg, ck), eval_prefix, std::cout);
    } else if (*sweep) {
      std::optional<Checkpoint> ck;
      if (!sweep_in.empty()) ck = load_stage(sweep_in);
      const RunConfig cfg = sweep_flags.resolve(ck ? ck->config : std::string());
      do_sweep(cfg, ck ? &*ck : nullptr, parse_list(sweep_s, "--s-values"), parse_list(sweep_seeds, "--seeds"),
               sweep_out, std::cout);
    } else if (*ens) {
      const Checkpoint ck = load_stage(ens_in);
      do_ensemble_report(ens_flags.resolve(ck.config), ck, ens_out, std::cout);
    } else if (*run_all) {
      const fs::path dir(all_dir);
      fs::create_directories(dir);
      RunConfig probe = all_flags.resolve();
      std::string base;
      if (probe.train_documents.empty()) {
        all_synth.out_dir = (dir / "data").string();
        all_synth.spec.seed = probe.seed;
        all_synth.spec.tail_labels = probe.tail_labels;
        all_synth.embed_dim = probe.embed_dim;
        std::ostringstream quiet;
        base = do_synth(all_synth, quiet).to_text();
        write_text(dir / "synth_summary.txt", quiet.str());
      }
      const RunConfig cfg = all_flags.resolve(base);
      write_text(dir / "run.cfg", cfg.to_text());
      do_train_head(cfg, dir / "head.ckpt", std::cout);
      do_build_tail(cfg, Checkpoint::load(dir / "head.ckpt"), dir / "httn.ckpt", std::cout);
      write_reports(evaluate_checkpoint(cfg, Checkpoint::load(dir / "httn.ckpt")), (dir / "report").string(),
                    std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return 0;
}
