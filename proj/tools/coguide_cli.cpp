#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "coguide/coguide.hpp"

namespace fs = std::filesystem;
using namespace coguide;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw UsageError(what + " path is required");
  if (!fs::is_regular_file(path)) throw UsageError(what + " file not found: " + path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
}

std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

struct Overrides {
  std::string config_file;
  std::vector<std::string> settings;
  std::string profile = "desk";
  std::uint64_t seed = 0;
  std::size_t epochs = 0, batch = 0;
  double lr = 0.0, gamma = -1.0;
  bool collapse = false, no_s2i = false, no_i2s = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_file, "key=value config file");
    cmd->add_option("--set", settings, "override one setting, key=value (repeatable)");
    cmd->add_option("--profile", profile, "built-in defaults: desk (32-dim) or full (256-dim)")
        ->check(CLI::IsMember({"desk", "full"}));
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--epochs", epochs, "training epochs");
    cmd->add_option("--batch", batch, "utterances per optimizer step");
    cmd->add_option("--lr", lr, "Adam learning rate");
    cmd->add_option("--gamma", gamma, "intent/slot loss balance");
    cmd->add_flag("--collapse-relations", collapse, "merge all edge relations into one");
    cmd->add_flag("--no-s2i-guidance", no_s2i, "stage-2 intent head reads stage-1 intent features directly");
    cmd->add_flag("--no-i2s-guidance", no_i2s, "stage-2 slot head reads the intent-aware BiLSTM directly");
  }

  // defaults < config file < flags
  TrainConfig resolve(CLI::App* cmd) const {
    TrainConfig c = profile == "full" ? TrainConfig::full_scale() : TrainConfig{};
    if (!config_file.empty()) {
      require_file(config_file, "config");
      apply_config_text(c, read_file(config_file), config_file);
    }
    for (const auto& s : settings) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      apply_setting(c, s.substr(0, eq), s.substr(eq + 1));
    }
    if (cmd->count("--seed")) c.seed = seed;
    if (cmd->count("--epochs")) c.epochs = epochs;
    if (cmd->count("--batch")) c.batch = batch;
    if (cmd->count("--lr")) c.adam.learning_rate = lr;
    if (cmd->count("--gamma")) c.loss.gamma = gamma;
    if (collapse) c.model.collapse_relations = true;
    if (no_s2i) c.model.s2i_guidance = false;
    if (no_i2s) c.model.i2s_guidance = false;
    c.validate();
    return c;
  }
};

int cmd_synth(const std::string& out_dir, const SyntheticSpec& spec) {
  fs::create_directories(out_dir);
  auto c = generate_synthetic(spec);
  write_corpus((fs::path(out_dir) / "train.txt").string(), c.train);
  write_corpus((fs::path(out_dir) / "dev.txt").string(), c.dev);
  write_corpus((fs::path(out_dir) / "test.txt").string(), c.test);
  std::cout << "wrote " << c.train.size() << "/" << c.dev.size() << "/" << c.test.size()
            << " utterances to " << out_dir << "\n";
  return kOk;
}

struct TrainArgs {
  std::string train, dev, test, out_dir = "run";
  bool quiet = false;
};

int cmd_train(const TrainArgs& a, const TrainConfig& cfg) {
  require_file(a.train, "train");
  require_file(a.dev, "dev");
  if (!a.test.empty()) require_file(a.test, "test");
  auto train_set = parse_corpus(a.train);
  auto dev_set = parse_corpus(a.dev);
  auto vocab = build_vocab(train_set, cfg.min_freq);
  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);
  write_text(out / "config.txt", serialize_config(cfg));

  CoGuidingNet<float> net(cfg.model, label_space(vocab), cfg.seed);
  const auto t0 = std::chrono::steady_clock::now();
  auto result = train(net, cfg, train_set, dev_set, vocab, [&](const EpochRecord& e) {
    if (a.quiet) return;
    std::printf("epoch %4zu  loss %.6f  dev intent %.4f  slot_f1 %.4f  overall %.4f\n", e.epoch, e.mean_loss,
                e.dev.intent_accuracy, e.dev.slot_f1, e.dev.overall_accuracy);
    std::fflush(stdout);
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  save_checkpoint((out / "model.ckpt").string(), cfg, vocab, net.params());
  write_text(out / "history.tsv", format_history(result.history));
  std::printf("best epoch %zu  dev overall %.4f  (%.1f s)\n", result.best_epoch, result.best_dev.overall_accuracy,
              secs);
  if (!a.test.empty()) {
    auto report = evaluate(net, parse_corpus(a.test), vocab);
    write_text(out / "test_report.txt", format_key_values(report));
    std::cout << format_table(report);
  }
  return kOk;
}

struct EvalArgs {
  std::string checkpoint, data, dump, report;
  std::size_t workers = 1;
};

int cmd_eval(const EvalArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.data, "data");
  auto ck = load_checkpoint(a.checkpoint);
  auto net = restore_model<float>(ck);
  auto records = predict_corpus(*net, parse_corpus(a.data), ck.vocab, a.workers);
  auto report = evaluate_records(records);
  std::cout << format_table(report);
  if (!a.report.empty()) write_text(a.report, format_key_values(report));
  if (!a.dump.empty()) {
    std::string text;
    for (const auto& r : records) {
      text += join(r.tokens, ' ') + '\t' + join(r.gold_slots, ' ') + '\t' + join(r.pred_slots, ' ') + '\t' +
              join(r.stage0_slots, ' ') + '\t' + join(r.gold_intents, '#') + '\t' + join(r.pred_intents, '#') +
              '\t' + join(r.stage0_intents, '#') + '\n';
    }
    write_text(a.dump, text);
  }
  return kOk;
}

struct PredictArgs {
  std::string checkpoint, input, output, format = "tokens";
};

int cmd_predict(const PredictArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.input, "input");
  auto ck = load_checkpoint(a.checkpoint);
  auto net = restore_model<float>(ck);
  std::vector<std::vector<std::string>> inputs;
  if (a.format == "corpus") {
    for (auto& u : parse_corpus(a.input)) inputs.push_back(std::move(u.tokens));
  } else {
    std::istringstream in(read_file(a.input));
    std::string line;
    while (std::getline(in, line)) {
      auto toks = detail::split_ws(line);
      if (!toks.empty()) inputs.push_back(std::move(toks));
    }
  }
  std::vector<Utterance> out;
  for (auto& toks : inputs) {
    auto p = net->predict(encode_tokens(toks, ck.vocab));
    out.push_back({toks, decode_slots(p.slots, ck.vocab), normalize_intents(decode_intents(p.intents, ck.vocab))});
  }
  const auto text = serialize_corpus(out);
  if (a.output.empty()) {
    std::cout << text;
  } else {
    write_text(a.output, text);
  }
  return kOk;
}

int cmd_gradcheck(double tol, double step) {
  GradCheckOptions opt;
  opt.tolerance = tol;
  opt.step = step;
  opt.abs_floor = std::min(1e-6, tol);
  const auto t0 = std::chrono::steady_clock::now();
  auto reports = run_gradcheck_suite(opt);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool ok = true;
  for (const auto& r : reports) {
    std::printf("%-22s %s  max_rel %.3e  (tol %.1e)\n", r.component.c_str(), r.passed ? "PASS" : "FAIL",
                r.max_rel_error, r.tolerance);
    ok = ok && r.passed;
  }
  std::printf("%zu components, %.1f s, %s\n", reports.size(), secs, ok ? "all passed" : "FAILED");
  return ok ? kOk : kRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-stage co-guiding network for joint multi-intent detection and slot filling"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "write a seeded synthetic train/dev/test corpus");
  std::string synth_dir = "data";
  SyntheticSpec spec;
  synth->add_option("--out-dir", synth_dir, "output directory");
  synth->add_option("--seed", spec.seed, "generator seed");
  synth->add_option("--train-size", spec.train_size);
  synth->add_option("--dev-size", spec.dev_size);
  synth->add_option("--test-size", spec.test_size);
  synth->add_option("--intents", spec.num_intents);
  synth->add_option("--slot-types", spec.num_slot_types);
  synth->add_option("--fillers", spec.filler_words);
  synth->add_option("--min-length", spec.min_length);
  synth->add_option("--max-length", spec.max_length);

  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoint + history");
  TrainArgs targs;
  Overrides ov;
  train_cmd->add_option("--train", targs.train, "training corpus")->required();
  train_cmd->add_option("--dev", targs.dev, "dev corpus")->required();
  train_cmd->add_option("--test", targs.test, "optional test corpus");
  train_cmd->add_option("--out-dir", targs.out_dir, "output directory");
  train_cmd->add_flag("--quiet", targs.quiet, "no per-epoch lines");
  ov.attach(train_cmd);

  auto* eval_cmd = app.add_subcommand("eval", "score a checkpoint on a labelled corpus");
  EvalArgs eargs;
  eval_cmd->add_option("--checkpoint", eargs.checkpoint)->required();
  eval_cmd->add_option("--data", eargs.data, "labelled corpus")->required();
  eval_cmd->add_option("--dump", eargs.dump, "per-utterance prediction dump (TSV)");
  eval_cmd->add_option("--report", eargs.report, "key=value report file");
  eval_cmd->add_option("--workers", eargs.workers, "inference threads")->check(CLI::PositiveNumber);

  auto* predict_cmd = app.add_subcommand("predict", "label raw utterances");
  PredictArgs pargs;
  predict_cmd->add_option("--checkpoint", pargs.checkpoint)->required();
  predict_cmd->add_option("--input", pargs.input, "one whitespace-tokenized utterance per line")->required();
  predict_cmd->add_option("--output", pargs.output, "output corpus file (default stdout)");
  predict_cmd->add_option("--input-format", pargs.format, "tokens or corpus")
      ->check(CLI::IsMember({"tokens", "corpus"}));

  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every differentiable component");
  double tol = 1e-4, step = 1e-5;
  grad_cmd->add_option("--tol", tol, "relative error tolerance")->check(CLI::PositiveNumber);
  grad_cmd->add_option("--step", step, "finite-difference step")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_dir, spec);
    if (train_cmd->parsed()) return cmd_train(targs, ov.resolve(train_cmd));
    if (eval_cmd->parsed()) return cmd_eval(eargs);
    if (predict_cmd->parsed()) return cmd_predict(pargs);
    if (grad_cmd->parsed()) return cmd_gradcheck(tol, step);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const CheckpointVersionError& e) {
    std::cerr << "checkpoint version error: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}
