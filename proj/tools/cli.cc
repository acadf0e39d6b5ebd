#include "cli.h"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "CLI11.hpp"
#include "gecw/align.h"
#include "gecw/corpus.h"
#include "gecw/error.h"
#include "gecw/eval.h"
#include "gecw/hash.h"
#include "gecw/model.h"
#include "gecw/synth.h"
#include "gecw/teacher_signal.h"
#include "gecw/trainer.h"
#include "gecw/weights.h"
#include "json.hpp"

namespace gecw::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

#ifndef GECW_VERSION
#define GECW_VERSION "dev"
#endif

struct Common {
  std::uint64_t seed = 0;
  int workers = 1;
  bool quiet = false;
};

struct ModelOptions {
  int embed_dim = 32;
  int hidden_dim = 64;
  int window = 2;

  void Add(CLI::App* app) {
    app->add_option("--embed-dim", embed_dim, "Token embedding size")->capture_default_str();
    app->add_option("--hidden-dim", hidden_dim, "Hidden layer size")->capture_default_str();
    app->add_option("--window", window, "Context tokens on each side")->capture_default_str();
  }
  ModelConfig Make(int tag_vocab_size, std::uint64_t seed) const {
    ModelConfig mc;
    mc.embed_dim = embed_dim;
    mc.hidden_dim = hidden_dim;
    mc.window = window;
    mc.tag_vocab_size = tag_vocab_size;
    mc.seed = seed;
    return mc;
  }
  json ToJson() const {
    return {{"embed_dim", embed_dim}, {"hidden_dim", hidden_dim}, {"window", window}};
  }
};

struct TrainOptions {
  int epochs = 20;
  int batch = 32;
  double lr = 1e-3;
  double kd_alpha = 0.5;

  void Add(CLI::App* app) {
    app->add_option("--epochs", epochs, "Training epochs")->capture_default_str();
    app->add_option("--batch", batch, "Samples per minibatch")->capture_default_str();
    app->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
  }
  TrainConfig Make(WeightingMode mode, const Common& common) const {
    TrainConfig tc;
    tc.epochs = epochs;
    tc.batch_size = batch;
    tc.learning_rate = lr;
    tc.kd_alpha = kd_alpha;
    tc.mode = mode;
    tc.shuffle_seed = common.seed;
    tc.workers = common.workers;
    return tc;
  }
  json ToJson() const {
    return {{"epochs", epochs}, {"batch", batch}, {"lr", lr}, {"kd_alpha", kd_alpha},
            {"adam", {{"beta1", 0.9}, {"beta2", 0.98}, {"eps", 1e-8}}}};
  }
};

std::string Timestamp() {
  const std::time_t now =
      std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

fs::path ManifestPath(const fs::path& out) {
  if (fs::is_directory(out)) return out / "manifest.json";
  return fs::path(out.string() + ".manifest.json");
}

void WriteManifest(const fs::path& out, const std::string& subcommand,
                   json config, const std::vector<fs::path>& inputs,
                   const Common& common) {
  json hashes = json::object();
  for (const fs::path& p : inputs) hashes[p.string()] = HashToString(HashFile(p));
  json manifest = {{"subcommand", subcommand},
                   {"config", std::move(config)},
                   {"inputs", std::move(hashes)},
                   {"toolkit_version", GECW_VERSION},
                   {"seed", common.seed},
                   {"workers", common.workers},
                   {"timestamp", Timestamp()}};
  std::ofstream f(ManifestPath(out), std::ios::binary);
  if (!f) throw Error("cannot write manifest for " + out.string());
  f << manifest.dump(2) << '\n';
}

OovPolicy ParseOov(const std::string& text) {
  if (text == "drop") return OovPolicy::kDropSample;
  if (text == "keep") return OovPolicy::kMapKeep;
  throw Error("--oov must be drop or keep");
}

void RequireSameVocab(std::uint64_t a, const std::string& what_a, std::uint64_t b,
                      const std::string& what_b) {
  if (a != b) {
    throw Error(what_a + " tag-vocab hash " + HashToString(a) + " does not match " +
                what_b + " " + HashToString(b) +
                "; regenerate them from the same vocabulary file");
  }
}

std::vector<Tokens> Sources(const Corpus& corpus) {
  std::vector<Tokens> out;
  for (const ParallelSample& s : corpus.samples) out.push_back(s.source);
  return out;
}

std::vector<Tokens> ReadHypotheses(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<Tokens> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    try {
      out.push_back(SplitTokens(line));
    } catch (const Error& e) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

class Pipeline {
 public:
  explicit Pipeline(CLI::App& app) : app_(app) {
    app.require_subcommand(1);
    app.add_option("--seed", common_.seed, "Seed for initialization and shuffling")
        ->capture_default_str();
    app.add_option("--workers", common_.workers, "Worker threads")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_flag("--quiet", common_.quiet, "Suppress progress output");
    AddBuildVocab();
    AddTagConvert();
    AddTrainTeacher();
    AddGenSignals();
    AddComputeWeights();
    AddTrain();
    AddScore();
    AddAblate();
    AddInspect();
    AddSynth();
  }

 private:
  std::ostream& log() {
    static std::ostringstream sink;
    if (common_.quiet) {
      sink.str("");
      return sink;
    }
    return std::cout;
  }

  // build-vocab ---------------------------------------------------------------
  struct {
    std::string train, out;
    std::size_t cap = 1000;
    int a_max = kDefaultAppendMax;
  } bv_;

  void AddBuildVocab() {
    auto* cmd = app_.add_subcommand("build-vocab", "Build the capped tag vocabulary");
    cmd->add_option("--train", bv_.train, "Parallel TSV corpus")->required()->check(CLI::ExistingFile);
    cmd->add_option("--cap", bv_.cap, "Vocabulary size cap")->capture_default_str();
    cmd->add_option("--a-max", bv_.a_max, "Longest APPEND span")->capture_default_str();
    cmd->add_option("--out", bv_.out, "Vocabulary JSON")->required();
    cmd->callback([this] {
      const Corpus corpus = LoadParallel(bv_.train);
      const AlignedCorpus aligned = AlignCorpus(corpus, bv_.a_max, true, common_.workers);
      TagVocab vocab = BuildVocab(aligned.sequences, bv_.cap);
      vocab.append_max = bv_.a_max;
      SaveVocab(bv_.out, vocab);
      log() << "vocabulary: " << vocab.size() << " tags, hash "
            << HashToString(vocab.hash()) << " (" << aligned.failed.size()
            << " unalignable samples skipped)\n";
      WriteManifest(bv_.out, "build-vocab",
                    {{"cap", bv_.cap}, {"a_max", bv_.a_max}}, {bv_.train}, common_);
    });
  }

  // tag-convert ---------------------------------------------------------------
  struct {
    std::string corpus, vocab, out, oov = "drop";
  } tc_;

  void AddTagConvert() {
    auto* cmd = app_.add_subcommand("tag-convert", "Convert a parallel corpus to tag indices");
    cmd->add_option("--corpus", tc_.corpus, "Parallel TSV corpus")->required()->check(CLI::ExistingFile);
    cmd->add_option("--vocab", tc_.vocab, "Vocabulary JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--oov", tc_.oov, "Out-of-vocabulary policy: drop | keep")->capture_default_str();
    cmd->add_option("--out", tc_.out, "Encoded corpus (JSON lines)")->required();
    cmd->callback([this] {
      const OovPolicy policy = ParseOov(tc_.oov);
      const TagVocab vocab = LoadVocab(tc_.vocab);
      const EncodedCorpus enc =
          EncodeCorpus(LoadParallel(tc_.corpus), vocab, policy, common_.workers);
      SaveEncoded(tc_.out, enc);
      log() << "encoded " << enc.report.encoded << " samples; dropped "
            << enc.report.dropped << ", mapped to KEEP " << enc.report.mapped_to_keep
            << " tags, unalignable " << enc.report.unalignable << "\n";
      WriteManifest(tc_.out, "tag-convert",
                    {{"oov", tc_.oov}, {"vocab_hash", HashToString(vocab.hash())}},
                    {tc_.corpus, tc_.vocab}, common_);
    });
  }

  // train-teacher / train -----------------------------------------------------
  struct TrainArgs {
    std::string train, dev, weights, signals, out, log, weighting = "none";
    ModelOptions model;
    TrainOptions opts;
  };
  TrainArgs tt_;
  TrainArgs tr_;

  void AddTrainCommon(CLI::App* cmd, TrainArgs& a) {
    cmd->add_option("--train", a.train, "Encoded training corpus")->required()->check(CLI::ExistingFile);
    cmd->add_option("--dev", a.dev, "Encoded dev corpus for checkpoint selection")->check(CLI::ExistingFile);
    cmd->add_option("--out", a.out, "Checkpoint path")->required();
    cmd->add_option("--log", a.log, "Per-epoch JSON-lines log (default <out>.log.jsonl)");
    a.model.Add(cmd);
    a.opts.Add(cmd);
  }

  void RunTrain(const std::string& subcommand, TrainArgs& a, WeightingMode mode) {
    const EncodedCorpus train = LoadEncoded(a.train);
    const EncodedCorpus dev = a.dev.empty() ? EncodedCorpus{} : LoadEncoded(a.dev);
    if (!a.dev.empty()) {
      RequireSameVocab(dev.vocab_hash, "dev corpus", train.vocab_hash, "training corpus");
    }
    const TokenVocab tokens = TokenVocab::Build(train);
    TrainingData train_data(train, tokens);
    TrainingData dev_data(a.dev.empty() ? train : dev, tokens);

    std::vector<fs::path> inputs = {a.train};
    if (!a.dev.empty()) inputs.emplace_back(a.dev);
    if (mode == WeightingMode::kToken || mode == WeightingMode::kSent ||
        mode == WeightingMode::kMixed) {
      if (a.weights.empty()) throw Error("--weighting " + ToString(mode) + " needs --weights");
      const WeightsFile wf = LoadWeights(a.weights);
      RequireSameVocab(wf.vocab_hash, "weights file", train.vocab_hash, "training corpus");
      train_data.AttachWeights(wf.weights);
      inputs.emplace_back(a.weights);
    }
    if (mode == WeightingMode::kKd) {
      if (a.signals.empty()) throw Error("--weighting kd needs --signals with full distributions");
      const SignalFile sf = LoadSignals(a.signals);
      train_data.AttachTeacher(sf);
      inputs.emplace_back(a.signals);
    }
    const ModelConfig mc = a.model.Make(static_cast<int>(train.num_tags), common_.seed);
    const TrainConfig tc = a.opts.Make(mode, common_);
    TrainResult result = Train(Tagger(mc, tokens, train.vocab_hash), train_data, dev_data, tc);
    result.best.Save(a.out);
    SaveTrainingLog(a.log.empty() ? a.out + ".log.jsonl" : a.log, result.log);
    for (const EpochLog& e : result.log) {
      log() << "epoch " << e.epoch << "  train " << e.train_loss << "  dev "
            << e.dev_loss << "\n";
    }
    log() << "kept epoch " << result.best_epoch << " (dev loss "
          << result.best_dev_loss << ")\n";
    json config = {{"mode", ToString(mode)},
                   {"model", a.model.ToJson()},
                   {"train", a.opts.ToJson()},
                   {"best_epoch", result.best_epoch}};
    WriteManifest(a.out, subcommand, config, inputs, common_);
  }

  void AddTrainTeacher() {
    auto* cmd = app_.add_subcommand("train-teacher", "Train an unweighted teacher tagger");
    AddTrainCommon(cmd, tt_);
    cmd->callback([this] { RunTrain("train-teacher", tt_, WeightingMode::kNone); });
  }

  void AddTrain() {
    auto* cmd = app_.add_subcommand("train", "Train a tagger with optional weighting or KD");
    AddTrainCommon(cmd, tr_);
    cmd->add_option("--weighting", tr_.weighting, "none | token | sent | mixed | kd")
        ->capture_default_str();
    cmd->add_option("--weights", tr_.weights, "Weights file (token/sent/mixed)")->check(CLI::ExistingFile);
    cmd->add_option("--signals", tr_.signals, "Signal file with full distributions (kd)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--kd-alpha", tr_.opts.kd_alpha, "Gold-NLL share of the KD objective")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cmd->callback([this] { RunTrain("train", tr_, ParseWeightingMode(tr_.weighting)); });
  }

  // gen-signals ---------------------------------------------------------------
  struct {
    std::string model, corpus, out;
    bool full_dist = false;
  } gs_;

  void AddGenSignals() {
    auto* cmd = app_.add_subcommand("gen-signals", "Export teacher statistics for a corpus");
    cmd->add_option("--model", gs_.model, "Teacher checkpoint")->required()->check(CLI::ExistingFile);
    cmd->add_option("--corpus", gs_.corpus, "Encoded corpus")->required()->check(CLI::ExistingFile);
    cmd->add_flag("--full-dist", gs_.full_dist, "Also store full distributions (needed for kd)");
    cmd->add_option("--out", gs_.out, "Signal file (JSON lines)")->required();
    cmd->callback([this] {
      const Tagger teacher = Tagger::Load(gs_.model);
      const EncodedCorpus corpus = LoadEncoded(gs_.corpus);
      RequireSameVocab(teacher.tag_vocab_hash(), "model", corpus.vocab_hash, "corpus");
      const SignalFile signals =
          GenerateSignals(teacher, corpus, gs_.full_dist, common_.workers);
      RequireValid(ValidateSignals(signals, corpus), "generated signals");
      SaveSignals(gs_.out, signals);
      log() << "wrote signals for " << signals.signals.size() << " samples\n";
      WriteManifest(gs_.out, "gen-signals", {{"full_dist", gs_.full_dist}},
                    {gs_.model, gs_.corpus}, common_);
    });
  }

  // compute-weights -----------------------------------------------------------
  struct {
    std::string signals, corpus, out;
    double epsilon = std::exp(-9.0);
    bool no_token = false;
    bool no_sent = false;
  } cw_;

  void AddComputeWeights() {
    auto* cmd = app_.add_subcommand("compute-weights", "Token- and sentence-level weights");
    cmd->add_option("--signals", cw_.signals, "Signal file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--corpus", cw_.corpus, "Encoded corpus to validate the signals against")
        ->check(CLI::ExistingFile);
    cmd->add_option("--epsilon", cw_.epsilon, "Sentence-weight epsilon (default e^-9)");
    cmd->add_flag("--no-token", cw_.no_token, "Disable token-level weights");
    cmd->add_flag("--no-sent", cw_.no_sent, "Disable sentence-level weights");
    cmd->add_option("--out", cw_.out, "Weights file (JSON lines)")->required();
    cmd->callback([this] {
      const SignalFile signals = LoadSignals(cw_.signals);
      std::vector<fs::path> inputs = {cw_.signals};
      if (!cw_.corpus.empty()) {
        const EncodedCorpus corpus = LoadEncoded(cw_.corpus);
        RequireValid(ValidateSignals(signals, corpus), cw_.signals);
        inputs.emplace_back(cw_.corpus);
      }
      WeightsFile wf;
      wf.config.epsilon = cw_.epsilon;
      wf.config.use_token = !cw_.no_token;
      wf.config.use_sent = !cw_.no_sent;
      wf.signal_file_hash = HashFile(cw_.signals);
      wf.vocab_hash = signals.header.vocab_hash;
      wf.weights = ComputeWeights(signals, wf.config);
      SaveWeights(cw_.out, wf);
      log() << "wrote weights for " << wf.weights.size() << " samples\n";
      WriteManifest(cw_.out, "compute-weights",
                    {{"epsilon", cw_.epsilon},
                     {"use_token", wf.config.use_token},
                     {"use_sent", wf.config.use_sent}},
                    inputs, common_);
    });
  }

  // score ---------------------------------------------------------------------
  struct {
    std::string corpus, m2, hyp, model, vocab, out, hyp_out;
    double beta = 0.5;
  } sc_;

  void AddScore() {
    auto* cmd = app_.add_subcommand("score", "Edit-level precision, recall and F-beta");
    auto* corpus = cmd->add_option("--corpus", sc_.corpus,
                                   "Parallel TSV: sources and reference targets")
                       ->check(CLI::ExistingFile);
    auto* m2 = cmd->add_option("--m2", sc_.m2, "Gold edits in M2 format")->check(CLI::ExistingFile);
    corpus->excludes(m2);
    auto* hyp = cmd->add_option("--hyp", sc_.hyp, "Hypotheses, one tokenized sentence per line")
                    ->check(CLI::ExistingFile);
    auto* model = cmd->add_option("--model", sc_.model, "Checkpoint to generate hypotheses")
                      ->check(CLI::ExistingFile);
    hyp->excludes(model);
    cmd->add_option("--vocab", sc_.vocab, "Vocabulary JSON (with --model)")->check(CLI::ExistingFile);
    cmd->add_option("--beta", sc_.beta, "F-measure beta")->capture_default_str();
    cmd->add_option("--out", sc_.out, "Report TSV");
    cmd->add_option("--hyp-out", sc_.hyp_out, "Write generated hypotheses here");
    cmd->callback([this] {
      if (sc_.corpus.empty() == sc_.m2.empty()) throw Error("give exactly one of --corpus or --m2");
      if (sc_.hyp.empty() == sc_.model.empty()) throw Error("give exactly one of --hyp or --model");
      std::vector<fs::path> inputs;
      std::vector<Tokens> sources;
      std::vector<GoldEditSet> gold;
      if (!sc_.corpus.empty()) {
        const Corpus corpus = LoadParallel(sc_.corpus);
        sources = Sources(corpus);
        gold = GoldFromParallel(corpus);
        inputs.emplace_back(sc_.corpus);
      } else {
        gold = LoadM2(sc_.m2);
        for (const GoldEditSet& g : gold) sources.push_back(g.source);
        inputs.emplace_back(sc_.m2);
      }
      std::vector<Tokens> hyps;
      if (!sc_.hyp.empty()) {
        hyps = ReadHypotheses(sc_.hyp);
        inputs.emplace_back(sc_.hyp);
      } else {
        if (sc_.vocab.empty()) throw Error("--model needs --vocab");
        const Tagger tagger = Tagger::Load(sc_.model);
        const TagVocab vocab = LoadVocab(sc_.vocab);
        RequireSameVocab(tagger.tag_vocab_hash(), "model", vocab.hash(), "vocabulary");
        hyps = CorrectAll(tagger, vocab, sources, common_.workers);
        inputs.emplace_back(sc_.model);
        inputs.emplace_back(sc_.vocab);
        if (!sc_.hyp_out.empty()) {
          std::ostringstream text;
          for (const Tokens& h : hyps) text << JoinTokens(h) << '\n';
          WriteText(sc_.hyp_out, text.str());
        }
      }
      const ScoreReport report = Score(sources, hyps, gold, sc_.beta);
      std::cout << report.ToText();
      if (!sc_.out.empty()) {
        WriteText(sc_.out, report.ToTsv());
        WriteManifest(sc_.out, "score", {{"beta", sc_.beta}}, inputs, common_);
      }
    });
  }

  // ablate --------------------------------------------------------------------
  struct {
    std::string train, dev, m2, out_dir, vocab, signals, oov = "drop";
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::size_t cap = 1000;
    int a_max = kDefaultAppendMax;
    double epsilon = std::exp(-9.0);
    int teacher_epochs = 30;
    std::uint64_t teacher_seed = 0;
    ModelOptions model;
    TrainOptions opts;
  } ab_;

  void AddAblate() {
    auto* cmd = app_.add_subcommand("ablate",
                                    "Train none/token/sent/mixed/kd over several seeds and score each");
    cmd->add_option("--train", ab_.train, "Parallel TSV training corpus")->required()->check(CLI::ExistingFile);
    cmd->add_option("--dev", ab_.dev, "Parallel TSV dev corpus (selection and scoring)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--m2", ab_.m2, "Score against these gold edits instead of dev targets")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seeds", ab_.seeds, "Seeds, comma separated")->delimiter(',')->capture_default_str();
    cmd->add_option("--cap", ab_.cap, "Vocabulary size cap")->capture_default_str();
    cmd->add_option("--a-max", ab_.a_max, "Longest APPEND span")->capture_default_str();
    cmd->add_option("--oov", ab_.oov, "Out-of-vocabulary policy for training samples")->capture_default_str();
    cmd->add_option("--epsilon", ab_.epsilon, "Sentence-weight epsilon (default e^-9)");
    cmd->add_option("--kd-alpha", ab_.opts.kd_alpha, "Gold-NLL share of the KD objective")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--teacher-epochs", ab_.teacher_epochs, "Epochs for the teacher")->capture_default_str();
    cmd->add_option("--teacher-seed", ab_.teacher_seed, "Seed for the teacher")->capture_default_str();
    cmd->add_option("--vocab", ab_.vocab, "Use this vocabulary instead of building one")
        ->check(CLI::ExistingFile);
    cmd->add_option("--signals", ab_.signals,
                    "Use this teacher signal file (with full distributions) instead of training a teacher")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out-dir", ab_.out_dir, "Output directory")->required();
    ab_.model.Add(cmd);
    ab_.opts.Add(cmd);
    cmd->callback([this] { RunAblate(); });
  }

  void RunAblate() {
    fs::create_directories(ab_.out_dir);
    const fs::path dir(ab_.out_dir);
    const Corpus train_tsv = LoadParallel(ab_.train);
    const Corpus dev_tsv = LoadParallel(ab_.dev);
    std::vector<fs::path> inputs = {ab_.train, ab_.dev};

    TagVocab vocab;
    if (!ab_.vocab.empty()) {
      vocab = LoadVocab(ab_.vocab);
      inputs.emplace_back(ab_.vocab);
    } else {
      vocab = BuildVocab(AlignCorpus(train_tsv, ab_.a_max, true, common_.workers).sequences,
                         ab_.cap);
      vocab.append_max = ab_.a_max;
      SaveVocab(dir / "vocab.json", vocab);
    }
    const EncodedCorpus train = EncodeCorpus(train_tsv, vocab, ParseOov(ab_.oov), common_.workers);
    const EncodedCorpus dev = EncodeCorpus(dev_tsv, vocab, OovPolicy::kMapKeep, common_.workers);
    log() << "vocabulary " << vocab.size() << " tags; " << train.samples.size()
          << " training samples, " << dev.samples.size() << " dev samples\n";

    SignalFile signals;
    if (!ab_.signals.empty()) {
      signals = LoadSignals(ab_.signals);
      inputs.emplace_back(ab_.signals);
    } else {
      ModelConfig mc = ab_.model.Make(static_cast<int>(vocab.size()), ab_.teacher_seed);
      TrainConfig tc = ab_.opts.Make(WeightingMode::kNone, common_);
      tc.epochs = ab_.teacher_epochs;
      tc.shuffle_seed = ab_.teacher_seed;
      const TokenVocab tokens = TokenVocab::Build(train);
      TrainingData train_data(train, tokens);
      TrainingData dev_data(dev, tokens);
      TrainResult teacher = Train(Tagger(mc, tokens, vocab.hash()), train_data, dev_data, tc);
      teacher.best.Save(dir / "teacher.ckpt");
      signals = GenerateSignals(teacher.best, train, true, common_.workers);
      SaveSignals(dir / "signals.jsonl", signals);
      log() << "teacher kept epoch " << teacher.best_epoch << " (dev loss "
            << teacher.best_dev_loss << ")\n";
    }
    RequireValid(ValidateSignals(signals, train), "teacher signals");

    AblationSetup setup;
    setup.vocab = &vocab;
    setup.train = &train;
    setup.dev = &dev;
    setup.signals = &signals;
    setup.weights.epsilon = ab_.epsilon;
    setup.model = ab_.model.Make(static_cast<int>(vocab.size()), 0);
    setup.train_config = ab_.opts.Make(WeightingMode::kNone, common_);
    setup.seeds = ab_.seeds;
    if (!ab_.m2.empty()) {
      setup.eval_gold = LoadM2(ab_.m2);
      for (const GoldEditSet& g : setup.eval_gold) setup.eval_sources.push_back(g.source);
      inputs.emplace_back(ab_.m2);
    } else {
      setup.eval_sources = Sources(dev_tsv);
      setup.eval_gold = GoldFromParallel(dev_tsv);
    }
    const AblationReport report = RunAblation(setup);

    WriteText(dir / "table.tsv", report.ToTsv());
    WriteText(dir / "table.txt", report.ToText());
    std::ostringstream runs;
    runs << "mode\tseed\tprecision\trecall\tf0.5\tbest_epoch\tbest_dev_loss\n";
    for (const AblationRun& r : report.runs) {
      runs << ToString(r.mode) << '\t' << r.seed << '\t' << r.score.precision << '\t'
           << r.score.recall << '\t' << r.score.f_beta << '\t' << r.best_epoch << '\t'
           << r.best_dev_loss << '\n';
    }
    WriteText(dir / "runs.tsv", runs.str());
    std::cout << report.ToText();
    json config = {{"seeds", ab_.seeds},
                   {"cap", ab_.cap},
                   {"a_max", ab_.a_max},
                   {"oov", ab_.oov},
                   {"epsilon", ab_.epsilon},
                   {"teacher_epochs", ab_.teacher_epochs},
                   {"teacher_seed", ab_.teacher_seed},
                   {"model", ab_.model.ToJson()},
                   {"train", ab_.opts.ToJson()}};
    WriteManifest(dir, "ablate", config, inputs, common_);
  }

  // inspect -------------------------------------------------------------------
  struct {
    std::string corpus, vocab, weights;
    std::size_t sample = 0;
  } in_;

  void AddInspect() {
    auto* cmd = app_.add_subcommand("inspect", "Show one sample's tags and weights");
    cmd->add_option("--corpus", in_.corpus, "Encoded corpus")->required()->check(CLI::ExistingFile);
    cmd->add_option("--vocab", in_.vocab, "Vocabulary JSON")->required()->check(CLI::ExistingFile);
    cmd->add_option("--weights", in_.weights, "Weights file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--sample", in_.sample, "Sample id")->required();
    cmd->callback([this] {
      const EncodedCorpus corpus = LoadEncoded(in_.corpus);
      const TagVocab vocab = LoadVocab(in_.vocab);
      const WeightsFile wf = LoadWeights(in_.weights);
      RequireSameVocab(corpus.vocab_hash, "corpus", vocab.hash(), "vocabulary");
      RequireSameVocab(wf.vocab_hash, "weights file", vocab.hash(), "vocabulary");
      std::cout << FormatInspection(corpus, vocab, wf, in_.sample);
    });
  }

 public:
  static std::string FormatInspection(const EncodedCorpus& corpus, const TagVocab& vocab,
                                      const WeightsFile& wf, std::size_t id) {
    const EncodedSample* sample = nullptr;
    const SampleWeights* weights = nullptr;
    for (const EncodedSample& s : corpus.samples) {
      if (s.id == id) sample = &s;
    }
    for (const SampleWeights& w : wf.weights) {
      if (w.sample_id == id) weights = &w;
    }
    if (sample == nullptr) throw Error("sample " + std::to_string(id) + " not in corpus");
    if (weights == nullptr) throw Error("sample " + std::to_string(id) + " not in weights file");
    if (weights->w_token.size() != sample->tags.size()) {
      throw Error("weights and corpus disagree on the slot count of sample " +
                  std::to_string(id));
    }
    std::vector<std::string> tokens = {"<s>"};
    tokens.insert(tokens.end(), sample->source.begin(), sample->source.end());
    std::vector<std::string> tags;
    std::size_t token_width = 5, tag_width = 3;
    for (std::size_t i = 0; i < sample->tags.size(); ++i) {
      tags.push_back(vocab.tag(sample->tags[i]).Render());
      token_width = std::max(token_width, tokens[i].size());
      tag_width = std::max(tag_width, tags[i].size());
    }
    std::ostringstream out;
    char buf[64];
    out << "sample  " << id << "\n"
        << "source  " << JoinTokens(sample->source) << "\n"
        << "target  " << JoinTokens(sample->target) << "\n";
    std::snprintf(buf, sizeof(buf), "%.6f", weights->w_sent);
    out << "w_sent  " << buf << "\n\n";
    auto pad = [](const std::string& s, std::size_t w) {
      return s + std::string(w > s.size() ? w - s.size() : 0, ' ');
    };
    out << pad("slot", 6) << pad("token", token_width + 2) << pad("tag", tag_width + 2)
        << "w_token\n";
    for (std::size_t i = 0; i < tags.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.6f", weights->w_token[i]);
      out << pad(std::to_string(i), 6) << pad(tokens[i], token_width + 2)
          << pad(tags[i], tag_width + 2) << buf << "\n";
    }
    return out.str();
  }

 private:
  // synth ---------------------------------------------------------------------
  struct {
    std::size_t num = 2000;
    double corruption = 0.0;
    double error_free = 0.2;
    std::string out, clean_out;
  } sy_;

  void AddSynth() {
    auto* cmd = app_.add_subcommand("synth", "Generate a synthetic parallel corpus");
    cmd->add_option("--num", sy_.num, "Number of samples")->capture_default_str();
    cmd->add_option("--corruption", sy_.corruption, "Share of corrupted annotations")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--error-free", sy_.error_free, "Share of samples without errors")
        ->capture_default_str()
        ->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--out", sy_.out, "Parallel TSV (targets possibly corrupted)")->required();
    cmd->add_option("--clean-out", sy_.clean_out, "Parallel TSV with correct targets");
    cmd->callback([this] {
      SynthConfig sc;
      sc.num_samples = sy_.num;
      sc.seed = common_.seed;
      sc.corruption_rate = sy_.corruption;
      sc.error_free_rate = sy_.error_free;
      const SynthCorpus corpus = GenerateSynthetic(sc);
      SaveParallel(sy_.out, corpus.noisy);
      if (!sy_.clean_out.empty()) SaveParallel(sy_.clean_out, corpus.clean);
      WriteManifest(sy_.out, "synth",
                    {{"num", sy_.num}, {"corruption", sy_.corruption},
                     {"error_free", sy_.error_free}},
                    {}, common_);
    });
  }

  CLI::App& app_;
  Common common_;
};

}  // namespace

int Run(const std::vector<std::string>& args) {
  CLI::App app{"gecw: teacher-weighted training for edit-tagging error correction"};
  app.set_version_flag("--version", GECW_VERSION);
  Pipeline pipeline(app);
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const Error& e) {
    std::cerr << "gecw: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "gecw: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace gecw::cli
