// tools/ctckit.cpp

// Copyright 2026   ctckit authors

// See ../LICENSE for clarification regarding multiple authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <regex>

#include "CLI11.hpp"

#include "ctckit/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ctckit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int threads = 1;
};

void Warn(const std::string& msg) { std::cerr << "WARNING: " << msg << '\n'; }

std::ofstream OpenOut(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << std::setprecision(10);
  return out;
}

ExperimentConfig RequireConfig(const Globals& g) {
  if (g.config.empty()) throw Error("--config is required for this command");
  auto cfg = LoadExperimentConfig(g.config);
  if (g.seed) {
    cfg.seed = *g.seed;
    cfg.train.seed = *g.seed;
  }
  return cfg;
}

std::shared_ptr<const NGramLM> LoadLm(const std::string& path) {
  if (path.empty()) return nullptr;
  return std::make_shared<const NGramLM>(NGramLM::LoadArpa(path));
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string spec, out;
  std::optional<std::size_t> utterances;
};

int RunSynth(const Globals& g, const SynthArgs& a) {
  SynthSpec spec = DefaultToneSpec();
  if (!a.spec.empty()) {
    std::ifstream in(a.spec);
    if (!in) throw Error("cannot open " + a.spec);
    Json j;
    try {
      j = Json::parse(in);
    } catch (const Json::exception& e) {
      throw Error(a.spec + ": " + e.what());
    }
    spec = ParseSynthSpec(j);
  }
  if (a.utterances) spec.utterances = *a.utterances;
  if (g.seed) spec.seed = *g.seed;
  spec.Validate();

  const fs::path out = a.out;
  fs::create_directories(out / "wav");
  const auto utts = Synthesize(spec);
  spec.MakeAlphabet().Save((out / "alphabet.txt").string());
  auto manifest = OpenOut(out / "manifest.tsv");
  auto clean = OpenOut(out / "manifest_clean.tsv");
  auto text = OpenOut(out / "text.tsv");
  auto corpus = OpenOut(out / "corpus.txt");
  for (const auto& u : utts) {
    const std::string rel = "wav/" + u.id + ".wav";
    WriteWav((out / rel).string(), u.wave);
    const double dur = double(u.wave.samples.size()) / u.wave.sample_rate;
    manifest << u.id << '\t' << rel << '\t' << u.noisy_transcript << '\t' << dur << '\n';
    clean << u.id << '\t' << rel << '\t' << u.transcript << '\t' << dur << '\n';
    text << u.id << '\t' << u.transcript << '\n';
    corpus << u.noisy_transcript << '\n';
  }
  std::cerr << "synth: wrote " << utts.size() << " utterances to " << out << '\n';
  return kExitOk;
}

// ------------------------------------------------------------ featurize

struct FeaturizeArgs {
  std::string manifest, out;
};

int RunFeaturize(const Globals& g, const FeaturizeArgs& a) {
  FeatureConfig fc;
  if (!g.config.empty()) {
    std::ifstream in(g.config);
    if (!in) throw Error("cannot open config " + g.config);
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(g.config + ": invalid JSON");
    if (j.contains("features")) fc = ParseFeatureConfig(j.at("features"));
  }
  fc.Validate();
  const auto rows = LoadManifest(a.manifest);
  fs::create_directories(a.out);
  std::vector<std::string> failure(rows.size());
  std::vector<std::size_t> frames(rows.size(), 0);
  ParallelFor(rows.size(), g.threads, [&](std::size_t i) {
    try {
      const auto fm = FeaturizeWav(rows[i].audio, fc);
      WriteFeatures((fs::path(a.out) / (rows[i].id + ".ftrm")).string(), fm);
      frames[i] = fm.data.rows();
    } catch (const std::exception& e) {
      failure[i] = e.what();
    }
  });
  auto index = OpenOut(fs::path(a.out) / "index.tsv");
  std::size_t failed = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!failure[i].empty()) {
      ++failed;
      std::cerr << "ERROR: " << rows[i].id << ": " << failure[i] << '\n';
      continue;
    }
    index << rows[i].id << '\t' << rows[i].id << ".ftrm\t" << frames[i] << '\n';
  }
  std::cerr << "featurize: " << rows.size() - failed << " written, " << failed << " failed ("
            << fc.Describe() << ")\n";
  return failed ? kExitPartial : kExitOk;
}

// ------------------------------------------------------------------- lm

struct LmArgs {
  std::string corpus, out, alphabet;
  int order = 3;
  bool tsv = false;
};

int RunLm(const Globals&, const LmArgs& a) {
  std::ifstream in(a.corpus);
  if (!in) throw Error("cannot open corpus " + a.corpus);
  std::vector<std::vector<std::string>> sentences;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (a.tsv) {
      auto f = SplitTabs(line);
      line = f.size() > 2 ? f[2] : (f.size() > 1 ? f[1] : "");
    }
    if (line.empty()) continue;
    sentences.push_back(LmTokens(NormalizeNfc(line)));
  }
  std::vector<std::string> extra;
  if (!a.alphabet.empty()) {
    const auto alpha = Alphabet::Load(a.alphabet);
    for (std::size_t id = 1; id < alpha.size(); ++id) extra.push_back(alpha.Token(id));
  }
  const auto lm = NGramLM::Train(sentences, a.order, extra);
  lm.SaveArpa(a.out);
  std::cerr << "lm: " << sentences.size() << " sentences, order " << a.order << " -> " << a.out
            << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string manifest, out, resume, loss;
  std::optional<int> epochs, start_epoch;
};

struct LoadedUtt {
  net::Utterance utt;
  std::string error;
};

// Featurizes a manifest, optionally adding speed/volume perturbed copies.
std::vector<LoadedUtt> LoadCorpus(const std::vector<ManifestRow>& rows, const ExperimentConfig& cfg,
                                  const AugmentConfig& aug, int threads) {
  struct Job {
    std::size_t row;
    double speed;
    double gain_db;
    std::string suffix;
  };
  std::vector<Job> jobs;
  std::mt19937_64 rng(cfg.seed * 7919ULL + 17);
  std::uniform_real_distribution<double> gain(-aug.volume_db, aug.volume_db);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    jobs.push_back({r, 1.0, 0.0, ""});
    for (double f : aug.speed_factors) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "-sp%.2f", f);
      jobs.push_back({r, f, aug.volume_db > 0 ? gain(rng) : 0.0, buf});
    }
  }
  std::vector<LoadedUtt> out(jobs.size());
  ParallelFor(jobs.size(), threads, [&](std::size_t i) {
    const auto& job = jobs[i];
    const auto& row = rows[job.row];
    auto& u = out[i];
    u.utt.id = row.id + job.suffix;
    try {
      Wave w = ReadWav(row.audio);
      if (w.sample_rate != cfg.features.sample_rate)
        throw Error("sample rate " + std::to_string(w.sample_rate) + " does not match the configured " +
                    std::to_string(cfg.features.sample_rate));
      std::vector<float> s = std::move(w.samples);
      if (job.speed != 1.0) s = SpeedPerturb(s, job.speed);
      if (job.gain_db != 0.0) s = VolumePerturb(s, job.gain_db);
      const auto fm = ComputeFeatures(s, cfg.features);
      u.utt.features = fm.data.cast<float>();
      u.utt.targets = cfg.alphabet.Encode(row.transcript);
    } catch (const std::exception& e) {
      u.error = e.what();
    }
  });
  return out;
}

std::optional<int> EpochFromCheckpointName(const std::string& path) {
  static const std::regex re(R"(epoch_(\d+)\.ckpt$)");
  std::smatch m;
  const std::string name = fs::path(path).filename().string();
  if (std::regex_search(name, m, re)) return std::stoi(m[1]);
  return std::nullopt;
}

int RunTrain(const Globals& g, const TrainArgs& a) {
  auto cfg = RequireConfig(g);
  if (!a.loss.empty()) {
    if (a.loss == "ctc") cfg.train.loss = net::LossKind::kCtc;
    else if (a.loss == "segctc") cfg.train.loss = net::LossKind::kSegCtc;
    else throw Error("--loss must be ctc or segctc");
  }
  if (a.epochs) cfg.train.epochs = *a.epochs;
  cfg.train.start_epoch = 0;
  if (!a.resume.empty()) cfg.train.start_epoch = EpochFromCheckpointName(a.resume).value_or(0);
  if (a.start_epoch) cfg.train.start_epoch = *a.start_epoch;
  cfg.Validate();

  net::Model<float> model(cfg.model, static_cast<std::size_t>(cfg.features.dim()), cfg.seed);
  if (!a.resume.empty()) {
    model.Load(a.resume);
    std::cerr << "train: resumed from " << a.resume << " at step " << model.params().step
              << ", epoch " << cfg.train.start_epoch << '\n';
  }

  const auto rows = LoadManifest(a.manifest);
  auto loaded = LoadCorpus(rows, cfg, cfg.augment, g.threads);
  std::vector<net::Utterance> data;
  std::size_t skipped = 0;
  for (auto& l : loaded) {
    if (!l.error.empty()) throw Error(l.utt.id + ": " + l.error);
    const std::size_t frames = model.OutputLength(l.utt.features.rows());
    if (frames < MinFrames(l.utt.targets)) {
      Warn("skipping " + l.utt.id + ": infeasible for CTC (" + std::to_string(frames) +
           " output frames, needs " + std::to_string(MinFrames(l.utt.targets)) + ")");
      ++skipped;
      continue;
    }
    data.push_back(std::move(l.utt));
  }
  if (data.empty()) throw Error("no feasible training utterances");

  const fs::path out = a.out;
  fs::create_directories(out);
  const bool append = !a.resume.empty() && fs::exists(out / "metrics.tsv");
  std::ofstream metrics(out / "metrics.tsv", append ? std::ios::app : std::ios::trunc);
  if (!append) metrics << "epoch\tloss\tgreedy_cer\tlr\n";
  std::ofstream seglog(out / "seg.log", append ? std::ios::app : std::ios::trunc);
  metrics << std::setprecision(8);
  seglog << std::setprecision(6);
  const bool seg = cfg.train.loss == net::LossKind::kSegCtc;

  net::Train<float>(model, data, cfg.train, [&](const net::EpochMetrics& m, const net::Model<float>& mdl) {
    char name[32];
    std::snprintf(name, sizeof name, "epoch_%03d.ckpt", m.epoch + 1);
    mdl.Save((out / name).string());
    metrics << m.epoch + 1 << '\t' << m.loss << '\t' << m.greedy_cer << '\t' << m.lr << '\n'
            << std::flush;
    if (seg)
      seglog << "epoch " << m.epoch + 1 << " segmented_fraction " << m.segmented_fraction
             << " mean_word_len " << m.mean_word_len << '\n'
             << std::flush;
    std::cerr << "epoch " << m.epoch + 1 << " loss " << m.loss << " greedy_cer " << m.greedy_cer
              << "% lr " << m.lr;
    if (seg) std::cerr << " segmented " << 100.0 * m.segmented_fraction << '%';
    std::cerr << '\n';
  });
  if (skipped) Warn(std::to_string(skipped) + " infeasible utterances skipped");
  return kExitOk;
}

// ------------------------------------------------------- align / decode

struct ModelArgs {
  std::string checkpoint, manifest, out;
};

net::Model<float> LoadModel(const ExperimentConfig& cfg, const std::string& checkpoint) {
  net::Model<float> model(cfg.model, static_cast<std::size_t>(cfg.features.dim()), cfg.seed);
  model.Load(checkpoint);
  return model;
}

int RunAlign(const Globals& g, const ModelArgs& a) {
  const auto cfg = RequireConfig(g);
  auto model = LoadModel(cfg, a.checkpoint);
  const auto rows = LoadManifest(a.manifest);
  fs::create_directories(a.out);
  std::vector<Matrix<float>> feats(rows.size());
  std::vector<std::string> failure(rows.size());
  ParallelFor(rows.size(), g.threads, [&](std::size_t i) {
    try {
      feats[i] = FeaturizeWav(rows[i].audio, cfg.features).data.cast<float>();
    } catch (const std::exception& e) {
      failure[i] = e.what();
    }
  });
  // The model keeps per-call activations, so inference stays sequential.
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!failure[i].empty()) continue;
    try {
      const auto targets = cfg.alphabet.Encode(rows[i].transcript);
      const auto lat = net::Infer(model, feats[i]);
      const auto ali = ForcedAlignment(lat, targets);
      auto os = OpenOut(fs::path(a.out) / (rows[i].id + ".ali"));
      WriteAlignment(os, ali, cfg.alphabet);
    } catch (const std::exception& e) {
      failure[i] = e.what();
    }
  }
  std::size_t failed = 0;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!failure[i].empty()) {
      ++failed;
      std::cerr << "ERROR: " << rows[i].id << ": " << failure[i] << '\n';
    }
  std::cerr << "align: " << rows.size() - failed << " aligned, " << failed << " failed\n";
  return failed ? kExitPartial : kExitOk;
}

struct DecodeArgs : ModelArgs {
  bool argmax = false;
  std::optional<std::size_t> beam;
  std::optional<double> alpha, beta;
  std::string lm;
};

int RunDecode(const Globals& g, const DecodeArgs& a) {
  const auto cfg = RequireConfig(g);
  DecoderConfig dc;
  dc.alpha = a.alpha.value_or(cfg.alpha);
  dc.beta = a.beta.value_or(cfg.beta);
  dc.beam_width = a.beam.value_or(cfg.beam_width);
  const std::string lm_path = a.lm.empty() ? cfg.lm_path : a.lm;
  if (!a.argmax) {
    if (dc.alpha != 0 && lm_path.empty())
      throw Error("decode: alpha = " + std::to_string(dc.alpha) + " needs a language model (--lm)");
    if (dc.alpha != 0) dc.lm = LoadLm(lm_path);
    dc.Validate();
  }
  auto model = LoadModel(cfg, a.checkpoint);
  const auto rows = LoadManifest(a.manifest);

  std::vector<Matrix<float>> feats(rows.size());
  std::vector<std::string> failure(rows.size());
  ParallelFor(rows.size(), g.threads, [&](std::size_t i) {
    try {
      feats[i] = FeaturizeWav(rows[i].audio, cfg.features).data.cast<float>();
    } catch (const std::exception& e) {
      failure[i] = e.what();
    }
  });
  std::vector<LogProbLattice> lats(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!failure[i].empty()) continue;
    try {
      lats[i] = net::Infer(model, feats[i]);
    } catch (const std::exception& e) {
      failure[i] = e.what();
    }
  }
  std::vector<DecodeResult> results(rows.size());
  ParallelFor(rows.size(), g.threads, [&](std::size_t i) {
    if (!failure[i].empty()) return;
    try {
      if (a.argmax) {
        DecodeResult r;
        r.labels = GreedyLabels(lats[i]);
        r.text = cfg.alphabet.Decode(r.labels);
        for (std::size_t t = 0; t < lats[i].frames(); ++t) {
          const auto row = lats[i].log_probs.row(t);
          r.acoustic += row[ArgMax(row)];
        }
        r.q = r.acoustic;
        r.words = WordCount(r.text);
        results[i] = std::move(r);
      } else {
        results[i] = BeamSearch(lats[i], cfg.alphabet, dc).front();
      }
    } catch (const std::exception& e) {
      failure[i] = e.what();
    }
  });

  std::ofstream file;
  if (!a.out.empty()) {
    file = OpenOut(a.out);
  }
  std::ostream& os = a.out.empty() ? std::cout : file;
  os << std::setprecision(10);
  std::size_t failed = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!failure[i].empty()) {
      ++failed;
      std::cerr << "ERROR: " << rows[i].id << ": " << failure[i] << '\n';
      continue;
    }
    WriteDecodeRow(os, rows[i].id, results[i]);
  }
  if (a.argmax) std::cerr << "decode: argmax";
  else
    std::cerr << "decode: beam " << dc.beam_width << " alpha " << dc.alpha << " beta " << dc.beta;
  std::cerr << ", " << rows.size() - failed << " decoded, " << failed << " failed\n";
  return failed ? kExitPartial : kExitOk;
}

// ---------------------------------------------------------------- score

struct ScoreArgs {
  std::string ref, hyp, details, ignore;
  bool fragments = false, cer = false;
};

int RunScore(const Globals&, const ScoreArgs& a) {
  auto refs = LoadTextTsv(a.ref);
  auto hyps = LoadTextTsv(a.hyp);
  for (const auto& [id, text] : hyps)
    if (!refs.count(id)) Warn("hypothesis " + id + " has no reference; ignored");
  ScoreOptions opts;
  opts.fragment_rule = a.fragments;
  opts.characters = a.cer;
  std::stringstream ss(a.ignore);
  for (std::string tok; std::getline(ss, tok, ',');)
    if (!tok.empty()) opts.ignore_tokens.insert(tok);
  const auto rep = FilteredScore(refs, hyps, opts);
  std::cout << std::fixed << std::setprecision(2) << (a.cer ? "unit: characters\n" : "unit: words\n");
  WriteReportSummary(std::cout, rep, !opts.ignore_tokens.empty() || opts.fragment_rule,
                     a.cer ? "CER" : "WER");
  if (!a.details.empty()) {
    auto os = OpenOut(a.details);
    WriteReportTsv(os, rep);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ctckit: grapheme CTC speech recognition toolkit"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  app.add_option("--config", g.config, "experiment JSON")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "override the configured seed");
  app.add_option("--threads", g.threads, "worker threads for per-utterance work")
      ->check(CLI::Range(1, 256));

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "generate a synthetic tone corpus");
  c_synth->add_option("--spec", synth.spec, "synth spec JSON (default: built-in tones)");
  c_synth->add_option("--out", synth.out, "output directory")->required();
  c_synth->add_option("--utterances", synth.utterances, "override the utterance count");

  FeaturizeArgs feat;
  auto* c_feat = app.add_subcommand("featurize", "compute feature dumps for a manifest");
  c_feat->add_option("--manifest", feat.manifest)->required()->check(CLI::ExistingFile);
  c_feat->add_option("--out", feat.out, "output directory")->required();

  LmArgs lm;
  auto* c_lm = app.add_subcommand("lm", "train a character n-gram LM and write ARPA");
  c_lm->add_option("--corpus", lm.corpus, "text, one sentence per line")->required()->check(CLI::ExistingFile);
  c_lm->add_option("--order", lm.order)->check(CLI::Range(1, 10));
  c_lm->add_option("--out", lm.out, "ARPA output")->required();
  c_lm->add_option("--alphabet", lm.alphabet, "add every alphabet symbol to the vocabulary");
  c_lm->add_flag("--tsv", lm.tsv, "corpus is a manifest or text TSV");

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "train an acoustic model");
  c_train->add_option("--manifest", train.manifest)->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", train.out, "checkpoint directory")->required();
  c_train->add_option("--loss", train.loss, "ctc or segctc")->check(CLI::IsMember({"ctc", "segctc"}));
  c_train->add_option("--resume", train.resume, "checkpoint to continue from")->check(CLI::ExistingFile);
  c_train->add_option("--epochs", train.epochs);
  c_train->add_option("--start-epoch", train.start_epoch, "epoch index to resume at");

  ModelArgs align;
  auto* c_align = app.add_subcommand("align", "forced-align transcripts with a trained model");
  c_align->add_option("--checkpoint", align.checkpoint)->required()->check(CLI::ExistingFile);
  c_align->add_option("--manifest", align.manifest)->required()->check(CLI::ExistingFile);
  c_align->add_option("--out", align.out, "alignment directory")->required();

  DecodeArgs dec;
  auto* c_dec = app.add_subcommand("decode", "decode a manifest");
  c_dec->add_option("--checkpoint", dec.checkpoint)->required()->check(CLI::ExistingFile);
  c_dec->add_option("--manifest", dec.manifest)->required()->check(CLI::ExistingFile);
  c_dec->add_option("--out", dec.out, "hypothesis TSV (default stdout)");
  c_dec->add_flag("--argmax", dec.argmax, "greedy best path, no LM");
  c_dec->add_option("--beam", dec.beam, "beam width, e.g. 100 or 2000")->check(CLI::PositiveNumber);
  c_dec->add_option("--alpha", dec.alpha, "LM weight (default 0.8)");
  c_dec->add_option("--beta", dec.beta, "word bonus (default 1)");
  c_dec->add_option("--lm", dec.lm, "ARPA language model")->check(CLI::ExistingFile);

  ScoreArgs score;
  auto* c_score = app.add_subcommand("score", "WER/CER of a hypothesis TSV");
  c_score->add_option("--ref", score.ref, "utt_id<TAB>text")->required()->check(CLI::ExistingFile);
  c_score->add_option("--hyp", score.hyp, "utt_id<TAB>text[...]")->required()->check(CLI::ExistingFile);
  c_score->add_option("--ignore", score.ignore, "comma-separated tokens to drop from references");
  c_score->add_flag("--fragments", score.fragments, "drop hyphenated fragments from references");
  c_score->add_flag("--cer", score.cer, "score characters instead of words");
  c_score->add_option("--details", score.details, "per-utterance TSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitError;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*c_synth) return RunSynth(g, synth);
    if (*c_feat) return RunFeaturize(g, feat);
    if (*c_lm) return RunLm(g, lm);
    if (*c_train) return RunTrain(g, train);
    if (*c_align) return RunAlign(g, align);
    if (*c_dec) return RunDecode(g, dec);
    if (*c_score) return RunScore(g, score);
  } catch (const std::exception& e) {
    std::cerr << "ERROR: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}
