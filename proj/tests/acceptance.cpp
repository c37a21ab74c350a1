// tests/acceptance.cpp

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

// Acceptance suite: one PASS/FAIL line per criterion. Criteria 8 and 9
// drive the command-line binary end to end. Pass criterion numbers as
// arguments to run a subset. Exit status is nonzero if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "ctckit/pipeline.hpp"
#include "net_checks.hpp"
#include "oracles.hpp"
#include "segctc_cases.hpp"

#ifndef CTCKIT_BIN
#error "CTCKIT_BIN must name the command-line binary"
#endif

using namespace ctckit;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string Fmt(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string Fmt(const char* fmt, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

// ---------------------------------------------------------------- C1

Outcome CtcOracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  int checked = 0, infeasible = 0;
  double worst = 0;
  bool infeasible_ok = true;
  while (checked < 1000) {
    const std::size_t T = 1 + rng() % 8, V = 2 + rng() % 3, L = rng() % 4;
    auto lat = oracle::RandomLattice(T, V, rng);
    std::vector<int> z(L);
    for (int& c : z) c = 1 + int(rng() % (V - 1));
    const double brute = oracle::BruteLogLikelihood(lat, z);
    if (T < MinFrames(z)) {
      ++infeasible;
      try {
        CtcLoss(lat, z);
        infeasible_ok = false;
      } catch (const InfeasibleError&) {
      }
      infeasible_ok = infeasible_ok && brute == oracle::NegInf();
      continue;
    }
    worst = std::max(worst, std::abs(CtcLoss(lat, z).loss + brute));
    ++checked;
  }
  const double secs = Seconds(start);
  return {worst <= 1e-9 && secs < 30 && infeasible_ok,
          Fmt("%d instances (T<=8, V<=4, L<=3), max |loss - brute| = %.2e (tol 1e-9), %.1f s "
              "(limit 30 s), %d infeasible instances rejected%s",
              checked, worst, secs, infeasible, infeasible_ok ? "" : " INCORRECTLY")};
}

// ---------------------------------------------------------------- C2

Outcome CtcGradient() {
  std::mt19937_64 rng(102);
  std::normal_distribution<double> n(0.0, 1.5);
  int checked = 0;
  double worst = 0;
  const double h = 1e-5;
  while (checked < 150) {
    const std::size_t T = 2 + rng() % 6, V = 2 + rng() % 4, L = 1 + rng() % 3;
    std::vector<int> z(L);
    for (int& c : z) c = 1 + int(rng() % (V - 1));
    if (T < MinFrames(z)) continue;
    Matrix<double> logits(T, V);
    for (double& v : logits.data()) v = n(rng);
    const auto res = CtcLossFromLogits(logits, z);
    for (std::size_t i = 0; i < logits.data().size(); ++i) {
      Matrix<double> up = logits, down = logits;
      up.data()[i] += h;
      down.data()[i] -= h;
      const double fd = (CtcLossFromLogits(up, z).loss - CtcLossFromLogits(down, z).loss) / (2 * h);
      worst = std::max(worst, oracle::RelErr(fd, res.grad.data()[i], 1e-5));
    }
    ++checked;
  }
  return {worst <= 1e-4, Fmt("%d instances, max rel err %.2e (tol 1e-4, denominator floor 1e-5)",
                             checked, worst)};
}

// ---------------------------------------------------------------- C3

Outcome ViterbiOptimality() {
  std::mt19937_64 rng(101);  // the instance set of C1
  int checked = 0, collapse_bad = 0;
  double worst = 0;
  while (checked < 1000) {
    const std::size_t T = 1 + rng() % 8, V = 2 + rng() % 3, L = rng() % 4;
    auto lat = oracle::RandomLattice(T, V, rng);
    std::vector<int> z(L);
    for (int& c : z) c = 1 + int(rng() % (V - 1));
    if (T < MinFrames(z)) continue;
    const auto ali = ForcedAlignment(lat, z);
    worst = std::max(worst, std::abs(ali.log_prob - oracle::BruteBestPath(lat, z)));
    worst = std::max(worst, std::abs(ali.log_prob - oracle::PathLogProb(lat, ali.labels)));
    if (Collapse(ali.labels) != z) ++collapse_bad;
    ++checked;
  }
  return {worst <= 1e-9 && collapse_bad == 0,
          Fmt("%d instances, max |viterbi - best enumerated path| = %.2e, collapse mismatches %d",
              checked, worst, collapse_bad)};
}

// ---------------------------------------------------------------- C4

Outcome SegmentationCriterion() {
  std::mt19937_64 rng(104);
  int cases = 0, segmented = 0, fallback_bad = 0, partition_bad = 0;
  double worst_sum = 0;
  for (; segmented < 500 || cases < 1000; ++cases) {
    auto c = segtest::RandomCase(rng);
    SegCtcConfig cfg;
    cfg.min_word_len = c.min_word_len;
    cfg.warmup_epochs = 0;
    const auto ctc = CtcLoss(c.lattice, c.targets);
    auto out = SegCtc(c.lattice, c.targets, cfg, 0, c.space);
    // forced fallbacks must match too
    SegCtcConfig off = cfg;
    off.enabled = false;
    for (const auto& fb : {SegCtcLoss(c.lattice, c.targets, off, 0, c.space),
                           SegCtcLoss(c.lattice, c.targets, cfg, 0, -1)})
      if (!(fb.loss == ctc.loss && fb.grad == ctc.grad)) ++fallback_bad;
    if (!out.segmentation) {
      if (!(out.result.loss == ctc.loss && out.result.grad == ctc.grad)) ++fallback_bad;
      continue;
    }
    ++segmented;
    const auto& seg = *out.segmentation;
    double sum = 0;
    std::size_t f = 0;
    std::vector<int> concat;
    bool ok = true;
    for (std::size_t k = 0; k < 5; ++k) {
      const auto fs = seg.frames[k], ts = seg.targets[k];
      ok = ok && fs.begin == f && fs.end >= fs.begin;
      f = fs.end;
      std::vector<int> zt(c.targets.begin() + long(ts.begin), c.targets.begin() + long(ts.end));
      concat.insert(concat.end(), zt.begin(), zt.end());
      LogProbLattice sub{c.lattice.log_probs.slice_rows(fs.begin, fs.end), 0};
      sum += CtcLoss(sub, zt).loss;
    }
    ok = ok && f == c.lattice.frames() && concat == c.targets;
    if (!ok) ++partition_bad;
    worst_sum = std::max(worst_sum, std::abs(out.result.loss - sum));
  }
  const bool pass = fallback_bad == 0 && partition_bad == 0 && worst_sum <= 1e-12 && segmented >= 500;
  return {pass, Fmt("%d peaked-lattice cases, %d with a qualifying word; (a) fallback mismatches %d; "
                    "(b) max |loss - sum of 5 segment losses| = %.2e (tol 1e-12); "
                    "(c) partition/concatenation failures %d",
                    cases, segmented, fallback_bad, worst_sum, partition_bad)};
}

// ---------------------------------------------------------------- C5

Outcome DecoderExactness() {
  std::mt19937_64 rng(105);
  int cases = 0, wrong = 0;
  for (; cases < 600; ++cases) {
    const std::size_t T = 1 + rng() % 5, V = 2 + rng() % 2;
    auto lat = oracle::RandomLattice(T, V, rng, 1.5);
    auto a = V == 2 ? Alphabet::Build({"<blank>", "a"}) : Alphabet::Build({"<blank>", "a", "b"});
    const auto post = oracle::BrutePosteriors(lat);
    DecoderConfig cfg;
    cfg.alpha = cfg.beta = 0;
    cfg.beam_width = post.size();
    auto best = post.begin();
    for (auto it = post.begin(); it != post.end(); ++it)
      if (it->second > best->second) best = it;
    const auto r = BeamSearch(lat, a, cfg)[0];
    if (r.labels != best->first || std::abs(r.q - best->second) > 1e-9) ++wrong;
  }

  // widening the beam over random lattices, with and without an LM
  auto a = Alphabet::Build({"<blank>", "a", "b", "<space>"});
  std::vector<std::vector<std::string>> corpus;
  for (const char* t : {"ab ba", "aab b", "ba ab ab", "bab a"}) corpus.push_back(LmTokens(t));
  auto lm = std::make_shared<const NGramLM>(NGramLM::Train(corpus, 3));
  int lattices = 0, violations = 0;
  double worst = 0;
  for (int trial = 0; trial < 400; ++trial, ++lattices) {
    const std::size_t T = 5 + rng() % 26;
    const double sharp = std::array{1.0, 2.0, 4.0}[rng() % 3];
    auto lat = oracle::RandomLattice(T, 4, rng, sharp);
    DecoderConfig cfg;
    if (trial % 2) cfg.lm = lm;
    else cfg.alpha = cfg.beta = 0;
    double prev = -1e300;
    bool bad = false;
    for (std::size_t w : {1, 2, 4, 8, 16, 32, 64}) {
      cfg.beam_width = w;
      const double q = BeamSearch(lat, a, cfg)[0].q;
      if (q < prev - 1e-9) {
        bad = true;
        worst = std::max(worst, prev - q);
      }
      prev = std::max(prev, q);
    }
    violations += bad;
  }
  return {wrong == 0 && violations == 0,
          Fmt("exact search: %d cases (T<=5, V<=3, beam >= all prefixes), %d mismatches; "
              "monotonicity over widths 1..64: %d of %d random lattices (T 5-30) lose best Q "
              "when the beam widens, worst drop %.3f",
              cases, wrong, violations, lattices, worst)};
}

// ---------------------------------------------------------------- C6

Outcome LanguageModel() {
  std::mt19937_64 rng(106);
  auto random_texts = [&](int n) {
    std::vector<std::vector<std::string>> out;
    for (int i = 0; i < n; ++i) {
      std::string s;
      for (std::size_t k = 1 + rng() % 12; k > 0; --k) s += "abcd "[rng() % 5];
      out.push_back(LmTokens(s));
    }
    return out;
  };
  const auto corpus = random_texts(40);
  const auto lm = NGramLM::Train(corpus, 3);
  std::stringstream ss;
  lm.WriteArpa(ss);
  const auto back = NGramLM::ReadArpa(ss);
  const auto vocab = lm.Vocabulary();
  double worst_rt = 0;
  for (int q = 0; q < 5000; ++q) {
    std::vector<std::string> h;
    for (std::size_t n = rng() % 4; n > 0; --n) h.push_back(vocab[rng() % vocab.size()]);
    const auto& w = vocab[rng() % vocab.size()];
    worst_rt = std::max(worst_rt, std::abs(back.Score(h, w) - lm.Score(h, w)));
  }
  std::set<std::vector<std::string>> hist{{}};
  for (const auto& s : corpus) {
    std::vector<std::string> t{"<s>"};
    t.insert(t.end(), s.begin(), s.end());
    for (std::size_t i = 0; i < t.size(); ++i) {
      hist.insert({t[i]});
      if (i + 1 < t.size()) hist.insert({t[i], t[i + 1]});
    }
  }
  double worst_mass = 0;
  for (const auto& h : hist) {
    double mass = 0;
    for (const auto& w : vocab) mass += std::pow(10.0, lm.Score(h, w));
    worst_mass = std::max(worst_mass, std::abs(mass - 1));
  }
  const auto toy = NGramLM::Train({LmTokens("ab ab")}, 3);
  const std::vector<std::string> a{"a"}, b{"b"}, sp{"<space>"};
  const double n = double(toy.Count(a) + toy.Count(b) + toy.Count(sp));
  const bool hand = toy.Count(a) / n == 2.0 / 5 && toy.Count(b) / n == 2.0 / 5 &&
                    toy.Count(sp) / n == 1.0 / 5;
  return {worst_rt <= 1e-6 && worst_mass <= 1e-3 && hand,
          Fmt("ARPA round trip max diff %.2e log10 (tol 1e-6); conditional mass max |sum - 1| "
              "= %.2e over %zu observed histories (tol 1e-3); \"ab ab\" MLE a=b=2/5, space=1/5 %s",
              worst_rt, worst_mass, hist.size(), hand ? "exact" : "WRONG")};
}

// ---------------------------------------------------------------- C7

Outcome NetGradients() {
  std::string detail;
  bool pass = true;
  std::size_t i = 0;
  for (const auto& [name, layers] : netcheck::LayerCases()) {
    const auto rep = netcheck::CheckParamGradients(layers, 5, {7, 4}, 700 + i++);
    pass = pass && rep.max_rel_err <= 1e-3 && rep.checked > 0;
    detail += Fmt("%s %.1e, ", name.c_str(), rep.max_rel_err);
  }
  const auto start = Clock::now();
  const double loss = netcheck::OverfitSingleUtterance(7, 200);
  const double secs = Seconds(start);
  pass = pass && loss < 0.1 && secs < 120;
  return {pass, "finite-difference max rel err (tol 1e-3): " + detail +
                    Fmt("single-utterance overfit: CTC loss %.4f after 200 Adam steps (target "
                        "< 0.1) in %.1f s (limit 120 s)",
                        loss, secs)};
}

// ---------------------------------------------------------- C8 and C9

struct Workspace {
  fs::path dir;
  explicit Workspace(const std::string& name)
      : dir(fs::temp_directory_path() / ("ctckit_acceptance_" + name)) {
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void Write(const std::string& name, const std::string& text) const {
    std::ofstream(dir / name) << text;
  }
  // Runs the binary from inside the workspace; stderr goes to run.log.
  void Cli(const std::string& args) const {
    const std::string cmd = "cd '" + dir.string() + "' && " + CTCKIT_BIN + " " + args +
                            " >>run.log 2>&1";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
      throw Error("command failed (see " + (dir / "run.log").string() + "): " + args);
  }
  // Splits the synthesized corpus into train (first n_train) and test rows.
  void Split(std::size_t n_train) const {
    std::ifstream noisy(dir / "corpus/manifest.tsv"), clean(dir / "corpus/manifest_clean.tsv");
    std::ofstream train(dir / "corpus/train.tsv"), test(dir / "corpus/test.tsv"),
        lm(dir / "lm_text.txt"), ref(dir / "test_text.tsv");
    std::string a, b;
    for (std::size_t i = 0; std::getline(noisy, a) && std::getline(clean, b); ++i) {
      if (i < n_train) {
        train << a << '\n';
        lm << SplitTabs(a)[2] << '\n';
      } else {
        test << b << '\n';
        ref << SplitTabs(b)[0] << '\t' << SplitTabs(b)[2] << '\n';
      }
    }
  }
  ScoreReport Score(const std::string& hyp, bool characters = false) const {
    ScoreOptions o;
    o.characters = characters;
    return FilteredScore(LoadTextTsv((dir / "test_text.tsv").string()),
                         LoadTextTsv((dir / hyp).string()), o)
        .raw;
  }
};

std::string SynthSpecJson(std::uint64_t seed, std::size_t n, double label_noise, double noise) {
  return Fmt(R"J({"symbols": [["a", 450], ["b", 900], ["d", 1350], ["e", 1800], ["k", 2250],
    ["r", 2700], ["<space>", 3200]], "utterances": %zu, "label_noise": %g, "noise_level": %g,
    "seed": %llu})J",
             n, label_noise, noise, static_cast<unsigned long long>(seed));
}

std::string ConfigJson(std::uint64_t seed, int hidden, int epochs) {
  return Fmt(R"J({"alphabet": "corpus/alphabet.txt", "seed": %llu,
    "model": ["frame_stack(2)", "bi_gru(%d)", "affine(8)", "log_softmax"],
    "train": {"lr": 0.003, "batch_size": 8, "epochs": %d},
    "segctc": {"min_word_len": 4, "warmup_epochs": 1}})J",
             static_cast<unsigned long long>(seed), hidden, epochs);
}

Outcome EndToEnd() {
  Workspace ws("e2e");
  ws.Write("spec.json", SynthSpecJson(7, 240, 0, 0));
  ws.Write("cfg.json", ConfigJson(1, 32, 20));
  ws.Cli("synth --spec spec.json --out corpus");
  ws.Split(200);
  const auto start = Clock::now();
  ws.Cli("--config cfg.json train --loss ctc --manifest corpus/train.tsv --out exp");
  const double train_secs = Seconds(start);
  ws.Cli("lm --corpus lm_text.txt --order 3 --out lm.arpa --alphabet corpus/alphabet.txt");
  const std::string ckpt = " --checkpoint exp/epoch_020.ckpt --manifest corpus/test.tsv";
  ws.Cli("--config cfg.json decode --argmax" + ckpt + " --out argmax.tsv");
  ws.Cli("--config cfg.json decode --lm lm.arpa --alpha 0.8 --beta 1" + ckpt + " --out lm.tsv");
  std::ifstream metrics(ws.dir / "exp/metrics.tsv");
  std::string line, last;
  while (std::getline(metrics, line)) last = line;
  const double train_cer = std::stod(SplitTabs(last).at(2));
  const double test_cer = ws.Score("argmax.tsv", true).wer();
  const double wer_argmax = ws.Score("argmax.tsv").wer(), wer_lm = ws.Score("lm.tsv").wer();
  return {train_cer <= 5 && test_cer <= 5 && train_secs <= 900 && wer_lm <= wer_argmax,
          Fmt("200 synthetic utterances, bi_gru(32), 20 epochs of CTC in %.0f s (limit 900 s); "
              "greedy CER %.2f%% train, %.2f%% on 40 held-out (target <= 5%%); held-out WER "
              "argmax %.2f%%, 3-gram LM (alpha 0.8, beta 1) %.2f%%",
              train_secs, train_cer, test_cer, wer_argmax, wer_lm)};
}

Outcome BeamTrend() {
  double gap_ctc = 0, gap_seg = 0;
  std::string per_seed;
  for (std::uint64_t seed : {1, 2, 3}) {
    Workspace ws("trend_" + std::to_string(seed));
    ws.Write("spec.json", SynthSpecJson(seed, 400, 0.1, 0.5));
    ws.Write("cfg.json", ConfigJson(seed, 16, 10));
    ws.Cli("synth --spec spec.json --out corpus");
    ws.Split(300);
    ws.Cli("lm --corpus lm_text.txt --order 3 --out lm.arpa --alphabet corpus/alphabet.txt");
    double wer[2][2];
    const char* losses[2] = {"ctc", "segctc"};
    for (int l = 0; l < 2; ++l) {
      const std::string loss = losses[l];
      ws.Cli("--config cfg.json train --loss " + loss + " --manifest corpus/train.tsv --out " + loss);
      for (int b = 0; b < 2; ++b) {
        const std::string beam = b == 0 ? "10" : "200";
        const std::string hyp = loss + "_b" + beam + ".tsv";
        ws.Cli("--config cfg.json decode --lm lm.arpa --beam " + beam + " --checkpoint " + loss +
               "/epoch_010.ckpt --manifest corpus/test.tsv --out " + hyp);
        wer[l][b] = ws.Score(hyp).wer();
      }
    }
    gap_ctc += (wer[0][0] - wer[0][1]) / 3;
    gap_seg += (wer[1][0] - wer[1][1]) / 3;
    per_seed += Fmt("seed %llu: ctc %.2f/%.2f, segctc %.2f/%.2f; ",
                    static_cast<unsigned long long>(seed), wer[0][0], wer[0][1], wer[1][0],
                    wer[1][1]);
  }
  return {gap_seg <= gap_ctc,
          Fmt("WER%% beam 10/200 on 100 clean held-out utterances after training on 300 with "
              "10%% label noise: %smean gap (beam10 - beam200) segctc %.2f vs ctc %.2f",
              per_seed.c_str(), gap_seg, gap_ctc)};
}

// ---------------------------------------------------------------- C10

Outcome Frontend() {
  std::mt19937_64 rng(110);
  int frame_bad = 0, frame_cases = 0;
  for (; frame_cases < 300; ++frame_cases) {
    FeatureConfig cfg;
    cfg.window_ms = double(5 + rng() % 40);
    cfg.shift_ms = double(1 + rng() % static_cast<unsigned>(cfg.window_ms));
    const auto W = std::size_t(cfg.window_samples()), S = std::size_t(cfg.shift_samples());
    const std::size_t N = W + rng() % 3000;
    std::vector<float> x(N, 1.0f);
    if (StftPower(x, cfg).rows() != 1 + (N - W) / S) ++frame_bad;
  }
  std::normal_distribution<double> g(3.0, 2.0);
  double worst_mean = 0, worst_var = 0;
  for (int trial = 0; trial < 200; ++trial) {
    Matrix<double> m(2 + rng() % 300, 1 + rng() % 50);
    for (double& v : m.data()) v = g(rng) * 10;
    const auto cmn = Normalize(m, Normalization::kCmn);
    const auto cmvn = Normalize(m, Normalization::kCmvn);
    for (std::size_t f = 0; f < m.cols(); ++f) {
      double mu = 0, mu2 = 0, var = 0;
      for (std::size_t t = 0; t < m.rows(); ++t) {
        mu += cmn(t, f);
        mu2 += cmvn(t, f);
      }
      mu /= double(m.rows());
      mu2 /= double(m.rows());
      for (std::size_t t = 0; t < m.rows(); ++t) var += (cmvn(t, f) - mu2) * (cmvn(t, f) - mu2);
      var /= double(m.rows());
      worst_mean = std::max(worst_mean, std::abs(mu));
      worst_var = std::max(worst_var, std::abs(var - 1));
    }
  }
  FeatureConfig cfg;
  std::vector<float> tone(8000);
  for (std::size_t i = 0; i < tone.size(); ++i) tone[i] = float(1000 * std::sin(0.3 * double(i)));
  const auto power = StftPower(tone, cfg);
  const std::size_t fbank = Fbank(power, cfg).cols(), full = ComputeFeatures(tone, cfg).data.cols();
  return {frame_bad == 0 && worst_mean <= 1e-10 && worst_var <= 1e-8 && fbank == 40 && full == 120,
          Fmt("frame count formula %d/%d exact; CMN max |mean| %.1e (tol 1e-10); CMVN max "
              "|var - 1| %.1e (tol 1e-8); fbank %zu columns, with deltas %zu",
              frame_cases - frame_bad, frame_cases, worst_mean, worst_var, fbank, full)};
}

// ---------------------------------------------------------------- C11

Outcome Scoring() {
  std::vector<std::vector<std::string>> seqs{{}};
  for (std::size_t i = 0; i < seqs.size(); ++i)
    if (seqs[i].size() < 8)
      for (const char* t : {"x", "y"}) {
        auto s = seqs[i];
        s.push_back(t);
        seqs.push_back(s);
      }
  auto join = [](const std::vector<std::string>& s) {
    std::string out;
    for (const auto& t : s) out += t + " ";
    return out;
  };
  std::size_t pairs = 0, bad = 0;
  for (const auto& r : seqs) {
    const std::string rs = join(r);
    for (const auto& h : seqs) {
      ++pairs;
      const auto rep = FilteredScore({{"u", rs}}, {{"u", join(h)}}).raw;
      const std::size_t ed = oracle::EditDistance(r, h);
      if (rep.errors() != ed) ++bad;
      else if (!r.empty() && rep.wer() != 100.0 * double(ed) / double(r.size())) ++bad;
    }
  }
  ScoreOptions noise, frag;
  noise.ignore_tokens = {"<noise>"};
  frag.fragment_rule = true;
  const auto ex1 = FilteredScore({{"u", "a <noise> b"}}, {{"u", "a b"}}, noise);
  const auto ex2 = FilteredScore({{"u", "oku- evet"}}, {{"u", "evet"}}, frag);
  const auto ex3 = FilteredScore({{"u", "a b c"}}, {{"u", "a x c"}});
  const bool examples = ex1.filtered.wer() == 0 && ex1.raw.deletions == 1 && ex1.raw.errors() == 1 &&
                        std::abs(ex1.raw.wer() - 100.0 / 3) < 1e-9 && ex2.filtered.wer() == 0 &&
                        ex3.raw.substitutions == 1 && ex3.raw.errors() == 1;
  return {bad == 0 && examples,
          Fmt("%zu ref/hyp pairs over all binary sequences of <= 8 tokens, %zu disagree with the "
              "exhaustive edit distance; filtered examples %s",
              pairs, bad, examples ? "reproduced" : "NOT reproduced")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"CTC loss equals brute-force alignment sum", CtcOracle},
      {"CTC gradient finite differences", CtcGradient},
      {"forced alignment optimality", ViterbiOptimality},
      {"segmentation criterion", SegmentationCriterion},
      {"decoder exactness and beam monotonicity", DecoderExactness},
      {"character n-gram LM", LanguageModel},
      {"network gradients and overfit", NetGradients},
      {"end-to-end synthetic corpus", EndToEnd},
      {"beam 10 vs 200 trend under label noise", BeamTrend},
      {"frontend", Frontend},
      {"scoring", Scoring},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    const auto start = Clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s C%d %s: %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first,
                o.detail.c_str(), Seconds(start));
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
