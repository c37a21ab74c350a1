// tests/lm_test.cpp

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

#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "ctckit/decoder.hpp"
#include "ctckit/lm.hpp"

using namespace ctckit;

namespace {

using Toks = std::vector<std::string>;

NGramLM TrainOn(const std::vector<std::string>& texts, int order = 3) {
  std::vector<Toks> corpus;
  for (const auto& t : texts) corpus.push_back(LmTokens(t));
  return NGramLM::Train(corpus, order);
}

std::vector<std::string> RandomTexts(std::mt19937_64& rng, int n) {
  const std::string letters = "abcd";
  std::uniform_int_distribution<int> len(1, 12), pick(0, 4);
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) {
    std::string s;
    for (int k = len(rng); k > 0; --k) {
      int c = pick(rng);
      s += c == 4 ? ' ' : letters[c];
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(Lm, HandCountedUnigrams) {
  auto lm = TrainOn({"ab ab"});
  const Toks a{"a"}, b{"b"}, sp{"<space>"};
  const double n = double(lm.Count(a) + lm.Count(b) + lm.Count(sp));
  EXPECT_EQ(lm.Count(a) / n, 2.0 / 5.0);
  EXPECT_EQ(lm.Count(b) / n, 2.0 / 5.0);
  EXPECT_EQ(lm.Count(sp) / n, 1.0 / 5.0);
  EXPECT_EQ(lm.Count(Toks{"</s>"}), 1u);
  // smoothed: 6 tokens incl. </s>, 4 types, uniform base over 4 symbols
  EXPECT_NEAR(std::pow(10, lm.Score({}, "a")), (2 + 1.0) / (6 + 4), 1e-12);
  EXPECT_NEAR(std::pow(10, lm.Score({}, "<space>")), (1 + 1.0) / (6 + 4), 1e-12);
  // one continuation type after "a", seen twice
  const Toks h{"a"};
  EXPECT_NEAR(std::pow(10, lm.Score(h, "b")), (2 + 1 * 0.3) / (2 + 1), 1e-12);
  EXPECT_NEAR(lm.Find(h)->backoff, std::log10(1.0 / 3.0), 1e-12);
}

TEST(Lm, CountScalingKeepsRatios) {
  auto one = TrainOn({"ab ab", "ba"});
  auto two = TrainOn({"ab ab", "ba", "ab ab", "ba"});
  for (const auto& w : one.Vocabulary()) {
    EXPECT_EQ(2 * one.Count(Toks{w}), two.Count(Toks{w})) << w;
  }
  EXPECT_EQ(2 * one.Count(Toks{"a", "b"}), two.Count(Toks{"a", "b"}));
}

TEST(Lm, SingleSequenceDominates) {
  auto lm = TrainOn({"a"});
  const Toks h{"<s>"};
  const double pa = lm.Score(h, "a");
  for (const auto& w : lm.Vocabulary())
    if (w != "a") EXPECT_GT(pa, lm.Score(h, w)) << w;
}

TEST(Lm, EmptyCorpusIsAnError) {
  EXPECT_THROW(NGramLM::Train({}, 3), Error);
}

TEST(Lm, UnseenTrigramFollowsBackoffChain) {
  auto lm = TrainOn({"abc abd", "bca", "cab dab"});
  // "b" after "d a": trigram d a b is seen, pick an unseen one instead
  const Toks full{"c", "a", "d"};
  ASSERT_EQ(lm.Find(full), nullptr);
  const Toks h2{"c", "a"}, h1{"a"}, bigram{"a", "d"};
  ASSERT_NE(lm.Find(h2), nullptr);
  double expect = lm.Find(h2)->backoff;
  if (const auto* e = lm.Find(bigram)) expect += e->logprob;
  else expect += lm.Find(h1)->backoff + lm.Find(Toks{"d"})->logprob;
  EXPECT_NEAR(lm.Score(h2, "d"), expect, 1e-12);
}

TEST(Lm, SeenTrigramReturnsStoredValue) {
  auto lm = TrainOn({"abc abd"});
  const Toks tri{"a", "b", "c"};
  ASSERT_NE(lm.Find(tri), nullptr);
  EXPECT_EQ(lm.Score(Toks{"a", "b"}, "c"), lm.Find(tri)->logprob);
}

TEST(Lm, HistoryLongerThanOrderIsTruncated) {
  auto lm = TrainOn({"abc abd", "dcba"});
  EXPECT_EQ(lm.Score(Toks{"d", "c", "a", "b"}, "c"), lm.Score(Toks{"a", "b"}, "c"));
  // a short history is used as-is: the bigram entry
  ASSERT_NE(lm.Find(Toks{"b", "c"}), nullptr);
  EXPECT_EQ(lm.Score(Toks{"b"}, "c"), lm.Find(Toks{"b", "c"})->logprob);
}

TEST(Lm, SentenceScoreDecomposes) {
  auto lm = TrainOn({"ab ab", "ba b"});
  const double s = lm.SentenceScore(Toks{"a", "b"});
  const double hand = lm.Score(Toks{"<s>"}, "a") + lm.Score(Toks{"<s>", "a"}, "b") +
                      lm.Score(Toks{"a", "b"}, "</s>");
  EXPECT_NEAR(s, hand, 1e-12);
  EXPECT_NEAR(lm.SentenceScore(Toks{"a", "b"}, false),
              lm.Score(Toks{}, "a") + lm.Score(Toks{"a"}, "b"), 1e-12);
}

TEST(Lm, OovScoresFloor) {
  auto lm = TrainOn({"ab"});
  EXPECT_EQ(lm.Score(Toks{"a"}, "zzz"), -99.0);
}

TEST(Lm, ConditionalMassIsOne) {
  std::mt19937_64 rng(3);
  auto texts = RandomTexts(rng, 30);
  auto lm = TrainOn(texts);
  const auto vocab = lm.Vocabulary();
  std::set<Toks> histories;
  for (const auto& t : texts) {
    Toks s{"<s>"};
    for (auto& w : LmTokens(t)) s.push_back(w);
    for (std::size_t i = 0; i < s.size(); ++i) {
      histories.insert(Toks(s.begin() + i, s.begin() + i + 1));
      if (i + 2 <= s.size()) histories.insert(Toks(s.begin() + i, s.begin() + i + 2));
    }
  }
  histories.insert(Toks{});
  for (const auto& h : histories) {
    double mass = 0;
    for (const auto& w : vocab) mass += std::pow(10, lm.Score(h, w));
    ASSERT_NEAR(mass, 1.0, 1e-3);
    ASSERT_NEAR(mass, 1.0, 1e-9);  // exact up to rounding for this smoothing
  }
}

TEST(Lm, ArpaRoundTrip) {
  std::mt19937_64 rng(4);
  auto lm = TrainOn(RandomTexts(rng, 25));
  std::stringstream ss;
  lm.WriteArpa(ss);
  auto back = NGramLM::ReadArpa(ss);
  EXPECT_EQ(back.order(), 3);
  for (int k = 1; k <= 3; ++k) EXPECT_EQ(back.NumNgrams(k), lm.NumNgrams(k));
  const auto vocab = lm.Vocabulary();
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1), len(0, 4);
  for (int q = 0; q < 2000; ++q) {
    Toks h;
    for (std::size_t n = len(rng); n > 0; --n) h.push_back(vocab[pick(rng)]);
    const auto& w = vocab[pick(rng)];
    ASSERT_NEAR(back.Score(h, w), lm.Score(h, w), 1e-6);
  }
}

TEST(Lm, LiteralUnigramFile) {
  std::istringstream in(
      "\\data\\\nngram 1=4\n\n\\1-grams:\n-0.3010300\ta\n-0.6020600\tb\n-0.6020600\t</s>\n"
      "-99\t<s>\n\n\\end\\\n");
  auto lm = NGramLM::ReadArpa(in);
  EXPECT_EQ(lm.order(), 1);
  EXPECT_EQ(lm.Score(Toks{}, "a"), -0.30103);
  EXPECT_EQ(lm.Score(Toks{"b"}, "b"), -0.60206);
  EXPECT_EQ(lm.Score(Toks{}, "</s>"), -0.60206);
  EXPECT_EQ(lm.Score(Toks{}, "c"), -99.0);
}

TEST(Lm, ArpaValidationReportsLineNumbers) {
  auto expect_line = [](const std::string& text, int line) {
    std::istringstream in(text);
    try {
      NGramLM::ReadArpa(in);
      ADD_FAILURE() << "expected an error";
    } catch (const Error& e) {
      const std::string msg = e.what();
      EXPECT_NE(msg.find("line " + std::to_string(line)), std::string::npos) << msg;
    }
  };
  // header promises 5 bigrams, the section holds 4
  expect_line(
      "\\data\\\nngram 1=2\nngram 2=5\n\n\\1-grams:\n-0.3\ta\t-0.1\n-0.3\tb\t-0.1\n\n"
      "\\2-grams:\n-0.1\ta a\n-0.1\ta b\n-0.1\tb a\n-0.1\tb b\n\n\\end\\\n",
      15);
  expect_line("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.3\ta b c\n\\end\\\n", 5);
  expect_line("\\data\\\nngram x\n", 2);
  expect_line("\\data\\\nngram 1=1\n\n\\1-grams:\n-0.3\ta\n", 6);
}
