#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <map>

#include "test_helpers.hpp"
#include "topicdial/metrics.hpp"
#include "topicdial/vocab.hpp"

using namespace topicdial;
using namespace tdtest;

namespace {

std::vector<std::string> toks(std::initializer_list<const char*> ws) {
  return std::vector<std::string>(ws.begin(), ws.end());
}

}  // namespace

TEST_CASE("identity candidates score 1.0 at every order") {
  for (auto cand : {toks({"a", "b", "c"}), toks({"x", "y", "z", "w", "q"})}) {
    for (int n = 1; n <= 4; ++n) CHECK(bleu_n(cand, cand, n) == doctest::Approx(1.0));
  }
}

TEST_CASE("brevity penalty matches the closed form") {
  // cand 3 tokens, ref 4 -> precision 1, BP = exp(1 - 4/3)
  double score = bleu_n(toks({"a", "b", "c"}), toks({"a", "b", "c", "d"}), 1);
  CHECK(score == doctest::Approx(std::exp(-1.0 / 3.0)).epsilon(1e-9));
  CHECK(score == doctest::Approx(0.7165313105737893).epsilon(1e-6));
}

TEST_CASE("modified precision clips by the reference count") {
  BleuStats st;
  st.add(toks({"a", "a", "a"}), toks({"a", "b"}));
  CHECK(st.precision(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(st.brevity_penalty() == 1.0);  // candidate is longer
  CHECK(st.score(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("empty candidate scores zero by convention") {
  CHECK(bleu_n({}, toks({"a"}), 4) == 0.0);
}

TEST_CASE("zero-match orders are smoothed, absent orders skipped") {
  // no bigram overlap: order 2 smooths to eps instead of zeroing the score
  double s = bleu_n(toks({"a", "x", "b"}), toks({"a", "q", "b"}), 2);
  CHECK(s > 0.0);
  CHECK(s < 0.01);
  // one-token candidate has no bigrams at all: BLEU-2 reduces to BLEU-1 x BP
  double one = bleu_n(toks({"a"}), toks({"a", "b"}), 2);
  CHECK(one == doctest::Approx(std::exp(1.0 - 2.0)).epsilon(1e-12));
}

TEST_CASE("BLEU is invariant under a vocabulary renaming") {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<std::string> cand, ref;
    int lc = 1 + static_cast<int>(rng.uniform(8));
    int lr = 1 + static_cast<int>(rng.uniform(8));
    for (int i = 0; i < lc; ++i) cand.push_back("w" + std::to_string(rng.uniform(5)));
    for (int i = 0; i < lr; ++i) ref.push_back("w" + std::to_string(rng.uniform(5)));
    auto rename = [](std::vector<std::string> v) {
      for (auto& t : v) t = "RENAMED_" + t;
      return v;
    };
    for (int n = 1; n <= 4; ++n)
      CHECK(bleu_n(cand, ref, n) == bleu_n(rename(cand), rename(ref), n));
  }
}

TEST_CASE("corrupting a matched token never raises BLEU-1") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> ref;
    int lr = 2 + static_cast<int>(rng.uniform(8));
    for (int i = 0; i < lr; ++i) ref.push_back("w" + std::to_string(rng.uniform(4)));
    std::vector<std::string> cand = ref;
    double base = bleu_n(cand, ref, 1);
    cand[rng.uniform(cand.size())] = "OOV_TOKEN";
    CHECK(bleu_n(cand, ref, 1) <= base);
  }
}

TEST_CASE("topic appearance: perfect mention and total miss") {
  std::map<int, std::string> lex{{0, "fever"}, {1, "stomach ache"}};
  auto got = topics_mentioned(toks({"take", "rest", "for", "fever"}), lex);
  CHECK(got == std::vector<int>{0});
  PrfCounts perfect = count_sets(got, {0});
  CHECK(perfect.f1() == 1.0);
  PrfCounts miss = count_sets(topics_mentioned(toks({"hello"}), lex), {0});
  CHECK(miss.recall() == 0.0);
  CHECK(miss.f1() == 0.0);
}

TEST_CASE("multi-word surfaces must appear as a contiguous run") {
  std::map<int, std::string> lex{{0, "stomach ache"}};
  CHECK(topics_mentioned(toks({"my", "stomach", "ache", "hurts"}), lex) ==
        std::vector<int>{0});
  CHECK(topics_mentioned(toks({"stomach", "really", "ache"}), lex).empty());
}

TEST_CASE("spurious mention halves precision; micro aggregation is hand-checked") {
  std::map<int, std::string> lex{{1, "t1"}, {2, "t2"}, {3, "t3"}};
  // sample 1: mentions t1 and the spurious t2, gold {t1}: tp 1, fp 1
  PrfCounts c1 = count_sets(topics_mentioned(toks({"t1", "and", "t2"}), lex), {1});
  CHECK(c1.precision() == doctest::Approx(0.5));
  CHECK(c1.recall() == doctest::Approx(1.0));
  CHECK(c1.f1() == doctest::Approx(2.0 / 3.0));
  // add sample 2 (exact t3) and sample 3 (miss on t2): micro totals
  PrfCounts total = c1;
  total.merge(count_sets(topics_mentioned(toks({"t3"}), lex), {3}));
  total.merge(count_sets(topics_mentioned(toks({"nothing"}), lex), {2}));
  // tp 2, fp 1, fn 1 -> P 2/3, R 2/3, F1 2/3
  CHECK(total.precision() == doctest::Approx(2.0 / 3.0));
  CHECK(total.recall() == doctest::Approx(2.0 / 3.0));
  CHECK(total.f1() == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("multi-label PRF identities and conventions") {
  PrfCounts perfect;
  for (int i = 0; i < 5; ++i) perfect.merge(count_sets({1, 2}, {1, 2}));
  CHECK(perfect.precision() == 1.0);
  CHECK(perfect.recall() == 1.0);
  CHECK(perfect.f1() == 1.0);

  PrfCounts empty_preds = count_sets({}, {1, 2});
  CHECK(empty_preds.precision() == 0.0);  // 0/0 convention
  CHECK(empty_preds.recall() == 0.0);
  CHECK(empty_preds.f1() == 0.0);
}

TEST_CASE("micro PRF equals a brute-force per-decision counter") {
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    PrfCounts micro;
    long long tp = 0, fp = 0, fn = 0;
    for (int s = 0; s < 10; ++s) {
      std::vector<int> pred, gold;
      bool phit[6] = {false}, ghit[6] = {false};
      for (int c = 0; c < 6; ++c) {
        if (rng.bernoulli(0.3)) {
          pred.push_back(c);
          phit[c] = true;
        }
        if (rng.bernoulli(0.3)) {
          gold.push_back(c);
          ghit[c] = true;
        }
      }
      micro.merge(count_sets(pred, gold));
      for (int c = 0; c < 6; ++c) {
        if (phit[c] && ghit[c]) ++tp;
        if (phit[c] && !ghit[c]) ++fp;
        if (!phit[c] && ghit[c]) ++fn;
      }
    }
    CHECK(micro.tp == tp);
    CHECK(micro.fp == fp);
    CHECK(micro.fn == fn);
  }
}

TEST_CASE("hit@k basics") {
  CHECK(hit_at_k({0.9, 0.1, 0.2}, 0, 1));
  CHECK(hit_at_k({0.1, 0.5, 0.3, 0.1}, 2, 3));
  CHECK_FALSE(hit_at_k({0.1, 0.5, 0.3, 0.1}, 2, 1));
  // k = K is exhaustive
  CHECK(hit_at_k({0.1, 0.5, 0.3, 0.1}, 3, 4));
  // ties break toward the lower class id
  CHECK(hit_at_k({1.0, 1.0}, 0, 1));
  CHECK_FALSE(hit_at_k({1.0, 1.0}, 1, 1));
}

TEST_CASE("hit@k is monotone in k") {
  Rng rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> scores(8);
    for (double& s : scores) s = rng.normal();
    int gold = static_cast<int>(rng.uniform(8));
    bool prev = false;
    for (int k = 1; k <= 8; ++k) {
      bool hit = hit_at_k(scores, gold, k);
      if (prev) CHECK(hit);
      prev = hit;
    }
    CHECK(hit_at_k(scores, gold, 8));
  }
}

TEST_CASE("length buckets partition by gold length") {
  EvalSample a;
  a.generated = toks({"x", "y"});
  a.gold = toks({"a", "b", "c", "d", "e"});  // length 5
  EvalSample b;
  b.generated = toks({"p"});
  b.gold = std::vector<std::string>(25, "q");  // length 25
  auto buckets = length_bucketed_bleu({a, b}, {0, 20});
  REQUIRE(buckets.size() == 2);
  CHECK(buckets[0].count == 1);
  CHECK(buckets[1].count == 1);
  CHECK(buckets[1].hi == -1);
}

TEST_CASE("single bucket mean equals the mean of per-sample averages") {
  std::vector<EvalSample> samples;
  double hand_sum = 0.0;
  EvalSample s1;
  s1.generated = toks({"a", "b", "c"});
  s1.gold = toks({"a", "b", "c"});
  EvalSample s2;
  s2.generated = toks({"a", "x"});
  s2.gold = toks({"a", "b"});
  EvalSample s3;
  s3.generated = toks({"q"});
  s3.gold = toks({"a", "b"});
  EvalSample s4;
  s4.generated = toks({"a", "b", "z", "d"});
  s4.gold = toks({"a", "b", "c", "d"});
  for (auto& s : {s1, s2, s3, s4}) {
    samples.push_back(s);
    hand_sum += sample_avg_bleu(s);
  }
  auto buckets = length_bucketed_bleu(samples, {0});
  REQUIRE(buckets.size() == 1);
  CHECK(buckets[0].count == 4);
  CHECK(buckets[0].mean_bleu == doctest::Approx(hand_sum / 4.0).epsilon(1e-12));
}

TEST_CASE("per-sample average BLEU is the mean of the four orders") {
  EvalSample s;
  s.generated = toks({"a", "b", "c", "d"});
  s.gold = toks({"a", "b", "x", "d"});
  BleuStats st;
  st.add(s.generated, s.gold);
  double hand = (st.score(1) + st.score(2) + st.score(3) + st.score(4)) / 4.0;
  CHECK(sample_avg_bleu(s) == doctest::Approx(hand).epsilon(1e-15));
}

TEST_CASE("gold responses of the synthetic corpus score a perfect Topic-F1") {
  SyntheticConfig cfg;
  cfg.n_dialogues = 16;
  cfg.seed = 21;
  Corpus corpus = generate_synthetic(cfg);
  Vocab vocab = build_vocab(corpus, 1);
  PrfCounts total;
  for (const auto& d : corpus.dialogues) {
    for (const auto& u : d.utterances) {
      if (u.speaker != Speaker::kB) continue;
      total.merge(count_sets(topics_mentioned(u.tokens, vocab.topic_lexicon()), u.topics));
    }
  }
  CHECK(total.f1() == 1.0);
}

TEST_CASE("report carries mode-appropriate prediction metrics") {
  std::map<int, std::string> lex{{0, "t0"}, {1, "t1"}};
  EvalSample s;
  s.generated = toks({"t0", "x"});
  s.gold = toks({"t0", "x"});
  s.gold_topics = {0};
  s.predicted_topics = {0};
  s.topic_scores = {2.0, -1.0, 0.0};
  s.gold_class = 0;

  MetricsReport ml = compute_report({s}, Mode::kMultiLabel, lex, {0, 20}, {1, 3, 5});
  CHECK(ml.has_pred_prf);
  CHECK_FALSE(ml.has_hits);
  CHECK(ml.pred_f1 == 1.0);
  CHECK(ml.avg_score == doctest::Approx((ml.bleu[0] + ml.bleu[3] + ml.topic_f1) / 3.0));

  MetricsReport mc = compute_report({s}, Mode::kMultiClass, lex, {0, 20}, {1, 3, 5});
  CHECK(mc.has_hits);
  CHECK_FALSE(mc.has_pred_prf);
  CHECK(mc.hits.at(1) == 1.0);
  CHECK(mc.hits.at(1) <= mc.hits.at(3));
  CHECK(mc.hits.at(3) <= mc.hits.at(5));

  CHECK(report_json(ml).find("bleu_1") != std::string::npos);
  CHECK(report_text(ml).find("Topic-F1") != std::string::npos);
}
