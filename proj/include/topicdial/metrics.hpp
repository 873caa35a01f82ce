#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "topicdial/corpus.hpp"

namespace topicdial {

inline constexpr int kBleuMaxOrder = 4;
inline constexpr double kBleuEps = 1e-9;

// Corpus-level BLEU accumulator: clipped modified n-gram matches up to order
// 4 plus the brevity penalty. Orders with zero candidate n-grams are skipped
// from the geometric mean; orders with zero matches contribute kBleuEps.
struct BleuStats {
  std::array<long long, kBleuMaxOrder> matched{};
  std::array<long long, kBleuMaxOrder> total{};
  long long cand_len = 0;
  long long ref_len = 0;

  void add(const std::vector<std::string>& cand, const std::vector<std::string>& ref);
  void merge(const BleuStats& o);
  double precision(int n) const;       // clipped matches / candidate n-grams
  double brevity_penalty() const;      // exp(min(0, 1 - ref_len/cand_len))
  double score(int n) const;           // BLEU-n in [0, 1]; 0 for empty candidates
};

// single-pair convenience wrapper
double bleu_n(const std::vector<std::string>& cand, const std::vector<std::string>& ref, int n);

struct PrfCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;

  void merge(const PrfCounts& o);
  double precision() const;  // 0/0 -> 0
  double recall() const;
  double f1() const;
};

// Topic ids whose surface occurs as a contiguous token run inside the
// generated response; each topic counts once regardless of repetition.
std::vector<int> topics_mentioned(const std::vector<std::string>& generated,
                                  const std::map<int, std::string>& lexicon);

// set comparison over ascending id lists
PrfCounts count_sets(const std::vector<int>& predicted, const std::vector<int>& gold);

// True iff gold_class ranks in the top k; ties broken toward the lower id.
bool hit_at_k(const std::vector<double>& scores, int gold_class, int k);

struct EvalSample {
  std::vector<std::string> generated;        // scored response tokens, EOS stripped
  std::vector<std::string> gold;             // gold response tokens, EOS stripped
  std::vector<int> gold_topics;              // ascending
  std::vector<int> predicted_topics;         // pass-2 decision (empty for stage one)
  std::vector<double> topic_scores;          // multi-class raw scores, may be empty
  int gold_class = -1;                       // multi-class gold label
};

// mean of the four per-sample BLEU orders, the per-sample score behind the
// golden-length buckets and the Avg Score column
double sample_avg_bleu(const EvalSample& s);

struct LengthBucket {
  int lo = 0;
  int hi = -1;  // -1 = open-ended
  double mean_bleu = 0.0;
  long long count = 0;
};

// Partition by gold-response token length at the given ascending edges; the
// last bucket is open-ended. Empty buckets are reported with count 0.
std::vector<LengthBucket> length_bucketed_bleu(const std::vector<EvalSample>& samples,
                                               const std::vector<int>& edges);

struct MetricsReport {
  Mode mode = Mode::kMultiLabel;
  long long n_samples = 0;
  std::array<double, 4> bleu{};  // corpus BLEU-1..4
  double topic_precision = 0.0;  // appearance-based, micro
  double topic_recall = 0.0;
  double topic_f1 = 0.0;
  bool has_pred_prf = false;     // multi-label topic prediction
  double pred_precision = 0.0;
  double pred_recall = 0.0;
  double pred_f1 = 0.0;
  bool has_hits = false;         // multi-class topic prediction
  std::map<int, double> hits;    // k -> hit@k
  double avg_score = 0.0;        // mean of bleu_1, bleu_4, topic_f1
  std::vector<LengthBucket> buckets;
};

MetricsReport compute_report(const std::vector<EvalSample>& samples, Mode mode,
                             const std::map<int, std::string>& lexicon,
                             const std::vector<int>& bucket_edges,
                             const std::vector<int>& hit_ks);

std::string report_json(const MetricsReport& r);
// aligned-column table; scores printed x100 to match the usual convention
std::string report_text(const MetricsReport& r);

}  // namespace topicdial
