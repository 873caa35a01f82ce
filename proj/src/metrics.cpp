#include "topicdial/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

#include "topicdial/error.hpp"

namespace topicdial {

using nlohmann::json;

namespace {

// n-grams keyed by tokens joined with an unprintable separator
std::unordered_map<std::string, long long> ngram_counts(const std::vector<std::string>& toks,
                                                        int n) {
  std::unordered_map<std::string, long long> counts;
  if (static_cast<int>(toks.size()) < n) return counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    std::string key;
    for (int j = 0; j < n; ++j) {
      if (j) key += '\x1f';
      key += toks[i + j];
    }
    ++counts[key];
  }
  return counts;
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

bool contains_run(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
    bool match = true;
    for (std::size_t j = 0; j < needle.size(); ++j) {
      if (hay[i + j] != needle[j]) {
        match = false;
        break;
      }
    }
    if (match) return true;
  }
  return false;
}

}  // namespace

void BleuStats::add(const std::vector<std::string>& cand, const std::vector<std::string>& ref) {
  cand_len += static_cast<long long>(cand.size());
  ref_len += static_cast<long long>(ref.size());
  for (int n = 1; n <= kBleuMaxOrder; ++n) {
    auto cc = ngram_counts(cand, n);
    auto rc = ngram_counts(ref, n);
    for (const auto& [gram, c] : cc) {
      total[n - 1] += c;
      auto it = rc.find(gram);
      if (it != rc.end()) matched[n - 1] += std::min(c, it->second);
    }
  }
}

void BleuStats::merge(const BleuStats& o) {
  for (int i = 0; i < kBleuMaxOrder; ++i) {
    matched[i] += o.matched[i];
    total[i] += o.total[i];
  }
  cand_len += o.cand_len;
  ref_len += o.ref_len;
}

double BleuStats::precision(int n) const {
  if (n < 1 || n > kBleuMaxOrder) throw ContractError("BLEU order outside [1, 4]");
  if (total[n - 1] == 0) return 0.0;
  return static_cast<double>(matched[n - 1]) / static_cast<double>(total[n - 1]);
}

double BleuStats::brevity_penalty() const {
  if (cand_len == 0) return 0.0;
  if (cand_len >= ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(cand_len));
}

double BleuStats::score(int n) const {
  if (n < 1 || n > kBleuMaxOrder) throw ContractError("BLEU order outside [1, 4]");
  if (cand_len == 0) return 0.0;
  double log_sum = 0.0;
  int orders = 0;
  for (int i = 1; i <= n; ++i) {
    if (total[i - 1] == 0) continue;  // no candidate n-grams of this order
    double p = matched[i - 1] > 0 ? precision(i) : kBleuEps;
    log_sum += std::log(p);
    ++orders;
  }
  if (orders == 0) return 0.0;
  return brevity_penalty() * std::exp(log_sum / orders);
}

double bleu_n(const std::vector<std::string>& cand, const std::vector<std::string>& ref, int n) {
  BleuStats st;
  st.add(cand, ref);
  return st.score(n);
}

void PrfCounts::merge(const PrfCounts& o) {
  tp += o.tp;
  fp += o.fp;
  fn += o.fn;
}

double PrfCounts::precision() const {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double PrfCounts::recall() const {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

double PrfCounts::f1() const {
  double p = precision(), r = recall();
  return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

std::vector<int> topics_mentioned(const std::vector<std::string>& generated,
                                  const std::map<int, std::string>& lexicon) {
  std::vector<int> out;
  for (const auto& [tid, surface] : lexicon) {
    if (contains_run(generated, split_words(surface))) out.push_back(tid);
  }
  return out;
}

PrfCounts count_sets(const std::vector<int>& predicted, const std::vector<int>& gold) {
  PrfCounts c;
  for (int p : predicted) {
    if (std::binary_search(gold.begin(), gold.end(), p))
      ++c.tp;
    else
      ++c.fp;
  }
  for (int g : gold) {
    if (!std::binary_search(predicted.begin(), predicted.end(), g)) ++c.fn;
  }
  return c;
}

bool hit_at_k(const std::vector<double>& scores, int gold_class, int k) {
  if (gold_class < 0 || gold_class >= static_cast<int>(scores.size()))
    throw ContractError("hit_at_k: gold class outside the score vector");
  const double gs = scores[gold_class];
  int ahead = 0;
  for (int c = 0; c < static_cast<int>(scores.size()); ++c) {
    if (c == gold_class) continue;
    if (scores[c] > gs || (scores[c] == gs && c < gold_class)) ++ahead;
  }
  return ahead < k;
}

double sample_avg_bleu(const EvalSample& s) {
  BleuStats st;
  st.add(s.generated, s.gold);
  double sum = 0.0;
  for (int n = 1; n <= kBleuMaxOrder; ++n) sum += st.score(n);
  return sum / kBleuMaxOrder;
}

std::vector<LengthBucket> length_bucketed_bleu(const std::vector<EvalSample>& samples,
                                               const std::vector<int>& edges) {
  if (edges.empty()) throw ContractError("length_bucketed_bleu: no bucket edges");
  std::vector<LengthBucket> buckets;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    LengthBucket b;
    b.lo = edges[i];
    b.hi = i + 1 < edges.size() ? edges[i + 1] : -1;
    buckets.push_back(b);
  }
  std::vector<double> sums(buckets.size(), 0.0);
  for (const EvalSample& s : samples) {
    int len = static_cast<int>(s.gold.size());
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      if (len >= buckets[i].lo && (buckets[i].hi < 0 || len < buckets[i].hi)) {
        sums[i] += sample_avg_bleu(s);
        ++buckets[i].count;
        break;
      }
    }
  }
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    if (buckets[i].count > 0) buckets[i].mean_bleu = sums[i] / buckets[i].count;
  }
  return buckets;
}

MetricsReport compute_report(const std::vector<EvalSample>& samples, Mode mode,
                             const std::map<int, std::string>& lexicon,
                             const std::vector<int>& bucket_edges,
                             const std::vector<int>& hit_ks) {
  MetricsReport r;
  r.mode = mode;
  r.n_samples = static_cast<long long>(samples.size());

  BleuStats bleu;
  PrfCounts appearance;
  PrfCounts pred_prf;
  std::map<int, long long> hit_counts;
  long long scored_hits = 0;

  for (const EvalSample& s : samples) {
    bleu.add(s.generated, s.gold);
    appearance.merge(count_sets(topics_mentioned(s.generated, lexicon), s.gold_topics));
    if (mode == Mode::kMultiLabel) {
      pred_prf.merge(count_sets(s.predicted_topics, s.gold_topics));
    } else if (!s.topic_scores.empty() && s.gold_class >= 0) {
      ++scored_hits;
      for (int k : hit_ks) hit_counts[k] += hit_at_k(s.topic_scores, s.gold_class, k) ? 1 : 0;
    }
  }

  for (int n = 1; n <= kBleuMaxOrder; ++n) r.bleu[n - 1] = bleu.score(n);
  r.topic_precision = appearance.precision();
  r.topic_recall = appearance.recall();
  r.topic_f1 = appearance.f1();
  if (mode == Mode::kMultiLabel) {
    r.has_pred_prf = true;
    r.pred_precision = pred_prf.precision();
    r.pred_recall = pred_prf.recall();
    r.pred_f1 = pred_prf.f1();
  } else if (scored_hits > 0) {
    r.has_hits = true;
    for (int k : hit_ks)
      r.hits[k] = static_cast<double>(hit_counts[k]) / static_cast<double>(scored_hits);
  }
  r.avg_score = (r.bleu[0] + r.bleu[3] + r.topic_f1) / 3.0;
  r.buckets = length_bucketed_bleu(samples, bucket_edges);
  return r;
}

std::string report_json(const MetricsReport& r) {
  json j;
  j["mode"] = mode_name(r.mode);
  j["n_samples"] = r.n_samples;
  j["bleu_1"] = r.bleu[0];
  j["bleu_2"] = r.bleu[1];
  j["bleu_3"] = r.bleu[2];
  j["bleu_4"] = r.bleu[3];
  j["topic_precision"] = r.topic_precision;
  j["topic_recall"] = r.topic_recall;
  j["topic_f1"] = r.topic_f1;
  j["avg_score"] = r.avg_score;
  if (r.has_pred_prf) {
    j["pred_precision"] = r.pred_precision;
    j["pred_recall"] = r.pred_recall;
    j["pred_f1"] = r.pred_f1;
  }
  if (r.has_hits) {
    json hits;
    for (const auto& [k, v] : r.hits) hits["hit@" + std::to_string(k)] = v;
    j["hits"] = hits;
  }
  json buckets = json::array();
  for (const LengthBucket& b : r.buckets) {
    buckets.push_back(
        {{"lo", b.lo}, {"hi", b.hi}, {"mean_bleu", b.mean_bleu}, {"count", b.count}});
  }
  j["length_buckets"] = buckets;
  j["bleu_smoothing"] = "corpus-level, add-eps 1e-9 on zero-match orders, empty orders skipped";
  j["topic_f1_rule"] = "contiguous token-run appearance, each topic counted once";
  j["avg_score_rule"] = "mean of bleu_1, bleu_4, topic_f1";
  return j.dump(1);
}

std::string report_text(const MetricsReport& r) {
  std::ostringstream out;
  char line[256];
  auto pct = [](double x) { return 100.0 * x; };

  out << "evaluation report\n";
  out << "  mode          : " << mode_name(r.mode) << "\n";
  out << "  samples       : " << r.n_samples << "\n";
  out << "  bleu smoothing: add-eps 1e-9 on zero-match orders, empty orders skipped\n";
  out << "  topic-f1 rule : contiguous token-run appearance, counted once per topic\n\n";

  std::snprintf(line, sizeof(line), "  %-10s %8s %8s %8s %8s %9s %9s\n", "", "BLEU-1", "BLEU-2",
                "BLEU-3", "BLEU-4", "Topic-F1", "AvgScore");
  out << line;
  std::snprintf(line, sizeof(line), "  %-10s %8.2f %8.2f %8.2f %8.2f %9.2f %9.2f\n", "response",
                pct(r.bleu[0]), pct(r.bleu[1]), pct(r.bleu[2]), pct(r.bleu[3]), pct(r.topic_f1),
                pct(r.avg_score));
  out << line;
  std::snprintf(line, sizeof(line), "  %-10s %8s %8.2f %8s %8.2f\n", "topic-appearance", "P",
                pct(r.topic_precision), "R", pct(r.topic_recall));
  out << line << "\n";

  if (r.has_pred_prf) {
    std::snprintf(line, sizeof(line),
                  "  topic prediction (multi-label)  P %6.2f  R %6.2f  F1 %6.2f\n",
                  pct(r.pred_precision), pct(r.pred_recall), pct(r.pred_f1));
    out << line;
  }
  if (r.has_hits) {
    out << "  topic prediction (multi-class) ";
    for (const auto& [k, v] : r.hits) {
      std::snprintf(line, sizeof(line), " Hit@%d %.4f", k, v);
      out << line;
    }
    out << "\n";
  }

  out << "\n  golden-length buckets (mean of per-sample BLEU-1..4)\n";
  for (const LengthBucket& b : r.buckets) {
    if (b.hi < 0)
      std::snprintf(line, sizeof(line), "    [%d, inf)  mean %6.2f  count %lld\n", b.lo,
                    pct(b.mean_bleu), b.count);
    else
      std::snprintf(line, sizeof(line), "    [%d, %d)  mean %6.2f  count %lld\n", b.lo, b.hi,
                    pct(b.mean_bleu), b.count);
    out << line;
  }
  return out.str();
}

}  // namespace topicdial
