#pragma once

#include <functional>
#include <string>
#include <vector>

#include "topicdial/corpus.hpp"
#include "topicdial/net.hpp"
#include "topicdial/rng.hpp"

namespace tdtest {

using namespace topicdial;

// two-dialogue fixture with a multi-word topic surface
inline Corpus tiny_corpus() {
  Corpus c;
  c.mode = Mode::kMultiLabel;
  c.topics = {"fever", "stomach ache"};
  Dialogue d1;
  d1.utterances.push_back({{"hello", "doctor", "i", "have", "fever"}, Speaker::kA, {0}});
  d1.utterances.push_back({{"take", "rest", "for", "fever"}, Speaker::kB, {0}});
  Dialogue d2;
  d2.utterances.push_back({{"my", "stomach", "ache", "is", "bad"}, Speaker::kA, {1}});
  d2.utterances.push_back({{"how", "long"}, Speaker::kB, {}});
  d2.utterances.push_back({{"two", "days"}, Speaker::kA, {}});
  d2.utterances.push_back({{"see", "a", "doctor", "about", "stomach", "ache"}, Speaker::kB, {1}});
  c.dialogues = {d1, d2};
  return c;
}

// random dialogue over a small closed vocabulary, for property tests
inline Dialogue random_dialogue(Rng& rng, int n_topics, int max_pairs = 3) {
  Dialogue d;
  int pairs = 1 + static_cast<int>(rng.uniform(max_pairs));
  for (int p = 0; p < pairs; ++p) {
    for (int side = 0; side < 2; ++side) {
      Utterance u;
      u.speaker = side == 0 ? Speaker::kA : Speaker::kB;
      int len = 1 + static_cast<int>(rng.uniform(5));
      for (int i = 0; i < len; ++i)
        u.tokens.push_back("v" + std::to_string(rng.uniform(12)));
      int nt = static_cast<int>(rng.uniform(3));
      for (int i = 0; i < nt; ++i) u.topics.push_back(static_cast<int>(rng.uniform(n_topics)));
      std::sort(u.topics.begin(), u.topics.end());
      u.topics.erase(std::unique(u.topics.begin(), u.topics.end()), u.topics.end());
      d.utterances.push_back(std::move(u));
    }
  }
  return d;
}

struct GradCheckResult {
  double max_rel = 0.0;
  std::string worst_tensor;
};

// Central finite differences (binary64) of loss_fn over every parameter
// scalar against the supplied analytic gradients. Relative error uses a
// floored denominator so near-zero gradients are compared absolutely.
inline GradCheckResult finite_diff_check(Params& p, const std::function<double()>& loss_fn,
                                         const TensorMap& analytic, double h = 1e-5,
                                         double denom_floor = 1e-4) {
  GradCheckResult res;
  for (auto& [name, t] : p) {
    const Tensor& g = analytic.at(name);
    for (std::size_t i = 0; i < t.data.size(); ++i) {
      const double saved = t.data[i];
      t.data[i] = saved + h;
      const double up = loss_fn();
      t.data[i] = saved - h;
      const double down = loss_fn();
      t.data[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double a = g.data[i];
      const double denom = std::max({std::abs(fd), std::abs(a), denom_floor});
      const double rel = std::abs(fd - a) / denom;
      if (rel > res.max_rel) {
        res.max_rel = rel;
        res.worst_tensor = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace tdtest
