#include "topicdial/samples.hpp"

#include <algorithm>
#include <iostream>

#include "topicdial/error.hpp"

namespace topicdial {

namespace {

// topic surfaces joined by TOPIC_SEP, ascending topic-id order
std::vector<int> topic_span_ids(const std::vector<int>& topic_ids, const Vocab& v) {
  std::vector<int> sorted = topic_ids;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> out;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i) out.push_back(v.specials().topic_sep);
    for (int id : v.topic_surface_ids(sorted[i])) out.push_back(id);
  }
  return out;
}

std::vector<int> utterance_section(const Utterance& u, const Vocab& v, bool use_roles) {
  std::vector<int> sec;
  if (use_roles) sec.push_back(v.speaker_id(u.speaker));
  for (int id : v.encode(u.tokens)) sec.push_back(id);
  sec.push_back(v.specials().topic_mark);
  for (int id : topic_span_ids(u.topics, v)) sec.push_back(id);
  sec.push_back(v.specials().utt_sep);
  return sec;
}

// BOS ++ sections, left-truncated to max_context: drop whole oldest sections
// first, then trim tokens off the oldest survivor.
std::vector<int> assemble_history(std::vector<std::vector<int>> sections, const Vocab& v,
                                  int max_context) {
  std::size_t total = 1;
  for (const auto& s : sections) total += s.size();
  std::size_t first = 0;
  while (total > static_cast<std::size_t>(max_context) && sections.size() - first > 1) {
    total -= sections[first].size();
    ++first;
  }
  std::vector<int> out{v.specials().bos};
  for (std::size_t i = first; i < sections.size(); ++i) {
    const auto& s = sections[i];
    std::size_t skip = 0;
    if (i == first && total > static_cast<std::size_t>(max_context))
      skip = std::min(s.size(), total - static_cast<std::size_t>(max_context));
    out.insert(out.end(), s.begin() + skip, s.end());
  }
  return out;
}

}  // namespace

std::vector<TrainingSample> build_samples(const Dialogue& d, const Vocab& v,
                                          const SampleConfig& cfg) {
  std::vector<TrainingSample> samples;
  for (std::size_t n = 1; n < d.utterances.size(); ++n) {
    const Utterance& u = d.utterances[n];
    if (u.speaker != Speaker::kB) continue;
    if (u.tokens.empty()) {
      std::cerr << "warning: skipping system turn " << n + 1 << " with empty response\n";
      continue;
    }
    TrainingSample s;
    s.turn_index = static_cast<int>(n) + 1;
    s.history_ids = serialize_history(d, n, v, cfg);
    s.response_ids = v.encode(u.tokens);
    if (static_cast<int>(s.response_ids.size()) >= cfg.max_decode)
      s.response_ids.resize(cfg.max_decode - 1);
    s.response_ids.push_back(v.specials().eos);
    s.topic_ids = u.topics;
    std::sort(s.topic_ids.begin(), s.topic_ids.end());
    samples.push_back(std::move(s));
  }
  return samples;
}

std::vector<int> serialize_history(const Dialogue& d, std::size_t n_turns, const Vocab& v,
                                   const SampleConfig& cfg) {
  std::vector<std::vector<int>> sections;
  if (!d.profile.empty()) {
    std::vector<int> profile;
    for (const auto& sentence : d.profile) {
      for (int id : v.encode(sentence)) profile.push_back(id);
      profile.push_back(v.specials().utt_sep);
    }
    sections.push_back(std::move(profile));
  }
  n_turns = std::min(n_turns, d.utterances.size());
  for (std::size_t n = 0; n < n_turns; ++n)
    sections.push_back(utterance_section(d.utterances[n], v, cfg.use_roles));
  return assemble_history(std::move(sections), v, cfg.max_context);
}

std::vector<int> build_refine_input(const std::vector<int>& history_ids,
                                    const std::vector<int>& r1_ids,
                                    const std::vector<int>& topic_ids, const Vocab& v,
                                    int max_total, RefineContext ctx) {
  if (r1_ids.empty()) throw ContractError("build_refine_input: coarse response is empty");

  std::vector<int> tail{v.specials().cls};
  tail.insert(tail.end(), r1_ids.begin(), r1_ids.end());
  tail.push_back(v.specials().topic_mark);
  for (int id : topic_span_ids(topic_ids, v)) tail.push_back(id);
  tail.push_back(v.specials().topic_mark);

  std::vector<int> out;
  if (ctx == RefineContext::kFull) out = history_ids;
  if (max_total > 0 && out.size() + tail.size() > static_cast<std::size_t>(max_total)) {
    // trim history from the left, keeping its BOS; r1 and topics survive intact
    std::size_t budget =
        tail.size() >= static_cast<std::size_t>(max_total)
            ? 0
            : static_cast<std::size_t>(max_total) - tail.size();
    if (budget <= 1) {
      out.clear();
    } else {
      std::vector<int> trimmed{out.front()};
      trimmed.insert(trimmed.end(), out.end() - (budget - 1), out.end());
      out = std::move(trimmed);
    }
  }
  out.insert(out.end(), tail.begin(), tail.end());
  return out;
}

int class_label(const TrainingSample& s, int n_topics) {
  if (s.topic_ids.empty()) return n_topics;  // NONE class
  if (s.topic_ids.size() > 1)
    throw ContractError("multi-class label requested for a sample with several topics");
  return s.topic_ids[0];
}

std::vector<double> multi_hot_label(const TrainingSample& s, int n_topics) {
  std::vector<double> label(n_topics, 0.0);
  for (int t : s.topic_ids) {
    if (t < 0 || t >= n_topics)
      throw ContractError("topic id outside the lexicon in multi_hot_label");
    label[t] = 1.0;
  }
  return label;
}

}  // namespace topicdial
