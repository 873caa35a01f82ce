#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace topicdial {

// Topic prediction flavor of a corpus: any subset of topics per turn vs
// exactly one (with an implicit NONE class absorbing empty sets).
enum class Mode { kMultiLabel, kMultiClass };

enum class Speaker { kA, kB };

std::string mode_name(Mode m);
Mode mode_from_name(const std::string& name);

struct Utterance {
  std::vector<std::string> tokens;  // non-empty
  Speaker speaker = Speaker::kA;
  std::vector<int> topics;  // ascending topic ids, possibly empty

  bool operator==(const Utterance&) const = default;
};

struct Dialogue {
  std::vector<Utterance> utterances;              // >= 2, last one is a system (B) turn
  std::vector<std::vector<std::string>> profile;  // optional profile sentences

  bool operator==(const Dialogue&) const = default;
};

struct Corpus {
  Mode mode = Mode::kMultiLabel;
  std::vector<std::string> topics;  // topic id -> surface string (may be multi-word)
  bool profiles_present = false;
  std::vector<Dialogue> dialogues;
};

struct SyntheticConfig {
  int n_dialogues = 32;
  int turns = 4;        // utterances per dialogue; alternating A,B,...,B (even, >= 2)
  int vocab_size = 64;  // distinct content words the generator may emit, topic surfaces included
  int n_topics = 8;
  double stickiness = 0.7;  // probability the next system turn keeps the previous topic
  std::uint64_t seed = 0;

  void validate() const;
};

// Sticky-topic dialogue generator. Every system turn's gold response is a
// fixed template of its topic (so the response always contains the topic
// surface and is fully determined by it); the user turn before it mentions
// the topic surface once amid filler words.
Corpus generate_synthetic(const SyntheticConfig& cfg, Mode mode = Mode::kMultiLabel);

Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

// Throws DataError naming the offending dialogue index and field.
void validate_corpus(const Corpus& corpus);

struct CorpusStats {
  long long dialogues = 0;
  long long utterances = 0;
  long long topics = 0;
  Mode mode = Mode::kMultiLabel;
};

CorpusStats corpus_stats(const Corpus& corpus);

}  // namespace topicdial
