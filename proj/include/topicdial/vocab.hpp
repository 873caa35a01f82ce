#pragma once

#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "topicdial/corpus.hpp"

namespace topicdial {

// Fixed special-token ids; PAD is always 0.
struct Specials {
  int pad = 0;
  int unk = 1;
  int bos = 2;
  int eos = 3;
  int utt_sep = 4;
  int spk_a = 5;
  int spk_b = 6;
  int topic_mark = 7;  // brackets injected topic spans
  int topic_sep = 8;   // between concatenated topic surfaces
  int cls = 9;         // classifier pooling token
};

inline constexpr int kNumSpecials = 10;

// Token/id mapping with a special-token registry and the topic lexicon.
// Immutable after construction; safe for concurrent reads.
class Vocab {
 public:
  Vocab() = default;

  int size() const { return static_cast<int>(tokens_.size()); }
  const Specials& specials() const { return specials_; }

  // id lookup with UNK fallback for out-of-vocabulary tokens
  int id(const std::string& token) const;
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;  // std::out_of_range on bad id

  int speaker_id(Speaker s) const { return s == Speaker::kA ? specials_.spk_a : specials_.spk_b; }

  const std::map<int, std::string>& topic_lexicon() const { return topic_lexicon_; }
  // surface string split into whitespace tokens
  std::vector<std::string> topic_surface_tokens(int topic_id) const;
  std::vector<int> topic_surface_ids(int topic_id) const;

  std::vector<int> encode(const std::vector<std::string>& tokens) const;
  // inverse of encode on in-vocabulary input; PAD ids are dropped
  std::vector<std::string> decode(const std::vector<int>& ids) const;

  friend Vocab build_vocab(const Corpus& corpus, int min_count);
  friend Vocab load_vocab(const std::string& path);

 private:
  void add_token(const std::string& token);
  void index_specials();

  std::vector<std::string> tokens_;  // id -> surface, dense 0..V-1
  std::unordered_map<std::string, int> ids_;
  std::map<int, std::string> topic_lexicon_;
  Specials specials_;
};

// Content tokens with frequency >= min_count get ids; specials and every
// topic-surface word are always included. Throws ConfigError on an empty
// corpus.
Vocab build_vocab(const Corpus& corpus, int min_count = 1);

void save_vocab(const Vocab& v, const std::string& path);
Vocab load_vocab(const std::string& path);

}  // namespace topicdial
