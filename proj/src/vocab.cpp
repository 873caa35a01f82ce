#include "topicdial/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "topicdial/error.hpp"

namespace topicdial {

using nlohmann::json;

namespace {

const char* kSpecialSurfaces[kNumSpecials] = {
    "<pad>", "<unk>", "<bos>", "<eos>", "<sep>",
    "<spk_a>", "<spk_b>", "<topic>", "<topic_sep>", "<cls>"};

const char* kSpecialNames[kNumSpecials] = {
    "pad", "unk", "bos", "eos", "utt_sep",
    "spk_a", "spk_b", "topic_mark", "topic_sep", "cls"};

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace

void Vocab::add_token(const std::string& token) {
  if (ids_.count(token)) return;
  ids_[token] = static_cast<int>(tokens_.size());
  tokens_.push_back(token);
}

void Vocab::index_specials() {
  specials_.pad = 0;
  specials_.unk = 1;
  specials_.bos = 2;
  specials_.eos = 3;
  specials_.utt_sep = 4;
  specials_.spk_a = 5;
  specials_.spk_b = 6;
  specials_.topic_mark = 7;
  specials_.topic_sep = 8;
  specials_.cls = 9;
}

int Vocab::id(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? specials_.unk : it->second;
}

bool Vocab::contains(const std::string& token) const { return ids_.count(token) > 0; }

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocab of size " +
                            std::to_string(size()));
  return tokens_[id];
}

std::vector<std::string> Vocab::topic_surface_tokens(int topic_id) const {
  auto it = topic_lexicon_.find(topic_id);
  if (it == topic_lexicon_.end())
    throw std::out_of_range("topic id " + std::to_string(topic_id) + " not in lexicon");
  return split_words(it->second);
}

std::vector<int> Vocab::topic_surface_ids(int topic_id) const {
  return encode(topic_surface_tokens(topic_id));
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<std::string> Vocab::decode(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int i : ids) {
    if (i == specials_.pad) continue;
    out.push_back(token(i));
  }
  return out;
}

Vocab build_vocab(const Corpus& corpus, int min_count) {
  if (corpus.dialogues.empty()) throw ConfigError("cannot build a vocab from an empty corpus");
  if (min_count < 1) throw ConfigError("min_count must be >= 1");

  Vocab v;
  for (int i = 0; i < kNumSpecials; ++i) v.add_token(kSpecialSurfaces[i]);
  v.index_specials();

  // topic surfaces are a closed class: their words always get ids
  for (std::size_t k = 0; k < corpus.topics.size(); ++k) {
    v.topic_lexicon_[static_cast<int>(k)] = corpus.topics[k];
    for (const auto& w : split_words(corpus.topics[k])) v.add_token(w);
  }

  std::unordered_map<std::string, long long> counts;
  for (const Dialogue& d : corpus.dialogues) {
    for (const auto& sentence : d.profile)
      for (const auto& w : sentence) ++counts[w];
    for (const Utterance& u : d.utterances)
      for (const auto& w : u.tokens) ++counts[w];
  }

  std::vector<std::pair<std::string, long long>> frequent;
  for (const auto& [tok, c] : counts) {
    if (c >= min_count && !v.contains(tok)) frequent.emplace_back(tok, c);
  }
  std::sort(frequent.begin(), frequent.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [tok, c] : frequent) v.add_token(tok);
  return v;
}

void save_vocab(const Vocab& v, const std::string& path) {
  json specials;
  const Specials& s = v.specials();
  const int special_ids[kNumSpecials] = {s.pad,   s.unk,   s.bos,        s.eos,       s.utt_sep,
                                         s.spk_a, s.spk_b, s.topic_mark, s.topic_sep, s.cls};
  for (int i = 0; i < kNumSpecials; ++i) specials[kSpecialNames[i]] = special_ids[i];

  json topics;
  for (const auto& [tid, surface] : v.topic_lexicon()) topics[std::to_string(tid)] = surface;

  std::vector<std::string> tokens;
  for (int i = 0; i < v.size(); ++i) tokens.push_back(v.token(i));

  json j{{"tokens", tokens}, {"specials", specials}, {"topics", topics}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write vocab file '" + path + "'");
  out << j.dump(1) << '\n';
}

Vocab load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocab file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("vocab '" + path + "' is not valid JSON: " + e.what());
  }

  Vocab v;
  try {
    for (const auto& t : j.at("tokens")) v.add_token(t.get<std::string>());
    const json& specials = j.at("specials");
    for (int i = 0; i < kNumSpecials; ++i) {
      int id = specials.at(kSpecialNames[i]).get<int>();
      if (id != i || v.token(id) != kSpecialSurfaces[i])
        throw DataError("vocab '" + path + "': special '" + kSpecialNames[i] +
                        "' has unexpected id or surface");
    }
    v.index_specials();
    for (const auto& [key, surface] : j.at("topics").items())
      v.topic_lexicon_[std::stoi(key)] = surface.get<std::string>();
  } catch (const json::exception& e) {
    throw DataError("vocab '" + path + "' violates the schema: " + e.what());
  }
  return v;
}

}  // namespace topicdial
