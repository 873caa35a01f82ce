#include "topicdial/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "topicdial/error.hpp"
#include "topicdial/rng.hpp"

namespace topicdial {

using nlohmann::json;

std::string mode_name(Mode m) {
  return m == Mode::kMultiLabel ? "multi-label" : "multi-class";
}

Mode mode_from_name(const std::string& name) {
  if (name == "multi-label") return Mode::kMultiLabel;
  if (name == "multi-class") return Mode::kMultiClass;
  throw DataError("unknown classification mode '" + name + "'");
}

void SyntheticConfig::validate() const {
  if (n_dialogues <= 0) throw ConfigError("synthetic config: n_dialogues must be positive");
  if (turns < 2 || turns % 2 != 0)
    throw ConfigError("synthetic config: turns must be even and >= 2");
  if (n_topics <= 0) throw ConfigError("synthetic config: n_topics must be positive");
  if (vocab_size <= n_topics)
    throw ConfigError("synthetic config: vocab_size must exceed n_topics");
  if (stickiness < 0.0 || stickiness > 1.0)
    throw ConfigError("synthetic config: stickiness must lie in [0, 1]");
}

namespace {

std::string filler_word(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "w%03d", i);
  return buf;
}

std::string topic_surface(int k) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "t%02d", k);
  return buf;
}

// Gold response for a topic: a fixed filler frame around the topic surface.
// Depends only on (topic, vocab_size, n_topics) so corpora drawn with
// different seeds share the same topic -> response mapping.
std::vector<std::string> response_template(int topic, int n_topics, int vocab_size) {
  int f = vocab_size - n_topics;
  auto pick = [&](int mul, int add) { return filler_word((topic * mul + add) % f); };
  std::vector<std::string> out{pick(7, 3), pick(11, 5), topic_surface(topic), pick(13, 1)};
  if (topic % 3 >= 1) out.push_back(pick(17, 2));
  if (topic % 3 == 2) out.push_back(pick(19, 4));
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

Corpus generate_synthetic(const SyntheticConfig& cfg, Mode mode) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, 0));
  Corpus corpus;
  corpus.mode = mode;
  corpus.profiles_present = false;
  for (int k = 0; k < cfg.n_topics; ++k) corpus.topics.push_back(topic_surface(k));

  int n_fillers = cfg.vocab_size - cfg.n_topics;
  for (int d = 0; d < cfg.n_dialogues; ++d) {
    Dialogue dlg;
    int topic = static_cast<int>(rng.uniform(cfg.n_topics));
    for (int pair = 0; pair < cfg.turns / 2; ++pair) {
      if (pair > 0 && !rng.bernoulli(cfg.stickiness)) {
        topic = (topic + 1 + static_cast<int>(rng.uniform(cfg.n_topics - 1))) % cfg.n_topics;
      }
      // user turn: filler words with the topic surface dropped in once
      Utterance user;
      user.speaker = Speaker::kA;
      int n_fill = 2 + static_cast<int>(rng.uniform(3));
      int cue_pos = static_cast<int>(rng.uniform(n_fill + 1));
      for (int i = 0; i <= n_fill; ++i) {
        if (i == cue_pos)
          user.tokens.push_back(topic_surface(topic));
        else
          user.tokens.push_back(filler_word(static_cast<int>(rng.uniform(n_fillers))));
      }
      dlg.utterances.push_back(std::move(user));

      Utterance system;
      system.speaker = Speaker::kB;
      system.tokens = response_template(topic, cfg.n_topics, cfg.vocab_size);
      system.topics = {topic};
      dlg.utterances.push_back(std::move(system));
    }
    corpus.dialogues.push_back(std::move(dlg));
  }
  return corpus;
}

void validate_corpus(const Corpus& corpus) {
  int n_topics = static_cast<int>(corpus.topics.size());
  for (std::size_t di = 0; di < corpus.dialogues.size(); ++di) {
    const Dialogue& d = corpus.dialogues[di];
    std::string where = "dialogue " + std::to_string(di);
    if (d.utterances.size() < 2)
      throw DataError(where + ": needs at least 2 turns");
    if (d.utterances.back().speaker != Speaker::kB)
      throw DataError(where + ": last turn must be a system (B) turn");
    for (std::size_t ui = 0; ui < d.utterances.size(); ++ui) {
      const Utterance& u = d.utterances[ui];
      std::string turn = where + ", turn " + std::to_string(ui);
      if (u.tokens.empty()) throw DataError(turn + ": empty text");
      for (int t : u.topics) {
        if (t < 0 || t >= n_topics)
          throw DataError(turn + ": topic index " + std::to_string(t) +
                          " not in the header topic list");
      }
      if (corpus.mode == Mode::kMultiClass && u.topics.size() > 1)
        throw DataError(turn + ": multi-class corpus allows at most one topic per turn");
    }
    for (const auto& sentence : d.profile) {
      if (sentence.empty()) throw DataError(where + ": empty profile sentence");
    }
  }
}

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError("corpus '" + path + "' is not valid JSON: " + e.what());
  }

  Corpus corpus;
  try {
    corpus.mode = mode_from_name(j.at("mode").get<std::string>());
    corpus.topics = j.at("topics").get<std::vector<std::string>>();
    corpus.profiles_present = j.value("profiles_present", false);
    for (const auto& dj : j.at("dialogues")) {
      Dialogue d;
      if (dj.contains("profile")) {
        for (const auto& s : dj.at("profile"))
          d.profile.push_back(tokenize(s.get<std::string>()));
      }
      for (const auto& tj : dj.at("turns")) {
        Utterance u;
        std::string spk = tj.at("speaker").get<std::string>();
        if (spk == "A")
          u.speaker = Speaker::kA;
        else if (spk == "B")
          u.speaker = Speaker::kB;
        else
          throw DataError("dialogue " + std::to_string(corpus.dialogues.size()) +
                          ": speaker must be \"A\" or \"B\"");
        if (tj.contains("tokens"))  // pre-tokenized hook for real corpora
          u.tokens = tj.at("tokens").get<std::vector<std::string>>();
        else
          u.tokens = tokenize(tj.at("text").get<std::string>());
        if (tj.contains("topics")) u.topics = tj.at("topics").get<std::vector<int>>();
        std::sort(u.topics.begin(), u.topics.end());
        u.topics.erase(std::unique(u.topics.begin(), u.topics.end()), u.topics.end());
        d.utterances.push_back(std::move(u));
      }
      corpus.dialogues.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw DataError("corpus '" + path + "' violates the schema: " + e.what());
  }
  validate_corpus(corpus);
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  json dialogues = json::array();
  for (const Dialogue& d : corpus.dialogues) {
    json dj;
    if (!d.profile.empty()) {
      json profile = json::array();
      for (const auto& sentence : d.profile) profile.push_back(join(sentence));
      dj["profile"] = profile;
    }
    json turns = json::array();
    for (const Utterance& u : d.utterances) {
      turns.push_back({{"speaker", u.speaker == Speaker::kA ? "A" : "B"},
                       {"text", join(u.tokens)},
                       {"topics", u.topics}});
    }
    dj["turns"] = turns;
    dialogues.push_back(std::move(dj));
  }
  json j{{"mode", mode_name(corpus.mode)},
         {"topics", corpus.topics},
         {"profiles_present", corpus.profiles_present},
         {"dialogues", dialogues}};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file '" + path + "'");
  out << j.dump(1) << '\n';
}

CorpusStats corpus_stats(const Corpus& corpus) {
  CorpusStats s;
  s.mode = corpus.mode;
  s.dialogues = static_cast<long long>(corpus.dialogues.size());
  s.topics = static_cast<long long>(corpus.topics.size());
  for (const Dialogue& d : corpus.dialogues)
    s.utterances += static_cast<long long>(d.utterances.size());
  return s;
}

}  // namespace topicdial
