#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "topicdial/corpus.hpp"

namespace topicdial {

// Exit codes shared by every command.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

struct GenDataConfig {
  std::string out_path;
  int n_dialogues = 32;
  int turns = 4;
  int vocab_size = 64;
  int n_topics = 8;
  double stickiness = 0.7;
  std::uint64_t seed = 0;
  std::string mode = "multi-label";
};

// Everything a training or evaluation run depends on. Serialized to
// config.json in the run directory before any computation; reloading it
// reproduces the run bit-for-bit.
struct RunConfig {
  // data
  std::string corpus_path;
  std::string out_dir;
  std::string vocab_path;    // optional explicit vocab (defaults to rebuilding)
  std::string resume_from;   // checkpoint base to resume training from
  int min_count = 1;

  // model
  int d_model = 64;
  int n_layers = 4;
  int n_heads = 4;
  int d_ff = 0;  // 0 -> 4 * d_model
  bool tie_lm_head = true;
  std::string classifier = "shared-gpt";  // or "separate-bert"

  // context / decoding
  int max_context = 500;
  int max_decode = 50;
  bool use_roles = true;
  double threshold = 0.5;

  // optimization
  double lr = 1.5e-4;
  int warmup_steps = 2000;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 4;
  long steps = 1000;
  int checkpoint_every = 0;  // 0 -> final checkpoint only

  // variants
  std::string ablation = "full";          // full | gpt2dh | stage-one
  std::string refine_r1 = "argmax";       // argmax | gold
  std::string refine_context = "full";    // full | response-only
  std::uint64_t seed = 1;

  // evaluation
  std::string checkpoint;  // checkpoint base for eval/generate
  std::string variant = "stage-two-gpt";  // stage-one | stage-two-gpt | stage-two-bert
  bool oracle_gold = false;
  std::vector<int> bucket_edges{0, 10, 20, 30, 40};

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
};

struct GenerateConfig {
  std::string checkpoint;
  std::string vocab_path;
  std::string history_path;  // dialogue JSON; empty -> interactive stdin turns
  int max_decode = 0;        // 0 -> value stored in the checkpoint config
  std::string variant = "stage-two-gpt";
};

int cmd_gen_data(const GenDataConfig& cfg);
int cmd_train(const RunConfig& cfg);
int cmd_eval(const RunConfig& cfg);
// Recompute report.json from an existing generations.jsonl and compare.
int cmd_rescore(const std::string& generations_path, const std::string& vocab_path,
                const std::string& report_out, const std::vector<int>& bucket_edges);
int cmd_generate(const GenerateConfig& cfg);
int cmd_inspect(const std::string& checkpoint_base);

// Runs fn, mapping thrown errors onto exit codes and printing the message
// to stderr.
int run_guarded(const std::function<int()>& fn);

}  // namespace topicdial
