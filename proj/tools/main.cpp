#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "topicdial/error.hpp"
#include "topicdial/run.hpp"

using namespace topicdial;

int main(int argc, char** argv) {
  CLI::App app{"topicdial: joint topic prediction and two-stage dialogue response generation"};
  app.require_subcommand(1);

  GenDataConfig gen_cfg;
  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dialogue corpus");
  gen->add_option("--out", gen_cfg.out_path, "corpus JSON output path")->required();
  gen->add_option("--dialogues", gen_cfg.n_dialogues, "number of dialogues");
  gen->add_option("--turns", gen_cfg.turns, "utterances per dialogue (even)");
  gen->add_option("--vocab-size", gen_cfg.vocab_size, "distinct content words");
  gen->add_option("--topics", gen_cfg.n_topics, "number of topics");
  gen->add_option("--stickiness", gen_cfg.stickiness, "topic repeat probability");
  gen->add_option("--seed", gen_cfg.seed, "generator seed");
  gen->add_option("--mode", gen_cfg.mode, "multi-label | multi-class");

  RunConfig train_cfg;
  std::string train_config_file;
  CLI::App* train = app.add_subcommand("train", "train the joint model");
  train->add_option("--config", train_config_file, "load a serialized config.json");
  train->add_option("--corpus", train_cfg.corpus_path, "training corpus JSON");
  train->add_option("--out", train_cfg.out_dir, "run directory");
  train->add_option("--vocab", train_cfg.vocab_path, "reuse an existing vocab.json");
  train->add_option("--resume", train_cfg.resume_from, "checkpoint base to resume from");
  train->add_option("--min-count", train_cfg.min_count, "vocab frequency threshold");
  train->add_option("--d-model", train_cfg.d_model, "model width");
  train->add_option("--layers", train_cfg.n_layers, "transformer layers");
  train->add_option("--heads", train_cfg.n_heads, "attention heads");
  train->add_option("--d-ff", train_cfg.d_ff, "feed-forward width (0 = 4x d-model)");
  train->add_flag("--tie-lm-head,!--no-tie-lm-head", train_cfg.tie_lm_head,
                  "tie the LM head to the token embedding");
  train->add_option("--classifier", train_cfg.classifier, "shared-gpt | separate-bert");
  train->add_option("--max-context", train_cfg.max_context, "history budget in tokens");
  train->add_option("--max-decode", train_cfg.max_decode, "response budget in tokens");
  train->add_flag("--use-roles,!--no-roles", train_cfg.use_roles,
                  "inline speaker tokens in the history");
  train->add_option("--threshold", train_cfg.threshold, "multi-label decision threshold");
  train->add_option("--lr", train_cfg.lr, "learning rate");
  train->add_option("--warmup", train_cfg.warmup_steps, "linear warmup steps");
  train->add_option("--weight-decay", train_cfg.weight_decay, "decoupled weight decay");
  train->add_option("--batch-size", train_cfg.batch_size, "samples per step");
  train->add_option("--steps", train_cfg.steps, "optimizer steps");
  train->add_option("--checkpoint-every", train_cfg.checkpoint_every,
                    "periodic checkpoint interval (0 = final only)");
  train->add_option("--ablation", train_cfg.ablation, "full | gpt2dh | stage-one");
  train->add_option("--refine-r1", train_cfg.refine_r1,
                    "coarse tokens fed to the refine pass: argmax | gold");
  train->add_option("--refine-context", train_cfg.refine_context, "full | response-only");
  train->add_option("--seed", train_cfg.seed, "run seed");

  RunConfig eval_cfg;
  CLI::App* eval = app.add_subcommand("eval", "run the three passes over a corpus and score");
  eval->add_option("--corpus", eval_cfg.corpus_path, "evaluation corpus JSON");
  eval->add_option("--checkpoint", eval_cfg.checkpoint, "checkpoint base path")->required();
  eval->add_option("--out", eval_cfg.out_dir, "report directory")->required();
  eval->add_option("--vocab", eval_cfg.vocab_path, "vocab.json (default: next to checkpoint)");
  eval->add_option("--variant", eval_cfg.variant, "stage-one | stage-two-gpt | stage-two-bert");
  eval->add_option("--threshold", eval_cfg.threshold, "multi-label decision threshold");
  eval->add_flag("--oracle-gold", eval_cfg.oracle_gold, "score gold responses (sanity mode)");
  eval->add_option("--bucket-edges", eval_cfg.bucket_edges, "golden-length bucket edges");

  std::string rescore_generations, rescore_vocab, rescore_out;
  std::vector<int> rescore_edges{0, 10, 20, 30, 40};
  CLI::App* rescore = app.add_subcommand("rescore", "recompute a report from generations.jsonl");
  rescore->add_option("--generations", rescore_generations, "generations.jsonl")->required();
  rescore->add_option("--vocab", rescore_vocab, "vocab.json")->required();
  rescore->add_option("--out", rescore_out, "report.json output path");
  rescore->add_option("--bucket-edges", rescore_edges, "golden-length bucket edges");

  GenerateConfig gen2_cfg;
  CLI::App* generate = app.add_subcommand("generate", "respond to a history (file or stdin)");
  generate->add_option("--checkpoint", gen2_cfg.checkpoint, "checkpoint base path")->required();
  generate->add_option("--vocab", gen2_cfg.vocab_path, "vocab.json (default: next to checkpoint)");
  generate->add_option("--history", gen2_cfg.history_path, "dialogue JSON with a turns array");
  generate->add_option("--max-decode", gen2_cfg.max_decode, "override the decode budget");
  generate->add_option("--variant", gen2_cfg.variant, "stage-one | stage-two-gpt | stage-two-bert");

  std::string inspect_ckpt;
  CLI::App* inspect = app.add_subcommand("inspect", "print a checkpoint summary");
  inspect->add_option("--checkpoint", inspect_ckpt, "checkpoint base path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  return run_guarded([&]() -> int {
    if (gen->parsed()) return cmd_gen_data(gen_cfg);
    if (train->parsed()) {
      RunConfig cfg = train_cfg;
      if (!train_config_file.empty()) {
        std::ifstream in(train_config_file);
        if (!in) throw DataError("cannot open config '" + train_config_file + "'");
        nlohmann::json j;
        in >> j;
        cfg = RunConfig::from_json(j);
        // explicit flags override the loaded config
        if (!train_cfg.out_dir.empty()) cfg.out_dir = train_cfg.out_dir;
        if (!train_cfg.corpus_path.empty()) cfg.corpus_path = train_cfg.corpus_path;
        if (!train_cfg.resume_from.empty()) cfg.resume_from = train_cfg.resume_from;
      }
      return cmd_train(cfg);
    }
    if (eval->parsed()) return cmd_eval(eval_cfg);
    if (rescore->parsed())
      return cmd_rescore(rescore_generations, rescore_vocab, rescore_out, rescore_edges);
    if (generate->parsed()) return cmd_generate(gen2_cfg);
    if (inspect->parsed()) return cmd_inspect(inspect_ckpt);
    return kExitUsage;
  });
}
