#include "topicdial/run.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "topicdial/checkpoint.hpp"
#include "topicdial/error.hpp"
#include "topicdial/metrics.hpp"
#include "topicdial/objective.hpp"
#include "topicdial/pipeline.hpp"
#include "topicdial/rng.hpp"
#include "topicdial/samples.hpp"
#include "topicdial/vocab.hpp"

namespace topicdial {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::uint64_t kStreamLmInit = 1;
constexpr std::uint64_t kStreamClsInit = 2;
constexpr std::uint64_t kStreamBatch = 0xba7c4;

json model_cfg_to_json(const ModelConfig& c) {
  return json{{"d_model", c.d_model},
              {"n_layers", c.n_layers},
              {"n_heads", c.n_heads},
              {"d_ff", c.d_ff},
              {"vocab_size", c.vocab_size},
              {"n_topics", c.n_topics},
              {"max_positions", c.max_positions},
              {"attention_mode", c.attention_mode == AttentionMode::kCausal ? "causal"
                                                                            : "bidirectional"},
              {"cls_pool", c.cls_pool == ClsPool::kFirstToken ? "first_token" : "last_token"},
              {"tie_lm_head", c.tie_lm_head},
              {"pad_id", c.pad_id}};
}

ModelConfig model_cfg_from_json(const json& j) {
  ModelConfig c;
  c.d_model = j.at("d_model").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.n_heads = j.at("n_heads").get<int>();
  c.d_ff = j.at("d_ff").get<int>();
  c.vocab_size = j.at("vocab_size").get<int>();
  c.n_topics = j.at("n_topics").get<int>();
  c.max_positions = j.at("max_positions").get<int>();
  c.attention_mode = j.at("attention_mode").get<std::string>() == "causal"
                         ? AttentionMode::kCausal
                         : AttentionMode::kBidirectional;
  c.cls_pool = j.at("cls_pool").get<std::string>() == "first_token" ? ClsPool::kFirstToken
                                                                    : ClsPool::kLastToken;
  c.tie_lm_head = j.at("tie_lm_head").get<bool>();
  c.pad_id = j.at("pad_id").get<int>();
  return c;
}

Ablation ablation_from_name(const std::string& s) {
  if (s == "full") return Ablation::kFull;
  if (s == "gpt2dh") return Ablation::kGpt2dh;
  if (s == "stage-one") return Ablation::kStageOneOnly;
  throw ConfigError("unknown ablation '" + s + "' (full | gpt2dh | stage-one)");
}

ClassifierKind classifier_from_name(const std::string& s) {
  if (s == "shared-gpt") return ClassifierKind::kSharedGpt;
  if (s == "separate-bert") return ClassifierKind::kSeparateBert;
  throw ConfigError("unknown classifier '" + s + "' (shared-gpt | separate-bert)");
}

RefineR1Source refine_r1_from_name(const std::string& s) {
  if (s == "argmax") return RefineR1Source::kArgmaxTeacherForced;
  if (s == "gold") return RefineR1Source::kGold;
  throw ConfigError("unknown refine-r1 source '" + s + "' (argmax | gold)");
}

RefineContext refine_context_from_name(const std::string& s) {
  if (s == "full") return RefineContext::kFull;
  if (s == "response-only") return RefineContext::kResponseOnly;
  throw ConfigError("unknown refine-context '" + s + "' (full | response-only)");
}

Variant variant_from_name(const std::string& s) {
  if (s == "stage-one") return Variant::kStageOne;
  if (s == "stage-two-gpt") return Variant::kStageTwoGpt;
  if (s == "stage-two-bert") return Variant::kStageTwoBert;
  throw ConfigError("unknown variant '" + s + "' (stage-one | stage-two-gpt | stage-two-bert)");
}

std::string join_tokens(const std::vector<std::string>& toks) {
  std::string out;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    if (i) out += ' ';
    out += toks[i];
  }
  return out;
}

// decoded text of a generated id sequence with the trailing EOS removed
std::vector<std::string> response_tokens(const std::vector<int>& ids, const Vocab& v) {
  std::vector<int> trimmed = ids;
  while (!trimmed.empty() && trimmed.back() == v.specials().eos) trimmed.pop_back();
  return v.decode(trimmed);
}

std::vector<std::string> topic_surfaces(const std::vector<int>& topic_ids, const Vocab& v) {
  std::vector<std::string> out;
  for (int t : topic_ids) out.push_back(v.topic_lexicon().at(t));
  return out;
}

struct LoadedModel {
  JointModel model;
  json meta;
  long step = 0;
  RunConfig run;
};

void fill_opt_from_checkpoint(const TensorMap& tensors, const std::string& ns, OptState& opt) {
  for (auto& [name, t] : opt.m) {
    auto it = tensors.find(ns + "/m/" + name);
    if (it == tensors.end() || !it->second.same_shape(t))
      throw DataError("checkpoint is missing optimizer moment '" + ns + "/m/" + name + "'");
    t = it->second;
  }
  for (auto& [name, t] : opt.v) {
    auto it = tensors.find(ns + "/v/" + name);
    if (it == tensors.end() || !it->second.same_shape(t))
      throw DataError("checkpoint is missing optimizer moment '" + ns + "/v/" + name + "'");
    t = it->second;
  }
}

Params params_from_checkpoint(const TensorMap& tensors, const std::string& ns,
                              const ModelConfig& cfg) {
  Params p;
  Params expected = init_params(cfg, 0);
  for (const auto& [name, t] : expected) {
    auto it = tensors.find(ns + "/" + name);
    if (it == tensors.end() || !it->second.same_shape(t))
      throw DataError("checkpoint tensor '" + ns + "/" + name + "' missing or mis-shaped");
    p.emplace(name, it->second);
  }
  return p;
}

LoadedModel load_model(const std::string& checkpoint_base) {
  Checkpoint ckpt = load_checkpoint(checkpoint_base);
  LoadedModel lm;
  lm.meta = ckpt.meta;
  lm.step = ckpt.meta.value("step", 0L);
  lm.run = RunConfig::from_json(ckpt.meta.at("run_config"));
  lm.model.lm_cfg = model_cfg_from_json(ckpt.meta.at("lm_config"));
  lm.model.lm = params_from_checkpoint(ckpt.tensors, "lm", lm.model.lm_cfg);
  lm.model.classifier = classifier_from_name(lm.run.classifier);
  if (lm.model.has_separate_cls()) {
    lm.model.cls_cfg = model_cfg_from_json(ckpt.meta.at("cls_config"));
    lm.model.cls = params_from_checkpoint(ckpt.tensors, "cls", lm.model.cls_cfg);
  }
  return lm;
}

void save_training_checkpoint(const std::string& base, const RunConfig& cfg,
                              const JointModel& model, const Trainer& trainer, long step,
                              Mode mode, const Vocab& vocab,
                              OptState& opt_lm, OptState& opt_cls) {
  Checkpoint ckpt;
  ckpt.meta["run_config"] = cfg.to_json();
  ckpt.meta["lm_config"] = model_cfg_to_json(model.lm_cfg);
  if (model.has_separate_cls()) ckpt.meta["cls_config"] = model_cfg_to_json(model.cls_cfg);
  ckpt.meta["step"] = step;
  ckpt.meta["mode"] = mode_name(mode);
  ckpt.meta["n_topics"] = static_cast<int>(vocab.topic_lexicon().size());
  ckpt.meta["vocab_size"] = vocab.size();

  for (const auto& [name, t] : model.lm) ckpt.tensors.emplace("lm/" + name, t);
  for (const auto& [name, t] : opt_lm.m) ckpt.tensors.emplace("opt_lm/m/" + name, t);
  for (const auto& [name, t] : opt_lm.v) ckpt.tensors.emplace("opt_lm/v/" + name, t);
  if (model.has_separate_cls()) {
    for (const auto& [name, t] : model.cls) ckpt.tensors.emplace("cls/" + name, t);
    for (const auto& [name, t] : opt_cls.m) ckpt.tensors.emplace("opt_cls/m/" + name, t);
    for (const auto& [name, t] : opt_cls.v) ckpt.tensors.emplace("opt_cls/v/" + name, t);
  }
  (void)trainer;
  save_checkpoint(ckpt, base);
}

std::vector<TrainingSample> all_samples(const Corpus& corpus, const Vocab& vocab,
                                        const SampleConfig& scfg) {
  std::vector<TrainingSample> samples;
  for (const Dialogue& d : corpus.dialogues) {
    auto s = build_samples(d, vocab, scfg);
    samples.insert(samples.end(), s.begin(), s.end());
  }
  return samples;
}

}  // namespace

json RunConfig::to_json() const {
  return json{{"corpus_path", corpus_path},
              {"out_dir", out_dir},
              {"vocab_path", vocab_path},
              {"resume_from", resume_from},
              {"min_count", min_count},
              {"d_model", d_model},
              {"n_layers", n_layers},
              {"n_heads", n_heads},
              {"d_ff", d_ff},
              {"tie_lm_head", tie_lm_head},
              {"classifier", classifier},
              {"max_context", max_context},
              {"max_decode", max_decode},
              {"use_roles", use_roles},
              {"threshold", threshold},
              {"lr", lr},
              {"warmup_steps", warmup_steps},
              {"weight_decay", weight_decay},
              {"beta1", beta1},
              {"beta2", beta2},
              {"adam_eps", adam_eps},
              {"batch_size", batch_size},
              {"steps", steps},
              {"checkpoint_every", checkpoint_every},
              {"ablation", ablation},
              {"refine_r1", refine_r1},
              {"refine_context", refine_context},
              {"seed", seed},
              {"checkpoint", checkpoint},
              {"variant", variant},
              {"oracle_gold", oracle_gold},
              {"bucket_edges", bucket_edges}};
}

RunConfig RunConfig::from_json(const json& j) {
  RunConfig c;
  c.corpus_path = j.value("corpus_path", c.corpus_path);
  c.out_dir = j.value("out_dir", c.out_dir);
  c.vocab_path = j.value("vocab_path", c.vocab_path);
  c.resume_from = j.value("resume_from", c.resume_from);
  c.min_count = j.value("min_count", c.min_count);
  c.d_model = j.value("d_model", c.d_model);
  c.n_layers = j.value("n_layers", c.n_layers);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.d_ff = j.value("d_ff", c.d_ff);
  c.tie_lm_head = j.value("tie_lm_head", c.tie_lm_head);
  c.classifier = j.value("classifier", c.classifier);
  c.max_context = j.value("max_context", c.max_context);
  c.max_decode = j.value("max_decode", c.max_decode);
  c.use_roles = j.value("use_roles", c.use_roles);
  c.threshold = j.value("threshold", c.threshold);
  c.lr = j.value("lr", c.lr);
  c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.steps = j.value("steps", c.steps);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.ablation = j.value("ablation", c.ablation);
  c.refine_r1 = j.value("refine_r1", c.refine_r1);
  c.refine_context = j.value("refine_context", c.refine_context);
  c.seed = j.value("seed", c.seed);
  c.checkpoint = j.value("checkpoint", c.checkpoint);
  c.variant = j.value("variant", c.variant);
  c.oracle_gold = j.value("oracle_gold", c.oracle_gold);
  c.bucket_edges = j.value("bucket_edges", c.bucket_edges);
  return c;
}

int cmd_gen_data(const GenDataConfig& cfg) {
  if (cfg.out_path.empty()) throw ConfigError("gen-data: an output path is required");
  SyntheticConfig scfg;
  scfg.n_dialogues = cfg.n_dialogues;
  scfg.turns = cfg.turns;
  scfg.vocab_size = cfg.vocab_size;
  scfg.n_topics = cfg.n_topics;
  scfg.stickiness = cfg.stickiness;
  scfg.seed = cfg.seed;
  Corpus corpus = generate_synthetic(scfg, mode_from_name(cfg.mode));
  save_corpus(corpus, cfg.out_path);

  CorpusStats stats = corpus_stats(corpus);
  json stats_json{{"dialogues", stats.dialogues},
                  {"utterances", stats.utterances},
                  {"topics", stats.topics},
                  {"mode", mode_name(stats.mode)}};
  std::ofstream sout(cfg.out_path + ".stats.json");
  if (!sout) throw DataError("cannot write stats file next to '" + cfg.out_path + "'");
  sout << stats_json.dump(1) << '\n';

  std::cout << "wrote " << cfg.out_path << ": " << stats.dialogues << " dialogues, "
            << stats.utterances << " utterances, " << stats.topics << " topics, "
            << mode_name(stats.mode) << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  if (cfg.corpus_path.empty()) throw ConfigError("train: --corpus is required");
  if (cfg.out_dir.empty()) throw ConfigError("train: --out is required");
  if (cfg.d_ff == 0) cfg.d_ff = 4 * cfg.d_model;
  if (cfg.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  if (cfg.steps < 1) throw ConfigError("train: steps must be >= 1");

  fs::create_directories(cfg.out_dir);
  {
    std::ofstream cout_json(fs::path(cfg.out_dir) / "config.json");
    if (!cout_json) throw DataError("cannot write config.json under '" + cfg.out_dir + "'");
    cout_json << cfg.to_json().dump(1) << '\n';
  }

  Corpus corpus = load_corpus(cfg.corpus_path);
  const Mode mode = corpus.mode;
  const int n_topics = static_cast<int>(corpus.topics.size());

  Vocab vocab = cfg.vocab_path.empty() ? build_vocab(corpus, cfg.min_count)
                                       : load_vocab(cfg.vocab_path);
  save_vocab(vocab, (fs::path(cfg.out_dir) / "vocab.json").string());

  SampleConfig scfg{cfg.max_context, cfg.max_decode, cfg.use_roles};
  std::vector<TrainingSample> samples = all_samples(corpus, vocab, scfg);
  if (samples.empty()) throw DataError("train: corpus yields no training samples");

  const int head = cls_head_width(mode, n_topics);
  JointModel model;
  model.classifier = classifier_from_name(cfg.classifier);
  model.lm_cfg.d_model = cfg.d_model;
  model.lm_cfg.n_layers = cfg.n_layers;
  model.lm_cfg.n_heads = cfg.n_heads;
  model.lm_cfg.d_ff = cfg.d_ff;
  model.lm_cfg.vocab_size = vocab.size();
  model.lm_cfg.n_topics = model.classifier == ClassifierKind::kSharedGpt ? head : 0;
  model.lm_cfg.max_positions = cfg.max_context + 2 * cfg.max_decode + 8;
  model.lm_cfg.attention_mode = AttentionMode::kCausal;
  model.lm_cfg.cls_pool = ClsPool::kLastToken;
  model.lm_cfg.tie_lm_head = cfg.tie_lm_head;
  model.lm_cfg.pad_id = vocab.specials().pad;
  model.lm = init_params(model.lm_cfg, mix_seed(cfg.seed, kStreamLmInit));
  if (model.has_separate_cls()) {
    model.cls_cfg = model.lm_cfg;
    model.cls_cfg.n_topics = head;
    model.cls_cfg.attention_mode = AttentionMode::kBidirectional;
    model.cls_cfg.cls_pool = ClsPool::kFirstToken;
    model.cls_cfg.tie_lm_head = cfg.tie_lm_head;
    model.cls = init_params(model.cls_cfg, mix_seed(cfg.seed, kStreamClsInit));
  }

  TrainConfig tcfg;
  tcfg.ablation = ablation_from_name(cfg.ablation);
  tcfg.refine_r1 = refine_r1_from_name(cfg.refine_r1);
  tcfg.refine_context = refine_context_from_name(cfg.refine_context);
  tcfg.mode = mode;
  tcfg.n_topics = n_topics;
  tcfg.max_refine_len = cfg.max_context + cfg.max_decode;

  OptConfig ocfg;
  ocfg.lr = cfg.lr;
  ocfg.beta1 = cfg.beta1;
  ocfg.beta2 = cfg.beta2;
  ocfg.eps = cfg.adam_eps;
  ocfg.weight_decay = cfg.weight_decay;
  ocfg.warmup_steps = cfg.warmup_steps;

  Trainer trainer(&model, &vocab, tcfg, ocfg);

  long start_step = 0;
  if (!cfg.resume_from.empty()) {
    LoadedModel restored = load_model(cfg.resume_from);
    if (restored.meta.value("mode", "") != mode_name(mode) ||
        restored.meta.value("n_topics", -1) != n_topics ||
        restored.meta.value("vocab_size", -1) != vocab.size())
      throw ConfigError("resume checkpoint disagrees with the corpus (mode/topics/vocab)");
    if (restored.model.lm_cfg.d_model != model.lm_cfg.d_model ||
        restored.model.lm_cfg.n_layers != model.lm_cfg.n_layers ||
        restored.model.lm_cfg.vocab_size != model.lm_cfg.vocab_size ||
        restored.model.lm_cfg.n_topics != model.lm_cfg.n_topics)
      throw ConfigError("resume checkpoint was written for a different model config");
    model.lm = std::move(restored.model.lm);
    if (model.has_separate_cls()) model.cls = std::move(restored.model.cls);

    Checkpoint ckpt = load_checkpoint(cfg.resume_from);
    fill_opt_from_checkpoint(ckpt.tensors, "opt_lm", trainer.opt_lm());
    trainer.opt_lm().step = restored.step;
    if (model.has_separate_cls()) {
      fill_opt_from_checkpoint(ckpt.tensors, "opt_cls", trainer.opt_cls());
      trainer.opt_cls().step = restored.step;
    }
    start_step = restored.step;
  }

  std::ofstream log(fs::path(cfg.out_dir) / "train_log.jsonl");
  if (!log) throw DataError("cannot write train_log.jsonl under '" + cfg.out_dir + "'");

  for (long step = start_step + 1; step <= cfg.steps; ++step) {
    Rng batch_rng(mix_seed(cfg.seed, kStreamBatch + static_cast<std::uint64_t>(step)));
    std::vector<TrainingSample> batch;
    for (int b = 0; b < cfg.batch_size; ++b)
      batch.push_back(samples[batch_rng.uniform(samples.size())]);

    LossBreakdown lb = trainer.train_step(batch);
    json line{{"step", step},        {"l_one", lb.l_one},       {"l_topic", lb.l_topic},
              {"l_refine", lb.l_refine}, {"l_total", lb.l_total},
              {"lr", lr_at_step(ocfg, step)}};
    log << line.dump() << '\n';

    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step < cfg.steps) {
      char name[64];
      std::snprintf(name, sizeof(name), "checkpoint-%06ld", step);
      save_training_checkpoint((fs::path(cfg.out_dir) / name).string(), cfg, model, trainer,
                               step, mode, vocab, trainer.opt_lm(), trainer.opt_cls());
    }
  }

  save_training_checkpoint((fs::path(cfg.out_dir) / "checkpoint-final").string(), cfg, model,
                           trainer, cfg.steps, mode, vocab, trainer.opt_lm(),
                           trainer.opt_cls());
  std::cout << "trained " << (cfg.steps - start_step) << " steps; checkpoint-final written to "
            << cfg.out_dir << "\n";
  return kExitOk;
}

namespace {

struct EvalRow {
  EvalSample sample;
  json line;
};

}  // namespace

int cmd_eval(const RunConfig& cfg) {
  if (cfg.corpus_path.empty()) throw ConfigError("eval: --corpus is required");
  if (cfg.checkpoint.empty()) throw ConfigError("eval: --checkpoint is required");
  if (cfg.out_dir.empty()) throw ConfigError("eval: --out is required");

  LoadedModel lm = load_model(cfg.checkpoint);
  Corpus corpus = load_corpus(cfg.corpus_path);
  if (lm.meta.value("mode", "") != mode_name(corpus.mode))
    throw ConfigError("eval: checkpoint was trained for mode " + lm.meta.value("mode", "?") +
                      " but the corpus is " + mode_name(corpus.mode));
  if (lm.meta.value("n_topics", -1) != static_cast<int>(corpus.topics.size()))
    throw ConfigError("eval: checkpoint topic count disagrees with the corpus header");

  std::string vocab_path = cfg.vocab_path.empty()
                               ? (fs::path(cfg.checkpoint).parent_path() / "vocab.json").string()
                               : cfg.vocab_path;
  Vocab vocab = load_vocab(vocab_path);
  if (vocab.size() != lm.model.lm_cfg.vocab_size)
    throw ConfigError("eval: vocab size disagrees with the checkpoint");

  const Variant variant = variant_from_name(cfg.variant);
  const Mode mode = corpus.mode;
  const int n_topics = static_cast<int>(corpus.topics.size());

  SampleConfig scfg{lm.run.max_context, lm.run.max_decode, lm.run.use_roles};
  PipelineConfig pcfg;
  pcfg.decode.max_decode = lm.run.max_decode;
  pcfg.decode.threshold = cfg.threshold;
  pcfg.mode = mode;
  pcfg.n_topics = n_topics;
  pcfg.refine_context = refine_context_from_name(lm.run.refine_context);
  pcfg.max_refine_len = lm.run.max_context + lm.run.max_decode;

  fs::create_directories(cfg.out_dir);
  std::ofstream gen_out(fs::path(cfg.out_dir) / "generations.jsonl");
  if (!gen_out) throw DataError("cannot write generations.jsonl under '" + cfg.out_dir + "'");

  std::vector<EvalSample> eval_samples;
  for (std::size_t di = 0; di < corpus.dialogues.size(); ++di) {
    for (const TrainingSample& s : build_samples(corpus.dialogues[di], vocab, scfg)) {
      ThreePassOutput out = three_pass(lm.model, s.history_ids, vocab, pcfg, variant);

      EvalSample es;
      es.gold = response_tokens(s.response_ids, vocab);
      es.gold_topics = s.topic_ids;
      es.predicted_topics = out.topic.topics;
      if (mode == Mode::kMultiClass && variant != Variant::kStageOne) {
        es.topic_scores = out.topic.scores;
        es.gold_class = class_label(s, n_topics);
      }
      std::vector<std::string> scored =
          variant == Variant::kStageOne ? response_tokens(out.coarse_ids, vocab)
                                        : response_tokens(out.refined_ids, vocab);
      es.generated = cfg.oracle_gold ? es.gold : scored;

      json line{{"sample_id", "d" + std::to_string(di) + ":t" + std::to_string(s.turn_index)},
                {"coarse", join_tokens(response_tokens(out.coarse_ids, vocab))},
                {"topics", topic_surfaces(out.topic.topics, vocab)},
                {"refined", variant == Variant::kStageOne
                                ? ""
                                : join_tokens(cfg.oracle_gold
                                                  ? es.gold
                                                  : response_tokens(out.refined_ids, vocab))},
                {"gold_response", join_tokens(es.gold)},
                {"gold_topics", topic_surfaces(s.topic_ids, vocab)}};
      gen_out << line.dump() << '\n';
      eval_samples.push_back(std::move(es));
    }
  }

  std::vector<int> hit_ks{1, 3, 5};
  MetricsReport report =
      compute_report(eval_samples, mode, vocab.topic_lexicon(), cfg.bucket_edges, hit_ks);
  if (variant == Variant::kStageOne) {
    report.has_pred_prf = false;
    report.has_hits = false;
  }

  std::ofstream(fs::path(cfg.out_dir) / "report.json") << report_json(report) << '\n';
  std::ofstream(fs::path(cfg.out_dir) / "report.txt") << report_text(report);
  std::cout << report_text(report);
  return kExitOk;
}

int cmd_rescore(const std::string& generations_path, const std::string& vocab_path,
                const std::string& report_out, const std::vector<int>& bucket_edges) {
  if (generations_path.empty() || vocab_path.empty())
    throw ConfigError("rescore: --generations and --vocab are required");
  Vocab vocab = load_vocab(vocab_path);

  std::map<std::string, int> surface_to_id;
  for (const auto& [tid, surface] : vocab.topic_lexicon()) surface_to_id.emplace(surface, tid);
  auto to_ids = [&](const std::vector<std::string>& surfaces) {
    std::vector<int> ids;
    for (const auto& s : surfaces) {
      auto it = surface_to_id.find(s);
      if (it == surface_to_id.end())
        throw DataError("rescore: topic surface '" + s + "' not in the lexicon");
      ids.push_back(it->second);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
  };

  std::ifstream in(generations_path);
  if (!in) throw DataError("rescore: cannot open '" + generations_path + "'");
  std::vector<EvalSample> samples;
  std::string raw;
  while (std::getline(in, raw)) {
    if (raw.empty()) continue;
    json line = json::parse(raw);
    EvalSample es;
    std::string refined = line.value("refined", "");
    std::string scored = refined.empty() ? line.value("coarse", "") : refined;
    std::istringstream ss(scored);
    std::string tok;
    while (ss >> tok) es.generated.push_back(tok);
    std::istringstream gs(line.value("gold_response", ""));
    while (gs >> tok) es.gold.push_back(tok);
    es.gold_topics = to_ids(line.value("gold_topics", std::vector<std::string>{}));
    es.predicted_topics = to_ids(line.value("topics", std::vector<std::string>{}));
    samples.push_back(std::move(es));
  }

  MetricsReport report = compute_report(samples, Mode::kMultiLabel, vocab.topic_lexicon(),
                                        bucket_edges, {1, 3, 5});
  if (!report_out.empty()) std::ofstream(report_out) << report_json(report) << '\n';
  std::cout << report_text(report);
  return kExitOk;
}

int cmd_generate(const GenerateConfig& cfg) {
  if (cfg.checkpoint.empty()) throw ConfigError("generate: --checkpoint is required");
  LoadedModel lm = load_model(cfg.checkpoint);
  std::string vocab_path = cfg.vocab_path.empty()
                               ? (fs::path(cfg.checkpoint).parent_path() / "vocab.json").string()
                               : cfg.vocab_path;
  Vocab vocab = load_vocab(vocab_path);

  const Mode mode = mode_from_name(lm.meta.value("mode", "multi-label"));
  const int n_topics = lm.meta.value("n_topics", 0);
  SampleConfig scfg{lm.run.max_context, lm.run.max_decode, lm.run.use_roles};
  PipelineConfig pcfg;
  pcfg.decode.max_decode = cfg.max_decode > 0 ? cfg.max_decode : lm.run.max_decode;
  pcfg.decode.threshold = lm.run.threshold;
  pcfg.mode = mode;
  pcfg.n_topics = n_topics;
  pcfg.refine_context = refine_context_from_name(lm.run.refine_context);
  pcfg.max_refine_len = lm.run.max_context + lm.run.max_decode;
  const Variant variant = variant_from_name(cfg.variant);

  auto respond = [&](const Dialogue& d) {
    std::vector<int> history = serialize_history(d, d.utterances.size(), vocab, scfg);
    ThreePassOutput out = three_pass(lm.model, history, vocab, pcfg, variant);
    std::cout << "coarse : " << join_tokens(response_tokens(out.coarse_ids, vocab)) << "\n";
    std::cout << "topics : " << join_tokens(topic_surfaces(out.topic.topics, vocab)) << "\n";
    std::cout << "refined: " << join_tokens(response_tokens(out.refined_ids, vocab)) << "\n";
    return out;
  };

  if (!cfg.history_path.empty()) {
    std::ifstream in(cfg.history_path);
    if (!in) throw DataError("generate: cannot open history '" + cfg.history_path + "'");
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw DataError("generate: history is not valid JSON: " + std::string(e.what()));
    }
    Dialogue d;
    for (const auto& tj : j.at("turns")) {
      Utterance u;
      u.speaker = tj.at("speaker").get<std::string>() == "A" ? Speaker::kA : Speaker::kB;
      std::istringstream ss(tj.at("text").get<std::string>());
      std::string tok;
      while (ss >> tok) u.tokens.push_back(tok);
      if (tj.contains("topics")) u.topics = tj.at("topics").get<std::vector<int>>();
      d.utterances.push_back(std::move(u));
    }
    respond(d);
    return kExitOk;
  }

  // minimal REPL: each stdin line is one user turn
  Dialogue d;
  std::string line;
  while (std::getline(std::cin, line)) {
    Utterance u;
    u.speaker = Speaker::kA;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) u.tokens.push_back(tok);
    if (u.tokens.empty()) continue;
    d.utterances.push_back(std::move(u));
    ThreePassOutput out = respond(d);
    Utterance reply;
    reply.speaker = Speaker::kB;
    reply.tokens = response_tokens(out.refined_ids.empty() ? out.coarse_ids : out.refined_ids,
                                   vocab);
    if (reply.tokens.empty()) reply.tokens.push_back(vocab.token(vocab.specials().eos));
    reply.topics = out.topic.topics;
    d.utterances.push_back(std::move(reply));
  }
  return kExitOk;
}

int cmd_inspect(const std::string& checkpoint_base) {
  if (checkpoint_base.empty()) throw ConfigError("inspect: --checkpoint is required");
  Checkpoint ckpt = load_checkpoint(checkpoint_base);
  std::size_t total = 0;
  for (const auto& [name, t] : ckpt.tensors) total += t.size();
  std::cout << "checkpoint " << checkpoint_base << "\n";
  std::cout << "  tensors : " << ckpt.tensors.size() << "\n";
  std::cout << "  scalars : " << total << "\n";
  std::cout << "  step    : " << ckpt.meta.value("step", 0L) << "\n";
  std::cout << "  mode    : " << ckpt.meta.value("mode", std::string("?")) << "\n";
  std::cout << "  meta    : " << ckpt.meta.dump(1) << "\n";
  return kExitOk;
}

int run_guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace topicdial
