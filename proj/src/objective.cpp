#include "topicdial/objective.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "topicdial/error.hpp"

namespace topicdial {

namespace {

double stable_sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

// -[y log sigma(z) + (1-y) log(1 - sigma(z))] without overflow
double bce_with_logit(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

}  // namespace

OptState make_opt_state(const Params& p, const OptConfig& hp) {
  OptState s;
  s.hp = hp;
  s.m = zero_grads_like(p);
  s.v = zero_grads_like(p);
  s.step = 0;
  return s;
}

double lr_at_step(const OptConfig& hp, long step) {
  if (hp.warmup_steps <= 0) return hp.lr;
  double frac = static_cast<double>(step) / static_cast<double>(hp.warmup_steps);
  return hp.lr * std::min(1.0, frac);
}

void adamw_step(Params& p, const TensorMap& grads, OptState& opt) {
  opt.step += 1;
  const double lr = lr_at_step(opt.hp, opt.step);
  const double bc1 = 1.0 - std::pow(opt.hp.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.hp.beta2, static_cast<double>(opt.step));
  for (auto& [name, param] : p) {
    auto git = grads.find(name);
    if (git == grads.end() || !git->second.same_shape(param))
      throw ContractError("adamw_step: gradient missing or mis-shaped for '" + name + "'");
    Tensor& m = opt.m.at(name);
    Tensor& v = opt.v.at(name);
    const bool decay = opt.hp.weight_decay > 0.0 && !is_decay_exempt(name);
    const double* g = git->second.data.data();
    double* pp = param.data.data();
    double* mp = m.data.data();
    double* vp = v.data.data();
    const std::size_t n = param.size();
    for (std::size_t i = 0; i < n; ++i) {
      mp[i] = opt.hp.beta1 * mp[i] + (1.0 - opt.hp.beta1) * g[i];
      vp[i] = opt.hp.beta2 * vp[i] + (1.0 - opt.hp.beta2) * g[i] * g[i];
      const double mhat = mp[i] / bc1;
      const double vhat = vp[i] / bc2;
      if (decay) pp[i] -= lr * opt.hp.weight_decay * pp[i];
      pp[i] -= lr * mhat / (std::sqrt(vhat) + opt.hp.eps);
    }
  }
}

LmLoss loss_lm(const Tensor& logits, const std::vector<int>& targets,
               const std::vector<std::uint8_t>& mask) {
  const int T = logits.rows;
  const int V = logits.cols;
  if (static_cast<int>(targets.size()) != T || static_cast<int>(mask.size()) != T)
    throw ContractError("loss_lm: targets/mask length mismatch");
  int n = 0;
  for (std::uint8_t m : mask) n += m ? 1 : 0;
  if (n == 0) throw ContractError("loss_lm: empty response mask");

  LmLoss out;
  out.n_positions = n;
  out.d_logits = Tensor(T, V);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (int t = 0; t < T; ++t) {
    if (!mask[t]) continue;
    const int target = targets[t];
    if (target < 0 || target >= V)
      throw std::out_of_range("loss_lm: target id outside the vocabulary");
    const double* row = logits.row(t);
    double maxv = row[0];
    for (int v = 1; v < V; ++v) maxv = std::max(maxv, row[v]);
    double sum = 0.0;
    for (int v = 0; v < V; ++v) sum += std::exp(row[v] - maxv);
    total += maxv + std::log(sum) - row[target];
    double* d = out.d_logits.row(t);
    const double inv_sum = 1.0 / sum;
    for (int v = 0; v < V; ++v) d[v] = std::exp(row[v] - maxv) * inv_sum * inv_n;
    d[target] -= inv_n;
  }
  out.value = total * inv_n;
  return out;
}

ClsLoss loss_topic_multiclass(const std::vector<double>& logits, int label) {
  const int K = static_cast<int>(logits.size());
  if (label < 0 || label >= K)
    throw std::out_of_range("loss_topic_multiclass: label outside [0, K)");
  double maxv = logits[0];
  for (double z : logits) maxv = std::max(maxv, z);
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - maxv);

  ClsLoss out;
  out.value = maxv + std::log(sum) - logits[label];
  out.d_logits.resize(K);
  const double inv_sum = 1.0 / sum;
  for (int c = 0; c < K; ++c) out.d_logits[c] = std::exp(logits[c] - maxv) * inv_sum;
  out.d_logits[label] -= 1.0;
  return out;
}

ClsLoss loss_topic_multilabel(const std::vector<double>& logits,
                              const std::vector<double>& labels) {
  const int K = static_cast<int>(logits.size());
  if (static_cast<int>(labels.size()) != K)
    throw ContractError("loss_topic_multilabel: label width mismatch");
  ClsLoss out;
  out.d_logits.resize(K);
  const double inv_k = 1.0 / static_cast<double>(K);
  double total = 0.0;
  for (int c = 0; c < K; ++c) {
    const double y = labels[c];
    if (y != 0.0 && y != 1.0)
      throw ContractError("loss_topic_multilabel: labels must be exactly 0 or 1");
    total += bce_with_logit(logits[c], y);
    out.d_logits[c] = (stable_sigmoid(logits[c]) - y) * inv_k;
  }
  out.value = total * inv_k;
  return out;
}

int cls_head_width(Mode mode, int n_topics) {
  return mode == Mode::kMultiClass ? n_topics + 1 : n_topics;
}

std::vector<int> lm_training_sequence(const std::vector<int>& prefix_ids,
                                      const std::vector<int>& response_ids, const Vocab& v) {
  std::vector<int> seq = prefix_ids;
  seq.push_back(v.specials().bos);
  seq.insert(seq.end(), response_ids.begin(), response_ids.end());
  return seq;
}

void lm_targets(const std::vector<int>& seq, int response_start, std::vector<int>& targets,
                std::vector<std::uint8_t>& mask) {
  const int T = static_cast<int>(seq.size());
  targets.assign(T, 0);
  mask.assign(T, 0);
  for (int t = 0; t + 1 < T; ++t) {
    targets[t] = seq[t + 1];
    if (t + 1 >= response_start) mask[t] = 1;
  }
}

std::vector<int> teacher_forced_argmax(const Tensor& logits,
                                       const std::vector<std::uint8_t>& mask) {
  std::vector<int> out;
  for (int t = 0; t < logits.rows; ++t) {
    if (!mask[t]) continue;
    const double* row = logits.row(t);
    int best = 0;
    for (int v = 1; v < logits.cols; ++v) {
      if (row[v] > row[best]) best = v;
    }
    out.push_back(best);
  }
  return out;
}

std::vector<int> classifier_input(const std::vector<int>& history_ids, const Vocab& v,
                                  ClassifierKind kind) {
  if (kind == ClassifierKind::kSharedGpt) return history_ids;
  std::vector<int> ids{v.specials().cls};
  ids.insert(ids.end(), history_ids.begin(), history_ids.end());
  return ids;
}

Trainer::Trainer(JointModel* model, const Vocab* vocab, const TrainConfig& cfg,
                 const OptConfig& opt)
    : model_(model), vocab_(vocab), cfg_(cfg) {
  if (!model_ || !vocab_) throw ContractError("Trainer: null model or vocab");
  const int head = cls_head_width(cfg_.mode, cfg_.n_topics);
  if (cfg_.ablation != Ablation::kStageOneOnly) {
    const ModelConfig& cc =
        model_->has_separate_cls() ? model_->cls_cfg : model_->lm_cfg;
    if (cc.n_topics != head)
      throw ConfigError("classification head width does not match the corpus mode");
  }
  opt_lm_ = make_opt_state(model_->lm, opt);
  if (model_->has_separate_cls()) opt_cls_ = make_opt_state(model_->cls, opt);
}

LossBreakdown Trainer::train_step(const std::vector<TrainingSample>& batch) {
  if (batch.empty()) throw ContractError("train_step: empty batch");
  const Vocab& v = *vocab_;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  TensorMap grads_lm = zero_grads_like(model_->lm);
  TensorMap grads_cls;
  if (model_->has_separate_cls()) grads_cls = zero_grads_like(model_->cls);

  LossBreakdown lb;
  std::vector<int> targets;
  std::vector<std::uint8_t> mask;

  for (const TrainingSample& s : batch) {
    // pass A: teacher-forced generation on history ++ BOS ++ gold response
    std::vector<int> seq_a = lm_training_sequence(s.history_ids, s.response_ids, v);
    ForwardTrace tr_a;
    Tensor logits_a = forward_lm(model_->lm, model_->lm_cfg, seq_a, &tr_a);
    lm_targets(seq_a, static_cast<int>(s.history_ids.size()) + 1, targets, mask);
    LmLoss la = loss_lm(logits_a, targets, mask);
    lb.l_one += la.value * inv_b;
    for (double& g : la.d_logits.data) g *= inv_b;
    backward(model_->lm, model_->lm_cfg, tr_a, &la.d_logits, nullptr, grads_lm);

    // pass B: topic prediction from the history alone
    if (cfg_.ablation != Ablation::kStageOneOnly) {
      const bool separate = model_->has_separate_cls();
      const Params& cp = separate ? model_->cls : model_->lm;
      const ModelConfig& cc = separate ? model_->cls_cfg : model_->lm_cfg;
      std::vector<int> cls_in = classifier_input(
          s.history_ids, v,
          separate ? ClassifierKind::kSeparateBert : ClassifierKind::kSharedGpt);
      ForwardTrace tr_b;
      std::vector<double> logits_b = forward_cls(cp, cc, cls_in, &tr_b);
      ClsLoss lt = cfg_.mode == Mode::kMultiClass
                       ? loss_topic_multiclass(logits_b, class_label(s, cfg_.n_topics))
                       : loss_topic_multilabel(logits_b, multi_hot_label(s, cfg_.n_topics));
      lb.l_topic += lt.value * inv_b;
      for (double& g : lt.d_logits) g *= inv_b;
      backward(cp, cc, tr_b, nullptr, &lt.d_logits, separate ? grads_cls : grads_lm);
    }

    // pass C: refine on history ++ CLS ++ coarse ++ topic span, gold topics
    if (cfg_.ablation == Ablation::kFull) {
      std::vector<int> coarse = cfg_.refine_r1 == RefineR1Source::kGold
                                    ? s.response_ids
                                    : teacher_forced_argmax(logits_a, mask);
      std::vector<int> refine_in = build_refine_input(
          s.history_ids, coarse, s.topic_ids, v, cfg_.max_refine_len, cfg_.refine_context);
      std::vector<int> seq_c = lm_training_sequence(refine_in, s.response_ids, v);
      ForwardTrace tr_c;
      Tensor logits_c = forward_lm(model_->lm, model_->lm_cfg, seq_c, &tr_c);
      lm_targets(seq_c, static_cast<int>(refine_in.size()) + 1, targets, mask);
      LmLoss lc = loss_lm(logits_c, targets, mask);
      lb.l_refine += lc.value * inv_b;
      for (double& g : lc.d_logits.data) g *= inv_b;
      backward(model_->lm, model_->lm_cfg, tr_c, &lc.d_logits, nullptr, grads_lm);
    }
  }

  lb.l_total = lb.l_one + lb.l_topic + lb.l_refine;
  if (!std::isfinite(lb.l_total)) {
    std::ostringstream diag;
    diag << "non-finite loss (l_one=" << lb.l_one << ", l_topic=" << lb.l_topic
         << ", l_refine=" << lb.l_refine << ") at optimizer step " << opt_lm_.step + 1
         << "; params finite=" << (all_finite(model_->lm) ? "yes" : "no");
    throw NumericError(diag.str());
  }

  adamw_step(model_->lm, grads_lm, opt_lm_);
  if (model_->has_separate_cls() && cfg_.ablation != Ablation::kStageOneOnly)
    adamw_step(model_->cls, grads_cls, opt_cls_);
  return lb;
}

}  // namespace topicdial
