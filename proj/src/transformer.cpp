#include "dro/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "dro/nn/checkpoint.hpp"

namespace dro::dt {

using nn::Parameter;
using nn::Shape;
using nn::Tape;
using nn::Tensor;
using nn::Var;

namespace {

constexpr double kInitStd = 0.02;

nlohmann::json config_to_json(const DtConfig& c) {
  return {{"embed_dim", c.embed_dim},   {"n_heads", c.n_heads},
          {"n_layers", c.n_layers},     {"dropout", c.dropout},
          {"seq_len", c.seq_len},       {"state_dim", c.state_dim},
          {"action_dim", c.action_dim}, {"lr", c.lr},
          {"weight_decay", c.weight_decay}, {"batch_size", c.batch_size},
          {"epochs", c.epochs},         {"target_rtg", c.target_rtg},
          {"history_len", c.history_len}, {"reset_each_iter", c.reset_each_iter}};
}

DtConfig config_from_json(const nlohmann::json& j) {
  DtConfig c;
  c.embed_dim = j.at("embed_dim");
  c.n_heads = j.at("n_heads");
  c.n_layers = j.at("n_layers");
  c.dropout = j.at("dropout");
  c.seq_len = j.at("seq_len");
  c.state_dim = j.at("state_dim");
  c.action_dim = j.at("action_dim");
  c.lr = j.at("lr");
  c.weight_decay = j.at("weight_decay");
  c.batch_size = j.at("batch_size");
  c.epochs = j.at("epochs");
  c.target_rtg = j.at("target_rtg");
  c.history_len = j.at("history_len");
  c.reset_each_iter = j.at("reset_each_iter");
  return c;
}

}  // namespace

void DtConfig::validate() const {
  if (embed_dim == 0 || n_heads == 0 || embed_dim % n_heads != 0)
    throw InputError("embed_dim must be a positive multiple of n_heads");
  if (n_layers == 0) throw InputError("n_layers must be >= 1");
  if (seq_len == 0) throw InputError("seq_len must be >= 1");
  if (state_dim == 0 || action_dim == 0)
    throw InputError("state_dim and action_dim must be set");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InputError("dropout must be in [0, 1)");
  if (!(lr > 0.0)) throw InputError("lr must be positive");
  if (!(weight_decay >= 0.0)) throw InputError("weight_decay must be non-negative");
  if (batch_size == 0) throw InputError("batch_size must be >= 1");
  if (epochs < 0) throw InputError("epochs must be non-negative");
  if (!std::isfinite(target_rtg)) throw InputError("target_rtg must be finite");
}

std::size_t DecisionTransformer::add_param(std::string name, Tensor value) {
  params_.push_back({std::move(name), std::move(value), {}});
  return params_.size() - 1;
}

DecisionTransformer::DecisionTransformer(const DtConfig& config, std::uint64_t seed)
    : config_(config) {
  config_.validate();
  Rng rng(seed);
  const std::size_t e = config_.embed_dim, s = config_.state_dim, a = config_.action_dim;
  auto weight = [&](const std::string& name, std::size_t in, std::size_t out) {
    return add_param(name, Tensor::randn({in, out}, rng, kInitStd));
  };
  auto zeros = [&](const std::string& name, std::size_t n) { return add_param(name, Tensor({n})); };
  auto ones = [&](const std::string& name, std::size_t n) {
    return add_param(name, Tensor({n}, 1.0));
  };
  w_rtg_ = weight("embed.rtg.w", 1, e);
  b_rtg_ = zeros("embed.rtg.b", e);
  w_state_ = weight("embed.state.w", s, e);
  b_state_ = zeros("embed.state.b", e);
  w_action_ = weight("embed.action.w", a, e);
  b_action_ = zeros("embed.action.b", e);
  time_ = add_param("embed.time", Tensor::randn({config_.seq_len, e}, rng, kInitStd));
  ln_emb_g_ = ones("embed.ln.g", e);
  ln_emb_b_ = zeros("embed.ln.b", e);
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const std::string pre = "block" + std::to_string(l) + ".";
    Block b{};
    b.ln1_g = ones(pre + "ln1.g", e);
    b.ln1_b = zeros(pre + "ln1.b", e);
    b.wq = weight(pre + "attn.q.w", e, e);
    b.bq = zeros(pre + "attn.q.b", e);
    b.wk = weight(pre + "attn.k.w", e, e);
    b.bk = zeros(pre + "attn.k.b", e);
    b.wv = weight(pre + "attn.v.w", e, e);
    b.bv = zeros(pre + "attn.v.b", e);
    b.wo = weight(pre + "attn.o.w", e, e);
    b.bo = zeros(pre + "attn.o.b", e);
    b.ln2_g = ones(pre + "ln2.g", e);
    b.ln2_b = zeros(pre + "ln2.b", e);
    b.w1 = weight(pre + "mlp.fc1.w", e, 4 * e);
    b.b1 = zeros(pre + "mlp.fc1.b", 4 * e);
    b.w2 = weight(pre + "mlp.fc2.w", 4 * e, e);
    b.b2 = zeros(pre + "mlp.fc2.b", e);
    blocks_.push_back(b);
  }
  ln_f_g_ = ones("final.ln.g", e);
  ln_f_b_ = zeros("final.ln.b", e);
  w_head_ = add_param("head.w", Tensor({e, a}));
  b_head_ = zeros("head.b", a);
}

Var DecisionTransformer::forward(Tape& tape, const std::vector<const Trajectory*>& batch,
                                 bool train, Rng& rng) {
  if (batch.empty()) throw InputError("empty batch");
  const std::size_t nb = batch.size(), e = config_.embed_dim, h = config_.n_heads;
  const std::size_t sd = config_.state_dim, ad = config_.action_dim;
  std::size_t tt = 0;
  for (const Trajectory* seq : batch) {
    if (seq->empty()) throw InputError("empty sequence in batch");
    if (seq->size() > config_.seq_len)
      throw InputError("sequence of " + std::to_string(seq->size()) +
                       " steps exceeds seq_len " + std::to_string(config_.seq_len));
    tt = std::max(tt, seq->size());
  }
  Tensor rtg({nb * tt, 1}), states({nb * tt, sd}), actions({nb * tt, ad});
  std::vector<std::size_t> times(nb * tt);
  std::vector<std::uint8_t> key_valid(nb * 3 * tt, 0);
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t t = 0; t < tt; ++t) {
      const std::size_t row = b * tt + t;
      times[row] = t;
      if (t >= batch[b]->size()) continue;
      const TrajStep& step = (*batch[b])[t];
      if (static_cast<std::size_t>(step.state.size()) != sd ||
          static_cast<std::size_t>(step.action.size()) != ad)
        throw InputError("step has state/action dims " + std::to_string(step.state.size()) + "/" +
                         std::to_string(step.action.size()) + ", model expects " +
                         std::to_string(sd) + "/" + std::to_string(ad));
      rtg[row] = step.rtg;
      std::copy_n(step.state.data(), sd, states.data() + row * sd);
      std::copy_n(step.action.data(), ad, actions.data() + row * ad);
      for (std::size_t k = 0; k < 3; ++k) key_valid[b * 3 * tt + 3 * t + k] = 1;
    }
  }

  auto P = [&](std::size_t i) { return tape.param(p(i)); };
  auto linear = [&](Var x, std::size_t w, std::size_t bias) {
    return nn::add(nn::matmul(x, P(w)), P(bias));
  };
  auto drop = [&](Var x) { return nn::dropout(x, config_.dropout, rng, train); };

  const Var time = nn::embed(P(time_), times);
  auto token = [&](Tensor input, std::size_t w, std::size_t bias) {
    Var x = nn::add(linear(tape.input(std::move(input)), w, bias), time);
    return nn::reshape(x, {nb, tt, e});
  };
  Var x = nn::interleave({token(std::move(rtg), w_rtg_, b_rtg_),
                          token(std::move(states), w_state_, b_state_),
                          token(std::move(actions), w_action_, b_action_)});
  x = drop(nn::layernorm(x, P(ln_emb_g_), P(ln_emb_b_)));

  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(e / h));
  for (const Block& blk : blocks_) {
    Var a = nn::layernorm(x, P(blk.ln1_g), P(blk.ln1_b));
    Var q = nn::split_heads(linear(a, blk.wq, blk.bq), h);
    Var k = nn::split_heads(linear(a, blk.wk, blk.bk), h);
    Var v = nn::split_heads(linear(a, blk.wv, blk.bv), h);
    Var scores = nn::scale(nn::batched_matmul(q, k, true), inv_sqrt_d);
    Var probs = drop(nn::softmax(nn::causal_mask(scores, h, key_valid)));
    Var ctx = nn::merge_heads(nn::batched_matmul(probs, v, false), h);
    x = nn::add(x, drop(linear(ctx, blk.wo, blk.bo)));

    Var m = nn::layernorm(x, P(blk.ln2_g), P(blk.ln2_b));
    m = linear(nn::gelu(linear(m, blk.w1, blk.b1)), blk.w2, blk.b2);
    x = nn::add(x, drop(m));
  }
  x = nn::layernorm(x, P(ln_f_g_), P(ln_f_b_));
  x = nn::select_tokens(x, 3, 1);
  return nn::sigmoid(linear(x, w_head_, b_head_));
}

std::vector<std::vector<Vector>> DecisionTransformer::predict(
    const std::vector<const Trajectory*>& batch) {
  Tape tape;
  Rng unused(0);
  const Tensor& out = forward(tape, batch, false, unused).value();
  const std::size_t tt = out.shape[1], ad = config_.action_dim;
  std::vector<std::vector<Vector>> result(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b)
    for (std::size_t t = 0; t < batch[b]->size(); ++t)
      result[b].push_back(Eigen::Map<const Vector>(out.data() + (b * tt + t) * ad,
                                                   static_cast<Eigen::Index>(ad)));
  return result;
}

TrainResult dt_train(DecisionTransformer& model, const TrajectorySet& data, std::uint64_t seed,
                     int epochs) {
  const DtConfig& cfg = model.config();
  if (epochs < 0) epochs = cfg.epochs;
  TrainResult result;
  if (epochs == 0) return result;
  if (data.empty()) throw PreconditionError("dt_train needs at least one trajectory");

  std::vector<Trajectory> windows;
  for (const Trajectory& traj : data.trajectories)
    for (std::size_t start = 0; start < traj.size(); start += cfg.seq_len)
      windows.emplace_back(traj.begin() + static_cast<std::ptrdiff_t>(start),
                           traj.begin() + static_cast<std::ptrdiff_t>(
                                              std::min(traj.size(), start + cfg.seq_len)));
  if (windows.empty()) throw PreconditionError("dt_train needs at least one non-empty trajectory");

  std::vector<Parameter*> params;
  for (Parameter& p : model.parameters()) params.push_back(&p);
  const nn::AdamConfig adam{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
  const std::size_t ad = cfg.action_dim;

  Rng rng(seed);
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::vector<const Trajectory*> batch;
      std::size_t tt = 0;
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(&windows[order[i]]);
        tt = std::max(tt, windows[order[i]].size());
      }
      Tensor target({batch.size(), tt, ad}), weight({batch.size(), tt, ad});
      for (std::size_t b = 0; b < batch.size(); ++b)
        for (std::size_t t = 0; t < batch[b]->size(); ++t)
          for (std::size_t j = 0; j < ad; ++j) {
            target[(b * tt + t) * ad + j] = (*batch[b])[t].action[static_cast<Eigen::Index>(j)];
            weight[(b * tt + t) * ad + j] = 1.0;
          }
      for (Parameter* p : params) p->zero_grad();
      Tape tape;
      Var loss = nn::mse(model.forward(tape, batch, true, rng), target, weight);
      tape.backward(loss);
      nn::adam_step(params, model.optimizer(), adam);
      total += loss.value()[0];
      ++batches;
    }
    result.epoch_loss.push_back(total / static_cast<double>(batches));
  }
  return result;
}

Vector dt_infer(DecisionTransformer& model, const Trajectory& history, const Vector& live_state,
                double target_rtg) {
  const DtConfig& cfg = model.config();
  const std::size_t keep =
      std::min({history.size(), cfg.history_len, cfg.seq_len - 1});
  Trajectory seq(history.end() - static_cast<std::ptrdiff_t>(keep), history.end());
  seq.push_back({live_state, Vector::Zero(static_cast<Eigen::Index>(cfg.action_dim)), target_rtg});
  return model.predict({&seq}).front().back();
}

void save_checkpoint(const DecisionTransformer& model, const CheckpointMeta& meta,
                     const std::string& path) {
  std::vector<Tensor> tensors;
  for (const Parameter& p : model.parameters()) tensors.push_back(p.value);
  const nn::AdamState& adam = model.optimizer();
  for (const Tensor& m : adam.m) tensors.push_back(m);
  for (const Tensor& v : adam.v) tensors.push_back(v);
  nn::save_tensors(path, tensors);

  nlohmann::json side = {{"config", config_to_json(model.config())},
                         {"ensemble_size", meta.ensemble_size},
                         {"dimension", meta.dimension},
                         {"reward_normalizer", meta.normalizer},
                         {"parameter_count", model.parameters().size()},
                         {"adam_step", adam.step},
                         {"byte_order", "little-endian"}};
  std::ofstream out(path + ".json");
  if (!out) throw InputError("cannot write checkpoint sidecar " + path + ".json");
  out << side.dump(2) << '\n';
}

DecisionTransformer load_checkpoint(const std::string& path, CheckpointMeta* meta) {
  std::ifstream in(path + ".json");
  if (!in) throw InputError("cannot open checkpoint sidecar " + path + ".json");
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("malformed checkpoint sidecar " + path + ".json: " + e.what());
  }
  DecisionTransformer model(config_from_json(side.at("config")), 0);
  std::vector<Tensor> tensors = nn::load_tensors(path);
  auto& params = model.parameters();
  const std::size_t n = params.size();
  if (tensors.size() != n && tensors.size() != 3 * n)
    throw InputError("checkpoint " + path + " holds " + std::to_string(tensors.size()) +
                     " tensors, expected " + std::to_string(n) + " or " + std::to_string(3 * n));
  for (std::size_t i = 0; i < n; ++i) {
    if (tensors[i].shape != params[i].value.shape)
      throw InputError("checkpoint tensor " + params[i].name + " has shape " +
                       nn::shape_string(tensors[i].shape) + ", expected " +
                       nn::shape_string(params[i].value.shape));
    params[i].value = std::move(tensors[i]);
  }
  if (tensors.size() == 3 * n) {
    nn::AdamState& adam = model.optimizer();
    adam.m.assign(tensors.begin() + static_cast<std::ptrdiff_t>(n),
                  tensors.begin() + static_cast<std::ptrdiff_t>(2 * n));
    adam.v.assign(tensors.begin() + static_cast<std::ptrdiff_t>(2 * n), tensors.end());
    adam.step = side.at("adam_step");
  }
  if (meta) {
    meta->ensemble_size = side.at("ensemble_size");
    meta->dimension = side.at("dimension");
    meta->normalizer = side.at("reward_normalizer");
  }
  return model;
}

}  // namespace dro::dt
