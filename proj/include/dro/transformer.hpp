#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dro/nn/adam.hpp"
#include "dro/nn/ops.hpp"
#include "dro/trajectory.hpp"

namespace dro::dt {

struct DtConfig {
  std::size_t embed_dim = 128;
  std::size_t n_heads = 4;
  std::size_t n_layers = 4;
  double dropout = 0.1;
  /// Timesteps per sequence (three tokens each).
  std::size_t seq_len = 20;
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  double lr = 1e-4;
  double weight_decay = 1e-5;
  std::size_t batch_size = 32;
  int epochs = 100;
  double target_rtg = 1.0;
  /// Real steps preceding the pseudo-step at inference, capped at seq_len - 1.
  std::size_t history_len = 19;
  /// Start every real iteration from a freshly initialized model.
  bool reset_each_iter = false;

  void validate() const;
};

/// Causal transformer over interleaved (return-to-go, state, action) tokens
/// with a sigmoid action head read from the state tokens.
class DecisionTransformer {
 public:
  DecisionTransformer(const DtConfig& config, std::uint64_t seed);

  const DtConfig& config() const { return config_; }
  std::vector<nn::Parameter>& parameters() { return params_; }
  const std::vector<nn::Parameter>& parameters() const { return params_; }
  nn::AdamState& optimizer() { return adam_; }
  const nn::AdamState& optimizer() const { return adam_; }

  /// Predicted actions [B, T, action_dim] for sequences right-padded to the
  /// longest one (T). Every sequence must have 1..seq_len steps.
  nn::Var forward(nn::Tape& tape, const std::vector<const Trajectory*>& batch, bool train,
                  Rng& rng);

  /// Eval-mode predictions, one vector per real step of each sequence.
  std::vector<std::vector<Vector>> predict(const std::vector<const Trajectory*>& batch);

 private:
  nn::Parameter& p(std::size_t i) { return params_[i]; }
  std::size_t add_param(std::string name, nn::Tensor value);

  DtConfig config_;
  std::vector<nn::Parameter> params_;
  nn::AdamState adam_;
  struct Block {
    std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };
  std::size_t w_rtg_, b_rtg_, w_state_, b_state_, w_action_, b_action_, time_, ln_emb_g_,
      ln_emb_b_, ln_f_g_, ln_f_b_, w_head_, b_head_;
  std::vector<Block> blocks_;
};

/// Mean training loss per epoch.
struct TrainResult {
  std::vector<double> epoch_loss;
};

/// Fine-tunes `model` in place for `epochs` (config epochs when negative).
/// Trajectories longer than seq_len are cut into consecutive windows.
TrainResult dt_train(DecisionTransformer& model, const TrajectorySet& data, std::uint64_t seed,
                     int epochs = -1);

/// Appends a pseudo-step (target_rtg, live_state) to the most recent history
/// steps and returns the action predicted for it, inside (0, 1)^d.
Vector dt_infer(DecisionTransformer& model, const Trajectory& history, const Vector& live_state,
                double target_rtg);

struct CheckpointMeta {
  std::size_t ensemble_size = 0;
  std::size_t dimension = 0;
  double normalizer = 0.0;
};

/// Writes parameters to `path` and a JSON sidecar to `path + ".json"`.
void save_checkpoint(const DecisionTransformer& model, const CheckpointMeta& meta,
                     const std::string& path);
DecisionTransformer load_checkpoint(const std::string& path, CheckpointMeta* meta = nullptr);

}  // namespace dro::dt
