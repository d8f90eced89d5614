#include "dro/config.hpp"

#include <fstream>
#include <set>

namespace dro {

namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    const json& v = node_.at(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(key_path(key) + ": expected a boolean");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(key_path(key) + ": expected an integer");
      if constexpr (std::is_unsigned_v<T>)
        if (v.get<long long>() < 0) throw ConfigError(key_path(key) + ": must be non-negative");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(key_path(key) + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(key_path(key) + ": expected a string");
    }
    out = v.get<T>();
  }

  /// Runs fn on the named sub-object if present.
  template <typename Fn>
  void child(const std::string& key, Fn fn) {
    seen_.insert(key);
    if (!node_.contains(key)) return;
    Section sub(node_.at(key), key_path(key));
    fn(sub);
    sub.finish();
  }

  const json* raw(const std::string& key) {
    seen_.insert(key);
    return node_.contains(key) ? &node_.at(key) : nullptr;
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& item : node_.items())
      if (!seen_.count(item.key())) throw ConfigError("unknown key '" + key_path(item.key()) + "'");
  }

 private:
  std::string where() const { return path_.empty() ? "<root>" : path_; }

  const json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
void rethrow_with_path(const std::string& path, Fn fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  RunConfig cfg;
  Section root(doc, "");
  root.child("objective", [&](Section& s) {
    s.get("name", cfg.objective.name);
    s.get("dimension", cfg.objective.dimension);
    s.get("shift", cfg.objective.shift);
    s.get("noise_std", cfg.objective.noise_std);
  });
  if (const json* m = root.raw("method")) {
    if (!m->is_string()) throw ConfigError("method: expected a string");
    rethrow_with_path("method", [&] { cfg.method = parse_method(m->get<std::string>()); });
  }
  root.get("seed", cfg.seed);
  root.get("budget", cfg.budget);
  root.get("n_init", cfg.n_init);
  root.get("pool_size", cfg.pool_size);
  root.get("record_timing", cfg.record_timing);
  root.child("ensemble", [&](Section& s) {
    s.get("size", cfg.ensemble.size);
    s.get("lengthscale_min", cfg.ensemble.lengthscale_min);
    s.get("lengthscale_max", cfg.ensemble.lengthscale_max);
    double floor = gp::kNoiseFloor;
    s.get("noise_floor", floor);
    if (floor != gp::kNoiseFloor)
      throw ConfigError(s.key_path("noise_floor") + ": the noise floor is fixed at 1e-4");
    s.get("lr", cfg.ensemble.training.lr);
    s.get("iters", cfg.ensemble.training.iters);
  });
  root.child("rollout", [&](Section& s) {
    s.get("delta", cfg.rollout.delta);
    s.get("max_len", cfg.rollout.max_len);
    s.get("rollouts_per_gp", cfg.rollout.rollouts_per_gp);
    s.get("kappa_roi", cfg.rollout.kappa_roi);
    s.get("kappa_ucb", cfg.rollout.acquisition.kappa);
    s.get("xi", cfg.rollout.acquisition.xi);
    s.get("mes_samples", cfg.rollout.acquisition.mes_samples);
    if (const json* rot = s.raw("rotation")) {
      const std::string path = s.key_path("rotation");
      if (!rot->is_array() || rot->empty())
        throw ConfigError(path + ": expected a non-empty array of acquisition names");
      cfg.rollout.rotation.clear();
      for (const json& name : *rot) {
        if (!name.is_string()) throw ConfigError(path + ": expected acquisition names");
        rethrow_with_path(path, [&] {
          cfg.rollout.rotation.push_back(acq::parse_acq_kind(name.get<std::string>()));
        });
      }
    }
  });
  root.child("dt", [&](Section& s) {
    s.get("embed_dim", cfg.dt.embed_dim);
    s.get("n_heads", cfg.dt.n_heads);
    s.get("n_layers", cfg.dt.n_layers);
    s.get("dropout", cfg.dt.dropout);
    s.get("seq_len", cfg.dt.seq_len);
    s.get("lr", cfg.dt.lr);
    s.get("weight_decay", cfg.dt.weight_decay);
    s.get("batch_size", cfg.dt.batch_size);
    s.get("epochs", cfg.dt.epochs);
    s.get("target_rtg", cfg.dt.target_rtg);
    s.get("history_len", cfg.dt.history_len);
    s.get("reset_each_iter", cfg.dt.reset_each_iter);
  });
  root.finish();

  rethrow_with_path("config", [&] {
    cfg.validate();
    dt::DtConfig probe = cfg.dt;
    probe.state_dim = 1;
    probe.action_dim = 1;
    probe.validate();
  });
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_run_config(doc);
}

json run_config_to_json(const RunConfig& c) {
  json rotation = json::array();
  for (acq::AcqKind k : c.rollout.rotation) rotation.push_back(std::string(acq::to_string(k)));
  return {
      {"objective",
       {{"name", c.objective.name},
        {"dimension", c.objective.dimension},
        {"shift", c.objective.shift},
        {"noise_std", c.objective.noise_std}}},
      {"method", std::string(to_string(c.method))},
      {"seed", c.seed},
      {"budget", c.budget},
      {"n_init", c.n_init},
      {"pool_size", c.pool_size},
      {"record_timing", c.record_timing},
      {"ensemble",
       {{"size", c.ensemble.size},
        {"lengthscale_min", c.ensemble.lengthscale_min},
        {"lengthscale_max", c.ensemble.lengthscale_max},
        {"noise_floor", gp::kNoiseFloor},
        {"lr", c.ensemble.training.lr},
        {"iters", c.ensemble.training.iters}}},
      {"rollout",
       {{"delta", c.rollout.delta},
        {"max_len", c.rollout.max_len},
        {"rollouts_per_gp", c.rollout.rollouts_per_gp},
        {"kappa_roi", c.rollout.kappa_roi},
        {"kappa_ucb", c.rollout.acquisition.kappa},
        {"xi", c.rollout.acquisition.xi},
        {"mes_samples", c.rollout.acquisition.mes_samples},
        {"rotation", rotation}}},
      {"dt",
       {{"embed_dim", c.dt.embed_dim},
        {"n_heads", c.dt.n_heads},
        {"n_layers", c.dt.n_layers},
        {"dropout", c.dt.dropout},
        {"seq_len", c.dt.seq_len},
        {"lr", c.dt.lr},
        {"weight_decay", c.dt.weight_decay},
        {"batch_size", c.dt.batch_size},
        {"epochs", c.dt.epochs},
        {"target_rtg", c.dt.target_rtg},
        {"history_len", c.dt.history_len},
        {"reset_each_iter", c.dt.reset_each_iter}}},
  };
}

}  // namespace dro
