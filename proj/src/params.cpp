#include "ni/params.hpp"

#include <cmath>

#include "ni/errors.hpp"

namespace ni {

ad::Parameter& ParameterStore::create(const std::string& name, int rows, int cols, Init init, std::mt19937_64& rng,
                                      double scale, bool decay) {
  if (contains(name)) throw InternalFault("duplicate parameter " + name);
  auto p = std::make_unique<ad::Parameter>();
  p->name = name;
  p->value = Matrix(rows, cols);
  p->decay = decay;
  switch (init) {
    case Init::Zeros:
      break;
    case Init::Ones:
      p->value.fill(1.0);
      break;
    case Init::Uniform: {
      std::uniform_real_distribution<double> dist(-scale, scale);
      for (double& v : p->value.values()) v = dist(rng);
      break;
    }
    case Init::Normal: {
      std::normal_distribution<double> dist(0.0, scale);
      for (double& v : p->value.values()) v = dist(rng);
      break;
    }
  }
  index_.emplace(name, params_.size());
  params_.push_back(std::move(p));
  return *params_.back();
}

ad::Parameter& ParameterStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw InternalFault("unknown parameter " + name);
  return *params_[it->second];
}

const ad::Parameter& ParameterStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw InternalFault("unknown parameter " + name);
  return *params_[it->second];
}

std::vector<ad::Parameter*> ParameterStore::all() {
  std::vector<ad::Parameter*> out;
  for (auto& p : params_) out.push_back(p.get());
  return out;
}

std::vector<const ad::Parameter*> ParameterStore::all() const {
  std::vector<const ad::Parameter*> out;
  for (const auto& p : params_) out.push_back(p.get());
  return out;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& p : params_) p->grad = Matrix();
}

double scheduled_lr(const AdamWConfig& cfg, long step) {
  const long total = std::max<long>(cfg.total_steps, 1);
  const double warm = cfg.warmup_frac * static_cast<double>(total);
  const double s = static_cast<double>(step);
  if (s < warm) return cfg.lr * s / warm;
  const double remaining = static_cast<double>(total) - warm;
  if (remaining <= 0.0) return 0.0;
  return cfg.lr * std::max(0.0, (static_cast<double>(total) - s) / remaining);
}

double AdamW::step(ParameterStore& store) {
  const double lr = scheduled_lr(cfg_, store.step_);
  store.step_ += 1;
  const double t = static_cast<double>(store.step_);
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t);

  double clip = 1.0;
  if (cfg_.clip_norm > 0.0) {
    double sq = 0.0;
    for (auto& p : store.params_) {
      for (double g : p->grad.values()) sq += g * g;
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg_.clip_norm) clip = cfg_.clip_norm / norm;
  }

  for (auto& p : store.params_) {
    if (p->grad.empty()) continue;
    if (p->first_moment.empty()) {
      p->first_moment = Matrix(p->value.rows(), p->value.cols());
      p->second_moment = Matrix(p->value.rows(), p->value.cols());
    }
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i] * clip;
      double& m = p->first_moment[i];
      double& v = p->second_moment[i];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
      double update = (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
      if (p->decay) update += cfg_.weight_decay * p->value[i];
      p->value[i] -= lr * update;
    }
  }
  store.zero_grad();
  return lr;
}

}  // namespace ni
