#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "ni/autodiff.hpp"

namespace ni {

enum class Init { Zeros, Ones, Uniform, Normal };

// Named parameters in creation order plus the optimizer state. Parameter
// addresses are stable for the lifetime of the store.
class ParameterStore {
 public:
  ad::Parameter& create(const std::string& name, int rows, int cols, Init init, std::mt19937_64& rng,
                        double scale = 0.0, bool decay = true);

  ad::Parameter& get(const std::string& name);
  const ad::Parameter& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::vector<ad::Parameter*> all();
  std::vector<const ad::Parameter*> all() const;
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  long step_count() const { return step_; }
  void set_step_count(long s) { step_ = s; }

 private:
  friend class AdamW;
  std::vector<std::unique_ptr<ad::Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
  long step_ = 0;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
  double warmup_frac = 0.05;
  long total_steps = 1;
  double clip_norm = 1.0;  // <= 0 disables clipping
};

// Linear warmup from 0 to the peak over warmup_frac of the schedule, then
// linear decay to 0 at total_steps.
double scheduled_lr(const AdamWConfig& cfg, long step);

class AdamW {
 public:
  explicit AdamW(AdamWConfig cfg) : cfg_(cfg) {}

  // Applies one update using the accumulated gradients, then clears them.
  // Returns the learning rate that was used.
  double step(ParameterStore& store);
  const AdamWConfig& config() const { return cfg_; }

 private:
  AdamWConfig cfg_;
};

}  // namespace ni
