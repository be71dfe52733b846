#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "ni/model.hpp"

namespace ni {

struct Config {
  int H = 32;
  int encoder_layers = 2;
  int encoder_heads = 4;
  int executor_layers = 2;
  int executor_heads = 4;
  int max_tokens = 512;
  long max_chars = 10000;
  int max_args = 16;
  int batch_size = 16;
  long lambda_cap_per_batch = 128;
  int K_negatives = 8;
  double lr = 1e-3;
  double warmup_frac = 0.05;
  int epochs = 1;
  std::uint64_t seed = 1;

  int pool = 0;  // 0: batch_size / 2
  int samples_per_loss = 64;
  bool l2_whole_list = false;  // L2 negatives replace every argument instead of one
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  int vocab_size = 4096;
  int vocab_min_count = 1;
  int oov_buckets = 64;
  int max_returns = 256;
  double time_budget_s = 0.0;  // 0: no limit

  int effective_pool() const { return pool > 0 ? pool : std::max(1, batch_size / 2); }
};

// Sets one key from its text form. Throws ConfigError for unknown keys and
// unparsable values.
void set_config_value(Config& config, const std::string& key, const std::string& value);
// `key = value` lines; '#' starts a comment; [section] headers are ignored.
void load_config_file(Config& config, const std::string& path);
// Throws ConfigError unless every numeric value is positive and
// warmup_frac lies in [0, 1).
void validate(const Config& config);

nlohmann::ordered_json config_to_json(const Config& config);
Config config_from_json(const nlohmann::json& j);
std::vector<std::string> config_keys();

ModelConfig model_config(const Config& config);

}  // namespace ni
