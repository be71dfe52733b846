#include "ni/config.hpp"

#include <charconv>
#include <fstream>

#include "ni/errors.hpp"

namespace ni {

namespace {

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("bad value for " + key + ": '" + text + "'");
  return value;
}

double parse_double(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad value for " + key + ": '" + text + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("bad value for " + key + ": '" + text + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  const nlohmann::ordered_json j = config_to_json(Config{});
  for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
  return keys;
}

void set_config_value(Config& c, const std::string& key, const std::string& raw) {
  std::string value = trim(raw);
  if (value.size() >= 2 && (value.front() == '"' || value.front() == '\'') && value.back() == value.front()) {
    value = value.substr(1, value.size() - 2);
  }
  if (key == "H") c.H = parse_number<int>(key, value);
  else if (key == "encoder_layers") c.encoder_layers = parse_number<int>(key, value);
  else if (key == "encoder_heads") c.encoder_heads = parse_number<int>(key, value);
  else if (key == "executor_layers") c.executor_layers = parse_number<int>(key, value);
  else if (key == "executor_heads") c.executor_heads = parse_number<int>(key, value);
  else if (key == "max_tokens") c.max_tokens = parse_number<int>(key, value);
  else if (key == "max_chars") c.max_chars = parse_number<long>(key, value);
  else if (key == "max_args") c.max_args = parse_number<int>(key, value);
  else if (key == "batch_size") c.batch_size = parse_number<int>(key, value);
  else if (key == "lambda_cap_per_batch") c.lambda_cap_per_batch = parse_number<long>(key, value);
  else if (key == "K_negatives") c.K_negatives = parse_number<int>(key, value);
  else if (key == "lr") c.lr = parse_double(key, value);
  else if (key == "warmup_frac") c.warmup_frac = parse_double(key, value);
  else if (key == "epochs") c.epochs = parse_number<int>(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "pool") c.pool = parse_number<int>(key, value);
  else if (key == "samples_per_loss") c.samples_per_loss = parse_number<int>(key, value);
  else if (key == "l2_whole_list") c.l2_whole_list = parse_bool(key, value);
  else if (key == "weight_decay") c.weight_decay = parse_double(key, value);
  else if (key == "clip_norm") c.clip_norm = parse_double(key, value);
  else if (key == "vocab_size") c.vocab_size = parse_number<int>(key, value);
  else if (key == "vocab_min_count") c.vocab_min_count = parse_number<int>(key, value);
  else if (key == "oov_buckets") c.oov_buckets = parse_number<int>(key, value);
  else if (key == "max_returns") c.max_returns = parse_number<int>(key, value);
  else if (key == "time_budget_s") c.time_budget_s = parse_double(key, value);
  else throw ConfigError("unknown config key '" + key + "'");
}

void load_config_file(Config& c, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key = value");
    set_config_value(c, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

void validate(const Config& c) {
  auto positive = [](const char* name, double v) {
    if (!(v > 0)) throw ConfigError(std::string(name) + " must be positive");
  };
  positive("H", c.H);
  positive("encoder_layers", c.encoder_layers);
  positive("encoder_heads", c.encoder_heads);
  positive("executor_layers", c.executor_layers);
  positive("executor_heads", c.executor_heads);
  positive("max_tokens", c.max_tokens);
  positive("max_chars", static_cast<double>(c.max_chars));
  positive("max_args", c.max_args);
  positive("batch_size", c.batch_size);
  positive("lambda_cap_per_batch", static_cast<double>(c.lambda_cap_per_batch));
  positive("K_negatives", c.K_negatives);
  positive("lr", c.lr);
  positive("epochs", c.epochs);
  positive("seed", static_cast<double>(c.seed));
  positive("samples_per_loss", c.samples_per_loss);
  positive("vocab_size", c.vocab_size);
  positive("vocab_min_count", c.vocab_min_count);
  positive("oov_buckets", c.oov_buckets);
  positive("max_returns", c.max_returns);
  if (c.pool < 0) throw ConfigError("pool must be positive (0 selects batch_size / 2)");
  if (c.weight_decay < 0) throw ConfigError("weight_decay must not be negative");
  if (c.time_budget_s < 0) throw ConfigError("time_budget_s must not be negative");
  if (!(c.warmup_frac >= 0.0 && c.warmup_frac < 1.0)) throw ConfigError("warmup_frac must lie in [0, 1)");
  if (c.H % c.encoder_heads != 0) throw ConfigError("H must be divisible by encoder_heads");
  if (c.H % c.executor_heads != 0) throw ConfigError("H must be divisible by executor_heads");
  if (c.K_negatives < 2) throw ConfigError("K_negatives must be at least 2");
}

nlohmann::ordered_json config_to_json(const Config& c) {
  nlohmann::ordered_json j;
  j["H"] = c.H;
  j["encoder_layers"] = c.encoder_layers;
  j["encoder_heads"] = c.encoder_heads;
  j["executor_layers"] = c.executor_layers;
  j["executor_heads"] = c.executor_heads;
  j["max_tokens"] = c.max_tokens;
  j["max_chars"] = c.max_chars;
  j["max_args"] = c.max_args;
  j["batch_size"] = c.batch_size;
  j["lambda_cap_per_batch"] = c.lambda_cap_per_batch;
  j["K_negatives"] = c.K_negatives;
  j["lr"] = c.lr;
  j["warmup_frac"] = c.warmup_frac;
  j["epochs"] = c.epochs;
  j["seed"] = c.seed;
  j["pool"] = c.pool;
  j["samples_per_loss"] = c.samples_per_loss;
  j["l2_whole_list"] = c.l2_whole_list;
  j["weight_decay"] = c.weight_decay;
  j["clip_norm"] = c.clip_norm;
  j["vocab_size"] = c.vocab_size;
  j["vocab_min_count"] = c.vocab_min_count;
  j["oov_buckets"] = c.oov_buckets;
  j["max_returns"] = c.max_returns;
  j["time_budget_s"] = c.time_budget_s;
  return j;
}

Config config_from_json(const nlohmann::json& j) {
  Config c;
  for (const auto& [key, value] : j.items()) {
    set_config_value(c, key, value.is_string() ? value.get<std::string>() : value.dump());
  }
  return c;
}

ModelConfig model_config(const Config& c) {
  ModelConfig m;
  m.hidden = c.H;
  m.encoder_layers = c.encoder_layers;
  m.encoder_heads = c.encoder_heads;
  m.executor_layers = c.executor_layers;
  m.executor_heads = c.executor_heads;
  m.max_tokens = c.max_tokens;
  m.max_args = c.max_args;
  m.head_max_len = c.max_returns;
  m.seed = c.seed;
  return m;
}

}  // namespace ni
