#pragma once

#include <memory>
#include <string>

#include "ni/config.hpp"
#include "ni/model.hpp"

namespace ni {

// `NICKPT v1` container: a magic line, one JSON header line (config echo,
// vocabulary hash, builtin names, parameter shapes, optimizer step), then the
// row-major float64 values, first moments and second moments of every
// parameter in header order. The vocabulary is written next to it as
// `<path>.vocab`.
void save_checkpoint(const std::string& path, const Model& model, const Config& config);

struct LoadedCheckpoint {
  Config config;
  std::unique_ptr<Model> model;
};

// Throws ConfigError for unreadable, truncated or inconsistent files.
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace ni
