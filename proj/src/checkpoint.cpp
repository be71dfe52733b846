#include "ni/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ni/builtins.hpp"
#include "ni/errors.hpp"

namespace ni {

namespace {

constexpr const char* kMagic = "NICKPT v1";

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex;
  s.width(16);
  s.fill('0');
  s << v;
  return s.str();
}

void write_matrix(std::ostream& out, const Matrix& m, int rows, int cols) {
  const std::size_t n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  if (m.empty()) {
    const std::vector<double> zeros(n, 0.0);
    out.write(reinterpret_cast<const char*>(zeros.data()), static_cast<std::streamsize>(n * sizeof(double)));
    return;
  }
  out.write(reinterpret_cast<const char*>(m.row(0)), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_matrix(std::istream& in, Matrix& m, int rows, int cols, const std::string& name) {
  m = Matrix(rows, cols);
  const std::size_t n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  in.read(reinterpret_cast<char*>(m.row(0)), static_cast<std::streamsize>(n * sizeof(double)));
  if (static_cast<std::size_t>(in.gcount()) != n * sizeof(double)) throw ConfigError("checkpoint truncated at " + name);
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model, const Config& config) {
  nlohmann::ordered_json header;
  header["config"] = config_to_json(config);
  header["vocab_hash"] = hex64(model.vocab().hash());
  header["builtins"] = builtin_table().names();
  header["step"] = model.params().step_count();
  nlohmann::json params = nlohmann::json::array();
  for (const ad::Parameter* p : model.params().all()) {
    params.push_back({{"name", p->name}, {"rows", p->value.rows()}, {"cols", p->value.cols()}});
  }
  header["params"] = params;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path);
  out << kMagic << '\n' << header.dump() << '\n';
  for (const ad::Parameter* p : model.params().all()) {
    write_matrix(out, p->value, p->value.rows(), p->value.cols());
    write_matrix(out, p->first_moment, p->value.rows(), p->value.cols());
    write_matrix(out, p->second_moment, p->value.rows(), p->value.cols());
  }
  if (!out) throw ConfigError("failed writing checkpoint " + path);
  model.vocab().save(path + ".vocab");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint " + path);
  std::string magic, line;
  std::getline(in, magic);
  if (magic != kMagic) throw ConfigError(path + " is not a NICKPT v1 checkpoint");
  std::getline(in, line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("bad checkpoint header: ") + e.what());
  }

  LoadedCheckpoint out;
  out.config = config_from_json(header.at("config"));
  validate(out.config);
  Vocabulary vocab = Vocabulary::load(path + ".vocab");
  if (hex64(vocab.hash()) != header.at("vocab_hash").get<std::string>()) {
    throw ConfigError("vocabulary hash mismatch for " + path);
  }
  if (header.at("builtins").get<std::vector<std::string>>() != builtin_table().names()) {
    throw ConfigError("builtin table mismatch for " + path);
  }
  out.model = std::make_unique<Model>(model_config(out.config), std::move(vocab));
  std::vector<ad::Parameter*> params = out.model->params().all();
  const nlohmann::json& shapes = header.at("params");
  if (shapes.size() != params.size()) throw ConfigError("parameter count mismatch for " + path);
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Parameter& p = *params[i];
    const std::string name = shapes[i].at("name").get<std::string>();
    const int rows = shapes[i].at("rows").get<int>();
    const int cols = shapes[i].at("cols").get<int>();
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols()) {
      throw ConfigError("parameter layout mismatch at " + name);
    }
    read_matrix(in, p.value, rows, cols, name);
    read_matrix(in, p.first_moment, rows, cols, name);
    read_matrix(in, p.second_moment, rows, cols, name);
  }
  out.model->params().set_step_count(header.at("step").get<long>());
  return out;
}

}  // namespace ni
