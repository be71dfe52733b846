#include "ni/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ni/ast.hpp"
#include "ni/batch.hpp"
#include "ni/codegen.hpp"
#include "ni/errors.hpp"
#include "ni/tokenizer.hpp"

namespace ni {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string script_id(const std::string& code) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(code)));
  return buf;
}

long utf8_length(const std::string& text) {
  long n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

Script make_script(std::string code, Origin origin) {
  Script s;
  s.id = script_id(code);
  s.char_count = utf8_length(code);
  s.code = std::move(code);
  s.origin = origin;
  return s;
}

Script from_synth(const SynthScript& src, bool with_label) {
  Script s = make_script(src.code, Origin::Synthetic);
  s.oracle = src.oracle;
  if (with_label) {
    MisuseLabel l;
    l.has_misuse = src.has_misuse;
    l.byte_offset = src.misuse_offset;
    l.correct_name = src.correct_name;
    s.label = l;
  }
  return s;
}

namespace {

bool read_file(const fs::path& p, std::string& out) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return false;
  std::ostringstream ss;
  ss << in.rdbuf();
  out = ss.str();
  return !in.bad();
}

void load_jsonl(const fs::path& path, LoadResult& result) {
  std::ifstream in(path);
  if (!in) {
    result.errors.push_back(path.string() + ": cannot open");
    return;
  }
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      Script s = make_script(j.at("code").get<std::string>());
      if (j.contains("has_misuse")) {
        MisuseLabel l;
        l.has_misuse = j.at("has_misuse").get<bool>();
        if (j.contains("misuse_byte_offset") && !j["misuse_byte_offset"].is_null())
          l.byte_offset = j["misuse_byte_offset"].get<long>();
        if (j.contains("correct_name") && !j["correct_name"].is_null())
          l.correct_name = j["correct_name"].get<std::string>();
        s.label = l;
      }
      result.scripts.push_back(std::move(s));
    } catch (const std::exception& e) {
      result.errors.push_back(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

}  // namespace

LoadResult load_corpus(const std::string& path) {
  LoadResult result;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(path, ec); !ec && it != fs::recursive_directory_iterator();
         it.increment(ec)) {
      if (it->is_regular_file() && it->path().extension() == ".py") files.push_back(it->path());
    }
    if (ec) result.errors.push_back(path + ": " + ec.message());
    std::sort(files.begin(), files.end());
    for (const fs::path& f : files) {
      std::string code;
      if (!read_file(f, code)) {
        result.errors.push_back(f.string() + ": cannot read");
        continue;
      }
      result.scripts.push_back(make_script(std::move(code)));
    }
    return result;
  }
  if (!fs::exists(path, ec)) {
    result.errors.push_back(path + ": no such file or directory");
    return result;
  }
  load_jsonl(path, result);
  return result;
}

void write_corpus_jsonl(const std::string& path, const std::vector<Script>& scripts) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  for (const Script& s : scripts) {
    json j;
    j["code"] = s.code;
    if (s.label) {
      j["has_misuse"] = s.label->has_misuse;
      if (s.label->has_misuse) {
        j["misuse_byte_offset"] = s.label->byte_offset;
        j["correct_name"] = s.label->correct_name;
      }
    }
    out << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  }
}

std::string to_json(const FilterReport& r) {
  json j = json::object();
  j["total"] = r.total;
  j["too_long"] = r.too_long;
  j["codegen_error"] = r.codegen_error;
  j["misuse_label_error"] = r.misuse_label_error;
  j["retained"] = r.retained;
  j["retained_pct"] = r.retained_pct;
  return j.dump(2);
}

GroundedLabel ground_label(const SyntaxTree& tree, const MisuseLabel& label, int max_args) {
  InterpreterOptions io;
  io.max_args = max_args;
  io.snapshots = true;
  if (label.has_misuse) {
    io.misuse_node = identifier_at(tree, label.byte_offset);
    if (io.misuse_node < 0) {
      GroundedLabel g;
      g.error = "misuse offset does not start an identifier";
      return g;
    }
  }
  StructuralRun run = run_structural(tree, io);
  return ground_run(*run.interp, label);
}

GroundedLabel ground_run(const Interpreter& in, const MisuseLabel& label) {
  GroundedLabel g;
  g.misuse_node = in.options().misuse_node;
  if (label.has_misuse && g.misuse_node < 0) {
    g.error = "misuse offset does not start an identifier";
    return g;
  }
  if (in.records().empty()) {
    g.error = "script makes no calls";
    return g;
  }
  if (!label.has_misuse) return g;

  for (const AbstractObject& o : in.objects()) {
    if (o.view_of >= 0) {
      g.view_object = o.id;
      break;
    }
  }
  if (g.view_object < 0) {
    g.error = "misused identifier is never evaluated";
    return g;
  }
  for (const LambdaRecord& r : in.records()) {
    bool contaminated = false;
    for (int a : r.args) contaminated = contaminated || in.object(a).contaminated;
    if (!contaminated) continue;
    auto it = std::find(r.args.begin(), r.args.end(), g.view_object);
    if (it == r.args.end()) {
      g.error = "misuse is not a function argument";
      return g;
    }
    g.source_record = r.id;
    g.arg_index = static_cast<int>(it - r.args.begin());
    break;
  }
  if (g.source_record < 0) {
    g.error = "misuse is not a function argument";
    return g;
  }
  const LambdaRecord& src = in.records()[static_cast<std::size_t>(g.source_record)];
  if (src.snapshot < 0) throw InternalFault("grounding a misuse label needs snapshots");
  const Snapshot& snap = in.snapshots().at(static_cast<std::size_t>(src.snapshot));
  for (const auto& [name, obj] : snap.visible) {
    if (name == label.correct_name) g.correct_object = obj;
  }
  if (g.correct_object < 0) {
    g.error = "correct name is not bound at the misused call";
    return g;
  }
  if (g.correct_object == in.object(g.view_object).view_of) {
    g.error = "correct name is bound to the misused object";
    return g;
  }
  for (std::size_t i = 0; i < snap.bindings.size(); ++i) {
    if (snap.bindings[i].second == g.correct_object) g.correct_candidate = static_cast<int>(i);
  }
  return g;
}

FilterResult apply_filters(const std::vector<Script>& scripts, const FilterOptions& options) {
  FilterResult out;
  out.report.total = static_cast<long>(scripts.size());
  out.stats.resize(scripts.size());
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    const Script& s = scripts[i];
    ScriptStats& st = out.stats[i];
    st.chars = s.char_count;
    if (s.char_count > options.max_chars) {
      st.drop_reason = "too_long";
      ++out.report.too_long;
      continue;
    }
    try {
      SyntaxTree tree = parse(s.code);
      InterpreterOptions io;
      io.max_args = options.max_args;
      StructuralRun run = run_structural(tree, io);
      st.lambda_calls = static_cast<long>(run.interp->records().size());
      if (s.label) {
        GroundedLabel g = ground_label(tree, *s.label, options.max_args);
        if (!g.ok()) {
          st.drop_reason = "misuse_label_error: " + g.error;
          ++out.report.misuse_label_error;
          continue;
        }
      }
    } catch (const SyntaxError& e) {
      st.drop_reason = std::string("codegen_error: ") + e.what();
      ++out.report.codegen_error;
      continue;
    } catch (const CodegenError& e) {
      st.drop_reason = std::string("codegen_error: ") + e.what();
      ++out.report.codegen_error;
      continue;
    } catch (const InternalFault& e) {
      st.drop_reason = std::string("codegen_error: ") + e.what();
      ++out.report.codegen_error;
      continue;
    }
    out.retained.push_back(s);
  }
  out.report.retained = static_cast<long>(out.retained.size());
  out.report.retained_pct =
      out.report.total ? 100.0 * static_cast<double>(out.report.retained) / static_cast<double>(out.report.total) : 0.0;
  return out;
}

std::string histogram_csv(const std::vector<long>& values, long width) {
  if (width <= 0) throw ConfigError("histogram bin width must be positive");
  std::string out = "bin_start,bin_end,count\n";
  if (values.empty()) return out;
  const long top = *std::max_element(values.begin(), values.end());
  std::vector<long> counts(static_cast<std::size_t>(top / width + 1), 0);
  for (long v : values) {
    if (v >= 0) ++counts[static_cast<std::size_t>(v / width)];
  }
  for (std::size_t b = 0; b < counts.size(); ++b) {
    const long lo = static_cast<long>(b) * width;
    out += std::to_string(lo) + "," + std::to_string(lo + width) + "," + std::to_string(counts[b]) + "\n";
  }
  return out;
}

}  // namespace ni
