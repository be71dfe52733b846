#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int status = -1;
  std::string out;
};

Result ni(const std::string& args) {
  Result r;
  FILE* pipe = popen((std::string(NI_CLI) + " " + args + " 2>/dev/null").c_str(), "r");
  REQUIRE(pipe != nullptr);
  std::array<char, 4096> buf{};
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

fs::path scratch() {
  fs::path p = fs::temp_directory_path() / "ni_cli_test";
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

}  // namespace

TEST_CASE("exit codes") {
  fs::path d = scratch();
  write(d / "ok.py", "y = f(x)\n");
  write(d / "cls.py", "class A:\n    pass\n");
  write(d / "syn.py", "x = (\n");
  CHECK(ni("trace " + (d / "ok.py").string()).status == 0);
  CHECK(ni("trace " + (d / "cls.py").string()).status == 2);
  CHECK(ni("trace " + (d / "syn.py").string()).status == 2);
  CHECK(ni("trace " + (d / "missing.py").string()).status == 1);
  CHECK(ni("trace --no-such-flag " + (d / "ok.py").string()).status == 1);
  CHECK(ni("").status == 1);
  CHECK(ni("train --corpus " + d.string() + " --out " + (d / "c").string() + " --set nope=1").status == 1);
  CHECK(ni("train --corpus " + d.string() + " --out " + (d / "c").string() + " --set H=0").status == 1);
}

TEST_CASE("codegen errors still print the trace prefix") {
  fs::path d = scratch();
  write(d / "late.py", "a = f(b)\nclass A:\n    pass\n");
  Result r = ni("trace " + (d / "late.py").string());
  CHECK(r.status == 2);
  CHECK(r.out.find("LAMBDA\tf") != std::string::npos);
}

TEST_CASE("synth, stats, train, eval, misuse-train and misuse end to end") {
  fs::path d = scratch();
  const std::string plain = (d / "p.jsonl").string(), labelled = (d / "m.jsonl").string();
  REQUIRE(ni("synth --count 12 --seed 4 --out " + plain).status == 0);
  REQUIRE(ni("synth --count 12 --seed 5 --misuse --out " + labelled).status == 0);

  Result stats = ni("stats --corpus " + labelled + " --out-dir " + (d / "st").string());
  REQUIRE(stats.status == 0);
  CHECK(nlohmann::json::parse(stats.out).at("retained") == 12);
  CHECK(fs::exists(d / "st" / "lambda_histogram.csv"));

  const std::string small = " --set H=8 --set encoder_heads=2 --set executor_heads=2 --set batch_size=4";
  REQUIRE(ni("train --corpus " + plain + small + " --out " + (d / "a.ckpt").string() + " --metrics " +
             (d / "a.jsonl").string())
              .status == 0);
  std::ifstream metrics(d / "a.jsonl");
  std::string line;
  int lines = 0;
  bool has_final = false;
  while (std::getline(metrics, line)) {
    ++lines;
    has_final = has_final || nlohmann::json::parse(line).contains("final");
  }
  CHECK(lines == 1 + 3 + 1);
  CHECK(has_final);
  Result ev = ni("eval --corpus " + plain + " --checkpoint " + (d / "a.ckpt").string());
  REQUIRE(ev.status == 0);
  CHECK(nlohmann::json::parse(ev.out).contains("acc1"));

  REQUIRE(ni("misuse-train --corpus " + labelled + small + " --out " + (d / "m.ckpt").string()).status == 0);
  Result mu = ni("misuse --corpus " + labelled + " --checkpoint " + (d / "m.ckpt").string() + " --predictions " +
                 (d / "pred.jsonl").string());
  REQUIRE(mu.status == 0);
  CHECK(nlohmann::json::parse(mu.out).contains("auc"));
  std::ifstream preds(d / "pred.jsonl");
  REQUIRE(std::getline(preds, line));
  nlohmann::json p = nlohmann::json::parse(line);
  for (const char* key : {"script_id", "p_misuse", "call_record", "arg_index", "repair_name", "explanation_path"}) {
    CHECK(p.contains(key));
  }
}
