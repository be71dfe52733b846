#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>

#include "ni/ast.hpp"
#include "ni/corpus.hpp"
#include "ni/synth.hpp"

using namespace ni;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("ni_corpus_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

// A script of exactly n characters that lowers cleanly.
std::string script_of_length(std::size_t n) {
  std::string s = "x = f(y)\n";
  while (s.size() + 1 < n) s += "#";
  s += "\n";
  s.resize(n, '#');
  return s;
}

}  // namespace

TEST_CASE("directory ingestion yields one script per file with content ids") {
  fs::path d = scratch_dir("dir");
  write(d / "a.py", "a = 1\n");
  write(d / "b.py", "b = g(a)\n");
  fs::create_directories(d / "sub");
  write(d / "sub" / "c.py", "a = 1\n");
  write(d / "notes.txt", "not python");
  LoadResult r = load_corpus(d.string());
  REQUIRE(r.scripts.size() == 3);
  CHECK(r.errors.empty());
  CHECK(r.scripts[0].id == r.scripts[2].id);
  CHECK(r.scripts[0].id != r.scripts[1].id);
  CHECK(r.scripts[0].id.size() == 16);
  CHECK(r.scripts[1].origin == Origin::Ingested);
  CHECK_FALSE(r.scripts[1].oracle.has_value());
}

TEST_CASE("JSON-lines ingestion reads one script per line and reports bad lines") {
  fs::path d = scratch_dir("jsonl");
  write(d / "c.jsonl",
        "{\"code\": \"a = f(b)\\n\"}\n"
        "\n"
        "{\"code\": \"a = f(b, c)\\n\", \"has_misuse\": true, \"misuse_byte_offset\": 10, \"correct_name\": \"b\"}\n"
        "not json\n"
        "{\"code\": \"x = 1\\n\", \"has_misuse\": false}\n");
  LoadResult r = load_corpus((d / "c.jsonl").string());
  REQUIRE(r.scripts.size() == 3);
  CHECK(r.errors.size() == 1);
  CHECK_FALSE(r.scripts[0].label.has_value());
  REQUIRE(r.scripts[1].label.has_value());
  CHECK(r.scripts[1].label->has_misuse);
  CHECK(r.scripts[1].label->byte_offset == 10);
  CHECK(r.scripts[1].label->correct_name == "b");
  CHECK_FALSE(r.scripts[2].label->has_misuse);

  LoadResult missing = load_corpus((d / "absent.jsonl").string());
  CHECK(missing.scripts.empty());
  CHECK(missing.errors.size() == 1);
}

TEST_CASE("JSON-lines round trip") {
  fs::path d = scratch_dir("roundtrip");
  std::vector<Script> scripts;
  for (const SynthScript& s : synthesize_misuse(5, 12)) scripts.push_back(from_synth(s, true));
  write_corpus_jsonl((d / "m.jsonl").string(), scripts);
  LoadResult r = load_corpus((d / "m.jsonl").string());
  REQUIRE(r.scripts.size() == scripts.size());
  for (std::size_t i = 0; i < scripts.size(); ++i) {
    CHECK(r.scripts[i].code == scripts[i].code);
    CHECK(r.scripts[i].id == scripts[i].id);
    CHECK(r.scripts[i].label->has_misuse == scripts[i].label->has_misuse);
    CHECK(r.scripts[i].label->byte_offset == scripts[i].label->byte_offset);
    CHECK(r.scripts[i].label->correct_name == scripts[i].label->correct_name);
  }
}

TEST_CASE("character counts are code points") {
  CHECK(utf8_length("abc") == 3);
  CHECK(utf8_length("t\xc3\xa9st") == 4);
  CHECK(utf8_length("\xe2\x82\xac") == 1);
  CHECK(utf8_length("") == 0);
}

TEST_CASE("length filter boundary") {
  std::vector<Script> scripts = {make_script(script_of_length(10000)), make_script(script_of_length(10001))};
  REQUIRE(scripts[0].char_count == 10000);
  REQUIRE(scripts[1].char_count == 10001);
  FilterResult r = apply_filters(scripts);
  CHECK(r.report.total == 2);
  CHECK(r.report.too_long == 1);
  CHECK(r.report.retained == 1);
  CHECK(r.stats[1].drop_reason == "too_long");
  CHECK(r.retained[0].char_count == 10000);
}

TEST_CASE("empty corpus gives an all-zero report") {
  FilterResult r = apply_filters({});
  CHECK(r.report.total == 0);
  CHECK(r.report.too_long == 0);
  CHECK(r.report.codegen_error == 0);
  CHECK(r.report.misuse_label_error == 0);
  CHECK(r.report.retained == 0);
  CHECK(r.report.retained_pct == 0.0);
}

TEST_CASE("codegen and syntax failures are dropped and counted") {
  std::vector<Script> scripts = {
      make_script("x = f(y)\n"),
      make_script("@decorator\ndef g():\n    pass\n"),
      make_script("x = (\n"),
      make_script("class A:\n    pass\n"),
      make_script("y = lambda q: q\n"),
  };
  FilterResult r = apply_filters(scripts);
  CHECK(r.report.total == 5);
  CHECK(r.report.codegen_error == 4);
  CHECK(r.report.retained == 1);
  CHECK(r.report.retained == r.report.total - r.report.too_long - r.report.codegen_error - r.report.misuse_label_error);
  CHECK(r.report.retained_pct == doctest::Approx(20.0));
}

TEST_CASE("misuse label errors") {
  auto labelled = [](std::string code, bool has, long offset, std::string correct) {
    Script s = make_script(std::move(code));
    s.label = MisuseLabel{has, offset, std::move(correct)};
    return s;
  };
  //                 0123456789012345678901
  const std::string ok = "a = 1\nb = 2\nc = f(b)\n";
  std::vector<Script> scripts = {
      labelled(ok, true, 18, "a"),                            // fine
      labelled(ok, true, 17, "a"),                            // offset inside a call, not an identifier
      labelled(ok, true, 18, "zzz"),                          // correct name never bound
      labelled("a = 1\nb = a + 2\nc = f(b)\n", true, 10, "a"),  // misuse feeds an operator first
      labelled("a = 1\nb = 2\n", false, -1, ""),              // no calls at all
      labelled(ok, false, -1, ""),                            // clean and usable
  };
  FilterResult r = apply_filters(scripts);
  CHECK(r.report.misuse_label_error == 3 + 1);
  CHECK(r.report.retained == 2);
  CHECK(r.stats[0].drop_reason.empty());
  CHECK(r.stats[5].drop_reason.empty());

  SyntaxTree tree = parse(ok);
  GroundedLabel g = ground_label(tree, MisuseLabel{true, 18, "a"});
  REQUIRE(g.ok());
  CHECK(g.source_record == 0);
  CHECK(g.arg_index == 0);
}

TEST_CASE("report arithmetic and idempotence over a mixed corpus") {
  std::vector<Script> scripts;
  for (const SynthScript& s : synthesize(9, 40)) scripts.push_back(from_synth(s, false));
  scripts.push_back(make_script(script_of_length(12000)));
  scripts.push_back(make_script("with open(p) as f:\n    pass\n"));
  FilterResult once = apply_filters(scripts);
  CHECK(once.report.total == 42);
  CHECK(once.report.too_long == 1);
  CHECK(once.report.codegen_error == 1);
  CHECK(once.report.retained == 40);
  FilterResult twice = apply_filters(once.retained);
  CHECK(twice.retained.size() == once.retained.size());
  CHECK(twice.report.retained == twice.report.total);
  for (std::size_t i = 0; i < twice.retained.size(); ++i) CHECK(twice.retained[i].id == once.retained[i].id);
}

TEST_CASE("synthetic corpora lower without codegen errors and labels ground to the oracle") {
  std::vector<SynthScript> synth = synthesize_misuse(21, 150);
  std::vector<Script> scripts;
  for (const SynthScript& s : synth) scripts.push_back(from_synth(s, true));
  FilterResult r = apply_filters(scripts);
  CHECK(r.report.codegen_error == 0);
  CHECK(r.report.too_long == 0);
  for (std::size_t i = 0; i < synth.size(); ++i) {
    if (!synth[i].has_misuse) continue;
    SyntaxTree tree = parse(synth[i].code);
    GroundedLabel g = ground_label(tree, *scripts[i].label);
    REQUIRE(g.ok());
    CHECK(g.source_record == synth[i].oracle.source_record);
    CHECK(g.arg_index == synth[i].oracle.misused_arg_index);
    CHECK(g.view_object == synth[i].oracle.misuse_object);
  }
}

TEST_CASE("histogram bins") {
  CHECK(histogram_csv({}, 10) == "bin_start,bin_end,count\n");
  CHECK(histogram_csv({0, 9, 10, 25}, 10) == "bin_start,bin_end,count\n0,10,2\n10,20,1\n20,30,1\n");
}
