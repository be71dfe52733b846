#pragma once

#include <memory>
#include <set>
#include <string>
#include <unordered_map>

#include "ni/ast.hpp"
#include "ni/interpreter.hpp"

namespace ni {

// Lowers a syntax tree to NIS instructions on an interpreter. Every statement
// and every branch body is visited exactly once.
class CodeGenerator {
 public:
  CodeGenerator(const SyntaxTree& tree, Interpreter& interp);

  // Throws CodegenError on unsupported or malformed nodes; LambdaRefused
  // passes through when the call budget runs out.
  void generate();

  // Dispatch counters keyed by node id.
  const std::unordered_map<int, int>& statement_counts() const { return statements_; }
  const std::unordered_map<int, int>& block_counts() const { return blocks_; }

 private:
  void statement(const AstNode& n);
  void block(const AstNode& n);
  void function_definition(const AstNode& n);
  void assignment(const AstNode& n);
  void augmented_assignment(const AstNode& n);
  void if_chain(const AstNode& n, std::size_t first_clause);
  void while_loop(const AstNode& n);
  void for_loop(const AstNode& n);
  void try_statement(const AstNode& n);
  void bind_target(const AstNode& target, int value, bool note);
  void store_root(const AstNode& target, int value);

  int expr(const AstNode& n);
  int identifier(const AstNode& n);
  int call(const AstNode& n);
  int collection(const AstNode& n);
  int comparison(const AstNode& n);
  int comprehension(const AstNode& n);
  int index(const AstNode& n);

  [[noreturn]] void unsupported(const AstNode& n) const;
  [[noreturn]] void malformed(const AstNode& n, const std::string& what) const;

  const SyntaxTree& tree_;
  Interpreter& in_;
  std::set<std::string> compiling_;
  std::unordered_map<int, int> statements_;
  std::unordered_map<int, int> blocks_;
};

// Lowers a parsed tree in structural mode (no vectors).
struct StructuralRun {
  std::unique_ptr<Interpreter> interp;
  std::unordered_map<int, int> statement_counts;
  std::unordered_map<int, int> block_counts;
};

StructuralRun run_structural(const SyntaxTree& tree, InterpreterOptions options = {});

}  // namespace ni
