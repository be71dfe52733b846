#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ni {

// A broken invariant inside the engine (shape mismatch, empty-stack pop,
// non-finite values). Never a property of the input program.
class InternalFault : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(std::size_t offset, int line, int column, const std::string& message)
      : std::runtime_error(message), offset_(offset), line_(line), column_(column) {}

  std::size_t offset() const { return offset_; }
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  std::size_t offset_;
  int line_;
  int column_;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CodegenErrorKind { UnsupportedConstruct, MalformedNode };

class CodegenError : public std::runtime_error {
 public:
  CodegenError(int node_id, CodegenErrorKind kind, const std::string& message)
      : std::runtime_error(message), node_id_(node_id), kind_(kind) {}

  int node_id() const { return node_id_; }
  CodegenErrorKind kind() const { return kind_; }

 private:
  int node_id_;
  CodegenErrorKind kind_;
};

// Raised inside a script when the batch has used up its lambda-call budget.
class LambdaRefused : public std::runtime_error {
 public:
  LambdaRefused() : std::runtime_error("lambda call budget exhausted") {}
};

}  // namespace ni
