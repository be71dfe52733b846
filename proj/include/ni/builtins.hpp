#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ni {

// Built-in functions and constants whose signatures come from a learned
// embedding table instead of the guesser. Row indices follow this order.
inline constexpr std::array<const char*, 69> kBuiltinNames = {
    "and",
    "fun_obj_val_default",
    "val_obj_val_default",
    "const_obj_tensor_default",
    "__try__",
    "__except__",
    "__tuple_of__",
    "__compile_function__",
    "__dictionary_key_value__",
    "==",
    "<",
    "-",
    "__if__",
    "__dictionary_of__",
    "__else__",
    "__list_of__",
    "%",
    "not",
    "__keyword_argument__",
    "__get_attr__",
    "__subscript__",
    "__list_splat__",
    "__dictionary_splat__",
    "+",
    "in",
    "__for_in__",
    "__default_parameter__",
    "+=",
    "__end_for_iterator__",
    "__unpack_k__",
    "__slice__",
    "is",
    "__generator__",
    "*",
    "/",
    "<=",
    ">",
    "__conditional_expression__",
    "or",
    "!=",
    "__subscript_assign__",
    ">=",
    "__expression_list_of__",
    "|=",
    "**",
    "__set_of__",
    "__while__",
    "__list_comprehension__",
    "__if_clause__",
    ">>",
    "&",
    "<<",
    "|",
    "__dictionary_comprehension__",
    "-=",
    "//",
    "__finally__",
    "*=",
    "&=",
    "/=",
    "^",
    ">>=",
    "~",
    "__parenthesis__",
    "<>",
    "<<=",
    "%=",
    "^=",
    "//=",
};

class BuiltinTable {
 public:
  BuiltinTable();

  std::size_t size() const { return names_.size(); }
  // Throws InternalFault for names outside the table.
  int index(std::string_view name) const;
  std::optional<int> find(std::string_view name) const;
  const std::string& name(int index) const { return names_.at(static_cast<std::size_t>(index)); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
};

const BuiltinTable& builtin_table();

}  // namespace ni
