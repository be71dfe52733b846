#include "ni/builtins.hpp"

#include <algorithm>

#include "ni/errors.hpp"

namespace ni {

BuiltinTable::BuiltinTable() : names_(kBuiltinNames.begin(), kBuiltinNames.end()) {}

std::optional<int> BuiltinTable::find(std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) return std::nullopt;
  return static_cast<int>(it - names_.begin());
}

int BuiltinTable::index(std::string_view name) const {
  auto i = find(name);
  if (!i) throw InternalFault("unknown builtin " + std::string(name));
  return *i;
}

const BuiltinTable& builtin_table() {
  static const BuiltinTable table;
  return table;
}

}  // namespace ni
