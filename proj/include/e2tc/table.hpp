#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace e2tc {

using Cell = std::variant<std::int64_t, double, std::string>;

/// Column-named rows destined for CSV output.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
};

}  // namespace e2tc
