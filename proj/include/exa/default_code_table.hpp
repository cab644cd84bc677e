#pragma once

#include <cstdint>
#include <vector>

#include "exa/code_table.hpp"

namespace exa {

inline const CodeTable& default_code_table() {
  static const CodeTable table = CodeTable::from_ranks(std::vector<std::uint8_t>{
#include "exa/default_code_table.inc"
  });
  return table;
}

}  // namespace exa
