// Writes the default code table include file.
#include <cstdio>
#include <fstream>
#include <iostream>

#include "exa/table_corpus.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: gen_code_table <out.inc>\n";
    return 2;
  }
  const exa::CodeTable t = exa::build_code_table(exa::table_corpus_counts());
  std::ofstream os(argv[1]);
  if (!os) {
    std::cerr << "cannot open " << argv[1] << "\n";
    return 1;
  }
  os << "// Generated by gen_code_table. Ranks indexed by context * 256 + child.\n";
  const auto& r = t.ranks();
  for (std::size_t i = 0; i < r.size(); ++i) {
    os << static_cast<int>(r[i]) << ',';
    if (i % 32 == 31) os << '\n';
  }
  char hex[33];
  for (int i = 0; i < 16; ++i) std::snprintf(hex + 2 * i, 3, "%02x", t.hash()[i]);
  std::cout << "table hash " << hex << "\n";
  return 0;
}
