#pragma once

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "exa/bitstream.hpp"
#include "exa/bytes.hpp"
#include "exa/code_table.hpp"
#include "exa/contour.hpp"
#include "exa/default_code_table.hpp"
#include "exa/octree_codec.hpp"
#include "exa/volume_io.hpp"

namespace exa {

using SectionTag = std::array<char, 4>;

inline constexpr SectionTag kTopo{'T', 'O', 'P', 'O'};
inline constexpr SectionTag kAmbg{'A', 'M', 'B', 'G'};
inline constexpr SectionTag kPrec{'P', 'R', 'E', 'C'};
inline constexpr SectionTag kDpos{'D', 'P', 'O', 'S'};
inline constexpr SectionTag kDnrm{'D', 'N', 'R', 'M'};
inline constexpr SectionTag kFeat{'F', 'E', 'A', 'T'};
inline constexpr SectionTag kAocc{'A', 'O', 'C', 'C'};

inline constexpr std::array<std::uint8_t, 4> kExaMagic{'E', 'X', 'A', 0x34};
inline constexpr std::uint32_t kExaVersion = 1;

struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string tag_string(const SectionTag& t) { return std::string(t.begin(), t.end()); }

struct ExaHeader {
  std::uint32_t version = kExaVersion;
  Dims dims;
  float tau = 0;
  std::uint8_t precision = 8;
  TableHash table_hash{};
  bool operator==(const ExaHeader&) const = default;
};

struct ExaSection {
  SectionTag tag{};
  std::vector<std::uint8_t> data;
  bool operator==(const ExaSection&) const = default;
};

struct ExaContainer {
  ExaHeader header;
  std::vector<ExaSection> sections;

  bool operator==(const ExaContainer&) const = default;

  const ExaSection* find(const SectionTag& t) const {
    for (const auto& s : sections)
      if (s.tag == t) return &s;
    return nullptr;
  }
  const std::vector<std::uint8_t>& section(const SectionTag& t) const {
    const ExaSection* s = find(t);
    if (!s) throw FormatError("missing section " + tag_string(t));
    return s->data;
  }
  // Replaces an existing section or appends a new one.
  void set(const SectionTag& t, std::vector<std::uint8_t> data) {
    for (auto& s : sections)
      if (s.tag == t) {
        s.data = std::move(data);
        return;
      }
    sections.push_back({t, std::move(data)});
  }
};

inline void check_precision(int n) {
  if (n < 1 || n > 16) throw std::invalid_argument("precision must be in [1, 16]");
}

inline ExaContainer exa_encode(const ContourData& c, const CodeTable& table = default_code_table()) {
  check_precision(c.precision);
  ExaContainer out;
  out.header.dims = c.dims;
  out.header.tau = c.tau;
  out.header.precision = static_cast<std::uint8_t>(c.precision);
  out.header.table_hash = table.hash();
  out.set(kTopo, encode_topology(c.signs, table));
  BitWriter amb;
  for (const auto& f : c.facets) amb.put_bit(f.connected);
  out.set(kAmbg, amb.bytes());
  BitWriter prec;
  for (const auto& e : c.edges) prec.put_bits(e.q, c.precision);
  out.set(kPrec, prec.bytes());
  return out;
}

inline ExaContainer exa_encode(const Volume3D& vol, float tau, int precision = 8,
                               const CodeTable& table = default_code_table()) {
  check_precision(precision);
  return exa_encode(extract_contour(vol, tau, precision), table);
}

inline ContourData exa_decode(const ExaContainer& x, const CodeTable& table = default_code_table()) {
  if (x.header.table_hash != table.hash()) throw FormatError("code table hash mismatch");
  check_precision(x.header.precision);
  ContourData c;
  c.dims = x.header.dims;
  c.tau = x.header.tau;
  c.precision = x.header.precision;
  if (c.dims.nx == 0 || c.dims.ny == 0 || c.dims.nz == 0) throw FormatError("container has empty dims");
  c.signs = decode_topology(x.section(kTopo), c.dims, table);
  derive_active_sets(c);
  const auto& amb = x.section(kAmbg);
  BitReader ra(amb);
  for (auto& f : c.facets) f.connected = ra.get_bit();
  const auto& prec = x.section(kPrec);
  BitReader rp(prec);
  for (auto& e : c.edges) e.q = static_cast<std::uint16_t>(rp.get_bits(c.precision));
  return c;
}

// Layout: magic, version u32, dims 3 x u32, tau f32, precision u8, table hash
// [16], section count u32, then per section {tag[4], offset u64, length u64}
// with absolute offsets, then the section payloads in table order.
inline std::vector<std::uint8_t> exa_serialize(const ExaContainer& x) {
  ByteWriter w;
  w.raw(kExaMagic.data(), 4);
  w.u32(x.header.version);
  w.u32(static_cast<std::uint32_t>(x.header.dims.nx));
  w.u32(static_cast<std::uint32_t>(x.header.dims.ny));
  w.u32(static_cast<std::uint32_t>(x.header.dims.nz));
  w.f32(x.header.tau);
  w.u8(x.header.precision);
  w.raw(x.header.table_hash.data(), 16);
  w.u32(static_cast<std::uint32_t>(x.sections.size()));
  std::uint64_t offset = w.size() + x.sections.size() * 20;
  for (const auto& s : x.sections) {
    w.raw(s.tag.data(), 4);
    w.u64(offset);
    w.u64(s.data.size());
    offset += s.data.size();
  }
  for (const auto& s : x.sections) w.bytes(s.data);
  return w.take();
}

inline ExaContainer exa_parse(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes);
  ExaContainer x;
  try {
    std::array<std::uint8_t, 4> magic{};
    r.raw(magic.data(), 4);
    if (magic != kExaMagic) throw FormatError("bad magic: not an EXA file");
    x.header.version = r.u32();
    if (x.header.version != kExaVersion) throw FormatError("unsupported EXA version " + std::to_string(x.header.version));
    x.header.dims.nx = r.u32();
    x.header.dims.ny = r.u32();
    x.header.dims.nz = r.u32();
    x.header.tau = r.f32();
    x.header.precision = r.u8();
    r.raw(x.header.table_hash.data(), 16);
    const std::uint32_t n = r.u32();
    if (static_cast<std::uint64_t>(n) * 20 > r.remaining()) throw FormatError("section table exceeds file size");
    for (std::uint32_t i = 0; i < n; ++i) {
      ExaSection s;
      r.raw(s.tag.data(), 4);
      const std::uint64_t off = r.u64(), len = r.u64();
      if (off > bytes.size() || len > bytes.size() - off) throw FormatError("section " + tag_string(s.tag) + " out of bounds");
      s.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.begin() + static_cast<std::ptrdiff_t>(off + len));
      x.sections.push_back(std::move(s));
    }
  } catch (const StreamError&) {
    throw FormatError("truncated EXA header");
  }
  return x;
}

inline void exa_write(const std::filesystem::path& path, const ExaContainer& x) {
  const auto bytes = exa_serialize(x);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("short write to " + path.string());
}

// Reads a container; when `table` is given its hash must match the file.
inline ExaContainer exa_read(const std::filesystem::path& path, const CodeTable* table = &default_code_table()) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  ExaContainer x = exa_parse(bytes);
  if (table && x.header.table_hash != table->hash()) throw FormatError("code table hash mismatch in " + path.string());
  return x;
}

}  // namespace exa
