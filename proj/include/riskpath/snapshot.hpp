#pragma once

// Binary graph snapshot.
//
// Layout (all integers little-endian):
//
//   "RPKG"                     4 bytes magic
//   u16 version                currently 1
//   u16 flags                  reserved, 0
//   "ENTS" u64 count           then per entity:
//       str id, str canonical_name, u8 layer, f64 severity (IEEE-754 bits),
//       u32 alias_count, str alias...
//   "RELS" u64 count           then per relation:
//       str id, str source, str predicate, str target, u8 phase_bits,
//       u32 doc_count, str doc_id...
//   "ADJC" u64 entity_count    then per entity (in id order):
//       u32 out_count, u32 relation_index..., u32 in_count, u32 relation_index...
//   u64 checksum               FNV-1a 64 over every preceding byte
//
// where str = u32 byte length followed by the UTF-8 bytes. Entities and
// relations appear sorted by id, so equal graphs produce identical bytes.
// The adjacency section is redundant with the relations; the loader rebuilds
// it and rejects the file if the stored copy disagrees.

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "riskpath/graph.hpp"

namespace riskpath {

inline constexpr char kSnapshotMagic[4] = {'R', 'P', 'K', 'G'};
inline constexpr std::uint16_t kSnapshotVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void raw(const void* data, std::size_t n) { buf_.append(static_cast<const char*>(data), n); }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.append(s);
  }
  std::string& buffer() { return buf_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
  }
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  void raw(void* out, std::size_t n) {
    need(n);
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  void tag(const char (&expected)[5]) {
    char got[4];
    raw(got, 4);
    if (std::memcmp(got, expected, 4) != 0)
      throw LoadError(std::string("snapshot: expected section '") + expected + "'");
  }
  // Guards count fields against absurd values before allocating.
  std::uint64_t count(std::size_t min_bytes_each) {
    std::uint64_t n = u64();
    if (min_bytes_each > 0 && n > remaining() / min_bytes_each)
      throw LoadError("snapshot: section count exceeds file size");
    return n;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > remaining()) throw LoadError("snapshot: unexpected end of data");
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::string_view data_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_snapshot(const KnowledgeGraph& graph) {
  detail::ByteWriter w;
  w.raw(kSnapshotMagic, 4);
  w.u16(kSnapshotVersion);
  w.u16(0);

  w.raw("ENTS", 4);
  w.u64(graph.entity_count());
  for (const Entity& e : graph.entities()) {
    w.str(e.id.str());
    w.str(e.canonical_name);
    w.u8(static_cast<std::uint8_t>(e.layer));
    w.f64(e.severity);
    w.u32(static_cast<std::uint32_t>(e.aliases.size()));
    for (const auto& a : e.aliases) w.str(a);
  }

  w.raw("RELS", 4);
  w.u64(graph.relation_count());
  for (const Relation& r : graph.relations()) {
    w.str(r.id.str());
    w.str(r.source.str());
    w.str(r.predicate);
    w.str(r.target.str());
    w.u8(r.phases.bits());
    w.u32(static_cast<std::uint32_t>(r.doc_ids.size()));
    for (const auto& d : r.doc_ids) w.str(d);
  }

  w.raw("ADJC", 4);
  w.u64(graph.entity_count());
  for (KnowledgeGraph::Index e = 0; e < graph.entity_count(); ++e) {
    auto out = graph.out_relations(e);
    w.u32(static_cast<std::uint32_t>(out.size()));
    for (auto r : out) w.u32(r);
    auto in = graph.in_relations(e);
    w.u32(static_cast<std::uint32_t>(in.size()));
    for (auto r : in) w.u32(r);
  }

  Fnv1a64 h;
  h.update(w.buffer());
  w.u64(h.digest());
  return std::move(w.buffer());
}

inline KnowledgeGraph decode_snapshot(std::string_view bytes) {
  if (bytes.size() < 4 + 2 + 2 + 8) throw LoadError("snapshot: file too short");
  if (std::memcmp(bytes.data(), kSnapshotMagic, 4) != 0) throw LoadError("snapshot: bad magic");

  detail::ByteReader header(bytes.substr(4, 2));
  if (std::uint16_t version = header.u16(); version != kSnapshotVersion)
    throw LoadError("snapshot: unsupported format version " + std::to_string(version) +
                    " (expected " + std::to_string(kSnapshotVersion) + ")");

  const std::string_view body = bytes.substr(0, bytes.size() - 8);
  detail::ByteReader trailer(bytes.substr(bytes.size() - 8));
  Fnv1a64 h;
  h.update(body);
  if (trailer.u64() != h.digest()) throw LoadError("snapshot: checksum mismatch (truncated or corrupt)");

  detail::ByteReader r(body.substr(8));
  r.tag("ENTS");
  std::vector<Entity> entities(r.count(4 + 4 + 1 + 8 + 4));
  for (Entity& e : entities) {
    e.id = EntityId(r.str());
    e.canonical_name = r.str();
    std::uint8_t layer = r.u8();
    if (layer > 2) throw LoadError("snapshot: invalid layer code");
    e.layer = static_cast<Layer>(layer);
    e.severity = r.f64();
    e.aliases.resize(r.u32());
    for (auto& a : e.aliases) a = r.str();
  }

  r.tag("RELS");
  std::vector<Relation> relations(r.count(4 * 4 + 1 + 4));
  for (Relation& rel : relations) {
    rel.id = RelationId(r.str());
    rel.source = EntityId(r.str());
    rel.predicate = r.str();
    rel.target = EntityId(r.str());
    std::uint8_t phases = r.u8();
    if (phases > 7) throw LoadError("snapshot: invalid phase bits");
    rel.phases = PhaseSet(phases);
    rel.doc_ids.resize(r.u32());
    for (auto& d : rel.doc_ids) d = r.str();
  }

  const std::size_t stored_relations = relations.size();
  KnowledgeGraph g;
  try {
    g = build_graph(std::move(entities), std::move(relations));
  } catch (const BuildError& e) {
    throw LoadError(std::string("snapshot: inconsistent content: ") + e.what());
  }
  if (g.relation_count() != stored_relations)
    throw LoadError("snapshot: duplicate relation triples");

  r.tag("ADJC");
  if (r.count(8) != g.entity_count()) throw LoadError("snapshot: adjacency entity count mismatch");
  auto check_list = [&](std::span<const KnowledgeGraph::Index> expected) {
    std::uint32_t n = r.u32();
    if (n != expected.size()) throw LoadError("snapshot: adjacency list mismatch");
    for (auto idx : expected)
      if (r.u32() != idx) throw LoadError("snapshot: adjacency list mismatch");
  };
  for (KnowledgeGraph::Index e = 0; e < g.entity_count(); ++e) {
    check_list(g.out_relations(e));
    check_list(g.in_relations(e));
  }
  if (r.remaining() != 0) throw LoadError("snapshot: trailing bytes after adjacency section");
  return g;
}

/// Writes atomically: the snapshot appears at `path` complete or not at all.
inline void save_snapshot(const KnowledgeGraph& graph, const std::filesystem::path& path) {
  const std::string bytes = encode_snapshot(graph);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw TransientError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw TransientError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw TransientError("cannot rename snapshot into place: " + ec.message());
}

inline KnowledgeGraph load_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open snapshot '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_snapshot(ss.str());
}

}  // namespace riskpath
