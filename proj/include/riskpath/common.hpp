#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace riskpath {

// Error hierarchy. Every error raised by the library derives from Error so
// callers can map families to exit codes without catching std::exception.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (bad records, dangling endpoints).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Graph construction failures (duplicate ids, dangling relation endpoints).
class BuildError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Unknown entity or relation id.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (weights, thresholds, alias collisions).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Snapshot or artifact could not be decoded.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Precondition violation inside a scoring formula.
class ScoringError : public Error {
 public:
  using Error::Error;
};

/// I/O failure that may succeed when retried.
class TransientError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Layers and phases

enum class Layer : std::uint8_t { Physical = 0, Social = 1, Economic = 2 };

inline constexpr std::array<Layer, 3> kAllLayers = {Layer::Physical, Layer::Social,
                                                    Layer::Economic};

inline constexpr std::string_view to_string(Layer layer) {
  switch (layer) {
    case Layer::Physical: return "physical";
    case Layer::Social: return "social";
    case Layer::Economic: return "economic";
  }
  return "?";
}

inline std::optional<Layer> parse_layer(std::string_view text) {
  if (text == "physical" || text == "Physical") return Layer::Physical;
  if (text == "social" || text == "Social") return Layer::Social;
  if (text == "economic" || text == "Economic") return Layer::Economic;
  return std::nullopt;
}

inline constexpr std::size_t layer_index(Layer layer) { return static_cast<std::size_t>(layer); }

enum class Phase : std::uint8_t { Acute = 0, Subacute = 1, Chronic = 2 };

inline constexpr std::array<Phase, 3> kAllPhases = {Phase::Acute, Phase::Subacute, Phase::Chronic};

inline constexpr std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::Acute: return "acute";
    case Phase::Subacute: return "subacute";
    case Phase::Chronic: return "chronic";
  }
  return "?";
}

inline std::optional<Phase> parse_phase(std::string_view text) {
  if (text == "acute") return Phase::Acute;
  if (text == "subacute") return Phase::Subacute;
  if (text == "chronic") return Phase::Chronic;
  return std::nullopt;
}

/// Subset of {Acute, Subacute, Chronic} packed into three bits.
class PhaseSet {
 public:
  constexpr PhaseSet() = default;
  constexpr explicit PhaseSet(std::uint8_t bits) : bits_(bits & 0x7u) {}
  constexpr PhaseSet(std::initializer_list<Phase> phases) {
    for (Phase p : phases) insert(p);
  }

  constexpr void insert(Phase p) { bits_ |= bit(p); }
  constexpr bool contains(Phase p) const { return (bits_ & bit(p)) != 0; }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::uint8_t bits() const { return bits_; }
  constexpr PhaseSet operator|(PhaseSet other) const { return PhaseSet(bits_ | other.bits_); }
  constexpr PhaseSet& operator|=(PhaseSet other) {
    bits_ |= other.bits_;
    return *this;
  }
  constexpr bool operator==(const PhaseSet&) const = default;

 private:
  static constexpr std::uint8_t bit(Phase p) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(p));
  }
  std::uint8_t bits_ = 0;
};

// ---------------------------------------------------------------------------
// Strongly typed identifiers

template <typename Tag>
class StrongId {
 public:
  StrongId() = default;
  explicit StrongId(std::string value) : value_(std::move(value)) {}

  const std::string& str() const { return value_; }
  bool empty() const { return value_.empty(); }

  auto operator<=>(const StrongId&) const = default;
  bool operator==(const StrongId&) const = default;

 private:
  std::string value_;
};

struct EntityIdTag {};
struct RelationIdTag {};
using EntityId = StrongId<EntityIdTag>;
using RelationId = StrongId<RelationIdTag>;

// ---------------------------------------------------------------------------
// Hashing

/// 64-bit FNV-1a. Used for content fingerprints and snapshot checksums.
class Fnv1a64 {
 public:
  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      state_ ^= c;
      state_ *= 0x100000001b3ULL;
    }
  }
  void update_u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      state_ ^= static_cast<unsigned char>(v >> (8 * i));
      state_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t digest() const { return state_; }
  std::string hex() const {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) out[static_cast<std::size_t>(15 - i)] = kDigits[(state_ >> (4 * i)) & 0xF];
    return out;
  }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::string fnv1a_hex(std::string_view bytes) {
  Fnv1a64 h;
  h.update(bytes);
  return h.hex();
}

}  // namespace riskpath

template <typename Tag>
struct std::hash<riskpath::StrongId<Tag>> {
  std::size_t operator()(const riskpath::StrongId<Tag>& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
