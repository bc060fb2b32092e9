#pragma once

// Candidate statements for the set-cover formulation of synthesis.
//
// A program in normal form is a tree of loop/reflect contexts whose leaves are
// primitive statements. Each primitive emits a fixed subset of the spec (its
// "atom"), so a consistent program is a choice of (context, atom) items whose
// atoms cover the spec. Contexts with the same header under the same parent
// can always be merged, so each context node is paid for once.

#include <array>
#include <bit>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "gsynth/dsl.hpp"
#include "gsynth/synth.hpp"

namespace gsynth::detail {

inline constexpr int kMaxSpecSize = 128;

struct Mask {
  std::uint64_t w[2] = {0, 0};

  void set(int i) { w[i >> 6] |= std::uint64_t{1} << (i & 63); }
  bool test(int i) const { return (w[i >> 6] >> (i & 63)) & 1u; }
  int count() const { return std::popcount(w[0]) + std::popcount(w[1]); }
  bool none() const { return (w[0] | w[1]) == 0; }
  bool subsetOf(const Mask& o) const {
    return (w[0] & ~o.w[0]) == 0 && (w[1] & ~o.w[1]) == 0;
  }
  Mask operator&(const Mask& o) const { return {{w[0] & o.w[0], w[1] & o.w[1]}}; }
  Mask operator|(const Mask& o) const { return {{w[0] | o.w[0], w[1] | o.w[1]}}; }
  Mask without(const Mask& o) const { return {{w[0] & ~o.w[0], w[1] & ~o.w[1]}}; }
  Mask& operator|=(const Mask& o) {
    w[0] |= o.w[0];
    w[1] |= o.w[1];
    return *this;
  }
  friend bool operator==(const Mask&, const Mask&) = default;
  friend auto operator<=>(const Mask& a, const Mask& b) {
    return std::tie(a.w[1], a.w[0]) <=> std::tie(b.w[1], b.w[0]);
  }

  template <typename F>
  void forEach(F&& f) const {
    for (int k = 0; k < 2; ++k) {
      std::uint64_t x = w[k];
      while (x) {
        f(k * 64 + std::countr_zero(x));
        x &= x - 1;
      }
    }
  }
};

enum class NodeKind : std::uint8_t { Loop, Reflect };

struct ContextNode {
  int parent = -1;      // -1: top level
  int parentSlot = 0;   // 0 body, 1 guard of the parent loop
  NodeKind kind = NodeKind::Loop;
  Expression bound{};   // loops
  Axis axis{};          // reflects
  int units = 1;        // node cost in whole units (2 for constant bound 2)
  std::uint64_t coeff = 0;
  bool boundRefsParent = false;
  Mask cover;           // union of the atoms below this node
};

struct Item {
  Mask cover;
  std::uint64_t coeff = 0;
  int node = -1;        // innermost context, -1 for top level
  int slot = 0;         // 0 body, 1 guard (loop contexts)
  // Bit 0: references the innermost context's loop variable.
  // Bit 1: references the enclosing context's loop variable.
  std::uint8_t refs = 0;
  Primitive prim;
};

struct Universe {
  std::vector<DrawCommand> commands;  // spec in canonical order
  std::vector<ContextNode> nodes;
  std::vector<Item> items;
  int coeffMin = 0;
  std::uint64_t workUnits = 0;        // atom candidates examined

  int coeffBit(int v) const { return v - coeffMin; }
};

/// Builds every non-dominated item for the spec within the subspace.
Universe buildUniverse(const Spec& spec, const SearchSubspace& sigma,
                       const DslLimits& limits);

/// Sort key of a statement within its block.
std::string statementKey(const Statement& s);

/// Assembles the program for a set of chosen items.
Program assemble(const Universe& u, const std::vector<int>& chosen);

}  // namespace gsynth::detail
