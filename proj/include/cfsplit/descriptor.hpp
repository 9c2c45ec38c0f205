#ifndef CFSPLIT_DESCRIPTOR_HPP_
#define CFSPLIT_DESCRIPTOR_HPP_

#include <cstdint>
#include <string>

namespace cfsplit {

// Separability classes C1/C2/C3.
enum class SepClass : std::uint8_t {
  kSeparable,       // (Tx)_i depends on x_i only
  kNearlySeparable, // (Tx)_i depends on a few blocks
  kNonSeparable,
};

// Coordinate-friendliness classes.
//   kType1       : (Tx)_i at 1/m of the full cost, no maintained state (F1)
//   kType2       : maintaining Tx makes the refresh 1/m of the full cost (F2)
//   kCfWithCache : CF via some maintained quantity M(x) other than/besides Tx
//   kCheap       : cheap factor inside a composition (not CF by itself)
//   kNone        : no CF structure declared
enum class CfClass : std::uint8_t {
  kType1,
  kType2,
  kCfWithCache,
  kCheap,
  kNone,
};

inline bool is_cf(CfClass c) {
  return c == CfClass::kType1 || c == CfClass::kType2 ||
         c == CfClass::kCfWithCache;
}

const char* to_string(SepClass c);
const char* to_string(CfClass c);

// Structural summary of an operator: separability, CF class, and abstract
// cost estimates (counted operations for one full application and for one
// coordinate update including cache refresh).
struct OperatorDescriptor {
  SepClass sep = SepClass::kNonSeparable;
  CfClass cf = CfClass::kNone;
  std::uint64_t full_cost = 0;
  std::uint64_t coord_cost = 0;

  bool declared_cf() const { return is_cf(cf); }
  // CF cost contract: coord_cost * m <= c * full_cost (default c = 4)
  bool cost_bound_holds(std::size_t m, double c = 4.0) const {
    return static_cast<double>(coord_cost) * static_cast<double>(m) <=
           c * static_cast<double>(full_cost);
  }
};

// Composition calculus for T_outer ∘ T_inner.
//
// Separability inherits the weaker class; the nearly∘nearly cell resolves
// conservatively to non-separable unless the caller certifies the composed
// sparsity pattern stays thin (sparsity_certificate).
SepClass compose_sep(SepClass outer, SepClass inner,
                     bool sparsity_certificate = false);

// CF class of the composition; combinations not covered by a rule map to
// kNone.  Total function.
CfClass compose_cf(const OperatorDescriptor& outer,
                   const OperatorDescriptor& inner);

OperatorDescriptor classify_composition(const OperatorDescriptor& outer,
                                        const OperatorDescriptor& inner,
                                        std::size_t m = 0,
                                        bool sparsity_certificate = false);

}  // namespace cfsplit

#endif  // CFSPLIT_DESCRIPTOR_HPP_
