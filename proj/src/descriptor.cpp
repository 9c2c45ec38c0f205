#include "cfsplit/descriptor.hpp"

namespace cfsplit {

const char* to_string(SepClass c) {
  switch (c) {
    case SepClass::kSeparable: return "separable";
    case SepClass::kNearlySeparable: return "nearly-separable";
    case SepClass::kNonSeparable: return "non-separable";
  }
  return "?";
}

const char* to_string(CfClass c) {
  switch (c) {
    case CfClass::kType1: return "type1";
    case CfClass::kType2: return "type2";
    case CfClass::kCfWithCache: return "cf-with-cache";
    case CfClass::kCheap: return "cheap";
    case CfClass::kNone: return "none";
  }
  return "?";
}

SepClass compose_sep(SepClass outer, SepClass inner, bool sparsity_certificate) {
  if (outer == SepClass::kNonSeparable || inner == SepClass::kNonSeparable)
    return SepClass::kNonSeparable;
  if (outer == SepClass::kSeparable) return inner;
  if (inner == SepClass::kSeparable) return outer;
  // nearly ∘ nearly: composition widens the dependency pattern, so without a
  // structural certificate we never over-claim
  return sparsity_certificate ? SepClass::kNearlySeparable
                              : SepClass::kNonSeparable;
}

CfClass compose_cf(const OperatorDescriptor& outer,
                   const OperatorDescriptor& inner) {
  const bool outer_sep_like = outer.sep == SepClass::kSeparable ||
                              outer.sep == SepClass::kNearlySeparable;
  // row 5: (C1 ∪ C2) ∘ F stays CF; (C1 ∪ C2) ∘ F1 stays F1
  if (outer_sep_like && is_cf(inner.cf)) {
    return inner.cf == CfClass::kType1 ? CfClass::kType1 : CfClass::kCfWithCache;
  }
  // row 6: F ∘ C1 stays CF; F2 ∘ C1 stays F2
  if (inner.sep == SepClass::kSeparable && is_cf(outer.cf)) {
    return outer.cf == CfClass::kType2 ? CfClass::kType2 : CfClass::kCfWithCache;
  }
  // row 7: F1 ∘ F2 is CF (maintain the inner image)
  if (outer.cf == CfClass::kType1 && inner.cf == CfClass::kType2)
    return CfClass::kCfWithCache;
  // row 8: cheap ∘ F2 is CF
  if (outer.cf == CfClass::kCheap && inner.cf == CfClass::kType2)
    return CfClass::kCfWithCache;
  // row 9: F1 ∘ cheap stays F1
  if (outer.cf == CfClass::kType1 && inner.cf == CfClass::kCheap)
    return CfClass::kType1;
  return CfClass::kNone;
}

OperatorDescriptor classify_composition(const OperatorDescriptor& outer,
                                        const OperatorDescriptor& inner,
                                        std::size_t m,
                                        bool sparsity_certificate) {
  OperatorDescriptor d;
  d.sep = compose_sep(outer.sep, inner.sep, sparsity_certificate);
  d.cf = compose_cf(outer, inner);
  // a separable composite is trivially Type-I and Type-II; keep the stronger
  // claim if the cell rules were silent
  if (d.sep == SepClass::kSeparable && !is_cf(d.cf)) d.cf = CfClass::kType1;
  d.full_cost = outer.full_cost + inner.full_cost;
  if (is_cf(d.cf) && m > 0) {
    d.coord_cost = d.full_cost / m + 1;
  } else {
    d.coord_cost = d.full_cost;
  }
  return d;
}

}  // namespace cfsplit
