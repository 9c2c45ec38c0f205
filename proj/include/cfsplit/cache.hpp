#ifndef CFSPLIT_CACHE_HPP_
#define CFSPLIT_CACHE_HPP_

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cfsplit/errors.hpp"

namespace cfsplit {

// Named auxiliary quantities (Ax, A^T s, residuals, ...) kept alongside the
// iterate and refreshed incrementally on every coordinate commit.
class MaintainedCache {
 public:
  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  std::span<double> entry(const std::string& name) {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw CacheInvalidError("cache entry missing: " + name);
    return it->second;
  }
  std::span<const double> entry(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end())
      throw CacheInvalidError("cache entry missing: " + name);
    return it->second;
  }
  double& scalar(const std::string& name) {
    auto e = entry(name);
    if (e.size() != 1) throw CacheInvalidError("cache entry not scalar: " + name);
    return e[0];
  }
  double scalar(const std::string& name) const {
    auto e = entry(name);
    if (e.size() != 1) throw CacheInvalidError("cache entry not scalar: " + name);
    return e[0];
  }

  std::vector<double>& create(const std::string& name, std::size_t n) {
    auto& v = entries_[name];
    v.assign(n, 0.0);
    return v;
  }

  bool empty() const { return entries_.empty(); }
  void clear() { entries_.clear(); epoch_ = 0; }

  std::uint64_t epoch() const { return epoch_; }
  void bump_epoch() { ++epoch_; }

  const std::map<std::string, std::vector<double>>& entries() const {
    return entries_;
  }

 private:
  std::map<std::string, std::vector<double>> entries_;
  std::uint64_t epoch_ = 0;
};

}  // namespace cfsplit

#endif  // CFSPLIT_CACHE_HPP_
