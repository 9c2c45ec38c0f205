#ifndef CFSPLIT_BLOCK_HPP_
#define CFSPLIT_BLOCK_HPP_

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "cfsplit/errors.hpp"

namespace cfsplit {

// Partition of [0, total_dim) into m contiguous blocks.
class BlockPartition {
 public:
  explicit BlockPartition(std::vector<std::size_t> sizes);

  std::size_t num_blocks() const { return sizes_.size(); }
  std::size_t total_dim() const { return total_; }
  std::size_t block_size(std::size_t i) const { return sizes_.at(i); }
  std::size_t offset(std::size_t i) const { return offsets_.at(i); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }
  const std::vector<std::size_t>& offsets() const { return offsets_; }

  bool operator==(const BlockPartition& o) const { return sizes_ == o.sizes_; }

  // m scalar blocks
  static BlockPartition scalar(std::size_t m) {
    return BlockPartition(std::vector<std::size_t>(m, 1));
  }
  // one block of size n
  static BlockPartition single(std::size_t n) {
    return BlockPartition(std::vector<std::size_t>{n});
  }
  // n entries split into blocks of size block (last blocks absorb remainder,
  // matching "roughly 50 features per coordinate")
  static BlockPartition chunked(std::size_t n, std::size_t block);

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;
  std::size_t total_ = 0;
};

using PartitionPtr = std::shared_ptr<const BlockPartition>;

inline PartitionPtr make_partition(std::vector<std::size_t> sizes) {
  return std::make_shared<const BlockPartition>(std::move(sizes));
}

// Real vector carved into the blocks of a shared partition.
class BlockVector {
 public:
  BlockVector() = default;  // empty; assign before use
  explicit BlockVector(PartitionPtr partition);
  BlockVector(PartitionPtr partition, std::vector<double> data);

  const BlockPartition& partition() const { return *partition_; }
  PartitionPtr partition_ptr() const { return partition_; }
  std::size_t dim() const { return data_.size(); }
  std::size_t num_blocks() const { return partition_->num_blocks(); }

  std::span<double> block(std::size_t i) {
    return {data_.data() + partition_->offset(i), partition_->block_size(i)};
  }
  std::span<const double> block(std::size_t i) const {
    return {data_.data() + partition_->offset(i), partition_->block_size(i)};
  }
  std::span<double> all() { return data_; }
  std::span<const double> all() const { return data_; }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::vector<double>& raw() { return data_; }
  const std::vector<double>& raw() const { return data_; }

 private:
  PartitionPtr partition_;
  std::vector<double> data_;
};

}  // namespace cfsplit

#endif  // CFSPLIT_BLOCK_HPP_
