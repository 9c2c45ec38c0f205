#include "cfsplit/block.hpp"

#include "cfsplit/kernels.hpp"

namespace cfsplit {

BlockPartition::BlockPartition(std::vector<std::size_t> sizes)
    : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw InvalidPartitionError("partition: empty size list");
  offsets_.reserve(sizes_.size());
  for (std::size_t s : sizes_) {
    if (s == 0) throw InvalidPartitionError("partition: zero-sized block");
    offsets_.push_back(total_);
    total_ += s;
  }
}

BlockPartition BlockPartition::chunked(std::size_t n, std::size_t block) {
  if (n == 0 || block == 0) throw InvalidPartitionError("chunked: empty");
  if (block >= n) return single(n);
  const std::size_t m = n / block;  // number of blocks
  const std::size_t rem = n % block;
  // rem leftover entries spread one each over the trailing blocks
  std::vector<std::size_t> sizes(m, block);
  for (std::size_t i = 0; i < rem; ++i) sizes[m - 1 - i] += 1;
  return BlockPartition(std::move(sizes));
}

BlockVector::BlockVector(PartitionPtr partition)
    : partition_(std::move(partition)), data_(partition_->total_dim(), 0.0) {}

BlockVector::BlockVector(PartitionPtr partition, std::vector<double> data)
    : partition_(std::move(partition)), data_(std::move(data)) {
  if (data_.size() != partition_->total_dim())
    throw DimensionError("BlockVector: data length does not match partition");
}

}  // namespace cfsplit
