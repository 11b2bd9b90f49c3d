#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "pathosr/image.hpp"

namespace pathosr {

enum class Split { kTrain, kTest };

const char* to_string(Split split) noexcept;

/// One manifest line: where the HR image and optional mask live.
struct RecordDescriptor {
  std::string id;
  std::filesystem::path hr_path;
  std::optional<std::filesystem::path> mask_path;
  Split split = Split::kTrain;
};

/// A materialised record. `lr` is synthesised from `hr` at the index scale.
struct SamplePair {
  std::string id;
  Image hr;
  Image lr;
  RoiMask mask;
  Split split = Split::kTrain;
};

struct DatasetIndex {
  std::vector<RecordDescriptor> records;
  int linear_scale = 4;
  int patch_size = 64;

  std::size_t count(Split split) const noexcept;
  /// Copy of the index restricted to one split.
  DatasetIndex subset(Split split) const;
};

/// Reads a JSON Lines manifest: {"id": str, "hr": path, "mask": path|null, "split": "train"|"test"}.
/// Relative paths resolve against the manifest's directory. Blank lines are ignored.
/// Throws ParseError (with line number) for malformed lines or duplicate ids and
/// LoadError naming the record id when a referenced file does not exist.
DatasetIndex load_manifest(const std::filesystem::path& path, int linear_scale = 4, int patch_size = 64);

/// Loads HR image and mask for one record and synthesises its LR counterpart.
/// A record without a mask gets an all-ones mask.
SamplePair load_sample(const RecordDescriptor& record, int linear_scale);

/// Lazily loads samples and memoises them, so each LR image is synthesised once.
/// Single consumer; not thread-safe.
class SampleCache {
 public:
  explicit SampleCache(DatasetIndex index) : index_(std::move(index)) {}

  const SamplePair& get(std::size_t record);
  const DatasetIndex& index() const noexcept { return index_; }
  std::size_t cached() const noexcept { return cache_.size(); }

 private:
  DatasetIndex index_;
  std::unordered_map<std::size_t, std::unique_ptr<SamplePair>> cache_;
};

/// Epoch-based sampling without replacement. Within an epoch each record is
/// drawn once; a request larger than what is left of the epoch returns the
/// short remainder, except when `n` exceeds the dataset size, in which case
/// the draw wraps into freshly reshuffled epochs until `n` indices are collected.
class BatchSampler {
 public:
  BatchSampler(std::size_t record_count, std::uint64_t seed);

  std::vector<std::size_t> next(std::size_t n);

  std::size_t epoch() const noexcept { return epoch_; }

  /// Opaque text snapshot of the generator, permutation and cursor.
  std::string state() const;
  void restore(const std::string& state);

 private:
  void reshuffle();

  std::size_t count_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t epoch_ = 0;
};

/// Number of batches (last one possibly short) that make up one epoch.
std::size_t batches_per_epoch(std::size_t records, std::size_t batch_size);

/// Batches of materialised samples drawn from one split of an index.
class BatchIterator {
 public:
  BatchIterator(const DatasetIndex& index, Split split, std::size_t batch_size, std::uint64_t seed);

  std::vector<const SamplePair*> next();

  BatchSampler& sampler() noexcept { return sampler_; }
  const BatchSampler& sampler() const noexcept { return sampler_; }
  SampleCache& cache() noexcept { return cache_; }

 private:
  SampleCache cache_;
  BatchSampler sampler_;
  std::size_t batch_size_;
};

}  // namespace pathosr
