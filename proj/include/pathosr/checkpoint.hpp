#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include <torch/torch.h>

namespace pathosr {

/// Single-file container of named tensors.
///
/// Layout (little-endian):
///   magic "PSRBLOB\0" | u32 format version | u64 record count
///   per record: u32 name length | name bytes | u8 dtype | u32 ndim |
///               i64 dims[ndim] | u64 byte count | raw bytes
///   u64 FNV-1a checksum of everything before it
///
/// dtype codes: 0 = f32, 1 = f64, 2 = i64, 3 = u8. Text entries are stored
/// as u8 tensors.
class BlobArchive {
 public:
  static constexpr std::uint32_t kFormatVersion = 1;

  void put(const std::string& name, const torch::Tensor& tensor);
  void put_text(const std::string& name, const std::string& text);

  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  /// Throws CheckpointError for a missing entry.
  const torch::Tensor& tensor(const std::string& name) const;
  std::string text(const std::string& name) const;
  const std::map<std::string, torch::Tensor>& entries() const noexcept { return entries_; }

  /// Writes to a temporary sibling and renames it into place.
  void save(const std::filesystem::path& path) const;

  /// Reads and validates the whole file before returning; throws
  /// CheckpointError on bad magic, version mismatch, truncation or checksum failure.
  static BlobArchive load(const std::filesystem::path& path);

 private:
  std::map<std::string, torch::Tensor> entries_;
};

}  // namespace pathosr
