#include "pathosr/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <vector>

#include "pathosr/errors.hpp"

namespace pathosr {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'S', 'R', 'B', 'L', 'O', 'B', '\0'};

std::uint64_t fnv1a(const std::vector<char>& bytes, std::size_t n) {
  std::uint64_t h = 14695981039346656037ull;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(bytes[i]);
    h *= 1099511628211ull;
  }
  return h;
}

std::uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    case torch::kUInt8: return 3;
    default: throw CheckpointError("unsupported tensor dtype for archive");
  }
}

torch::ScalarType dtype_from_code(std::uint8_t c) {
  switch (c) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    case 3: return torch::kUInt8;
    default: throw CheckpointError("corrupt archive: unknown dtype code " + std::to_string(c));
  }
}

template <typename T>
void append(std::vector<char>& buf, const T& v) {
  const char* p = reinterpret_cast<const char*>(&v);
  buf.insert(buf.end(), p, p + sizeof(T));
}

class Reader {
 public:
  Reader(const std::vector<char>& buf, std::size_t end) : buf_(buf), end_(end) {}

  template <typename T>
  T read() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return v;
  }
  const char* take(std::size_t n) {
    if (n > end_ - pos_) throw CheckpointError("corrupt archive: truncated record");
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::vector<char>& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

}  // namespace

void BlobArchive::put(const std::string& name, const torch::Tensor& tensor) {
  dtype_code(tensor.scalar_type());
  entries_[name] = tensor.detach().cpu().contiguous().clone();
}

void BlobArchive::put_text(const std::string& name, const std::string& text) {
  auto t = torch::empty({static_cast<std::int64_t>(text.size())}, torch::kUInt8);
  if (!text.empty()) std::memcpy(t.data_ptr(), text.data(), text.size());
  entries_[name] = t;
}

const torch::Tensor& BlobArchive::tensor(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw CheckpointError("archive has no entry '" + name + "'");
  return it->second;
}

std::string BlobArchive::text(const std::string& name) const {
  const torch::Tensor& t = tensor(name);
  if (t.scalar_type() != torch::kUInt8) throw CheckpointError("archive entry '" + name + "' is not text");
  return {static_cast<const char*>(t.data_ptr()), static_cast<std::size_t>(t.numel())};
}

void BlobArchive::save(const std::filesystem::path& path) const {
  std::vector<char> buf(std::begin(kMagic), std::end(kMagic));
  append(buf, kFormatVersion);
  append(buf, static_cast<std::uint64_t>(entries_.size()));
  for (const auto& [name, t] : entries_) {
    append(buf, static_cast<std::uint32_t>(name.size()));
    buf.insert(buf.end(), name.begin(), name.end());
    append(buf, dtype_code(t.scalar_type()));
    append(buf, static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.sizes()) append(buf, static_cast<std::int64_t>(d));
    const std::uint64_t nbytes = static_cast<std::uint64_t>(t.numel()) * t.element_size();
    append(buf, nbytes);
    const char* data = static_cast<const char*>(t.data_ptr());
    buf.insert(buf.end(), data, data + nbytes);
  }
  append(buf, fnv1a(buf, buf.size()));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw CheckpointError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

BlobArchive BlobArchive::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  constexpr std::size_t kHeader = sizeof(kMagic) + sizeof(std::uint32_t) + sizeof(std::uint64_t);
  if (buf.size() < kHeader + sizeof(std::uint64_t) || std::memcmp(buf.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(path.string() + " is not a pathosr archive");
  }
  std::uint32_t version = 0;
  std::memcpy(&version, buf.data() + sizeof(kMagic), sizeof(version));
  if (version != kFormatVersion) {
    throw CheckpointError("unsupported archive format version " + std::to_string(version) + " in " +
                          path.string() + " (expected " + std::to_string(kFormatVersion) + ")");
  }
  const std::size_t body_end = buf.size() - sizeof(std::uint64_t);
  std::uint64_t stored = 0;
  std::memcpy(&stored, buf.data() + body_end, sizeof(stored));
  if (stored != fnv1a(buf, body_end)) throw CheckpointError("checksum mismatch in " + path.string());

  Reader r(buf, body_end);
  r.take(sizeof(kMagic) + sizeof(std::uint32_t));
  const auto count = r.read<std::uint64_t>();
  BlobArchive archive;
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.read<std::uint32_t>();
    std::string name(r.take(name_len), name_len);
    const auto dtype = dtype_from_code(r.read<std::uint8_t>());
    const auto ndim = r.read<std::uint32_t>();
    std::vector<std::int64_t> dims(ndim);
    for (auto& d : dims) d = r.read<std::int64_t>();
    const auto nbytes = r.read<std::uint64_t>();
    auto t = torch::empty(dims, dtype);
    if (nbytes != static_cast<std::uint64_t>(t.numel()) * t.element_size()) {
      throw CheckpointError("corrupt archive: size mismatch for '" + name + "'");
    }
    std::memcpy(t.data_ptr(), r.take(nbytes), nbytes);
    archive.entries_[name] = t;
  }
  if (r.pos() != body_end) throw CheckpointError("corrupt archive: trailing bytes in " + path.string());
  return archive;
}

}  // namespace pathosr
