#include "pathosr/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "pathosr/errors.hpp"
#include "pathosr/resample.hpp"

namespace pathosr {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Split split) noexcept { return split == Split::kTrain ? "train" : "test"; }

std::size_t DatasetIndex::count(Split split) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const auto& r) { return r.split == split; }));
}

DatasetIndex DatasetIndex::subset(Split split) const {
  DatasetIndex out;
  out.linear_scale = linear_scale;
  out.patch_size = patch_size;
  for (const auto& r : records) {
    if (r.split == split) out.records.push_back(r);
  }
  return out;
}

namespace {

RecordDescriptor parse_record(const std::string& line, std::size_t lineno, const fs::path& base) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(lineno, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError(lineno, "record must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "id" && key != "hr" && key != "mask" && key != "split") {
      throw ParseError(lineno, "unknown key '" + key + "'");
    }
  }
  auto require_string = [&](const char* key) -> std::string {
    if (!j.contains(key) || !j[key].is_string()) {
      throw ParseError(lineno, std::string("missing or non-string '") + key + "'");
    }
    return j[key].get<std::string>();
  };

  RecordDescriptor rec;
  rec.id = require_string("id");
  if (rec.id.empty()) throw ParseError(lineno, "empty id");
  rec.hr_path = base / require_string("hr");
  if (j.contains("mask") && !j["mask"].is_null()) {
    if (!j["mask"].is_string()) throw ParseError(lineno, "'mask' must be a string or null");
    rec.mask_path = base / j["mask"].get<std::string>();
  }
  const std::string split = require_string("split");
  if (split == "train") {
    rec.split = Split::kTrain;
  } else if (split == "test") {
    rec.split = Split::kTest;
  } else {
    throw ParseError(lineno, "split must be \"train\" or \"test\", got \"" + split + "\"");
  }
  return rec;
}

}  // namespace

DatasetIndex load_manifest(const fs::path& path, int linear_scale, int patch_size) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open manifest " + path.string());

  DatasetIndex index;
  index.linear_scale = linear_scale;
  index.patch_size = patch_size;
  const fs::path base = path.parent_path();
  std::unordered_set<std::string> ids;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    RecordDescriptor rec = parse_record(line, lineno, base);
    if (!ids.insert(rec.id).second) throw ParseError(lineno, "duplicate id '" + rec.id + "'");
    if (!fs::exists(rec.hr_path)) {
      throw LoadError("record '" + rec.id + "': HR image not found: " + rec.hr_path.string());
    }
    if (rec.mask_path && !fs::exists(*rec.mask_path)) {
      throw LoadError("record '" + rec.id + "': mask not found: " + rec.mask_path->string());
    }
    index.records.push_back(std::move(rec));
  }
  return index;
}

SamplePair load_sample(const RecordDescriptor& record, int linear_scale) {
  SamplePair s;
  s.id = record.id;
  s.split = record.split;
  try {
    s.hr = load_image(record.hr_path);
    s.mask = record.mask_path ? load_mask(*record.mask_path) : RoiMask::ones(s.hr.height, s.hr.width);
  } catch (const LoadError& e) {
    throw LoadError("record '" + record.id + "': " + e.what());
  }
  if (s.mask.height != s.hr.height || s.mask.width != s.hr.width) {
    throw ShapeError("record '" + record.id + "': mask and HR image differ in size");
  }
  s.lr = synthesize_lr(s.hr, linear_scale);
  return s;
}

const SamplePair& SampleCache::get(std::size_t record) {
  auto it = cache_.find(record);
  if (it == cache_.end()) {
    auto sample = std::make_unique<SamplePair>(load_sample(index_.records.at(record), index_.linear_scale));
    it = cache_.emplace(record, std::move(sample)).first;
  }
  return *it->second;
}

BatchSampler::BatchSampler(std::size_t record_count, std::uint64_t seed)
    : count_(record_count), rng_(seed), order_(record_count) {
  if (record_count == 0) throw ConfigError("cannot sample batches from an empty dataset");
  reshuffle();
}

void BatchSampler::reshuffle() {
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  // Fisher-Yates with explicit modulo draws: the sequence depends only on the
  // mt19937_64 stream, not on the standard library's distribution code.
  for (std::size_t i = count_; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng_() % i);
    std::swap(order_[i - 1], order_[j]);
  }
  cursor_ = 0;
}

std::vector<std::size_t> BatchSampler::next(std::size_t n) {
  std::vector<std::size_t> out;
  if (n == 0) return out;
  if (cursor_ == count_) {
    reshuffle();
    ++epoch_;
  }
  if (n <= count_) {
    const std::size_t take = std::min(n, count_ - cursor_);
    out.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
               order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + take));
    cursor_ += take;
    return out;
  }
  out.reserve(n);
  while (out.size() < n) {
    if (cursor_ == count_) {
      reshuffle();
      ++epoch_;
    }
    out.push_back(order_[cursor_++]);
  }
  return out;
}

std::string BatchSampler::state() const {
  std::ostringstream os;
  os << count_ << ' ' << cursor_ << ' ' << epoch_ << ' ';
  for (std::size_t v : order_) os << v << ' ';
  os << rng_;
  return os.str();
}

void BatchSampler::restore(const std::string& state) {
  std::istringstream is(state);
  std::size_t count = 0;
  is >> count;
  if (!is || count != count_) throw CheckpointError("sampler state does not match dataset size");
  std::size_t cursor = 0, epoch = 0;
  is >> cursor >> epoch;
  std::vector<std::size_t> order(count);
  for (auto& v : order) is >> v;
  std::mt19937_64 rng;
  is >> rng;
  if (!is || cursor > count) throw CheckpointError("corrupt sampler state");
  cursor_ = cursor;
  epoch_ = epoch;
  order_ = std::move(order);
  rng_ = rng;
}

std::size_t batches_per_epoch(std::size_t records, std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  return (records + batch_size - 1) / batch_size;
}

BatchIterator::BatchIterator(const DatasetIndex& index, Split split, std::size_t batch_size, std::uint64_t seed)
    : cache_(index.subset(split)), sampler_(cache_.index().records.size(), seed), batch_size_(batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be positive");
}

std::vector<const SamplePair*> BatchIterator::next() {
  std::vector<const SamplePair*> out;
  for (std::size_t i : sampler_.next(batch_size_)) out.push_back(&cache_.get(i));
  return out;
}

}  // namespace pathosr
