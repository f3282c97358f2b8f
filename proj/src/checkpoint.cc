#include "pivot/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "pivot/errors.h"

namespace pivot {
namespace {

constexpr char kMagic[4] = {'T', 'P', 'V', 'T'};
static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  template <typename T>
  T get(const char* what) {
    T v;
    need(sizeof(T), what);
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string bytes(size_t n, const char* what) {
    need(n, what);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void floats(float* out, size_t n, const char* what) {
    if (n > (data_.size() - pos_) / sizeof(float)) fail(what);
    std::memcpy(out, data_.data() + pos_, n * sizeof(float));
    pos_ += n * sizeof(float);
  }
  bool at_end() const { return pos_ == data_.size(); }

 private:
  void need(size_t n, const char* what) {
    if (n > data_.size() - pos_) fail(what);
  }
  [[noreturn]] void fail(const char* what) {
    throw CheckpointError(CheckpointError::Kind::kTruncated,
                          std::string("checkpoint truncated while reading ") + what);
  }
  std::string data_;
  size_t pos_ = 0;
};

}  // namespace

const Tensor<float>* Checkpoint::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string out;
  out.append(kMagic, 4);
  put<uint32_t>(out, kCheckpointVersion);
  put<uint64_t>(out, ckpt.digest);
  put<uint64_t>(out, ckpt.tensors.size());
  for (const auto& t : ckpt.tensors) {
    put<uint64_t>(out, t.name.size());
    out.append(t.name);
    put<uint64_t>(out, t.shape.size());
    uint64_t count = 1;
    for (uint64_t d : t.shape) {
      put<uint64_t>(out, d);
      count *= d;
    }
    if (count != t.data.size())
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch,
                            "tensor " + t.name + " data does not match its shape");
    out.append(reinterpret_cast<const char*>(t.data.data()), t.data.size() * sizeof(float));
  }

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw CheckpointError(CheckpointError::Kind::kIo, "write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw CheckpointError(CheckpointError::Kind::kIo, "rename failed: " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<uint64_t> expected) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError(CheckpointError::Kind::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  Reader in(ss.str());

  const std::string magic = in.bytes(4, "magic");
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw CheckpointError(CheckpointError::Kind::kBadMagic, path.string() + " is not a checkpoint");
  const auto version = in.get<uint32_t>("version");
  if (version != kCheckpointVersion)
    throw CheckpointError(CheckpointError::Kind::kBadVersion,
                          "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.digest = in.get<uint64_t>("digest");
  if (expected && *expected != ckpt.digest) {
    std::ostringstream msg;
    msg << "checkpoint digest " << std::hex << ckpt.digest << " does not match configuration digest "
        << *expected;
    throw CheckpointError(CheckpointError::Kind::kDigestMismatch, msg.str());
  }
  const auto count = in.get<uint64_t>("tensor count");
  for (uint64_t i = 0; i < count; ++i) {
    Tensor<float> t;
    const auto name_len = in.get<uint64_t>("name length");
    t.name = in.bytes(name_len, "name");
    const auto rank = in.get<uint64_t>("rank");
    if (rank > 8)
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "implausible rank for " + t.name);
    uint64_t n = 1;
    for (uint64_t r = 0; r < rank; ++r) {
      t.shape.push_back(in.get<uint64_t>("dims"));
      n *= t.shape.back();
    }
    if (n > (uint64_t{1} << 32))
      throw CheckpointError(CheckpointError::Kind::kShapeMismatch, "implausible size for " + t.name);
    t.data.resize(n);
    in.floats(t.data.data(), n, "tensor data");
    ckpt.tensors.push_back(std::move(t));
  }
  if (!in.at_end())
    throw CheckpointError(CheckpointError::Kind::kTruncated, "trailing bytes after last tensor");
  return ckpt;
}

}  // namespace pivot
