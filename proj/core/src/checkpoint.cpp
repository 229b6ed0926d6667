#include "prise/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <fstream>

namespace prise {

namespace {

constexpr char kMagic[8] = {'P', 'R', 'I', 'S', 'E', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

struct Reader {
  const std::string& buf;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > buf.size()) throw DataError("checkpoint " + path + ": truncated file");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(buf[pos++])) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string bytes(std::size_t n) {
    need(n);
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

std::string tensor_payload(const Tensor& t) {
  std::string out;
  out.reserve(static_cast<std::size_t>(t.size()) * 8);
  for (std::int64_t i = 0; i < t.size(); ++i) put_f64(out, t[i]);
  return out;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (const char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

void write_file_atomically(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw DataError("cannot move " + tmp + " into place");
}

}  // namespace

const Tensor& Checkpoint::tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return t;
  throw DataError("checkpoint has no tensor named " + name);
}

bool Checkpoint::has_tensor(const std::string& name) const {
  for (const auto& [n, t] : tensors)
    if (n == name) return true;
  return false;
}

std::uint64_t tensor_checksum(const Tensor& t) { return fnv1a(tensor_payload(t)); }

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path) {
  std::string blob(kMagic, sizeof(kMagic));
  put_u32(blob, kVersion);
  put_u64(blob, checkpoint.meta_json.size());
  blob += checkpoint.meta_json;
  put_u32(blob, static_cast<std::uint32_t>(checkpoint.tensors.size()));
  for (const auto& [name, t] : checkpoint.tensors) {
    put_u32(blob, static_cast<std::uint32_t>(name.size()));
    blob += name;
    put_u32(blob, static_cast<std::uint32_t>(t.rank()));
    for (const std::int64_t e : t.shape()) put_u64(blob, static_cast<std::uint64_t>(e));
    blob += tensor_payload(t);
  }
  write_file_atomically(path, blob);

  std::string manifest;
  for (const auto& [name, t] : checkpoint.tensors) {
    char sum[32];
    std::snprintf(sum, sizeof(sum), "%016llx",
                  static_cast<unsigned long long>(tensor_checksum(t)));
    manifest += name + "\t" + shape_to_string(t.shape()) + "\t" + sum + "\n";
  }
  write_file_atomically(path + ".manifest.txt", manifest);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path);
  const std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{blob, 0, path};
  if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw DataError("checkpoint " + path + ": bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    throw DataError("checkpoint " + path + ": unsupported format version " +
                    std::to_string(version));
  Checkpoint ckpt;
  const std::uint64_t meta_len = r.u64();
  ckpt.meta_json = r.bytes(meta_len);
  const std::uint32_t count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    const std::uint32_t name_len = r.u32();
    std::string name = r.bytes(name_len);
    const std::uint32_t rank = r.u32();
    Shape shape;
    std::int64_t n = 1;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<std::int64_t>(r.u64()));
      n *= shape.back();
    }
    Tensor t = Tensor::zeros(shape);
    double* data = t.mutable_data();
    for (std::int64_t i = 0; i < n; ++i) data[i] = r.f64();
    ckpt.tensors.emplace_back(std::move(name), std::move(t));
  }
  if (r.pos != blob.size())
    throw DataError("checkpoint " + path + ": trailing bytes after last tensor");
  return ckpt;
}

}  // namespace prise
