#include "smart/nn/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "smart/common.hpp"

namespace smart::nn {

namespace {

constexpr char kMagic[4] = {'S', 'M', 'C', 'K'};

void write_u32(std::ostream& os, std::uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_i64(std::ostream& os, std::int64_t v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_str(std::ostream& os, const std::string& s) {
  write_u32(os, std::uint32_t(s.size()));
  os.write(s.data(), std::streamsize(s.size()));
}
void write_tensor(std::ostream& os, const Tensor& t) {
  write_u32(os, std::uint32_t(t.shape.size()));
  for (long d : t.shape) write_i64(os, d);
  os.write(reinterpret_cast<const char*>(t.data.data()),
           std::streamsize(t.data.size() * sizeof(double)));
}

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::int64_t read_i64(std::istream& is) {
  std::int64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}
std::string read_str(std::istream& is) {
  std::string s(read_u32(is), '\0');
  is.read(s.data(), std::streamsize(s.size()));
  return s;
}
Tensor read_tensor(std::istream& is) {
  const std::uint32_t rank = read_u32(is);
  std::vector<long> shape(rank);
  for (auto& d : shape) d = long(read_i64(is));
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.data.data()),
          std::streamsize(t.data.size() * sizeof(double)));
  return t;
}

}  // namespace

void Checkpoint::save(const std::string& path, const ParamStore& params,
                      const std::string& config_hash, long step, AdamW* opt) {
  namespace fs = std::filesystem;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw FetchError("checkpoint: cannot open " + tmp);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    write_str(os, config_hash);
    write_i64(os, step);
    write_u32(os, std::uint32_t(params.all().size()));
    for (const auto& [name, p] : params.all()) {
      write_str(os, name);
      write_tensor(os, p->value);
    }
    write_u32(os, opt ? 1u : 0u);
    if (opt) {
      write_i64(os, opt->step_count());
      for (const Tensor& t : opt->moments1()) write_tensor(os, t);
      for (const Tensor& t : opt->moments2()) write_tensor(os, t);
    }
    if (!os) throw FetchError("checkpoint: write failed for " + tmp);
  }
  fs::rename(tmp, path);
}

long Checkpoint::load(const std::string& path, ParamStore& params,
                      const std::string& expected_config_hash, AdamW* opt,
                      bool check_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FetchError("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw VersionError("checkpoint: bad magic in " + path);
  const std::uint32_t ver = read_u32(is);
  if (ver != kVersion)
    throw VersionError("checkpoint: schema version " + std::to_string(ver) +
                       " != " + std::to_string(kVersion));
  const std::string hash = read_str(is);
  if (check_hash && hash != expected_config_hash)
    throw VersionError("checkpoint: config hash mismatch (" + hash + " vs " +
                       expected_config_hash + ")");
  const long step = long(read_i64(is));
  const std::uint32_t count = read_u32(is);
  if (count != params.all().size())
    throw VersionError("checkpoint: parameter count mismatch");
  for (auto& [name, p] : params.all()) {
    const std::string stored = read_str(is);
    if (stored != name)
      throw VersionError("checkpoint: parameter order mismatch at " + stored);
    Tensor t = read_tensor(is);
    if (t.shape != p->value.shape)
      throw VersionError("checkpoint: shape mismatch for " + stored);
    p->value = std::move(t);
  }
  const std::uint32_t has_opt = read_u32(is);
  if (opt && has_opt) {
    opt->set_step_count(long(read_i64(is)));
    for (Tensor& t : opt->moments1()) t = read_tensor(is);
    for (Tensor& t : opt->moments2()) t = read_tensor(is);
  }
  if (!is) throw IntegrityError("checkpoint: truncated file " + path);
  return step;
}

std::string Checkpoint::peek_config_hash(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FetchError("checkpoint: cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  read_u32(is);
  return read_str(is);
}

std::string config_hash_of(const std::string& config_dump) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : config_dump) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace smart::nn
