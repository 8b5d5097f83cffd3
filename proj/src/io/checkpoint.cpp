#include "ste/io/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace ste::io {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'T', 'E', 'W'};
constexpr char kVersion = '1';

std::uint64_t fnv(const char* p, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(p[i]);
    h *= 1099511628211ULL;
  }
  return h;
}

class Writer {
 public:
  template <class T>
  void pod(T v) {
    buf_.append(reinterpret_cast<const char*>(&v), sizeof v);
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    buf_ += s;
  }
  void floats(const std::vector<float>& v) { buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * 4); }
  std::string& buf() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  Reader(const std::string& b, std::size_t end) : b_(b), end_(end) {}
  void need(std::size_t n) {
    if (end_ - pos_ < n) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  template <class T>
  T pod() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, b_.data() + pos_, sizeof v);
    pos_ += sizeof v;
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void floats(std::vector<float>& v) {
    need(v.size() * 4);
    std::memcpy(v.data(), b_.data() + pos_, v.size() * 4);
    pos_ += v.size() * 4;
  }
  bool done() const { return pos_ == end_; }

 private:
  const std::string& b_;
  std::size_t end_;
  std::size_t pos_ = 5;
};

}  // namespace

nn::ParamSet<float>& Checkpoint::set(const std::string& name) {
  for (auto& [n, ps] : sets)
    if (n == name) return ps;
  throw InvalidArgument("checkpoint has no parameter set '" + name + "'");
}

const nn::ParamSet<float>& Checkpoint::set(const std::string& name) const {
  return const_cast<Checkpoint*>(this)->set(name);
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& s : sets)
    if (s.first == name) return true;
  return false;
}

std::string serialize(const Checkpoint& ck) {
  Writer w;
  w.buf().append(kMagic, 4);
  w.buf().push_back(kVersion);
  w.pod(static_cast<std::uint32_t>(ck.meta.size()));
  for (const auto& [k, v] : ck.meta) {
    w.str(k);
    w.str(v);
  }
  w.pod(static_cast<std::uint32_t>(ck.sets.size()));
  for (const auto& [name, ps] : ck.sets) {
    w.str(name);
    w.pod(static_cast<std::uint32_t>(ps.size()));
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const auto& p = ps.at(i);
      w.str(p.name);
      w.pod(static_cast<std::uint32_t>(p.value.rank()));
      for (int d : p.value.shape) w.pod(static_cast<std::int32_t>(d));
      w.floats(p.value.data);
    }
    w.pod(static_cast<std::int64_t>(ps.step));
    for (std::size_t i = 0; i < ps.size(); ++i) {
      w.floats(ps.at(i).m.data);
      w.floats(ps.at(i).v.data);
    }
  }
  const std::uint64_t h = fnv(w.buf().data(), w.buf().size());
  w.pod(h);
  return std::move(w.buf());
}

Checkpoint deserialize(const std::string& b) {
  if (b.size() < 5 || std::memcmp(b.data(), kMagic, 4) != 0) throw FormatError("not a checkpoint (bad magic)");
  if (b[4] != kVersion)
    throw UnsupportedVersion(std::string("checkpoint version '") + b[4] + "' is not supported (expected '1')");
  if (b.size() < 5 + 8) throw FormatError("checkpoint truncated");
  const std::size_t end = b.size() - 8;
  std::uint64_t stored;
  std::memcpy(&stored, b.data() + end, 8);

  Checkpoint ck;
  Reader r(b, end);
  const auto nmeta = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < nmeta; ++i) {
    std::string k = r.str();
    ck.meta[k] = r.str();
  }
  const auto nsets = r.pod<std::uint32_t>();
  for (std::uint32_t s = 0; s < nsets; ++s) {
    std::string name = r.str();
    nn::ParamSet<float> ps;
    const auto np = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < np; ++i) {
      std::string pname = r.str();
      const auto rank = r.pod<std::uint32_t>();
      if (rank > 4) throw FormatError("parameter '" + pname + "' has rank " + std::to_string(rank));
      nn::Shape shape(rank);
      for (auto& d : shape) {
        d = r.pod<std::int32_t>();
        if (d <= 0 || d > (1 << 24)) throw FormatError("parameter '" + pname + "' has a bad dimension");
      }
      auto& p = ps.add(pname, shape);
      r.floats(p.value.data);
    }
    ps.step = r.pod<std::int64_t>();
    if (ps.step < 0) throw FormatError("negative step counter in set '" + name + "'");
    for (std::size_t i = 0; i < ps.size(); ++i) {
      r.floats(ps.at(i).m.data);
      r.floats(ps.at(i).v.data);
    }
    ck.sets.emplace_back(std::move(name), std::move(ps));
  }
  if (!r.done()) throw FormatError("trailing bytes in checkpoint");
  if (fnv(b.data(), end) != stored) throw FormatError("checkpoint checksum mismatch");
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  const std::string bytes = serialize(ck);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("failed writing '" + tmp + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return deserialize(ss.str());
  } catch (const FormatError& e) {
    if (dynamic_cast<const UnsupportedVersion*>(&e)) throw UnsupportedVersion(path + ": " + e.what());
    throw FormatError(path + ": " + e.what());
  }
}

void save_checkpoint(const nn::ParamSet<float>& ps, const std::string& path) {
  Checkpoint ck;
  ck.sets.emplace_back("params", ps);
  save_checkpoint(ck, path);
}

nn::ParamSet<float> load_params(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.sets.size() != 1) throw FormatError(path + ": expected a single parameter set");
  return std::move(ck.sets.front().second);
}

}  // namespace ste::io
