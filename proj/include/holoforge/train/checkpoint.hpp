#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "holoforge/io/pfm.hpp"
#include "holoforge/model/holonet.hpp"
#include "holoforge/train/adam.hpp"

namespace holoforge::train {

using json = nlohmann::json;

inline constexpr char kCheckpointMagic[8] = {'H', 'O', 'L', 'O', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Raw tensor record: dims as stored, little-endian float32 payload.
struct CheckpointEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> values;
};

struct Checkpoint {
  std::vector<CheckpointEntry> entries;
  json meta = json::object();

  const CheckpointEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  Reader(std::vector<char> buf, std::string path) : buf_(std::move(buf)), path_(std::move(path)) {}

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }

  float f32() {
    const std::uint32_t bits = u32("tensor value");
    return std::bit_cast<float>(bits);
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }
  [[noreturn]] void fail(const std::string& what) const { throw io::FormatError(path_, pos_, what); }

 private:
  void need(std::size_t n, const char* what) const {
    if (buf_.size() - pos_ < n)
      throw io::FormatError(path_, pos_, std::string("truncated while reading ") + what + " (need " +
                                             std::to_string(n) + " bytes, " + std::to_string(buf_.size() - pos_) +
                                             " left)");
  }

  std::vector<char> buf_;
  std::string path_;
  std::size_t pos_ = 0;
};

// (1, c, 1, 1) vectors are stored as rank 1, everything else as rank 4.
inline std::vector<std::uint32_t> stored_dims(const Shape& s) {
  if (s.n == 1 && s.h == 1 && s.w == 1) return {static_cast<std::uint32_t>(s.c)};
  return {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c), static_cast<std::uint32_t>(s.h),
          static_cast<std::uint32_t>(s.w)};
}

inline std::string dims_str(const std::vector<std::uint32_t>& d) {
  std::string s = "[";
  for (std::size_t i = 0; i < d.size(); ++i) s += (i ? ", " : "") + std::to_string(d[i]);
  return s + "]";
}

}  // namespace detail

inline void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic, 8);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    detail::put_u32(out, static_cast<std::uint32_t>(e.name.size()));
    out += e.name;
    detail::put_u32(out, static_cast<std::uint32_t>(e.dims.size()));
    std::size_t count = 1;
    for (auto d : e.dims) {
      detail::put_u32(out, d);
      count *= d;
    }
    if (count != e.values.size()) throw std::invalid_argument("checkpoint entry " + e.name + ": dims do not match values");
    for (float v : e.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  const std::string meta = ckpt.meta.dump();
  detail::put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out += meta;
  io::detail::write_file(path, out);
}

inline Checkpoint read_checkpoint(const std::string& path) {
  detail::Reader r(io::detail::read_file(path), path);
  if (r.bytes(8, "magic") != std::string(kCheckpointMagic, 8)) throw io::FormatError(path, 0, "not a HOLOCKPT file");
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) throw io::FormatError(path, 8, "unsupported version " + std::to_string(version));
  const std::uint32_t count = r.u32("entry count");
  Checkpoint ckpt;
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    const std::uint32_t len = r.u32("name length");
    if (len > r.remaining()) r.fail("name length " + std::to_string(len) + " exceeds file size");
    e.name = r.bytes(len, "name");
    const std::uint32_t rank = r.u32("rank");
    if (rank == 0 || rank > 4) r.fail("entry " + e.name + ": invalid rank " + std::to_string(rank));
    std::size_t n = 1;
    for (std::uint32_t k = 0; k < rank; ++k) {
      e.dims.push_back(r.u32("dimension"));
      n *= e.dims.back();
    }
    if (n * 4 > r.remaining()) r.fail("entry " + e.name + ": payload of " + std::to_string(n) + " values is truncated");
    e.values.resize(n);
    for (auto& v : e.values) v = r.f32();
    ckpt.entries.push_back(std::move(e));
  }
  const std::uint32_t meta_len = r.u32("metadata length");
  const std::string meta = r.bytes(meta_len, "metadata");
  try {
    ckpt.meta = json::parse(meta);
  } catch (const json::parse_error& err) {
    r.fail(std::string("invalid metadata JSON: ") + err.what());
  }
  if (r.remaining() != 0) r.fail("trailing bytes after metadata");
  return ckpt;
}

template <class T>
CheckpointEntry make_entry(const std::string& name, const Tensor<T>& t) {
  CheckpointEntry e{name, detail::stored_dims(t.shape()), {}};
  e.values.assign(t.data().begin(), t.data().end());
  return e;
}

/// Model state (parameters then batch-norm buffers) plus optional Adam
/// moments under "adam.m.<name>" / "adam.v.<name>".
template <class T>
Checkpoint make_checkpoint(const HoloNet<T>& model, json meta, const AdamState<T>* adam = nullptr) {
  Checkpoint ckpt;
  for (const auto& p : model.state()) ckpt.entries.push_back(make_entry(p.name, p.tensor));
  meta["preset"] = to_string(model.config().preset);
  if (adam) {
    meta["adam_step"] = adam->step;
    json names = json::array();
    for (std::size_t i = 0; i < adam->names.size(); ++i) {
      names.push_back(adam->names[i]);
      const std::uint32_t n = static_cast<std::uint32_t>(adam->m[i].size());
      ckpt.entries.push_back({"adam.m." + adam->names[i], {n}, {adam->m[i].begin(), adam->m[i].end()}});
      ckpt.entries.push_back({"adam.v." + adam->names[i], {n}, {adam->v[i].begin(), adam->v[i].end()}});
    }
    meta["adam_params"] = names;
  }
  ckpt.meta = std::move(meta);
  return ckpt;
}

/// Copies checkpoint tensors into the model. Every model tensor must be
/// present with the same shape; a mismatch names the expected shape.
template <class T>
void apply_checkpoint(const Checkpoint& ckpt, HoloNet<T>& model) {
  const std::string preset = to_string(model.config().preset);
  if (ckpt.meta.contains("preset") && ckpt.meta["preset"] != preset)
    throw std::runtime_error("checkpoint preset '" + ckpt.meta["preset"].get<std::string>() + "' does not match model preset '" + preset + "'");
  for (auto& p : model.state()) {
    const CheckpointEntry* e = ckpt.find(p.name);
    if (!e) throw std::runtime_error("checkpoint is missing tensor " + p.name);
    const auto expected = detail::stored_dims(p.tensor.shape());
    if (e->dims != expected)
      throw std::runtime_error("checkpoint tensor " + p.name + " has shape " + detail::dims_str(e->dims) +
                               ", expected " + detail::dims_str(expected));
    auto dst = p.tensor.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = static_cast<T>(e->values[i]);
  }
}

/// Restores Adam moments for `params` if the checkpoint carries them for
/// exactly that list; returns false when it does not.
template <class T>
bool restore_adam(const Checkpoint& ckpt, const ParameterList<T>& params, AdamState<T>& adam) {
  if (!ckpt.meta.contains("adam_params")) return false;
  std::vector<std::string> names = ckpt.meta["adam_params"].get<std::vector<std::string>>();
  if (names.size() != params.size()) return false;
  for (std::size_t i = 0; i < params.size(); ++i)
    if (names[i] != params[i].name) return false;
  adam.init(params);
  adam.step = ckpt.meta.value("adam_step", std::uint64_t{0});
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto* m = ckpt.find("adam.m." + names[i]);
    const auto* v = ckpt.find("adam.v." + names[i]);
    if (!m || !v || m->values.size() != adam.m[i].size() || v->values.size() != adam.v[i].size())
      throw std::runtime_error("checkpoint optimizer state for " + names[i] + " is missing or has the wrong size");
    for (std::size_t k = 0; k < m->values.size(); ++k) {
      adam.m[i][k] = static_cast<T>(m->values[k]);
      adam.v[i][k] = static_cast<T>(v->values[k]);
    }
  }
  return true;
}

}  // namespace holoforge::train
