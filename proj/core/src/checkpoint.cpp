// SPDX-License-Identifier: Apache-2.0
#include "wsmt/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace wsmt {

namespace {

constexpr char kMagic[8] = {'W', 'S', 'M', 'T', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::string& buf, const void* data, std::size_t len) {
  buf.append(static_cast<const char*>(data), len);
}

template <typename T>
void put(std::string& buf, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  put_bytes(buf, &v, sizeof(v));
}

void put_string(std::string& buf, const std::string& s) {
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(s.size()));
  put_bytes(buf, s.data(), s.size());
}

void put_tensor(std::string& buf, const Tensor& t) {
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(t.rows()));
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(t.cols()));
  put_bytes(buf, t.data(), sizeof(double) * static_cast<std::size_t>(t.size()));
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  void read_bytes(void* out, std::size_t len) {
    if (pos_ + len > data_.size()) throw std::runtime_error("truncated checkpoint");
    std::memcpy(out, data_.data() + pos_, len);
    pos_ += len;
  }

  template <typename T>
  T get() {
    T v;
    read_bytes(&v, sizeof(v));
    return v;
  }

  std::string get_string() {
    auto len = get<std::uint32_t>();
    std::string s(len, '\0');
    read_bytes(s.data(), len);
    return s;
  }

  Tensor get_tensor() {
    auto rows = get<std::uint32_t>();
    auto cols = get<std::uint32_t>();
    Tensor t(rows, cols);
    read_bytes(t.data(), sizeof(double) * static_cast<std::size_t>(t.size()));
    return t;
  }

  std::size_t pos() const { return pos_; }
  const std::string& data() const { return data_; }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::string data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const Seq2SeqModel& model,
                     const Vocabulary& src_vocab, const Vocabulary& trg_vocab,
                     const AdamState* adam) {
  const ModelConfig& cfg = model.config();
  if (src_vocab.hash() != cfg.src_vocab_hash || trg_vocab.hash() != cfg.trg_vocab_hash)
    throw std::runtime_error("checkpoint save: vocabulary does not match model config");

  std::string buf;
  put_bytes(buf, kMagic, sizeof(kMagic));
  put<std::uint32_t>(buf, kVersion);
  put<std::int32_t>(buf, cfg.src_vocab_size);
  put<std::int32_t>(buf, cfg.trg_vocab_size);
  put<std::int32_t>(buf, cfg.src_eos_id);
  put<std::int32_t>(buf, cfg.trg_eos_id);
  put<std::int32_t>(buf, cfg.embed_dim);
  put<std::int32_t>(buf, cfg.hidden_dim);
  put<std::int32_t>(buf, cfg.attn_dim);
  put<std::int32_t>(buf, cfg.max_len);
  put<std::uint8_t>(buf, cfg.direction == Direction::Forward ? 0 : 1);
  put<std::uint64_t>(buf, cfg.src_vocab_hash);
  put<std::uint64_t>(buf, cfg.trg_vocab_hash);

  put<std::uint32_t>(buf, static_cast<std::uint32_t>(src_vocab.size()));
  for (const std::string& tok : src_vocab.tokens()) put_string(buf, tok);
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(trg_vocab.size()));
  for (const std::string& tok : trg_vocab.tokens()) put_string(buf, tok);

  std::vector<NamedTensor> params = model.params();
  put<std::uint32_t>(buf, static_cast<std::uint32_t>(params.size()));
  for (const NamedTensor& p : params) {
    put_string(buf, p.name);
    put_tensor(buf, *p.tensor);
  }

  put<std::uint8_t>(buf, adam != nullptr ? 1 : 0);
  if (adam != nullptr) {
    put<std::int64_t>(buf, adam->step_count());
    for (const Tensor& m : adam->first_moments()) put_tensor(buf, m);
    for (const Tensor& v : adam->second_moments()) put_tensor(buf, v);
  }

  put<std::uint64_t>(buf, fnv1a64(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  Reader r(std::move(ss).str());

  if (r.data().size() < sizeof(kMagic) + sizeof(std::uint64_t))
    throw std::runtime_error("checkpoint too small: " + path);
  {
    std::uint64_t stored;
    std::memcpy(&stored, r.data().data() + r.data().size() - sizeof(stored), sizeof(stored));
    std::uint64_t actual = fnv1a64(r.data().data(), r.data().size() - sizeof(stored));
    if (stored != actual) throw std::runtime_error("checkpoint integrity check failed: " + path);
  }

  char magic[8];
  r.read_bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  auto version = r.get<std::uint32_t>();
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ckpt;
  ckpt.config.src_vocab_size = r.get<std::int32_t>();
  ckpt.config.trg_vocab_size = r.get<std::int32_t>();
  ckpt.config.src_eos_id = r.get<std::int32_t>();
  ckpt.config.trg_eos_id = r.get<std::int32_t>();
  ckpt.config.embed_dim = r.get<std::int32_t>();
  ckpt.config.hidden_dim = r.get<std::int32_t>();
  ckpt.config.attn_dim = r.get<std::int32_t>();
  ckpt.config.max_len = r.get<std::int32_t>();
  ckpt.config.direction = r.get<std::uint8_t>() == 0 ? Direction::Forward : Direction::Backward;
  ckpt.config.src_vocab_hash = r.get<std::uint64_t>();
  ckpt.config.trg_vocab_hash = r.get<std::uint64_t>();

  auto src_count = r.get<std::uint32_t>();
  ckpt.src_tokens.reserve(src_count);
  for (std::uint32_t i = 0; i < src_count; ++i) ckpt.src_tokens.push_back(r.get_string());
  auto trg_count = r.get<std::uint32_t>();
  ckpt.trg_tokens.reserve(trg_count);
  for (std::uint32_t i = 0; i < trg_count; ++i) ckpt.trg_tokens.push_back(r.get_string());

  auto n_tensors = r.get<std::uint32_t>();
  ckpt.tensors.reserve(n_tensors);
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    std::string name = r.get_string();
    ckpt.tensors.emplace_back(std::move(name), r.get_tensor());
  }

  if (r.get<std::uint8_t>() == 1) {
    AdamSnapshot snap;
    snap.t = r.get<std::int64_t>();
    snap.m.reserve(n_tensors);
    snap.v.reserve(n_tensors);
    for (std::uint32_t i = 0; i < n_tensors; ++i) snap.m.push_back(r.get_tensor());
    for (std::uint32_t i = 0; i < n_tensors; ++i) snap.v.push_back(r.get_tensor());
    ckpt.adam = std::move(snap);
  }
  return ckpt;
}

void restore_model(Seq2SeqModel& model, const Checkpoint& ckpt) {
  const ModelConfig& cfg = model.config();
  if (cfg.src_vocab_hash != ckpt.config.src_vocab_hash ||
      cfg.trg_vocab_hash != ckpt.config.trg_vocab_hash)
    throw std::runtime_error("checkpoint restore: vocabulary hash mismatch");
  std::vector<NamedTensor> params = model.params();
  if (params.size() != ckpt.tensors.size())
    throw std::runtime_error("checkpoint restore: tensor count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, tensor] = ckpt.tensors[i];
    if (params[i].name != name)
      throw std::runtime_error("checkpoint restore: unexpected tensor " + name);
    if (params[i].tensor->rows() != tensor.rows() || params[i].tensor->cols() != tensor.cols())
      throw std::runtime_error("checkpoint restore: shape mismatch for " + name);
    *params[i].tensor = tensor;
  }
}

LoadedModel load_model(const std::string& path) {
  Checkpoint ckpt = load_checkpoint(path);
  Vocabulary src = Vocabulary::from_tokens(ckpt.src_tokens);
  Vocabulary trg = Vocabulary::from_tokens(ckpt.trg_tokens);
  if (src.hash() != ckpt.config.src_vocab_hash || trg.hash() != ckpt.config.trg_vocab_hash)
    throw std::runtime_error("checkpoint vocabulary hash mismatch: " + path);
  LoadedModel loaded{Seq2SeqModel(ckpt.config), std::move(src), std::move(trg),
                     std::move(ckpt.adam)};
  restore_model(loaded.model, ckpt);
  return loaded;
}

}  // namespace wsmt
