#include "specsyn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <map>

#include "specsyn/text.hpp"

namespace specsyn::checkpoint {

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_str(std::string& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  explicit Reader(const std::string& b) : b_(b) {}

  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) throw FormatError("checkpoint is truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = b_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  const std::string& b_;
  std::size_t pos_ = 0;
};

constexpr const char* kConfigTensor = "meta.config";

void put_tensor(std::string& out, const std::string& name, const model::Matrix& m) {
  put_str(out, name);
  put_u32(out, static_cast<std::uint32_t>(m.rows()));
  put_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.size(); ++i) put_f64(out, m.data()[i]);
}

}  // namespace

std::string serialize(const model::SpecModel& model) {
  std::string out = "SPSY";
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(model.vocab.size()));
  for (const auto& t : model.vocab.tokens()) put_str(out, t);

  const auto& c = model.config;
  model::Matrix meta(1, 9);
  meta << c.vocab_size, c.d_model, c.layers, c.heads, c.max_len, c.pooled, c.head_hidden, c.gen_hidden, c.gen_embed;
  std::uint32_t count = 1;
  model.params.for_each([&](const std::string&, const model::Matrix&) { ++count; });
  put_u32(out, count);
  put_tensor(out, kConfigTensor, meta);
  model.params.for_each([&](const std::string& name, const model::Matrix& m) { put_tensor(out, name, m); });
  return out;
}

model::SpecModel deserialize(const std::string& bytes) {
  Reader r(bytes);
  if (r.raw(4) != "SPSY") throw FormatError("not a model checkpoint (bad magic)");
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const std::uint32_t vocab_n = r.u32();
  std::vector<std::string> tokens;
  tokens.reserve(vocab_n);
  for (std::uint32_t i = 0; i < vocab_n; ++i) tokens.push_back(r.str());

  const std::uint32_t count = r.u32();
  std::map<std::string, model::Matrix> tensors;
  for (std::uint32_t t = 0; t < count; ++t) {
    std::string name = r.str();
    const std::uint32_t rows = r.u32();
    const std::uint32_t cols = r.u32();
    r.need(static_cast<std::size_t>(rows) * cols * 8);
    model::Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = r.f64();
    if (!tensors.emplace(std::move(name), std::move(m)).second) throw FormatError("duplicate tensor in checkpoint");
  }
  if (!r.done()) throw FormatError("trailing bytes after the last tensor");

  auto meta_it = tensors.find(kConfigTensor);
  if (meta_it == tensors.end() || meta_it->second.size() != 9) throw FormatError("checkpoint lacks its config tensor");
  const auto& meta = meta_it->second;
  model::ModelConfig c;
  int* fields[] = {&c.vocab_size, &c.d_model, &c.layers, &c.heads, &c.max_len, &c.pooled, &c.head_hidden,
                   &c.gen_hidden, &c.gen_embed};
  for (int i = 0; i < 9; ++i) *fields[i] = static_cast<int>(meta(0, i));
  if (c.vocab_size != static_cast<int>(vocab_n)) throw FormatError("vocabulary size disagrees with the config");

  model::SpecModel m{c, model::Params::zeros(c), model::Vocab::from_tokens(std::move(tokens))};
  std::size_t used = 1;
  m.params.for_each([&](const std::string& name, model::Matrix& dst) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw FormatError("checkpoint lacks tensor '" + name + "'");
    if (it->second.rows() != dst.rows() || it->second.cols() != dst.cols()) {
      throw FormatError("tensor '" + name + "' has the wrong shape");
    }
    dst = it->second;
    ++used;
  });
  if (used != tensors.size()) throw FormatError("checkpoint holds unknown tensors");
  return m;
}

void save(const model::SpecModel& model, const std::string& path) { text::write_file(path, serialize(model)); }

model::SpecModel load(const std::string& path) { return deserialize(text::read_file(path)); }

}  // namespace specsyn::checkpoint
