#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace specsyn::model {

// Token ↔ id table. Ids 0-4 are [PAD] [UNK] [CLS] [BOS] [EOS]; ids 5-44 are the
// tag atoms <keyword1..8> <num1..8> <bool1..8> <unit1..8> <format1..8>; the
// remaining ids are training-split tokens in lexicographic order.
class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kBos = 3;
  static constexpr int kEos = 4;
  static constexpr int kTagsPerClass = 8;
  static constexpr int kReserved = 5 + 5 * kTagsPerClass;

  Vocab();  // reserved entries only

  static Vocab build(const std::vector<std::vector<std::string>>& sequences);
  static Vocab from_tokens(std::vector<std::string> tokens);  // checkpoint order

  int id(std::string_view token) const;
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  bool is_tag(int id) const { return id >= 5 && id < kReserved; }

  // [CLS] followed by the token ids.
  std::vector<int> encode_input(const std::vector<std::string>& tokens) const;
  std::vector<int> encode(const std::vector<std::string>& tokens) const;

 private:
  void add(std::string token);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace specsyn::model
