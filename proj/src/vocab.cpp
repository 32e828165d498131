#include "specsyn/vocab.hpp"

#include <algorithm>
#include <set>

#include "specsyn/error.hpp"

namespace specsyn::model {

Vocab::Vocab() {
  for (const char* t : {"[PAD]", "[UNK]", "[CLS]", "[BOS]", "[EOS]"}) add(t);
  for (const char* cls : {"keyword", "num", "bool", "unit", "format"}) {
    for (int i = 1; i <= kTagsPerClass; ++i) add("<" + std::string(cls) + std::to_string(i) + ">");
  }
}

void Vocab::add(std::string token) {
  if (index_.count(token)) throw Error("duplicate vocabulary token '" + token + "'");
  index_.emplace(token, static_cast<int>(tokens_.size()));
  tokens_.push_back(std::move(token));
}

Vocab Vocab::build(const std::vector<std::vector<std::string>>& sequences) {
  Vocab v;
  std::set<std::string> seen;
  for (const auto& seq : sequences) {
    for (const auto& t : seq) {
      if (!v.index_.count(t)) seen.insert(t);
    }
  }
  for (const auto& t : seen) {
    // Tag atoms beyond the reserved range map to [UNK].
    if (t.size() > 2 && t.front() == '<' && t.back() == '>') continue;
    v.add(t);
  }
  return v;
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  Vocab v;
  if (tokens.size() < v.tokens_.size() ||
      !std::equal(v.tokens_.begin(), v.tokens_.end(), tokens.begin())) {
    throw Error("vocabulary table does not start with the reserved tokens");
  }
  for (std::size_t i = v.tokens_.size(); i < tokens.size(); ++i) v.add(std::move(tokens[i]));
  return v;
}

int Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocab::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

std::vector<int> Vocab::encode_input(const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size() + 1);
  out.push_back(kCls);
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

}  // namespace specsyn::model
