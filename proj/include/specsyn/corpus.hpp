#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "specsyn/error.hpp"

namespace specsyn::corpus {

enum class DocumentFormat { PlainText, HtmlStripped, SourceComments };

enum class ExtractionType { Simple, ComplexSingle, ComplexMulti };
inline constexpr std::size_t kExtractionTypeCount = 3;

std::string_view to_string(ExtractionType t);
std::optional<ExtractionType> extraction_type_from_string(std::string_view s);
std::optional<DocumentFormat> document_format_from_string(std::string_view s);

class EmptyDocument : public Error {
 public:
  using Error::Error;
};

// One occurrence of a keyword in a piece of text.
struct KeywordMatch {
  std::size_t begin = 0;  // byte offset of the match, including a `--` prefix
  std::size_t end = 0;
  std::string keyword;    // canonical spelling from the keyword set
};

// Configuration parameter names of one software package. Matching is
// case-insensitive at word boundaries and also accepts `--keyword` flag forms.
class KeywordSet {
 public:
  KeywordSet() = default;
  KeywordSet(std::string software, std::vector<std::string> keywords);

  static KeywordSet load(const std::string& path, std::string software = {});

  const std::string& software() const { return software_; }
  const std::vector<std::string>& keywords() const { return keywords_; }
  bool empty() const { return keywords_.empty(); }
  std::size_t size() const { return keywords_.size(); }

  // Longest keyword that matches exactly at `pos` of `lowered` (the already
  // lowercased text); the match must end on a word boundary. Returns the
  // match length, or 0.
  std::size_t match_at(std::string_view lowered, std::size_t pos, std::string* keyword = nullptr) const;

  // All non-overlapping matches, left to right, longest first at each start.
  std::vector<KeywordMatch> find_all(std::string_view text) const;

  // Distinct keywords occurring in text, in order of first occurrence.
  std::vector<std::string> matched(std::string_view text) const;

 private:
  std::string software_;
  std::vector<std::string> keywords_;  // canonical, unique, in file order
  std::vector<std::string> lowered_;   // parallel to keywords_
  std::vector<std::vector<std::size_t>> by_first_char_;  // 256 buckets, longest first
};

struct CandidateText {
  std::string text;
  std::string source;  // "<document>#<first sentence index>"
  ExtractionType type = ExtractionType::Simple;
  std::vector<std::string> keywords;
  std::size_t sentence_count = 1;
};

// True when text[begin, end) is delimited by word boundaries on both sides.
bool at_word_boundary(std::string_view text, std::size_t begin, std::size_t end);

// Splits a document into sentences.
std::vector<std::string> ingest(std::string_view document, DocumentFormat format);

// Building blocks of ingest, exposed for testing.
std::vector<std::string> split_sentences(std::string_view paragraph);
std::string strip_html(std::string_view html);
std::vector<std::string> extract_comments(std::string_view source);
double code_punctuation_density(std::string_view line);

inline constexpr std::size_t kDefaultWindow = 3;

std::vector<CandidateText> extract_candidates(const std::vector<std::string>& sentences,
                                              const KeywordSet& keywords, std::size_t window,
                                              std::string_view document_id = "doc");

}  // namespace specsyn::corpus
