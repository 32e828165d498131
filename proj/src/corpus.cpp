#include "specsyn/corpus.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <unordered_set>

#include "specsyn/text.hpp"

namespace specsyn::corpus {

namespace {

constexpr std::array<std::string_view, 3> kTypeNames = {"simple", "complex_single", "complex_multi"};

// Tokens ending in '.' that never terminate a sentence.
constexpr std::array<std::string_view, 18> kAbbreviations = {
    "e.g.", "i.e.", "etc.", "vs.", "cf.", "approx.", "fig.", "figs.", "no.",
    "dr.", "mr.", "ms.", "sec.", "ch.", "vol.", "resp.", "incl.", "et al."};

bool is_upper(char c) { return c >= 'A' && c <= 'Z'; }

bool is_closing(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

bool ends_with_abbreviation(std::string_view sentence_so_far) {
  const std::string lowered = text::to_lower(sentence_so_far);
  for (auto abbr : kAbbreviations) {
    if (lowered.size() < abbr.size()) continue;
    if (lowered.compare(lowered.size() - abbr.size(), abbr.size(), abbr) != 0) continue;
    const std::size_t before = lowered.size() - abbr.size();
    if (before == 0 || !text::is_word_char(lowered[before - 1])) return true;
  }
  return false;
}

void append_sentence(std::vector<std::string>& out, std::string_view s) {
  const auto t = text::trim(s);
  if (!t.empty()) out.emplace_back(t);
}

bool is_block_tag(std::string_view name) {
  static const std::unordered_set<std::string_view> kBlock = {
      "p", "br", "div", "li", "ul", "ol", "h1", "h2", "h3", "h4", "h5", "h6", "tr", "td", "th",
      "table", "pre", "blockquote", "dt", "dd", "dl", "section", "article", "title", "hr"};
  return kBlock.count(name) > 0;
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

// Decodes one entity starting at s[i] == '&'. Returns consumed length, 0 if
// the text is not a recognised entity.
std::size_t decode_entity(std::string_view s, std::size_t i, std::string& out) {
  const std::size_t semi = s.find(';', i);
  if (semi == std::string_view::npos || semi - i > 10) return 0;
  const std::string_view body = s.substr(i + 1, semi - i - 1);
  static const std::array<std::pair<std::string_view, std::string_view>, 8> kNamed = {{
      {"amp", "&"}, {"lt", "<"}, {"gt", ">"}, {"quot", "\""}, {"apos", "'"}, {"nbsp", " "},
      {"ndash", "-"}, {"mdash", "-"}}};
  for (const auto& [name, repl] : kNamed) {
    if (body == name) {
      out += repl;
      return semi - i + 1;
    }
  }
  if (body.size() >= 2 && body[0] == '#') {
    std::uint32_t cp = 0;
    const bool hex = body[1] == 'x' || body[1] == 'X';
    const std::string_view digits = body.substr(hex ? 2 : 1);
    if (digits.empty()) return 0;
    for (char c : digits) {
      std::uint32_t d = 0;
      if (text::is_digit(c)) d = static_cast<std::uint32_t>(c - '0');
      else if (hex && c >= 'a' && c <= 'f') d = static_cast<std::uint32_t>(c - 'a' + 10);
      else if (hex && c >= 'A' && c <= 'F') d = static_cast<std::uint32_t>(c - 'A' + 10);
      else return 0;
      cp = cp * (hex ? 16 : 10) + d;
      if (cp > 0x10FFFF) return 0;
    }
    if (cp == 0 || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
    append_utf8(out, cp == 0xA0 ? ' ' : cp);
    return semi - i + 1;
  }
  return 0;
}

bool is_preprocessor_directive(std::string_view after_hash) {
  static const std::array<std::string_view, 12> kDirectives = {
      "include", "define", "undef", "if", "ifdef", "ifndef", "elif", "else", "endif", "pragma", "error", "line"};
  const auto t = text::trim(after_hash);
  std::size_t n = 0;
  while (n < t.size() && text::is_word_char(t[n])) ++n;
  const auto word = t.substr(0, n);
  return std::find(kDirectives.begin(), kDirectives.end(), word) != kDirectives.end();
}

// A comment body keeps only its prose lines.
std::string clean_comment(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& raw : lines) {
    auto line = text::trim(raw);
    while (!line.empty() && line.front() == '*') line.remove_prefix(1);
    line = text::trim(line);
    if (line.empty()) continue;
    if (code_punctuation_density(line) > 0.4) continue;
    if (!out.empty()) out.push_back(' ');
    out += line;
  }
  return text::collapse_whitespace(out);
}

}  // namespace

std::string_view to_string(ExtractionType t) { return kTypeNames[static_cast<std::size_t>(t)]; }

std::optional<ExtractionType> extraction_type_from_string(std::string_view s) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == s) return static_cast<ExtractionType>(i);
  }
  return std::nullopt;
}

std::optional<DocumentFormat> document_format_from_string(std::string_view s) {
  if (s == "plain") return DocumentFormat::PlainText;
  if (s == "html") return DocumentFormat::HtmlStripped;
  if (s == "comments") return DocumentFormat::SourceComments;
  return std::nullopt;
}

bool at_word_boundary(std::string_view t, std::size_t begin, std::size_t end) {
  if (begin > 0) {
    const char p = t[begin - 1];
    if (text::is_word_char(t[begin]) && (text::is_word_char(p) || p == '\'' || p == '-')) return false;
  }
  if (end < t.size()) {
    const char n = t[end];
    if (text::is_word_char(t[end - 1]) && text::is_word_char(n)) return false;
    // `name.ext` or `name-suffix` continue the token; a trailing period does not.
    if ((n == '.' || n == '-') && end + 1 < t.size() && text::is_word_char(t[end + 1])) return false;
  }
  return true;
}

KeywordSet::KeywordSet(std::string software, std::vector<std::string> keywords)
    : software_(std::move(software)), by_first_char_(256) {
  std::unordered_set<std::string> seen;
  for (auto& k : keywords) {
    const auto t = std::string(text::trim(k));
    if (t.empty()) throw Error("keyword set contains an empty keyword");
    if (!seen.insert(t).second) continue;
    keywords_.push_back(t);
    lowered_.push_back(text::to_lower(t));
  }
  if (keywords_.empty()) throw Error("keyword set is empty");
  for (std::size_t i = 0; i < lowered_.size(); ++i) {
    by_first_char_[static_cast<unsigned char>(lowered_[i][0])].push_back(i);
  }
  for (auto& bucket : by_first_char_) {
    std::stable_sort(bucket.begin(), bucket.end(),
                     [&](std::size_t a, std::size_t b) { return lowered_[a].size() > lowered_[b].size(); });
  }
}

KeywordSet KeywordSet::load(const std::string& path, std::string software) {
  if (software.empty()) {
    auto slash = path.find_last_of('/');
    software = path.substr(slash == std::string::npos ? 0 : slash + 1);
    if (auto dot = software.find('.'); dot != std::string::npos) software.resize(dot);
  }
  return KeywordSet(std::move(software), text::read_list_file(path));
}

std::size_t KeywordSet::match_at(std::string_view lowered, std::size_t pos, std::string* keyword) const {
  if (pos >= lowered.size() || keywords_.empty()) return 0;
  auto try_at = [&](std::size_t start) -> std::size_t {
    if (start >= lowered.size()) return 0;
    for (std::size_t idx : by_first_char_[static_cast<unsigned char>(lowered[start])]) {
      const auto& k = lowered_[idx];
      if (lowered.compare(start, k.size(), k) != 0) continue;
      if (!at_word_boundary(lowered, pos, start + k.size())) continue;
      if (keyword) *keyword = keywords_[idx];
      return start + k.size() - pos;
    }
    return 0;
  };
  if (std::size_t len = try_at(pos)) return len;
  if (lowered.compare(pos, 2, "--") == 0 && (pos == 0 || !text::is_word_char(lowered[pos - 1]))) {
    return try_at(pos + 2);
  }
  return 0;
}

std::vector<KeywordMatch> KeywordSet::find_all(std::string_view t) const {
  const std::string lowered = text::to_lower(t);
  std::vector<KeywordMatch> out;
  std::size_t i = 0;
  while (i < lowered.size()) {
    std::string kw;
    if (std::size_t len = match_at(lowered, i, &kw)) {
      out.push_back({i, i + len, kw});
      i += len;
    } else {
      ++i;
    }
  }
  return out;
}

std::vector<std::string> KeywordSet::matched(std::string_view t) const {
  std::vector<std::string> out;
  for (auto& m : find_all(t)) {
    if (std::find(out.begin(), out.end(), m.keyword) == out.end()) out.push_back(std::move(m.keyword));
  }
  return out;
}

std::vector<std::string> split_sentences(std::string_view para) {
  std::vector<std::string> out;
  const std::string p = text::collapse_whitespace(para);
  std::size_t start = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const char c = p[i];
    if (c != '.' && c != '?' && c != '!') continue;
    std::size_t j = i + 1;
    while (j < p.size() && is_closing(p[j])) ++j;
    bool boundary = false;
    if (j >= p.size()) {
      boundary = true;
    } else if (p[j] == ' ' && j + 1 < p.size()) {
      std::size_t k = j + 1;
      while (k < p.size() && (p[k] == '"' || p[k] == '\'' || p[k] == '(')) ++k;
      boundary = k < p.size() && is_upper(p[k]);
    }
    if (!boundary) continue;
    if (c == '.' && ends_with_abbreviation(std::string_view(p).substr(start, i + 1 - start))) continue;
    append_sentence(out, std::string_view(p).substr(start, j - start));
    start = j;
    i = j - 1;
  }
  if (start < p.size()) append_sentence(out, std::string_view(p).substr(start));
  return out;
}

std::string strip_html(std::string_view html) {
  std::string out;
  out.reserve(html.size());
  std::size_t i = 0;
  while (i < html.size()) {
    const char c = html[i];
    if (c == '<') {
      if (html.compare(i, 4, "<!--") == 0) {
        const auto end = html.find("-->", i + 4);
        i = end == std::string_view::npos ? html.size() : end + 3;
        continue;
      }
      const auto close = html.find('>', i);
      if (close == std::string_view::npos) {
        out.push_back(c);
        ++i;
        continue;
      }
      std::string_view tag = html.substr(i + 1, close - i - 1);
      const bool closing = !tag.empty() && tag.front() == '/';
      if (closing) tag.remove_prefix(1);
      std::size_t n = 0;
      while (n < tag.size() && (text::is_word_char(tag[n]))) ++n;
      const std::string name = text::to_lower(tag.substr(0, n));
      i = close + 1;
      if (!closing && (name == "script" || name == "style")) {
        const auto end = text::to_lower(html.substr(i)).find("</" + name);
        if (end == std::string::npos) {
          i = html.size();
        } else {
          const auto gt = html.find('>', i + end);
          i = gt == std::string_view::npos ? html.size() : gt + 1;
        }
        continue;
      }
      out += is_block_tag(name) ? "\n\n" : " ";
      continue;
    }
    if (c == '&') {
      if (std::size_t used = decode_entity(html, i, out)) {
        i += used;
        continue;
      }
    }
    out.push_back(c);
    ++i;
  }
  return out;
}

double code_punctuation_density(std::string_view line) {
  static constexpr std::string_view kCodePunct = ";{}()[]=<>&|+*/%!^~,";
  std::size_t nonspace = 0;
  std::size_t punct = 0;
  for (char c : line) {
    if (text::is_space(c)) continue;
    ++nonspace;
    if (kCodePunct.find(c) != std::string_view::npos) ++punct;
  }
  return nonspace == 0 ? 0.0 : static_cast<double>(punct) / static_cast<double>(nonspace);
}

std::vector<std::string> extract_comments(std::string_view src) {
  std::vector<std::string> bodies;
  std::vector<std::string> line_block;  // consecutive own-line `//` / `#` comments
  std::size_t line_block_last = 0;
  std::size_t line_no = 0;
  bool line_has_code = false;

  auto flush_line_block = [&] {
    if (line_block.empty()) return;
    auto body = clean_comment(line_block);
    if (!body.empty()) bodies.push_back(std::move(body));
    line_block.clear();
  };

  std::size_t i = 0;
  while (i < src.size()) {
    const char c = src[i];
    if (c == '\n') {
      ++line_no;
      line_has_code = false;
      ++i;
      continue;
    }
    if (c == '"' || c == '\'') {
      // Skip literals so `//` or `#` inside them are not comments.
      const char q = c;
      ++i;
      while (i < src.size() && src[i] != q && src[i] != '\n') {
        if (src[i] == '\\') ++i;
        ++i;
      }
      if (i < src.size() && src[i] == q) ++i;
      line_has_code = true;
      continue;
    }
    if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
      flush_line_block();
      const auto end = src.find("*/", i + 2);
      const std::string_view inner = src.substr(i + 2, (end == std::string_view::npos ? src.size() : end) - i - 2);
      line_no += static_cast<std::size_t>(std::count(inner.begin(), inner.end(), '\n'));
      auto body = clean_comment(text::split_lines(inner));
      if (!body.empty()) bodies.push_back(std::move(body));
      i = end == std::string_view::npos ? src.size() : end + 2;
      line_has_code = true;
      continue;
    }
    const bool slash_comment = c == '/' && i + 1 < src.size() && src[i + 1] == '/';
    const bool hash_comment = c == '#' && !is_preprocessor_directive(src.substr(i + 1, src.find('\n', i) - i - 1));
    if (slash_comment || hash_comment) {
      const std::size_t body_start = i + (slash_comment ? 2 : 1);
      auto eol = src.find('\n', body_start);
      if (eol == std::string_view::npos) eol = src.size();
      std::string_view body = src.substr(body_start, eol - body_start);
      while (!body.empty() && (body.front() == '/' || body.front() == '#' || body.front() == '!')) body.remove_prefix(1);
      const bool continues_block = !line_has_code && !line_block.empty() && line_block_last + 1 == line_no;
      if (!continues_block) flush_line_block();
      line_block.emplace_back(body);
      line_block_last = line_no;
      if (line_has_code) flush_line_block();
      i = eol;
      continue;
    }
    if (!text::is_space(c)) {
      if (!line_block.empty() && line_block_last != line_no) flush_line_block();
      line_has_code = true;
    }
    ++i;
  }
  flush_line_block();
  return bodies;
}

std::vector<std::string> ingest(std::string_view document, DocumentFormat format) {
  if (!text::is_valid_utf8(document)) throw DecodeError("document is not valid UTF-8");
  std::vector<std::string> paragraphs;
  switch (format) {
    case DocumentFormat::PlainText:
    case DocumentFormat::HtmlStripped: {
      const std::string body = format == DocumentFormat::HtmlStripped ? strip_html(document) : std::string(document);
      std::string cur;
      for (const auto& line : text::split_lines(body)) {
        if (text::trim(line).empty()) {
          if (!cur.empty()) paragraphs.push_back(std::move(cur));
          cur.clear();
          continue;
        }
        cur += line;
        cur += '\n';
      }
      if (!cur.empty()) paragraphs.push_back(std::move(cur));
      break;
    }
    case DocumentFormat::SourceComments:
      paragraphs = extract_comments(document);
      break;
  }
  std::vector<std::string> sentences;
  for (const auto& p : paragraphs) {
    for (auto& s : split_sentences(p)) sentences.push_back(std::move(s));
  }
  if (sentences.empty()) throw EmptyDocument("document contains no text");
  return sentences;
}

std::vector<CandidateText> extract_candidates(const std::vector<std::string>& sentences,
                                              const KeywordSet& keywords, std::size_t window,
                                              std::string_view document_id) {
  if (window == 0) throw Error("candidate window must be at least 1");
  std::vector<std::vector<std::string>> hits(sentences.size());
  for (std::size_t i = 0; i < sentences.size(); ++i) hits[i] = keywords.matched(sentences[i]);

  std::vector<CandidateText> out;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    if (hits[i].empty()) continue;
    const std::string source = std::string(document_id) + "#" + std::to_string(i);
    out.push_back({sentences[i], source, ExtractionType::Simple, hits[i], 1});

    const std::size_t last = std::min(sentences.size(), i + window) - 1;
    if (last == i) continue;
    CandidateText complex{sentences[i], source, ExtractionType::ComplexSingle, hits[i], last - i + 1};
    for (std::size_t j = i + 1; j <= last; ++j) {
      complex.text += ' ';
      complex.text += sentences[j];
      for (const auto& k : hits[j]) {
        if (std::find(complex.keywords.begin(), complex.keywords.end(), k) == complex.keywords.end()) {
          complex.keywords.push_back(k);
        }
      }
    }
    if (complex.keywords.size() > 1) complex.type = ExtractionType::ComplexMulti;
    out.push_back(std::move(complex));
  }
  return out;
}

}  // namespace specsyn::corpus
