#include "epplan/query.hpp"

#include <cctype>
#include <limits>

namespace epplan {

namespace {

std::string describe_expected(const std::vector<std::string>& expected) {
  std::string out;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    if (i) out += i + 1 == expected.size() ? " or " : ", ";
    out += expected[i];
  }
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  return true;
}

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  Query run() {
    Query q;
    keyword("SELECT");
    keyword("frameID");
    keyword("FROM");
    q.source = ident("source identifier");
    keyword("WHERE");
    q.predicates.push_back(predicate());
    for (;;) {
      skip_ws();
      if (peek_word("AND")) {
        pos_ += 3;
        q.predicates.push_back(predicate());
        continue;
      }
      if (at_end() || text_[pos_] != ';') fail({"AND", "';'"});
      ++pos_;
      break;
    }
    skip_ws();
    if (!at_end()) fail({"end of input"});
    return q;
  }

 private:
  [[noreturn]] void fail(std::vector<std::string> expected) {
    std::string found = at_end() ? "end of input" : "'" + std::string(1, text_[pos_]) + "'";
    throw ParseError(pos_, std::move(expected), found);
  }

  bool at_end() const { return pos_ >= text_.size(); }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool peek_word(std::string_view word) const {
    if (text_.size() - pos_ < word.size()) return false;
    if (!iequals(text_.substr(pos_, word.size()), word)) return false;
    const std::size_t end = pos_ + word.size();
    return end == text_.size() || !ident_char(text_[end]);
  }

  void keyword(std::string_view word) {
    skip_ws();
    if (!peek_word(word)) fail({std::string(word)});
    pos_ += word.size();
  }

  void punct(char c) {
    skip_ws();
    if (at_end() || text_[pos_] != c) fail({std::string("'") + c + "'"});
    ++pos_;
  }

  std::string ident(const std::string& what) {
    skip_ws();
    if (at_end() || !ident_start(text_[pos_])) fail({what});
    const std::size_t start = pos_;
    while (!at_end() && ident_char(text_[pos_])) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }

  CompareOp op() {
    skip_ws();
    auto starts = [&](std::string_view s) { return text_.substr(pos_, s.size()) == s; };
    if (starts(">=")) { pos_ += 2; return CompareOp::GE; }
    if (starts("<=")) { pos_ += 2; return CompareOp::LE; }
    if (starts("==")) { pos_ += 2; return CompareOp::EQ; }
    if (starts(">")) { pos_ += 1; return CompareOp::GT; }
    if (starts("<")) { pos_ += 1; return CompareOp::LT; }
    if (starts("=")) { pos_ += 1; return CompareOp::EQ; }
    fail({"comparison operator"});
  }

  std::int64_t integer() {
    skip_ws();
    if (at_end() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) fail({"integer"});
    const std::size_t start = pos_;
    std::int64_t value = 0;
    constexpr std::int64_t limit = std::numeric_limits<std::int32_t>::max();
    while (!at_end() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      value = value * 10 + (text_[pos_] - '0');
      if (value > limit)
        throw ParseError(start, {"integer <= " + std::to_string(limit)}, "threshold overflow");
      ++pos_;
    }
    return value;
  }

  CountPredicate predicate() {
    CountPredicate p;
    keyword("Count");
    punct('(');
    p.class_label = ident("class identifier");
    punct(')');
    p.op = op();
    p.threshold = integer();
    return p;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

ParseError::ParseError(std::size_t offset, std::vector<std::string> expected, const std::string& found)
    : std::runtime_error("syntax error at offset " + std::to_string(offset) + ": expected " +
                         describe_expected(expected) + ", found " + found),
      offset_(offset),
      expected_(std::move(expected)) {}

const char* to_symbol(CompareOp op) {
  switch (op) {
    case CompareOp::GE: return ">=";
    case CompareOp::GT: return ">";
    case CompareOp::EQ: return "=";
    case CompareOp::LE: return "<=";
    case CompareOp::LT: return "<";
  }
  return "?";
}

Query parse_query(std::string_view text) { return Parser(text).run(); }

std::string render_query(const Query& q) {
  std::string out = "SELECT frameID FROM " + q.source + " WHERE ";
  for (std::size_t i = 0; i < q.predicates.size(); ++i) {
    const auto& p = q.predicates[i];
    if (i) out += " AND ";
    out += "Count(" + p.class_label + ") " + to_symbol(p.op) + " " + std::to_string(p.threshold);
  }
  return out + ";";
}

std::vector<Query> parse_query_batch(std::string_view text) {
  std::vector<Query> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) out.push_back(parse_query(line));
    start = end + 1;
  }
  return out;
}

bool compare_count(std::int64_t count, CompareOp op, std::int64_t threshold) {
  switch (op) {
    case CompareOp::GE: return count >= threshold;
    case CompareOp::GT: return count > threshold;
    case CompareOp::EQ: return count == threshold;
    case CompareOp::LE: return count <= threshold;
    case CompareOp::LT: return count < threshold;
  }
  return false;
}

bool eval_predicate(const Query& query, std::span<const Detection> dets) {
  for (const auto& p : query.predicates) {
    std::int64_t count = 0;
    for (const auto& d : dets)
      if (d.confidence >= query.det_confidence_min && d.class_label == p.class_label) ++count;
    if (!compare_count(count, p.op, p.threshold)) return false;
  }
  return true;
}

}  // namespace epplan
