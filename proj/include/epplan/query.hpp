#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epplan/trace.hpp"

namespace epplan {

enum class CompareOp { GE, GT, EQ, LE, LT };

const char* to_symbol(CompareOp op);

struct CountPredicate {
  std::string class_label;
  CompareOp op = CompareOp::GE;
  std::int64_t threshold = 0;
  bool operator==(const CountPredicate&) const = default;
};

/// A conjunction of count predicates over one source video.
struct Query {
  std::string source;
  std::vector<CountPredicate> predicates;
  double det_confidence_min = 0.5;
  bool operator==(const Query&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, std::vector<std::string> expected, const std::string& found);
  /// Byte offset into the query text.
  std::size_t offset() const { return offset_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

/// Grammar:
///   SELECT frameID FROM <ident> WHERE <pred> (AND <pred>)* ;
///   <pred> := Count(<ident>) <op> <int>,  <op> in >= > = == <= <
/// Keywords are case-insensitive. Identifiers may contain '-' after the first
/// character (e.g. UA-DeTrac).
Query parse_query(std::string_view text);

/// Canonical text form; parse_query(render_query(q)) == q up to the
/// confidence gate, which has no textual form.
std::string render_query(const Query& q);

/// Parses a batch file body: one query per line, '#' starts a comment.
std::vector<Query> parse_query_batch(std::string_view text);

bool compare_count(std::int64_t count, CompareOp op, std::int64_t threshold);

bool eval_predicate(const Query& query, std::span<const Detection> dets);

}  // namespace epplan
