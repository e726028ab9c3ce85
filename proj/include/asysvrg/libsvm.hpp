#pragma once

// LibSVM text format: `<label> <idx>:<val> ...`, 1-based strictly
// increasing indices. Files may be gzip-compressed.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "asysvrg/model.hpp"

namespace asysvrg {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& reason)
      : std::runtime_error("line " + std::to_string(line) + ": " + reason), line_(line), reason_(reason) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

/// Summary counts of a dataset.
struct DatasetMeta {
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t nnz = 0;
  double max_row_norm_sq = 0.0;
  std::string source;
};

inline DatasetMeta dataset_stats(const Dataset& data, std::string source = {}) {
  DatasetMeta meta{data.size(), data.dim(), 0, 0.0, std::move(source)};
  for (const auto& ex : data.examples()) {
    meta.nnz += ex.indices.size();
    meta.max_row_norm_sq = std::max(meta.max_row_norm_sq, squared_norm(ex));
  }
  return meta;
}

namespace detail {

inline bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

inline std::vector<std::string_view> split_tokens(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (pos < line.size()) {
    while (pos < line.size() && is_space(line[pos])) ++pos;
    const std::size_t start = pos;
    while (pos < line.size() && !is_space(line[pos])) ++pos;
    if (pos > start) out.push_back(line.substr(start, pos - start));
  }
  return out;
}

inline double parse_real(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last)
    throw ParseError(line, "malformed value '" + std::string(tok) + "'");
  if (!std::isfinite(v)) throw ParseError(line, "non-finite value '" + std::string(tok) + "'");
  return v;
}

inline int parse_label(std::string_view tok, std::size_t line) {
  if (tok == "+1" || tok == "1") return 1;
  if (tok == "-1") return -1;
  throw ParseError(line, "label must be +1/1 or -1, got '" + std::string(tok) + "'");
}

inline std::string format_real(double v) {
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

}  // namespace detail

/// Parses one LibSVM line into an example with 0-based indices.
inline SparseExample parse_libsvm_line(std::string_view text, std::size_t line_no) {
  const auto toks = detail::split_tokens(text);
  if (toks.empty()) throw ParseError(line_no, "empty line");
  SparseExample ex;
  ex.label = detail::parse_label(toks[0], line_no);
  ex.indices.reserve(toks.size() - 1);
  ex.values.reserve(toks.size() - 1);
  for (std::size_t t = 1; t < toks.size(); ++t) {
    const auto tok = toks[t];
    const auto colon = tok.find(':');
    if (colon == std::string_view::npos || colon == 0)
      throw ParseError(line_no, "malformed feature token '" + std::string(tok) + "'");
    std::uint64_t idx = 0;
    const auto idx_str = tok.substr(0, colon);
    const auto [ptr, ec] = std::from_chars(idx_str.data(), idx_str.data() + idx_str.size(), idx);
    if (ec != std::errc() || ptr != idx_str.data() + idx_str.size())
      throw ParseError(line_no, "malformed feature index '" + std::string(idx_str) + "'");
    if (idx < 1 || idx > std::numeric_limits<std::uint32_t>::max())
      throw ParseError(line_no, "feature index out of range '" + std::string(idx_str) + "'");
    const auto zero_based = static_cast<std::uint32_t>(idx - 1);
    if (!ex.indices.empty() && zero_based <= ex.indices.back())
      throw ParseError(line_no, "feature indices must be strictly increasing");
    ex.indices.push_back(zero_based);
    ex.values.push_back(detail::parse_real(tok.substr(colon + 1), line_no));
  }
  return ex;
}

/// Reads a whole stream. Blank lines are skipped. `dim` pins the feature
/// dimension; by default it is the largest index seen (at least 1).
inline Dataset parse_libsvm(std::istream& in, std::optional<std::size_t> dim = std::nullopt) {
  std::vector<SparseExample> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t max_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::split_tokens(line).empty()) continue;
    auto ex = parse_libsvm_line(line, line_no);
    if (!ex.indices.empty()) {
      max_index = std::max<std::size_t>(max_index, ex.indices.back() + 1);
      if (dim && ex.indices.back() >= *dim)
        throw ParseError(line_no, "feature index " + std::to_string(ex.indices.back() + 1) +
                                      " exceeds pinned dimension " + std::to_string(*dim));
    }
    rows.push_back(std::move(ex));
  }
  if (rows.empty()) throw ParseError(line_no, "no examples in input");
  return Dataset(std::move(rows), dim.value_or(std::max<std::size_t>(max_index, 1)));
}

inline Dataset parse_libsvm(std::string_view text, std::optional<std::size_t> dim = std::nullopt) {
  std::istringstream in{std::string(text)};
  return parse_libsvm(in, dim);
}

/// Loads a LibSVM file, transparently inflating gzip input.
inline Dataset load_libsvm(const std::filesystem::path& path, std::optional<std::size_t> dim = std::nullopt) {
  gzFile gz = gzopen(path.c_str(), "rb");
  if (gz == nullptr) throw std::runtime_error("cannot open " + path.string());
  std::string content;
  std::array<char, 1 << 16> buf{};
  int got = 0;
  while ((got = gzread(gz, buf.data(), static_cast<unsigned>(buf.size()))) > 0)
    content.append(buf.data(), static_cast<std::size_t>(got));
  int errnum = 0;
  const char* msg = gzerror(gz, &errnum);
  const std::string err = (got < 0 && msg != nullptr) ? msg : "";
  gzclose(gz);
  if (got < 0) throw std::runtime_error("read error in " + path.string() + ": " + err);
  return parse_libsvm(content, dim);
}

/// Writes LibSVM text with shortest round-trip value formatting.
inline void write_libsvm(std::ostream& out, const Dataset& data) {
  for (const auto& ex : data.examples()) {
    out << (ex.label > 0 ? "+1" : "-1");
    for (std::size_t k = 0; k < ex.indices.size(); ++k)
      out << ' ' << (ex.indices[k] + 1) << ':' << detail::format_real(ex.values[k]);
    out << '\n';
  }
}

inline std::string to_libsvm(const Dataset& data) {
  std::ostringstream out;
  write_libsvm(out, data);
  return out.str();
}

}  // namespace asysvrg
