#include "fbo/config.h"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fbo/errors.h"

namespace fbo {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

double parse_number(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError("not a number: '" + std::string(s) + "'");
  }
  return v;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{}
                                        : text.substr(nl + 1);
    ++line_no;
    if (const std::size_t hash = line.find('#');
        hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (key.empty()) {
      throw ParseError("line " + std::to_string(line_no) + ": empty key");
    }
    if (cfg.has(key)) {
      throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" +
                       key + "'");
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const std::string& KeyValueConfig::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ParseError("missing key '" + key + "'");
  return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key) const {
  return require(key);
}

double KeyValueConfig::get_double(const std::string& key) const {
  try {
    return parse_number(require(key));
  } catch (const ParseError& e) {
    throw ParseError("key '" + key + "': " + e.what());
  }
}

long KeyValueConfig::get_int(const std::string& key) const {
  const double v = get_double(key);
  if (v != static_cast<double>(static_cast<long>(v))) {
    throw ParseError("key '" + key + "': expected an integer");
  }
  return static_cast<long>(v);
}

Matrix KeyValueConfig::get_matrix(const std::string& key) const {
  try {
    return parse_matrix_literal(require(key));
  } catch (const Error& e) {
    throw ParseError("key '" + key + "': " + e.what());
  }
}

Vector KeyValueConfig::get_vector(const std::string& key) const {
  const std::string& v = require(key);
  if (trim(v).starts_with("[")) return get_matrix(key).to_vector();
  return {get_double(key)};
}

std::optional<double> KeyValueConfig::find_double(
    const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return get_double(key);
}

std::optional<std::string> KeyValueConfig::find_string(
    const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return get_string(key);
}

std::optional<Vector> KeyValueConfig::find_vector(
    const std::string& key) const {
  if (!has(key)) return std::nullopt;
  return get_vector(key);
}

void KeyValueConfig::set(const std::string& key, std::string value) {
  values_[key] = std::move(value);
}

Matrix parse_matrix_literal(std::string_view text) {
  text = trim(text);
  if (text.starts_with("zeros(") && text.ends_with(")")) {
    const std::string_view inner = text.substr(6, text.size() - 7);
    const std::size_t comma = inner.find(',');
    if (comma == std::string_view::npos) {
      throw ParseError("zeros(r, c) needs two arguments");
    }
    const double r = parse_number(inner.substr(0, comma));
    const double c = parse_number(inner.substr(comma + 1));
    if (r < 0 || c < 0) throw ParseError("zeros: negative size");
    return Matrix::zeros(static_cast<std::size_t>(r),
                         static_cast<std::size_t>(c));
  }
  if (!text.starts_with("[") || !text.ends_with("]")) {
    // Bare scalar.
    return Matrix(1, 1, {parse_number(text)});
  }
  std::string_view body = trim(text.substr(1, text.size() - 2));
  if (body.empty()) return Matrix();
  std::vector<double> entries;
  std::size_t cols = 0;
  std::size_t rows = 0;
  while (true) {
    const std::size_t semi = body.find(';');
    std::string_view row = body.substr(0, semi);
    std::size_t count = 0;
    while (true) {
      const std::size_t comma = row.find(',');
      entries.push_back(parse_number(row.substr(0, comma)));
      ++count;
      if (comma == std::string_view::npos) break;
      row = row.substr(comma + 1);
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw ParseError("ragged matrix literal");
    }
    ++rows;
    if (semi == std::string_view::npos) break;
    body = body.substr(semi + 1);
  }
  return Matrix(rows, cols, std::move(entries));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string format_matrix_literal(const Matrix& m) {
  if (m.empty()) {
    return "zeros(" + std::to_string(m.rows()) + ", " +
           std::to_string(m.cols()) + ")";
  }
  std::string out = "[";
  for (std::size_t i = 0; i < m.rows(); ++i) {
    if (i) out += "; ";
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out += ", ";
      out += format_double(m(i, j));
    }
  }
  return out + "]";
}

}  // namespace fbo
