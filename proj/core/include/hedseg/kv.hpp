#pragma once

#include <array>
#include <cstdint>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hedseg/error.hpp"

namespace hedseg::kv {

/// Flat "key = value" document. Lines starting with '#' are comments.
class Document {
 public:
  static Document parse(const std::string& text);
  static Document read(const std::string& path);
  std::string dump() const;
  void write(const std::string& path) const;

  bool contains(const std::string& key) const { return values_.contains(key); }
  const std::string& at(const std::string& key) const;
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

inline std::string format(const std::string& v) { return v; }
inline std::string format(bool v) { return v ? "true" : "false"; }
inline std::string format(int v) { return std::to_string(v); }
inline std::string format(std::uint64_t v) { return std::to_string(v); }
inline std::string format(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}
template <typename T>
std::string format(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format(v[i]);
  return s;
}
template <typename T, std::size_t N>
std::string format(const std::array<T, N>& v) {
  return format(std::vector<T>(v.begin(), v.end()));
}

void parse(const std::string& s, std::string& out);
void parse(const std::string& s, bool& out);
void parse(const std::string& s, int& out);
void parse(const std::string& s, std::uint64_t& out);
void parse(const std::string& s, double& out);

template <typename T>
void parse(const std::string& s, std::vector<T>& out) {
  out.clear();
  std::stringstream ss(s);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    T v{};
    parse(cell, v);
    out.push_back(v);
  }
}

template <typename T, std::size_t N>
void parse(const std::string& s, std::array<T, N>& out) {
  std::vector<T> v;
  parse(s, v);
  if (v.size() != N) throw Error("invalid_config", "expected " + std::to_string(N) + " comma-separated values: '" + s + "'");
  std::copy(v.begin(), v.end(), out.begin());
}

/// Visitor that writes every field into a document.
struct Writer {
  Document& doc;
  std::string prefix;
  template <typename T>
  void operator()(const std::string& key, const T& value) {
    doc.set(prefix + key, format(value));
  }
};

/// Visitor that reads fields present in a document, leaving others untouched.
struct Reader {
  const Document& doc;
  std::string prefix;
  template <typename T>
  void operator()(const std::string& key, T& value) {
    if (doc.contains(prefix + key)) {
      try {
        parse(doc.at(prefix + key), value);
      } catch (const Error&) {
        throw;
      } catch (const std::exception& e) {
        throw Error("invalid_config", "bad value for '" + prefix + key + "': " + doc.at(prefix + key));
      }
    }
  }
};

}  // namespace hedseg::kv
