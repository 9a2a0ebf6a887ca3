#include "hedseg/kv.hpp"

#include <algorithm>
#include <fstream>

namespace hedseg::kv {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

Document Document::parse(const std::string& text) {
  Document d;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error("invalid_config", "line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    d.values_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return d;
}

Document Document::read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot read configuration '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string Document::dump() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

void Document::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write configuration '" + path + "'");
  out << dump();
}

const std::string& Document::at(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error("invalid_config", "missing key '" + key + "'");
  return it->second;
}

void parse(const std::string& s, std::string& out) { out = s; }

void parse(const std::string& s, bool& out) {
  std::string t = trim(s);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "true" || t == "1" || t == "yes" || t == "on") {
    out = true;
  } else if (t == "false" || t == "0" || t == "no" || t == "off") {
    out = false;
  } else {
    throw Error("invalid_config", "expected a boolean: '" + s + "'");
  }
}

void parse(const std::string& s, int& out) {
  std::size_t pos = 0;
  const std::string t = trim(s);
  out = std::stoi(t, &pos);
  if (pos != t.size()) throw Error("invalid_config", "expected an integer: '" + s + "'");
}

void parse(const std::string& s, std::uint64_t& out) {
  std::size_t pos = 0;
  const std::string t = trim(s);
  out = std::stoull(t, &pos);
  if (pos != t.size()) throw Error("invalid_config", "expected an unsigned integer: '" + s + "'");
}

void parse(const std::string& s, double& out) {
  std::size_t pos = 0;
  const std::string t = trim(s);
  out = std::stod(t, &pos);
  if (pos != t.size()) throw Error("invalid_config", "expected a number: '" + s + "'");
}

}  // namespace hedseg::kv
