#include "hedseg/manifest.hpp"

#include <fstream>
#include <sstream>

#include "hedseg/error.hpp"

namespace hedseg {

std::string escape(const std::string& v) {
  std::string out;
  out.reserve(v.size());
  for (char ch : v) {
    switch (ch) {
      case ' ': out += "%20"; break;
      case '%': out += "%25"; break;
      case '=': out += "%3D"; break;
      case '\n': out += "%0A"; break;
      case '\t': out += "%09"; break;
      default: out += ch;
    }
  }
  return out;
}

std::string unescape(const std::string& v) {
  std::string out;
  out.reserve(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] == '%' && i + 2 < v.size()) {
      const int code = std::stoi(v.substr(i + 1, 2), nullptr, 16);
      out += static_cast<char>(code);
      i += 2;
    } else {
      out += v[i];
    }
  }
  return out;
}

std::string ManifestRecord::sample_id() const {
  std::string id = patient + "/" + std::to_string(index);
  if (variant > 0) id += "~" + std::to_string(variant);
  return id;
}

std::string ManifestRecord::stem() const {
  std::string s = patient + "/" + std::to_string(index);
  if (variant > 0) s += "_a" + std::to_string(variant);
  return s;
}

std::string format_record(const ManifestRecord& rec) {
  std::ostringstream os;
  os << "patient=" << escape(rec.patient) << " index=" << rec.index << " modality=" << to_string(rec.modality)
     << " image=" << escape(rec.image) << " mask=" << (rec.mask.empty() ? "-" : escape(rec.mask))
     << " split=" << (rec.split.empty() ? "-" : escape(rec.split));
  if (rec.variant > 0) os << " variant=" << rec.variant;
  for (const auto& [k, v] : rec.extra) os << ' ' << escape(k) << '=' << escape(v);
  return os.str();
}

ManifestRecord parse_record(const std::string& line) {
  ManifestRecord rec;
  bool has_patient = false, has_index = false, has_image = false;
  std::istringstream is(line);
  std::string token;
  while (is >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) throw Error("manifest", "malformed manifest token '" + token + "'");
    const std::string key = unescape(token.substr(0, eq));
    const std::string value = unescape(token.substr(eq + 1));
    if (key == "patient") {
      rec.patient = value;
      has_patient = true;
    } else if (key == "index") {
      rec.index = std::stoi(value);
      has_index = true;
    } else if (key == "modality") {
      rec.modality = parse_modality(value);
    } else if (key == "image") {
      rec.image = value;
      has_image = true;
    } else if (key == "mask") {
      rec.mask = value == "-" ? "" : value;
    } else if (key == "split") {
      rec.split = value == "-" ? "" : value;
    } else if (key == "variant") {
      rec.variant = std::stoi(value);
    } else {
      rec.extra[key] = value;
    }
  }
  if (!has_patient || !has_index || !has_image) {
    throw Error("manifest", "manifest record lacks patient/index/image: '" + line + "'");
  }
  return rec;
}

Manifest Manifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot read manifest '" + path.string() + "'");
  Manifest m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    m.records.push_back(parse_record(line));
  }
  return m;
}

void Manifest::write(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write manifest '" + path.string() + "'");
  for (const auto& r : records) out << format_record(r) << '\n';
  if (!out) throw Error("io", "failed writing manifest '" + path.string() + "'");
}

std::vector<const ManifestRecord*> Manifest::select(std::optional<std::string> split, bool originals_only) const {
  std::vector<const ManifestRecord*> out;
  for (const auto& r : records) {
    if (originals_only && r.variant > 0) continue;
    if (split && r.split != *split) continue;
    out.push_back(&r);
  }
  return out;
}

}  // namespace hedseg
