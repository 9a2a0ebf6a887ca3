#include "hedseg/modality.hpp"

#include <algorithm>
#include <cctype>

#include "hedseg/error.hpp"

namespace hedseg {

Modality parse_modality(std::string_view tag) {
  std::string t(tag);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (t == "ct") return Modality::CT;
  if (t == "mr-t1-in" || t == "t1" || t == "mr-t1" || t == "t1-in") return Modality::MrT1In;
  if (t == "mr-t2" || t == "t2") return Modality::MrT2;
  throw Error("unknown_modality", "unknown modality tag '" + std::string(tag) + "'");
}

std::string to_string(Modality m) {
  switch (m) {
    case Modality::CT: return "CT";
    case Modality::MrT1In: return "MR-T1-in";
    case Modality::MrT2: return "MR-T2";
  }
  return "?";
}

}  // namespace hedseg
