#pragma once

#include <string>
#include <string_view>

namespace hedseg {

enum class Modality { CT, MrT1In, MrT2 };

/// Accepts "CT", "MR-T1-in", "MR-T2" (case-insensitive) plus the short
/// aliases "ct", "t1", "t2". Throws Error("unknown_modality") otherwise.
Modality parse_modality(std::string_view tag);
std::string to_string(Modality m);

inline bool is_mr(Modality m) noexcept { return m != Modality::CT; }

}  // namespace hedseg
