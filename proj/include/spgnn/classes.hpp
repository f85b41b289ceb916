#ifndef SPGNN_CLASSES_HPP
#define SPGNN_CLASSES_HPP

#include <array>
#include <string_view>

namespace spgnn {

// Fixed class order for all probability matrices and label files:
// trachea, the two main bronchi, 8 left segmental branches, 10 right
// segmental branches, and a catch-all for every other branch.
inline constexpr int kNumClasses = 22;
inline constexpr int kNamedClasses = 21;   // everything except "other"
inline constexpr int kSegmentalBegin = 3;  // [kSegmentalBegin, kSegmentalEnd)
inline constexpr int kSegmentalEnd = 21;
inline constexpr int kNumSegmental = kSegmentalEnd - kSegmentalBegin;
inline constexpr int kOtherClass = 21;

inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "trachea", "left_main", "right_main", "LB1+2", "LB3",  "LB4",
    "LB5",     "LB6",       "LB7+8",      "LB9",   "LB10", "RB1",
    "RB2",     "RB3",       "RB4",        "RB5",   "RB6",  "RB7",
    "RB8",     "RB9",       "RB10",       "other"};

inline int class_index(std::string_view name) {
  for (int i = 0; i < kNumClasses; ++i)
    if (kClassNames[static_cast<std::size_t>(i)] == name) return i;
  return -1;
}

}  // namespace spgnn

#endif
