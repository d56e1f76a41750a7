#pragma once

#include <cstdint>

namespace trajgov {

// IEEE 754 binary16 <-> binary32. Narrowing rounds to nearest-even; widening
// is exact, so f16 -> f32 -> f16 reproduces the original bit pattern for every
// non-NaN input.
float half_to_float(std::uint16_t h) noexcept;
std::uint16_t float_to_half(float f) noexcept;

}  // namespace trajgov
