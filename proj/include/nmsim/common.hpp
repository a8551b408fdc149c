#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace nmsim {

// Error taxonomy. The CLI maps these onto exit codes: input-side errors
// (parse/shape/size/format/config/capacity) -> 2, internal invariant
// violations (bank conflict, accumulator overflow) -> 3.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParseError : Error { using Error::Error; };     // malformed input document
struct ShapeError : Error { using Error::Error; };     // layer/tensor shape mismatch
struct SizeError : Error { using Error::Error; };      // byte-length mismatch in a blob
struct FormatError : Error { using Error::Error; };    // bad magic/version/truncation
struct ConfigError : Error { using Error::Error; };    // hardware configuration impossible
struct CapacityError : Error { using Error::Error; };  // model does not fit the memory banks
struct BankConflict : Error { using Error::Error; };   // two same-cycle writes to one bank
struct OverflowError : Error { using Error::Error; };  // accumulator exceeded its declared width
struct EmptyStats : Error { using Error::Error; };     // metrics requested on an empty run

inline uint64_t ceil_div(uint64_t a, uint64_t b) { return (a + b - 1) / b; }

// Smallest signed bit-width that can hold v.
inline int signed_bits_for(int64_t v) {
    uint64_t mag = v < 0 ? static_cast<uint64_t>(-(v + 1)) + 1 : static_cast<uint64_t>(v);
    int bits = 1;
    while (mag > 0) {
        ++bits;
        mag >>= 1;
    }
    return bits;
}

} // namespace nmsim
