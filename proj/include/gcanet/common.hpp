#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace gcanet {

enum class DType : uint8_t { f32 = 0, f64 = 1 };

inline size_t dtype_size(DType dt) { return dt == DType::f32 ? 4 : 8; }
inline const char* dtype_name(DType dt) { return dt == DType::f32 ? "f32" : "f64"; }

// Extents, outermost first. 5-D activations are (batch, channel, z, y, x),
// x fastest-varying.
using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// Kernel geometry triple in the conventional (x, y, z) notation, e.g. a
// 7x7x3 kernel is {7, 7, 3}: large in-plane, short through-plane.
struct Tri3 {
    int64_t x = 1;
    int64_t y = 1;
    int64_t z = 1;
    bool operator==(const Tri3&) const = default;
};

// ShapeError / ValueError: caller handed us inconsistent extents or argument
// values. DataError: a file or external payload is unusable.
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValueError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace gcanet
