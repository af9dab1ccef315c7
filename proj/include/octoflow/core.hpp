#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace octoflow {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <class T>
struct Vector3 {
    std::array<T, 3> v{};

    constexpr Vector3() = default;
    constexpr Vector3(T x, T y, T z) : v{x, y, z} {}

    constexpr T& operator[](int i) { return v[i]; }
    constexpr const T& operator[](int i) const { return v[i]; }
    constexpr T x() const { return v[0]; }
    constexpr T y() const { return v[1]; }
    constexpr T z() const { return v[2]; }

    constexpr Vector3& operator+=(const Vector3& o) {
        for (int i = 0; i < 3; ++i) v[i] += o.v[i];
        return *this;
    }
    constexpr Vector3& operator-=(const Vector3& o) {
        for (int i = 0; i < 3; ++i) v[i] -= o.v[i];
        return *this;
    }
    constexpr Vector3& operator*=(T s) {
        for (int i = 0; i < 3; ++i) v[i] *= s;
        return *this;
    }
    friend constexpr Vector3 operator+(Vector3 a, const Vector3& b) { return a += b; }
    friend constexpr Vector3 operator-(Vector3 a, const Vector3& b) { return a -= b; }
    friend constexpr Vector3 operator*(Vector3 a, T s) { return a *= s; }
    friend constexpr Vector3 operator*(T s, Vector3 a) { return a *= s; }
    friend constexpr bool operator==(const Vector3&, const Vector3&) = default;
    friend constexpr auto operator<=>(const Vector3&, const Vector3&) = default;
};

using Vec3 = Vector3<double>;
using Int3 = Vector3<std::int64_t>;

inline constexpr double dot(const Vec3& a, const Vec3& b) {
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

inline constexpr Vec3 to_vec(const Int3& a) {
    return {double(a[0]), double(a[1]), double(a[2])};
}

//! Axis-aligned box in physical coordinates, closed.
struct AABB {
    Vec3 lo, hi;

    Vec3 extent() const { return hi - lo; }
    Vec3 center() const { return (lo + hi) * 0.5; }
    double volume() const {
        auto e = extent();
        return e[0] * e[1] * e[2];
    }
    bool contains(const Vec3& p) const {
        for (int i = 0; i < 3; ++i)
            if (p[i] < lo[i] || p[i] > hi[i]) return false;
        return true;
    }
    friend bool operator==(const AABB&, const AABB&) = default;
};

//! Half-open integer box [lo, hi).
struct IBox {
    Int3 lo, hi;

    bool empty() const {
        for (int i = 0; i < 3; ++i)
            if (hi[i] <= lo[i]) return true;
        return false;
    }
    std::int64_t size(int axis) const { return std::max<std::int64_t>(0, hi[axis] - lo[axis]); }
    std::int64_t count() const { return empty() ? 0 : size(0) * size(1) * size(2); }
    bool contains(const Int3& p) const {
        for (int i = 0; i < 3; ++i)
            if (p[i] < lo[i] || p[i] >= hi[i]) return false;
        return true;
    }
    IBox shifted(const Int3& d) const { return {lo + d, hi + d}; }
    IBox grown(std::int64_t g) const {
        return {lo - Int3{g, g, g}, hi + Int3{g, g, g}};
    }
    friend bool operator==(const IBox&, const IBox&) = default;
};

inline IBox intersect(const IBox& a, const IBox& b) {
    IBox r;
    for (int i = 0; i < 3; ++i) {
        r.lo[i] = std::max(a.lo[i], b.lo[i]);
        r.hi[i] = std::min(a.hi[i], b.hi[i]);
    }
    return r;
}

//! Dimension of the closed intersection of two boxes: -1 none, 0 point, 1 segment, 2 face, 3 volume.
inline int contact_dimension(const IBox& a, const IBox& b) {
    int dim = 0;
    for (int i = 0; i < 3; ++i) {
        auto lo = std::max(a.lo[i], b.lo[i]);
        auto hi = std::min(a.hi[i], b.hi[i]);
        if (hi < lo) return -1;
        if (hi > lo) ++dim;
    }
    return dim;
}

//! Closed intersection, possibly degenerate (lo == hi on some axes). Caller checks contact first.
inline IBox closed_intersection(const IBox& a, const IBox& b) { return intersect(a, b); }

template <class F>
inline void for_each_cell(const IBox& box, F&& f) {
    for (auto z = box.lo[2]; z < box.hi[2]; ++z)
        for (auto y = box.lo[1]; y < box.hi[1]; ++y)
            for (auto x = box.lo[0]; x < box.hi[0]; ++x) f(Int3{x, y, z});
}

inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    auto q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

} // namespace octoflow
