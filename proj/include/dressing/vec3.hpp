#pragma once

#include <cmath>

namespace dressing {

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Vec3() = default;
    Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }

    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm_sq(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm_sq(v)); }

// Returns zero vector when |v| is below eps instead of dividing by ~0.
inline Vec3 normalized(const Vec3& v, double eps = 1e-12) {
    double n = norm(v);
    if (n < eps) return {0.0, 0.0, 0.0};
    return v / n;
}

inline bool is_finite(const Vec3& v) {
    return std::isfinite(v.x) && std::isfinite(v.y) && std::isfinite(v.z);
}

// Rodrigues rotation of v about unit axis by angle (radians).
inline Vec3 rotate_axis_angle(const Vec3& v, const Vec3& axis, double angle) {
    double c = std::cos(angle);
    double s = std::sin(angle);
    return v * c + cross(axis, v) * s + axis * (dot(axis, v) * (1.0 - c));
}

// 3x3 rotation matrix, column-major columns c0,c1,c2.
struct Mat3 {
    Vec3 c0{1, 0, 0};
    Vec3 c1{0, 1, 0};
    Vec3 c2{0, 0, 1};

    Vec3 operator*(const Vec3& v) const { return c0 * v.x + c1 * v.y + c2 * v.z; }

    Mat3 operator*(const Mat3& o) const {
        Mat3 r;
        r.c0 = (*this) * o.c0;
        r.c1 = (*this) * o.c1;
        r.c2 = (*this) * o.c2;
        return r;
    }

    Mat3 transposed() const {
        Mat3 r;
        r.c0 = {c0.x, c1.x, c2.x};
        r.c1 = {c0.y, c1.y, c2.y};
        r.c2 = {c0.z, c1.z, c2.z};
        return r;
    }

    static Mat3 identity() { return Mat3{}; }

    static Mat3 from_axis_angle(const Vec3& axis_angle) {
        double angle = norm(axis_angle);
        Mat3 r;
        if (angle < 1e-15) return r;
        Vec3 axis = axis_angle / angle;
        r.c0 = rotate_axis_angle({1, 0, 0}, axis, angle);
        r.c1 = rotate_axis_angle({0, 1, 0}, axis, angle);
        r.c2 = rotate_axis_angle({0, 0, 1}, axis, angle);
        return r;
    }
};

}  // namespace dressing
