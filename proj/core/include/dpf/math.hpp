#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace dpf {

// 3-vector over any scalar type (double for plain evaluation, reverse-mode
// variables for differentiable evaluation).
template <class T>
struct Vec3T {
  T x{}, y{}, z{};
};

using Vec3 = Vec3T<double>;

template <class T>
inline Vec3T<T> operator+(const Vec3T<T>& a, const Vec3T<T>& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
template <class T>
inline Vec3T<T> operator-(const Vec3T<T>& a, const Vec3T<T>& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
template <class T>
inline Vec3T<T> operator*(const Vec3T<T>& a, double s) {
  return {a.x * s, a.y * s, a.z * s};
}
inline Vec3 operator*(double s, const Vec3& a) { return a * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& a) { return dot(a, a); }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) {
  double n = norm(a);
  return {a.x / n, a.y / n, a.z / n};
}
inline double dist2(const Vec3& a, const Vec3& b) { return norm2(a - b); }

inline bool finite(const Vec3& a) {
  return std::isfinite(a.x) && std::isfinite(a.y) && std::isfinite(a.z);
}

// Unit quaternion (w, x, y, z); rotates the local frame into the world frame.
template <class T>
struct QuatT {
  T w{}, x{}, y{}, z{};
};

using Quat = QuatT<double>;

inline Quat quat_identity() { return {1.0, 0.0, 0.0, 0.0}; }

inline double norm(const Quat& q) {
  return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
}

inline Quat normalized(const Quat& q) {
  double n = norm(q);
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

// Hamilton product; compose(a, b) applies b first, then a.
inline Quat quat_mul(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

inline Quat quat_from_axis_angle(const Vec3& axis, double angle) {
  Vec3 u = normalized(axis);
  double s = std::sin(angle * 0.5);
  return {std::cos(angle * 0.5), u.x * s, u.y * s, u.z * s};
}

// Row-major 3x3 matrix.
struct Mat3 {
  std::array<double, 9> m{};

  double operator()(int r, int c) const { return m[static_cast<size_t>(r * 3 + c)]; }
};

// Rotation matrix of a unit quaternion (local -> world).
inline Mat3 quat_to_mat(const Quat& q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  Mat3 r;
  r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
         2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
  return r;
}

inline Vec3 mat_apply(const Mat3& r, const Vec3& v) {
  return {r.m[0] * v.x + r.m[1] * v.y + r.m[2] * v.z,
          r.m[3] * v.x + r.m[4] * v.y + r.m[5] * v.z,
          r.m[6] * v.x + r.m[7] * v.y + r.m[8] * v.z};
}

inline Vec3 mat_apply_transposed(const Mat3& r, const Vec3& v) {
  return {r.m[0] * v.x + r.m[3] * v.y + r.m[6] * v.z,
          r.m[1] * v.x + r.m[4] * v.y + r.m[7] * v.z,
          r.m[2] * v.x + r.m[5] * v.y + r.m[8] * v.z};
}

inline Vec3 rotate(const Quat& q, const Vec3& v) { return mat_apply(quat_to_mat(q), v); }

}  // namespace dpf
