#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "adaco/error.hpp"

namespace adaco {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const
    {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

// Row-major 4x4 homogeneous transform. Rigid when the upper-left 3x3 block is
// a rotation and the last row is (0,0,0,1).
struct Mat4 {
    std::array<double, 16> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};

    static Mat4 identity() { return {}; }
    static Mat4 translation(const Vec3& t);
    static Mat4 rotation_z(double radians);
    static Mat4 rotation_axis(const Vec3& axis, double radians);

    double at(int r, int c) const { return m[static_cast<size_t>(r) * 4 + c]; }
    double& at(int r, int c) { return m[static_cast<size_t>(r) * 4 + c]; }

    Vec3 rotate(const Vec3& p) const;  // rotation block only
    Vec3 apply(const Vec3& p) const;   // R*p + t
    Vec3 translation_part() const { return {at(0, 3), at(1, 3), at(2, 3)}; }

    Mat4 operator*(const Mat4& o) const;

    // Max absolute entry of R^T R - I plus deviation of the affine row.
    double rigidity_error() const;
    bool is_rigid(double tol) const { return rigidity_error() <= tol; }

    // Inverse assuming rigidity: [R^T, -R^T t].
    Mat4 rigid_inverse() const;
};

// output_i = R * points_i + t. Throws on non-finite coordinates or a
// transform whose rigidity error exceeds `rigid_tol`.
std::vector<Vec3> transform_points(const std::vector<Vec3>& points, const Mat4& transform,
                                   double rigid_tol = 1e-5);

// Dense row-major matrix of doubles; the workhorse for features, logits and
// gradients.
struct Matrix {
    size_t rows = 0, cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(size_t r, size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

    double& at(size_t r, size_t c) { return data[r * cols + c]; }
    double at(size_t r, size_t c) const { return data[r * cols + c]; }
    double* row(size_t r) { return data.data() + r * cols; }
    const double* row(size_t r) const { return data.data() + r * cols; }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

}  // namespace adaco
