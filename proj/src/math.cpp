#include "adaco/math.hpp"

#include <algorithm>

namespace adaco {

Mat4 Mat4::translation(const Vec3& t)
{
    Mat4 out;
    out.at(0, 3) = t.x;
    out.at(1, 3) = t.y;
    out.at(2, 3) = t.z;
    return out;
}

Mat4 Mat4::rotation_z(double radians)
{
    Mat4 out;
    const double c = std::cos(radians), s = std::sin(radians);
    out.at(0, 0) = c;
    out.at(0, 1) = -s;
    out.at(1, 0) = s;
    out.at(1, 1) = c;
    return out;
}

Mat4 Mat4::rotation_axis(const Vec3& axis, double radians)
{
    const double n = axis.norm();
    if (n <= 0.0) fail(ErrorCode::invalid_argument, "rotation axis must be nonzero");
    const Vec3 u = axis * (1.0 / n);
    const double c = std::cos(radians), s = std::sin(radians), ic = 1.0 - c;
    Mat4 out;
    out.at(0, 0) = c + u.x * u.x * ic;
    out.at(0, 1) = u.x * u.y * ic - u.z * s;
    out.at(0, 2) = u.x * u.z * ic + u.y * s;
    out.at(1, 0) = u.y * u.x * ic + u.z * s;
    out.at(1, 1) = c + u.y * u.y * ic;
    out.at(1, 2) = u.y * u.z * ic - u.x * s;
    out.at(2, 0) = u.z * u.x * ic - u.y * s;
    out.at(2, 1) = u.z * u.y * ic + u.x * s;
    out.at(2, 2) = c + u.z * u.z * ic;
    return out;
}

Vec3 Mat4::rotate(const Vec3& p) const
{
    return {at(0, 0) * p.x + at(0, 1) * p.y + at(0, 2) * p.z,
            at(1, 0) * p.x + at(1, 1) * p.y + at(1, 2) * p.z,
            at(2, 0) * p.x + at(2, 1) * p.y + at(2, 2) * p.z};
}

Vec3 Mat4::apply(const Vec3& p) const
{
    Vec3 r = rotate(p);
    return {r.x + at(0, 3), r.y + at(1, 3), r.z + at(2, 3)};
}

Mat4 Mat4::operator*(const Mat4& o) const
{
    Mat4 out;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += at(r, k) * o.at(k, c);
            out.at(r, c) = acc;
        }
    }
    return out;
}

double Mat4::rigidity_error() const
{
    double err = 0.0;
    // R^T R - I
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) acc += at(k, i) * at(k, j);
            err = std::max(err, std::abs(acc - (i == j ? 1.0 : 0.0)));
        }
    }
    // affine last row
    err = std::max(err, std::abs(at(3, 0)));
    err = std::max(err, std::abs(at(3, 1)));
    err = std::max(err, std::abs(at(3, 2)));
    err = std::max(err, std::abs(at(3, 3) - 1.0));
    return err;
}

Mat4 Mat4::rigid_inverse() const
{
    Mat4 out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.at(r, c) = at(c, r);
    const Vec3 t = translation_part();
    const Vec3 it = out.rotate(t);
    out.at(0, 3) = -it.x;
    out.at(1, 3) = -it.y;
    out.at(2, 3) = -it.z;
    return out;
}

std::vector<Vec3> transform_points(const std::vector<Vec3>& points, const Mat4& transform,
                                   double rigid_tol)
{
    if (!transform.is_rigid(rigid_tol))
        fail(ErrorCode::invalid_argument, "transform is not rigid within tolerance");
    std::vector<Vec3> out;
    out.reserve(points.size());
    for (const Vec3& p : points) {
        if (!p.finite()) fail(ErrorCode::invalid_argument, "non-finite point coordinate");
        out.push_back(transform.apply(p));
    }
    return out;
}

}  // namespace adaco
