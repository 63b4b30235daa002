#include "monosplat/core.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace monosplat {

void GaussianSet::validate(int height, int width) const {
    if (provenance.size() != primitives.size()) {
        throw std::invalid_argument("GaussianSet: provenance length " + std::to_string(provenance.size()) +
                                    " != primitive count " + std::to_string(primitives.size()));
    }
    for (const auto& p : provenance) {
        if (p.row < 0 || p.row >= height || p.col < 0 || p.col >= width) {
            throw std::invalid_argument("GaussianSet: provenance pixel out of bounds");
        }
    }
}

RigidTransform RigidTransform::inverse() const {
    RigidTransform inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(inv.rotation * translation);
    return inv;
}

RigidTransform RigidTransform::compose(const RigidTransform& rhs) const {
    RigidTransform out;
    out.rotation = rotation * rhs.rotation;
    out.translation = rotation * rhs.translation + translation;
    return out;
}

void Camera::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("Camera: focal lengths must be positive");
    if (width < 1 || height < 1) throw std::invalid_argument("Camera: image dimensions must be >= 1");
    const Mat3& r = world_to_camera.rotation;
    if (!r.allFinite() || !world_to_camera.translation.allFinite()) {
        throw std::invalid_argument("Camera: non-finite extrinsics");
    }
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6) {
        throw std::invalid_argument("Camera: rotation is not orthonormal");
    }
}

Vec3 Camera::center() const { return camera_to_world().translation; }

bool Camera::same_intrinsics(const Camera& other, double tol) const {
    return std::abs(fx - other.fx) <= tol && std::abs(fy - other.fy) <= tol && std::abs(cx - other.cx) <= tol &&
           std::abs(cy - other.cy) <= tol && width == other.width && height == other.height;
}

Camera Camera::centered(int width, int height, double focal) {
    Camera cam;
    cam.fx = focal;
    cam.fy = focal;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    cam.width = width;
    cam.height = height;
    return cam;
}

void Thresholds::validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("Thresholds: tau must lie in (0, 1)");
    if (!(tau_theta > 0.0)) throw std::invalid_argument("Thresholds: tau_theta must be positive");
    if (!(tau_artifact > 0.0 && tau_artifact < 1.0)) {
        throw std::invalid_argument("Thresholds: tau_artifact must lie in (0, 1)");
    }
}

void LossWeights::validate() const {
    for (double w : {lambda_reg, lambda_novel, lambda_perp, lambda_clip}) {
        if (!std::isfinite(w) || w < 0.0) throw std::invalid_argument("LossWeights: weights must be finite and >= 0");
    }
}

double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Mat3 quaternion_to_rotation(const Vec4& q) {
    const double n = q.norm();
    if (!(n > 1e-12)) throw std::invalid_argument("quaternion_to_rotation: zero-norm quaternion");
    const Vec4 u = q / n;
    const double w = u[0], x = u[1], y = u[2], z = u[3];
    Mat3 r;
    r << 1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y);
    return r;
}

std::array<Mat3, 4> rotation_jacobian(const Vec4& uq) {
    const double w = uq[0], x = uq[1], y = uq[2], z = uq[3];
    std::array<Mat3, 4> d;
    d[0] << 0.0, -z, y, z, 0.0, -x, -y, x, 0.0;
    d[1] << 0.0, y, z, y, -2.0 * x, -w, z, w, -2.0 * x;
    d[2] << -2.0 * y, x, w, x, 0.0, z, -w, z, -2.0 * y;
    d[3] << -2.0 * z, -w, x, w, -2.0 * z, y, x, y, 0.0;
    for (auto& m : d) m *= 2.0;
    return d;
}

Mat3 covariance(const Vec3& log_scale, const Vec4& q) {
    if (!log_scale.allFinite() || !q.allFinite()) throw std::invalid_argument("covariance: non-finite input");
    const Mat3 r = quaternion_to_rotation(q);
    const Mat3 m = r * log_scale.array().exp().matrix().asDiagonal();
    return m * m.transpose();
}

ActivatedAttributes activate(const GaussianPrimitive& primitive) {
    return {sigmoid(primitive.opacity_raw), primitive.log_scale.array().exp().matrix()};
}

} // namespace monosplat
