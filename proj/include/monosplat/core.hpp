#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstddef>
#include <numbers>
#include <vector>

namespace monosplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kPi = std::numbers::pi;
inline double degrees_to_radians(double deg) { return deg * kPi / 180.0; }

/// One anisotropic Gaussian. Quaternions are stored (w, x, y, z).
struct GaussianPrimitive {
    Vec3 position = Vec3::Zero();
    Vec3 color = Vec3::Zero();
    double opacity_raw = 0.0;
    Vec3 log_scale = Vec3::Zero();
    Vec4 rotation = Vec4(1.0, 0.0, 0.0, 0.0);

    bool operator==(const GaussianPrimitive&) const = default;
};

/// Source view and pixel a pixel-aligned primitive was lifted from.
struct Provenance {
    int view = 0;
    int row = 0;
    int col = 0;

    bool operator==(const Provenance&) const = default;
};

/// Ordered Gaussian collection; provenance[i] belongs to primitives[i].
struct GaussianSet {
    std::vector<GaussianPrimitive> primitives;
    std::vector<Provenance> provenance;

    std::size_t size() const { return primitives.size(); }
    bool empty() const { return primitives.empty(); }

    void push_back(const GaussianPrimitive& p, const Provenance& prov) {
        primitives.push_back(p);
        provenance.push_back(prov);
    }

    /// Throws when provenance length differs or a pixel index leaves
    /// [0, height) x [0, width).
    void validate(int height, int width) const;
};

/// x_camera = rotation * x_world + translation.
struct RigidTransform {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    RigidTransform inverse() const;
    RigidTransform compose(const RigidTransform& rhs) const;  // this ∘ rhs
};

/// Pinhole camera looking down +z with y pointing down. Pixel centers sit on
/// integer coordinates, so the principal point of a W-wide image is (W-1)/2.
struct Camera {
    double fx = 1.0;
    double fy = 1.0;
    double cx = 0.0;
    double cy = 0.0;
    int width = 1;
    int height = 1;
    RigidTransform world_to_camera;

    void validate() const;
    Vec3 center() const;  // camera center in world coordinates
    RigidTransform camera_to_world() const { return world_to_camera.inverse(); }
    bool same_intrinsics(const Camera& other, double tol = 1e-12) const;

    static Camera centered(int width, int height, double focal);
};

struct Thresholds {
    double tau = 0.5;
    double tau_theta = degrees_to_radians(15.0);
    double tau_artifact = 0.5;

    void validate() const;
};

struct LossWeights {
    double lambda_reg = 0.05;
    double lambda_novel = 1.0;
    double lambda_perp = 0.5;
    double lambda_clip = 0.5;

    void validate() const;
};

struct ActivatedAttributes {
    double opacity = 0.5;
    Vec3 scales = Vec3::Ones();
};

double sigmoid(double x);

/// Rotation matrix of the normalized quaternion (w, x, y, z).
Mat3 quaternion_to_rotation(const Vec4& q);

/// Partial derivatives of the rotation matrix with respect to the four
/// components of a *unit* quaternion, in (w, x, y, z) order.
std::array<Mat3, 4> rotation_jacobian(const Vec4& unit_q);

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Mat3 covariance(const Vec3& log_scale, const Vec4& q);

ActivatedAttributes activate(const GaussianPrimitive& primitive);

} // namespace monosplat
