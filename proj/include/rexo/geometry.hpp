#pragma once

#include <array>
#include <cmath>
#include <utility>

namespace rexo {

// Axis-aligned 3D box in the radar Cartesian frame. x is horizontal, y is
// vertical height above the floor, z is depth along boresight; all meters.
struct Box3D {
    double cx = 0, cy = 0, cz = 0;
    double w = 0, h = 0, d = 0;
};

using Vec3 = std::array<double, 3>;

// Six box parameters [cx, cy, cz, w, h, d] in normalized diffusion space.
// Components are unconstrained in sign and magnitude.
struct DiffusedBox {
    std::array<double, 6> v{};

    double& operator[](size_t i) { return v[i]; }
    double operator[](size_t i) const { return v[i]; }
};

enum class View { horizontal, vertical };

// 2D box on one radar view plane. axis a is lateral (horizontal view) or
// height (vertical view); axis b is depth. Meters.
struct ViewBox2D {
    double center_a = 0, center_b = 0;
    double size_a = 0, size_b = 0;
    View view = View::horizontal;
};

// 2D box on the camera image plane, pixels, center/size form.
struct ImageBox2D {
    double cx = 0, cy = 0;
    double w = 0, h = 0;
};

// Rigid radar->camera transform plus pinhole intrinsics.
struct CameraCalib {
    std::array<double, 9> R{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
    std::array<double, 3> v{0, 0, 0};
    double fx = 500, fy = 500;
    double px = 160, py = 120;
    double image_w = 320, image_h = 240;

    // Throws std::invalid_argument unless R is orthonormal with det +1
    // (tolerance 1e-9) and fx, fy > 0.
    void validate() const;
};

// Physical scene extent per axis plus the diffusion-space scale factor.
// Governs the affine map between meters and diffusion coordinates.
struct SceneBounds {
    double x_min = -6.4, x_max = 6.4;
    double y_min = -1.0, y_max = 3.0;
    double z_min = 0.0, z_max = 12.8;
    double scale = 2.0;

    void validate() const;  // max > min per axis, scale > 0

    double extent(int axis) const;  // axis 0=x, 1=y, 2=z
    double axis_min(int axis) const;
};

struct BoxOffsets3D {
    double dx = 0, dy = 0, dz = 0;
    double dw = 0, dh = 0, dd = 0;
};

struct BoxOffsets2D {
    double dx = 0, dy = 0;
    double dw = 0, dh = 0;
};

// Size offsets are clipped at this value before exponentiation, so one
// update can scale an extent by at most 1e5/16 = 6250x.
inline constexpr double kMaxSizeOffset = 8.740336742730447;  // ln(1e5/16)

// Pins the vertical center to half the height: b[1] := b[4] / 2. Operates
// on the raw 6-vector, in whatever space the input lives in. With the
// default SceneBounds (y in [-1, 3], where y_min = -(y_max - y_min)/4) the
// diffusion-space version of this op coincides with the physical-space
// floor constraint c_y = h/2; other y bounds break that correspondence and
// the pipeline re-grounds physically after denormalization.
DiffusedBox ground_constraint(DiffusedBox b);

// Physical-space floor constraint.
inline Box3D ground_box(Box3D b) {
    b.cy = b.h / 2.0;
    return b;
}

// Axis-aligned projections onto the two radar view planes:
// horizontal = {c_x, c_z, w, d}, vertical = {c_y, c_z, h, d}.
std::pair<ViewBox2D, ViewBox2D> project_to_views(const Box3D& b);

// The 8 corners c + (sx*w, sy*h, sz*d)/2, signs enumerated lexicographically
// with - before +: (---), (--+), (-+-), (-++), (+--), (+-+), (++-), (+++).
std::array<Vec3, 8> box_corners(const Box3D& b);

// Rigid map p -> R p + v applied per corner.
std::array<Vec3, 8> radar_to_camera(const std::array<Vec3, 8>& corners,
                                    const CameraCalib& calib);

// Pinhole projection of one camera-frame point; Z must be positive.
std::array<double, 2> pinhole_project(const Vec3& p_cam, const CameraCalib& calib);

// Projects all corners through the pinhole model and returns the extrema
// box: center = midpoint of extrema, size = extrema span. Throws
// std::domain_error("behind-camera corner") if any corner has Z <= 0.
ImageBox2D project_to_image(const std::array<Vec3, 8>& corners_cam,
                            const CameraCalib& calib);

// {cx + w*dx, cy + h*dy, e^dw * w, e^dh * h}; dw, dh clipped at kMaxSizeOffset.
ImageBox2D apply_refinement_offsets(const ImageBox2D& b, const BoxOffsets2D& off);

// {cx + w*dx, cy + h*dy, cz + d*dz, e^dw w, e^dh h, e^dd d}; size offsets
// clipped at kMaxSizeOffset.
Box3D apply_offsets_3d(const Box3D& b, const BoxOffsets3D& off);

// Meters <-> diffusion space. Centers map their axis range onto
// [-scale, +scale]; extents are divided by the axis extent and mapped by the
// same (2*rel - 1)*scale rule. denormalize clamps extents to kMinBoxSize.
inline constexpr double kMinBoxSize = 1e-3;  // meters

DiffusedBox normalize(const Box3D& b, const SceneBounds& bounds);
Box3D denormalize(const DiffusedBox& d, const SceneBounds& bounds);

// Clamps every component to [-scale, +scale]; applied to sampled boxes
// before view projection so crops stay inside the heatmaps.
DiffusedBox clamp_to_scale(DiffusedBox d, const SceneBounds& bounds);

// Generalized IoU for axis-aligned boxes given as center/size arrays,
// dims = 2 or 3. Returns IoU - (|hull| - |union|)/|hull| in (-1, 1].
// Convention: both boxes zero-measure -> 0.
double giou_aligned(const double* center_a, const double* size_a,
                    const double* center_b, const double* size_b, int dims);

double giou(const Box3D& a, const Box3D& b);
double giou(const ImageBox2D& a, const ImageBox2D& b);
double giou(const ViewBox2D& a, const ViewBox2D& b);

// Plain IoU, 0 when the union is empty.
double iou(const ImageBox2D& a, const ImageBox2D& b);

}  // namespace rexo
