#include "rexo/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace rexo {

void CameraCalib::validate() const {
    // ||R^T R - I||_F <= 1e-9 and det(R) = 1
    double g[9];  // R^T R
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double s = 0;
            for (int k = 0; k < 3; ++k) s += R[k * 3 + i] * R[k * 3 + j];
            g[i * 3 + j] = s;
        }
    double frob = 0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            const double e = g[i * 3 + j] - (i == j ? 1.0 : 0.0);
            frob += e * e;
        }
    if (std::sqrt(frob) > 1e-9)
        throw std::invalid_argument("CameraCalib: R is not orthonormal");
    const double det = R[0] * (R[4] * R[8] - R[5] * R[7]) -
                       R[1] * (R[3] * R[8] - R[5] * R[6]) +
                       R[2] * (R[3] * R[7] - R[4] * R[6]);
    if (std::abs(det - 1.0) > 1e-9)
        throw std::invalid_argument("CameraCalib: det(R) != 1");
    if (!(fx > 0) || !(fy > 0))
        throw std::invalid_argument("CameraCalib: focal lengths must be positive");
}

void SceneBounds::validate() const {
    if (!(x_max > x_min) || !(y_max > y_min) || !(z_max > z_min))
        throw std::invalid_argument("SceneBounds: max must exceed min on every axis");
    if (!(scale > 0))
        throw std::invalid_argument("SceneBounds: scale must be positive");
}

double SceneBounds::extent(int axis) const {
    switch (axis) {
        case 0: return x_max - x_min;
        case 1: return y_max - y_min;
        default: return z_max - z_min;
    }
}

double SceneBounds::axis_min(int axis) const {
    switch (axis) {
        case 0: return x_min;
        case 1: return y_min;
        default: return z_min;
    }
}

DiffusedBox ground_constraint(DiffusedBox b) {
    b[1] = b[4] / 2.0;
    return b;
}

std::pair<ViewBox2D, ViewBox2D> project_to_views(const Box3D& b) {
    ViewBox2D hor{b.cx, b.cz, b.w, b.d, View::horizontal};
    ViewBox2D ver{b.cy, b.cz, b.h, b.d, View::vertical};
    return {hor, ver};
}

std::array<Vec3, 8> box_corners(const Box3D& b) {
    std::array<Vec3, 8> out;
    for (int i = 0; i < 8; ++i) {
        const double sx = (i & 4) ? 0.5 : -0.5;
        const double sy = (i & 2) ? 0.5 : -0.5;
        const double sz = (i & 1) ? 0.5 : -0.5;
        out[i] = {b.cx + sx * b.w, b.cy + sy * b.h, b.cz + sz * b.d};
    }
    return out;
}

std::array<Vec3, 8> radar_to_camera(const std::array<Vec3, 8>& corners,
                                    const CameraCalib& calib) {
    std::array<Vec3, 8> out;
    for (int i = 0; i < 8; ++i) {
        const Vec3& p = corners[i];
        for (int r = 0; r < 3; ++r)
            out[i][r] = calib.R[r * 3 + 0] * p[0] + calib.R[r * 3 + 1] * p[1] +
                        calib.R[r * 3 + 2] * p[2] + calib.v[r];
    }
    return out;
}

std::array<double, 2> pinhole_project(const Vec3& p, const CameraCalib& calib) {
    if (!(p[2] > 0)) throw std::domain_error("behind-camera corner");
    return {calib.fx * p[0] / p[2] + calib.px, calib.fy * p[1] / p[2] + calib.py};
}

ImageBox2D project_to_image(const std::array<Vec3, 8>& corners_cam,
                            const CameraCalib& calib) {
    double u_min = std::numeric_limits<double>::infinity(), u_max = -u_min;
    double v_min = u_min, v_max = -u_min;
    for (const Vec3& c : corners_cam) {
        const auto p = pinhole_project(c, calib);
        u_min = std::min(u_min, p[0]);
        u_max = std::max(u_max, p[0]);
        v_min = std::min(v_min, p[1]);
        v_max = std::max(v_max, p[1]);
    }
    return {(u_min + u_max) / 2.0, (v_min + v_max) / 2.0, u_max - u_min, v_max - v_min};
}

ImageBox2D apply_refinement_offsets(const ImageBox2D& b, const BoxOffsets2D& off) {
    const double dw = std::min(off.dw, kMaxSizeOffset);
    const double dh = std::min(off.dh, kMaxSizeOffset);
    return {b.cx + b.w * off.dx, b.cy + b.h * off.dy,
            std::exp(dw) * b.w, std::exp(dh) * b.h};
}

Box3D apply_offsets_3d(const Box3D& b, const BoxOffsets3D& off) {
    const double dw = std::min(off.dw, kMaxSizeOffset);
    const double dh = std::min(off.dh, kMaxSizeOffset);
    const double dd = std::min(off.dd, kMaxSizeOffset);
    return {b.cx + b.w * off.dx, b.cy + b.h * off.dy, b.cz + b.d * off.dz,
            std::exp(dw) * b.w, std::exp(dh) * b.h, std::exp(dd) * b.d};
}

namespace {

inline double to_diffusion(double rel, double scale) { return (2.0 * rel - 1.0) * scale; }
inline double from_diffusion(double n, double scale) { return (n / scale + 1.0) / 2.0; }

}  // namespace

DiffusedBox normalize(const Box3D& b, const SceneBounds& bounds) {
    DiffusedBox out;
    const double c[3] = {b.cx, b.cy, b.cz};
    const double s[3] = {b.w, b.h, b.d};
    for (int a = 0; a < 3; ++a) {
        const double ext = bounds.extent(a);
        out[a] = to_diffusion((c[a] - bounds.axis_min(a)) / ext, bounds.scale);
        out[a + 3] = to_diffusion(s[a] / ext, bounds.scale);
    }
    return out;
}

Box3D denormalize(const DiffusedBox& d, const SceneBounds& bounds) {
    double c[3], s[3];
    for (int a = 0; a < 3; ++a) {
        const double ext = bounds.extent(a);
        c[a] = bounds.axis_min(a) + from_diffusion(d[a], bounds.scale) * ext;
        s[a] = std::max(from_diffusion(d[a + 3], bounds.scale) * ext, kMinBoxSize);
    }
    return {c[0], c[1], c[2], s[0], s[1], s[2]};
}

DiffusedBox clamp_to_scale(DiffusedBox d, const SceneBounds& bounds) {
    for (double& x : d.v) x = std::clamp(x, -bounds.scale, bounds.scale);
    return d;
}

double giou_aligned(const double* ca, const double* sa,
                    const double* cb, const double* sb, int dims) {
    double inter = 1, hull = 1, vol_a = 1, vol_b = 1;
    for (int i = 0; i < dims; ++i) {
        const double a_lo = ca[i] - sa[i] / 2, a_hi = ca[i] + sa[i] / 2;
        const double b_lo = cb[i] - sb[i] / 2, b_hi = cb[i] + sb[i] / 2;
        inter *= std::max(0.0, std::min(a_hi, b_hi) - std::max(a_lo, b_lo));
        hull *= std::max(a_hi, b_hi) - std::min(a_lo, b_lo);
        vol_a *= sa[i];
        vol_b *= sb[i];
    }
    const double uni = vol_a + vol_b - inter;
    if (uni <= 0.0) return 0.0;  // both zero-measure
    const double iou_val = inter / uni;
    return hull > 0.0 ? iou_val - (hull - uni) / hull : iou_val;
}

double giou(const Box3D& a, const Box3D& b) {
    const double ca[3] = {a.cx, a.cy, a.cz}, sa[3] = {a.w, a.h, a.d};
    const double cb[3] = {b.cx, b.cy, b.cz}, sb[3] = {b.w, b.h, b.d};
    return giou_aligned(ca, sa, cb, sb, 3);
}

double giou(const ImageBox2D& a, const ImageBox2D& b) {
    const double ca[2] = {a.cx, a.cy}, sa[2] = {a.w, a.h};
    const double cb[2] = {b.cx, b.cy}, sb[2] = {b.w, b.h};
    return giou_aligned(ca, sa, cb, sb, 2);
}

double giou(const ViewBox2D& a, const ViewBox2D& b) {
    const double ca[2] = {a.center_a, a.center_b}, sa[2] = {a.size_a, a.size_b};
    const double cb[2] = {b.center_a, b.center_b}, sb[2] = {b.size_a, b.size_b};
    return giou_aligned(ca, sa, cb, sb, 2);
}

double iou(const ImageBox2D& a, const ImageBox2D& b) {
    const double ix = std::max(0.0, std::min(a.cx + a.w / 2, b.cx + b.w / 2) -
                                        std::max(a.cx - a.w / 2, b.cx - b.w / 2));
    const double iy = std::max(0.0, std::min(a.cy + a.h / 2, b.cy + b.h / 2) -
                                        std::max(a.cy - a.h / 2, b.cy - b.h / 2));
    const double inter = ix * iy;
    // union >= intersection holds exactly; enforce it under FP rounding too
    const double uni = std::max(a.w * a.h + b.w * b.h - inter, inter);
    return uni > 0.0 ? inter / uni : 0.0;
}

}  // namespace rexo
