#pragma once

#include <atomic>
#include <cstdint>
#include <utility>
#include <vector>

#include "rexo/geometry.hpp"
#include "rexo/radarsim.hpp"
#include "rexo/tensor.hpp"

namespace rexo {

// Deterministic backbone stub: level 0 stacks the M frames as channels and
// smooths each with a fixed 3x3 binomial kernel; deeper levels are 2x average
// pools. Level l has stride 2^l in heatmap cells.
struct FeaturePyramid {
    std::vector<Tensor> levels;  // each C x (n_a / stride) x (n_d / stride)
    std::vector<int> strides;
    GridSpec grid;
    int channels() const { return static_cast<int>(levels.at(0).dims()[0]); }
    int num_levels() const { return static_cast<int>(levels.size()); }
};

struct RoiCrop {
    Tensor data;  // C x r x r
    bool empty = false;
};

// Horizontal and vertical crops concatenated along the last axis: C x r x 2r.
struct CropPair {
    Tensor data;
    bool empty_hor = false;
    bool empty_ver = false;
};

inline constexpr int kAssignLevel0 = 2;
inline constexpr double kAssignCanonicalPx = 64.0;
inline constexpr int kRoiResolution = 7;

std::pair<FeaturePyramid, FeaturePyramid> build_pyramid(const RadarFrameSet& frames,
                                                        int num_levels = 4);

// clamp(floor(level0 + log2(sqrt(area_px) / canonical))) with pixel sizes
// measured on the level-0 grid.
int assign_level(const ViewBox2D& box, const FeaturePyramid& pyramid);

// One center-aligned bilinear sample per output cell; the box is clamped to
// the feature extent first. A box that clamps to zero size on either axis
// yields an all-zero crop flagged empty.
RoiCrop roi_align(const FeaturePyramid& pyramid, int level, const ViewBox2D& box,
                  int r = kRoiResolution);

CropPair crop_and_concat(const RoiCrop& hor, const RoiCrop& ver);

// Global RoIAlign call counter; lets tests assert the linear (2 calls per box
// per timestep) association pattern.
std::atomic<std::uint64_t>& roi_align_call_count();

}  // namespace rexo
