#pragma once

#include <array>

#include "rexo/geometry.hpp"

namespace rexo {

inline constexpr int kClassPerson = 0;
inline constexpr int kClassBackground = 1;

// Projected image boxes bound the full 3D extent and systematically overshoot
// the visible subject; annotations and refinement priors shrink by these
// factors about the box center.
inline constexpr double kImageShrinkW = 0.6;
inline constexpr double kImageShrinkH = 0.85;

struct Detection {
    Box3D box3d;
    ImageBox2D box2d;
    std::array<double, 2> scores{0.5, 0.5};  // {person, background}, sums to 1
    double person_score() const { return scores[0]; }
};

struct Annotation {
    Box3D box3d;
    ImageBox2D box2d;
    int class_id = kClassPerson;
};

}  // namespace rexo
