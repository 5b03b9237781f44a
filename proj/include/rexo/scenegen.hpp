#pragma once

#include <vector>

#include "rexo/detection.hpp"
#include "rexo/geometry.hpp"
#include "rexo/radarsim.hpp"
#include "rexo/rng.hpp"

namespace rexo {

// One synthetic frame: person annotations plus the point scatterers that
// stand in for their radar returns.
struct Scene {
    std::vector<Annotation> annotations;
    std::vector<Scatterer> scatterers;
};

struct SceneGenConfig {
    int min_persons = 1;
    int max_persons = 4;
    int scatterers_per_person = 12;
    double min_separation = 1.5;  // center distance on the floor plane
    double x_lo = -5.0, x_hi = 5.0;
    double z_lo = 2.0, z_hi = 11.0;
};

// Scene camera: x-axis flip (180 degrees about x), mounted at (0, 1.5, 20)
// looking back along -z so every in-bounds box stays in front of it.
CameraCalib default_calib();

ImageBox2D shrink_image_box(const ImageBox2D& b, double fw, double fh);

// Random persons standing on the floor, grounded boxes, scatterer cloud per
// person; image annotations are the shrunk extrema projections.
Scene generate_scene(Rng& rng, const CameraCalib& calib,
                     const SceneGenConfig& cfg = {});

}  // namespace rexo
