#include "rexo/scenegen.hpp"

#include <cmath>
#include <stdexcept>

namespace rexo {

CameraCalib default_calib() {
    CameraCalib c;
    c.R = {1, 0, 0, 0, -1, 0, 0, 0, -1};
    c.v = {0, 1.5, 20.0};
    return c;
}

ImageBox2D shrink_image_box(const ImageBox2D& b, double fw, double fh) {
    return {b.cx, b.cy, b.w * fw, b.h * fh};
}

Scene generate_scene(Rng& rng, const CameraCalib& calib, const SceneGenConfig& cfg) {
    if (cfg.min_persons < 0 || cfg.max_persons < cfg.min_persons)
        throw std::invalid_argument("generate_scene: bad person count range");
    calib.validate();
    Scene scene;
    const int target = rng.uniform_int(cfg.min_persons, cfg.max_persons);
    for (int p = 0; p < target; ++p) {
        Box3D box;
        bool placed = false;
        for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
            box.w = rng.uniform(0.4, 0.7);
            box.d = rng.uniform(0.4, 0.7);
            box.h = rng.uniform(1.5, 1.9);
            box.cx = rng.uniform(cfg.x_lo, cfg.x_hi);
            box.cz = rng.uniform(cfg.z_lo, cfg.z_hi);
            box.cy = box.h / 2.0;
            placed = true;
            for (const Annotation& other : scene.annotations) {
                const double dist = std::hypot(box.cx - other.box3d.cx,
                                               box.cz - other.box3d.cz);
                if (dist < cfg.min_separation) {
                    placed = false;
                    break;
                }
            }
        }
        if (!placed) continue;  // crowded scene; keep what fits

        Annotation ann;
        ann.box3d = box;
        ann.box2d = shrink_image_box(
            project_to_image(radar_to_camera(box_corners(box), calib), calib),
            kImageShrinkW, kImageShrinkH);
        ann.class_id = kClassPerson;
        scene.annotations.push_back(ann);

        for (int k = 0; k < cfg.scatterers_per_person; ++k) {
            Scatterer s;
            s.x = box.cx + rng.uniform(-0.5, 0.5) * box.w * 0.8;
            s.y = box.cy + rng.uniform(-0.5, 0.5) * box.h * 0.9;
            s.z = box.cz + rng.uniform(-0.5, 0.5) * box.d * 0.8;
            s.reflectivity = rng.uniform(0.5, 1.5);
            scene.scatterers.push_back(s);
        }
    }
    return scene;
}

}  // namespace rexo
