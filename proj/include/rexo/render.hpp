#pragma once

#include <string>
#include <vector>

#include "rexo/geometry.hpp"
#include "rexo/radarsim.hpp"
#include "rexo/tensor.hpp"

namespace rexo::render {

struct Image {
    int w = 0, h = 0;
    std::vector<unsigned char> rgb;  // packed RGB8, row-major

    Image() = default;
    Image(int w_, int h_) : w(w_), h(h_), rgb(3u * w_ * h_, 0) {}
    unsigned char* px(int x, int y) { return &rgb[3u * (static_cast<size_t>(y) * w + x)]; }
};

// First stacked frame of one view as a false-color raster (lateral axis
// horizontal, depth downward), annotation boxes in green, detections in red.
Image heatmap_image(const Tensor& view_frames, const GridSpec& grid,
                    const std::vector<ViewBox2D>& gt,
                    const std::vector<ViewBox2D>& pred, int cell_px = 3);

void write_png(const std::string& path, const Image& img);

// Bar chart over IoU in [0, 1] with dotted guides at 0.5 and 0.75; a second
// series overlays semi-transparently for side-by-side comparison. Output is
// deterministic text, byte-stable for fixed inputs.
std::string histogram_svg(const std::vector<int>& counts, const std::string& label,
                          const std::vector<int>* compare = nullptr,
                          const std::string& compare_label = "");

}  // namespace rexo::render
