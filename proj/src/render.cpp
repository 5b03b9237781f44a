#include "rexo/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

namespace rexo::render {

namespace {

// Black -> violet -> orange -> white, linearly interpolated.
void colormap(double v, unsigned char* rgb) {
    static const double stops[4][3] = {
        {0.0, 0.0, 0.05}, {0.35, 0.10, 0.45}, {0.95, 0.55, 0.15}, {1.0, 1.0, 0.9}};
    v = std::clamp(v, 0.0, 1.0);
    double s = v * 3.0;
    int i = std::min(2, static_cast<int>(s));
    double f = s - i;
    for (int c = 0; c < 3; ++c) {
        double x = stops[i][c] + f * (stops[i + 1][c] - stops[i][c]);
        rgb[c] = static_cast<unsigned char>(std::lround(255.0 * x));
    }
}

void draw_rect(Image& img, int x0, int y0, int x1, int y1, const unsigned char* color) {
    if (x1 < x0) std::swap(x0, x1);
    if (y1 < y0) std::swap(y0, y1);
    auto put = [&](int x, int y) {
        if (x < 0 || y < 0 || x >= img.w || y >= img.h) return;
        unsigned char* p = img.px(x, y);
        p[0] = color[0];
        p[1] = color[1];
        p[2] = color[2];
    };
    for (int x = x0; x <= x1; ++x) {
        put(x, y0);
        put(x, y1);
    }
    for (int y = y0; y <= y1; ++y) {
        put(x0, y);
        put(x1, y);
    }
}

std::string fnum(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    return buf;
}

// Tick/guide label: up to two decimals, trailing zeros trimmed (0.75 must
// not round to 0.8).
std::string lnum(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    std::string s = buf;
    while (s.size() > 1 && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    return s;
}

}  // namespace

Image heatmap_image(const Tensor& view_frames, const GridSpec& grid,
                    const std::vector<ViewBox2D>& gt,
                    const std::vector<ViewBox2D>& pred, int cell_px) {
    if (view_frames.rank() != 3)
        throw std::invalid_argument("heatmap_image: expected (M, n_a, n_d) frames");
    if (cell_px < 1) throw std::invalid_argument("heatmap_image: cell_px must be >= 1");
    const int na = static_cast<int>(view_frames.dims()[1]);
    const int nd = static_cast<int>(view_frames.dims()[2]);

    float peak = 0.0f;
    for (int ia = 0; ia < na; ++ia)
        for (int id = 0; id < nd; ++id)
            peak = std::max(peak, view_frames.at(0, ia, id));

    Image img(na * cell_px, nd * cell_px);
    for (int ia = 0; ia < na; ++ia) {
        for (int id = 0; id < nd; ++id) {
            unsigned char rgb[3];
            double v = peak > 0.0f ? view_frames.at(0, ia, id) / peak : 0.0;
            colormap(v, rgb);
            for (int dy = 0; dy < cell_px; ++dy) {
                unsigned char* row = img.px(ia * cell_px, id * cell_px + dy);
                for (int dx = 0; dx < cell_px; ++dx) {
                    row[3 * dx] = rgb[0];
                    row[3 * dx + 1] = rgb[1];
                    row[3 * dx + 2] = rgb[2];
                }
            }
        }
    }

    auto to_px_a = [&](double a) {
        return static_cast<int>(std::lround((a - grid.origin_a) / grid.res_a * cell_px));
    };
    auto to_px_d = [&](double d) {
        return static_cast<int>(std::lround((d - grid.origin_d) / grid.res_d * cell_px));
    };
    auto draw_box = [&](const ViewBox2D& b, const unsigned char* color) {
        draw_rect(img, to_px_a(b.center_a - b.size_a / 2),
                  to_px_d(b.center_b - b.size_b / 2),
                  to_px_a(b.center_a + b.size_a / 2),
                  to_px_d(b.center_b + b.size_b / 2), color);
    };
    static const unsigned char kGreen[3] = {40, 220, 60};
    static const unsigned char kRed[3] = {235, 50, 35};
    for (const ViewBox2D& b : gt) draw_box(b, kGreen);
    for (const ViewBox2D& b : pred) draw_box(b, kRed);
    return img;
}

void write_png(const std::string& path, const Image& img) {
    if (img.w < 1 || img.h < 1) throw std::invalid_argument("write_png: empty image");
    std::FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("cannot write " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("libpng write failed for " + path);
    }
    png_init_io(png, fp);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, img.w, img.h, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.h; ++y)
        png_write_row(png, const_cast<unsigned char*>(&img.rgb[3u * static_cast<size_t>(y) * img.w]));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

std::string histogram_svg(const std::vector<int>& counts, const std::string& label,
                          const std::vector<int>* compare,
                          const std::string& compare_label) {
    const double W = 640, H = 400;
    const double L = 56, R = 20, T = 24, B = 44;  // margins
    const double plot_w = W - L - R, plot_h = H - T - B;

    int max_count = 1;
    for (int c : counts) max_count = std::max(max_count, c);
    if (compare)
        for (int c : *compare) max_count = std::max(max_count, c);

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\""
      << H << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    s << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";

    auto xpos = [&](double iou) { return L + iou * plot_w; };
    auto ypos = [&](double frac) { return T + (1.0 - frac) * plot_h; };

    auto bars = [&](const std::vector<int>& cs, const char* fill, double opacity) {
        int bins = static_cast<int>(cs.size());
        for (int i = 0; i < bins; ++i) {
            if (cs[i] <= 0) continue;
            double x0 = xpos(static_cast<double>(i) / bins);
            double x1 = xpos(static_cast<double>(i + 1) / bins);
            double frac = static_cast<double>(cs[i]) / max_count;
            s << "<rect x=\"" << fnum(x0 + 1) << "\" y=\"" << fnum(ypos(frac))
              << "\" width=\"" << fnum(std::max(1.0, x1 - x0 - 2)) << "\" height=\""
              << fnum(frac * plot_h) << "\" fill=\"" << fill << "\" fill-opacity=\""
              << opacity << "\"/>\n";
        }
    };
    bars(counts, "#4878b0", compare ? 0.85 : 0.9);
    if (compare) bars(*compare, "#e08030", 0.55);

    // axes
    s << "<line x1=\"" << fnum(L) << "\" y1=\"" << fnum(T + plot_h) << "\" x2=\""
      << fnum(L + plot_w) << "\" y2=\"" << fnum(T + plot_h)
      << "\" stroke=\"#222\" stroke-width=\"1\"/>\n";
    s << "<line x1=\"" << fnum(L) << "\" y1=\"" << fnum(T) << "\" x2=\"" << fnum(L)
      << "\" y2=\"" << fnum(T + plot_h) << "\" stroke=\"#222\" stroke-width=\"1\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        double v = i / 4.0;
        s << "<text x=\"" << fnum(xpos(v)) << "\" y=\"" << fnum(T + plot_h + 18)
          << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
          << lnum(v) << "</text>\n";
    }
    s << "<text x=\"" << fnum(L - 8) << "\" y=\"" << fnum(ypos(1.0) + 4)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">"
      << max_count << "</text>\n";
    s << "<text x=\"" << fnum(L - 8) << "\" y=\"" << fnum(ypos(0.0) + 4)
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">0</text>\n";
    s << "<text x=\"" << fnum(L + plot_w / 2) << "\" y=\"" << fnum(H - 8)
      << "\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">IoU</text>\n";

    // dotted quality guides
    for (double g : {0.5, 0.75}) {
        s << "<line x1=\"" << fnum(xpos(g)) << "\" y1=\"" << fnum(T) << "\" x2=\""
          << fnum(xpos(g)) << "\" y2=\"" << fnum(T + plot_h)
          << "\" stroke=\"#444\" stroke-width=\"1\" stroke-dasharray=\"4 3\"/>\n";
        s << "<text x=\"" << fnum(xpos(g) + 4) << "\" y=\"" << fnum(T + 12)
          << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\">" << lnum(g)
          << "</text>\n";
    }

    // legend
    double ly = T + 10;
    s << "<rect x=\"" << fnum(L + plot_w - 150) << "\" y=\"" << fnum(ly)
      << "\" width=\"12\" height=\"12\" fill=\"#4878b0\"/>\n";
    s << "<text x=\"" << fnum(L + plot_w - 134) << "\" y=\"" << fnum(ly + 10)
      << "\" font-family=\"sans-serif\" font-size=\"12\">" << label << "</text>\n";
    if (compare) {
        ly += 18;
        s << "<rect x=\"" << fnum(L + plot_w - 150) << "\" y=\"" << fnum(ly)
          << "\" width=\"12\" height=\"12\" fill=\"#e08030\" fill-opacity=\"0.55\"/>\n";
        s << "<text x=\"" << fnum(L + plot_w - 134) << "\" y=\"" << fnum(ly + 10)
          << "\" font-family=\"sans-serif\" font-size=\"12\">" << compare_label
          << "</text>\n";
    }

    s << "</svg>\n";
    return s.str();
}

}  // namespace rexo::render
