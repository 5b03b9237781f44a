#include "rexo/association.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rexo {

namespace {

// 3x3 binomial smoothing with replicate padding; preserves constants.
Tensor smooth3x3(const Tensor& chan) {
    const int na = static_cast<int>(chan.dims()[0]);
    const int nd = static_cast<int>(chan.dims()[1]);
    static constexpr double kKernel[3] = {0.25, 0.5, 0.25};
    Tensor out(Tensor::shape(na, nd));
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < nd; ++j) {
            double acc = 0.0;
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    const int si = std::clamp(i + di, 0, na - 1);
                    const int sj = std::clamp(j + dj, 0, nd - 1);
                    acc += kKernel[di + 1] * kKernel[dj + 1] * chan.at(si, sj);
                }
            out.at(i, j) = static_cast<float>(acc);
        }
    return out;
}

Tensor avg_pool2(const Tensor& level) {
    const size_t c = level.dims()[0];
    const size_t na = level.dims()[1], nd = level.dims()[2];
    if (na % 2 != 0 || nd % 2 != 0)
        throw std::invalid_argument("build_pyramid: level size not divisible by 2");
    Tensor out(Tensor::shape(c, na / 2, nd / 2));
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t i = 0; i + 1 < na; i += 2)
            for (size_t j = 0; j + 1 < nd; j += 2)
                out.at(ch, i / 2, j / 2) =
                    (level.at(ch, i, j) + level.at(ch, i + 1, j) +
                     level.at(ch, i, j + 1) + level.at(ch, i + 1, j + 1)) /
                    4.0f;
    return out;
}

FeaturePyramid pyramid_for_view(const Tensor& frames, const GridSpec& grid,
                                int num_levels) {
    const size_t m = frames.dims()[0];
    const size_t na = frames.dims()[1], nd = frames.dims()[2];
    FeaturePyramid pyr;
    pyr.grid = grid;
    Tensor level0(Tensor::shape(m, na, nd));
    for (size_t ch = 0; ch < m; ++ch) {
        Tensor chan(Tensor::shape(na, nd));
        for (size_t i = 0; i < na; ++i)
            for (size_t j = 0; j < nd; ++j) chan.at(i, j) = frames.at(ch, i, j);
        const Tensor smoothed = smooth3x3(chan);
        for (size_t i = 0; i < na; ++i)
            for (size_t j = 0; j < nd; ++j) level0.at(ch, i, j) = smoothed.at(i, j);
    }
    pyr.levels.push_back(std::move(level0));
    pyr.strides.push_back(1);
    for (int l = 1; l < num_levels; ++l) {
        pyr.levels.push_back(avg_pool2(pyr.levels.back()));
        pyr.strides.push_back(pyr.strides.back() * 2);
    }
    return pyr;
}

std::atomic<std::uint64_t> g_roi_calls{0};

}  // namespace

std::pair<FeaturePyramid, FeaturePyramid> build_pyramid(const RadarFrameSet& frames,
                                                        int num_levels) {
    if (num_levels < 1)
        throw std::invalid_argument("build_pyramid: need at least one level");
    return {pyramid_for_view(frames.hor, frames.grid, num_levels),
            pyramid_for_view(frames.ver, frames.grid, num_levels)};
}

int assign_level(const ViewBox2D& box, const FeaturePyramid& pyramid) {
    const double size_a_px = std::max(box.size_a / pyramid.grid.res_a, 1e-9);
    const double size_b_px = std::max(box.size_b / pyramid.grid.res_d, 1e-9);
    const double scale = std::sqrt(size_a_px * size_b_px) / kAssignCanonicalPx;
    const int level = kAssignLevel0 + static_cast<int>(std::floor(std::log2(scale)));
    return std::clamp(level, 0, pyramid.num_levels() - 1);
}

RoiCrop roi_align(const FeaturePyramid& pyramid, int level, const ViewBox2D& box,
                  int r) {
    g_roi_calls.fetch_add(1, std::memory_order_relaxed);
    if (level < 0 || level >= pyramid.num_levels())
        throw std::out_of_range("roi_align: bad pyramid level");
    if (r < 1) throw std::invalid_argument("roi_align: r must be >= 1");
    const Tensor& feat = pyramid.levels[level];
    const int c = static_cast<int>(feat.dims()[0]);
    const int na = static_cast<int>(feat.dims()[1]);
    const int nd = static_cast<int>(feat.dims()[2]);
    const double stride = pyramid.strides[level];
    const GridSpec& g = pyramid.grid;

    // Box corners in continuous level pixels, clamped to the feature extent.
    double a_lo = (box.center_a - box.size_a / 2 - g.origin_a) / (g.res_a * stride);
    double a_hi = (box.center_a + box.size_a / 2 - g.origin_a) / (g.res_a * stride);
    double d_lo = (box.center_b - box.size_b / 2 - g.origin_d) / (g.res_d * stride);
    double d_hi = (box.center_b + box.size_b / 2 - g.origin_d) / (g.res_d * stride);
    a_lo = std::clamp(a_lo, 0.0, static_cast<double>(na));
    a_hi = std::clamp(a_hi, 0.0, static_cast<double>(na));
    d_lo = std::clamp(d_lo, 0.0, static_cast<double>(nd));
    d_hi = std::clamp(d_hi, 0.0, static_cast<double>(nd));

    RoiCrop crop;
    crop.data = Tensor(Tensor::shape(c, r, r));
    if (!(a_hi > a_lo) || !(d_hi > d_lo)) {
        crop.empty = true;
        return crop;
    }
    const double step_a = (a_hi - a_lo) / r, step_d = (d_hi - d_lo) / r;
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < r; ++j) {
            // Sample at the output cell center; pixel centers sit at +0.5.
            const double qa = a_lo + (i + 0.5) * step_a - 0.5;
            const double qd = d_lo + (j + 0.5) * step_d - 0.5;
            const int ia0 = static_cast<int>(std::floor(qa));
            const int id0 = static_cast<int>(std::floor(qd));
            const double fa = qa - ia0, fd = qd - id0;
            const int ia[2] = {std::clamp(ia0, 0, na - 1), std::clamp(ia0 + 1, 0, na - 1)};
            const int id[2] = {std::clamp(id0, 0, nd - 1), std::clamp(id0 + 1, 0, nd - 1)};
            const double wa[2] = {1.0 - fa, fa}, wd[2] = {1.0 - fd, fd};
            for (int ch = 0; ch < c; ++ch) {
                double acc = 0.0;
                for (int ea = 0; ea < 2; ++ea)
                    for (int ed = 0; ed < 2; ++ed)
                        acc += wa[ea] * wd[ed] * feat.at(ch, ia[ea], id[ed]);
                crop.data.at(ch, i, j) = static_cast<float>(acc);
            }
        }
    return crop;
}

CropPair crop_and_concat(const RoiCrop& hor, const RoiCrop& ver) {
    const auto& hd = hor.data.dims();
    const auto& vd = ver.data.dims();
    if (hd != vd)
        throw std::invalid_argument("crop_and_concat: crop shapes must match");
    const size_t c = hd[0], r = hd[1];
    CropPair pair;
    pair.empty_hor = hor.empty;
    pair.empty_ver = ver.empty;
    pair.data = Tensor(Tensor::shape(c, r, 2 * r));
    for (size_t ch = 0; ch < c; ++ch)
        for (size_t i = 0; i < r; ++i)
            for (size_t j = 0; j < r; ++j) {
                pair.data.at(ch, i, j) = hor.data.at(ch, i, j);
                pair.data.at(ch, i, j + r) = ver.data.at(ch, i, j);
            }
    return pair;
}

std::atomic<std::uint64_t>& roi_align_call_count() { return g_roi_calls; }

}  // namespace rexo
