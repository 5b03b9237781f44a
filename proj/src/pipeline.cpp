#include "rexo/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rexo {

namespace {

DiffusedBox gauss6(Rng& rng) {
    DiffusedBox b;
    for (int c = 0; c < 6; ++c) b[c] = rng.gaussian();
    return b;
}

double safe_size(double s) { return std::max(s, kMinBoxSize); }

double sq(double v) { return v * v; }

BoxOffsets3D exact_offsets_3d(const Box3D& cur, const Box3D& target) {
    return {(target.cx - cur.cx) / safe_size(cur.w),
            (target.cy - cur.cy) / safe_size(cur.h),
            (target.cz - cur.cz) / safe_size(cur.d),
            std::log(safe_size(target.w) / safe_size(cur.w)),
            std::log(safe_size(target.h) / safe_size(cur.h)),
            std::log(safe_size(target.d) / safe_size(cur.d))};
}

// Energy statistics of one r x r crop half, axes normalized to [0, 1].
struct HalfStats {
    double weight = 0;
    double mu_a = 0.5, mu_d = 0.5;
    double sigma_a = 0, sigma_d = 0;
    bool ok = false;
};

HalfStats half_stats(const Tensor& crop, int col_offset) {
    const int c = static_cast<int>(crop.dims()[0]);
    const int r = static_cast<int>(crop.dims()[1]);
    HalfStats st;
    double w_sum = 0, a_sum = 0, d_sum = 0;
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) {
                const double w = std::max<double>(crop.at(ch, i, j + col_offset), 0.0);
                w_sum += w;
                a_sum += w * (i + 0.5) / r;
                d_sum += w * (j + 0.5) / r;
            }
    st.weight = w_sum;
    if (w_sum <= 1e-12) return st;
    st.mu_a = a_sum / w_sum;
    st.mu_d = d_sum / w_sum;
    double va = 0, vd = 0;
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < r; ++j) {
                const double w = std::max<double>(crop.at(ch, i, j + col_offset), 0.0);
                const double da = (i + 0.5) / r - st.mu_a;
                const double dd = (j + 0.5) / r - st.mu_d;
                va += w * da * da;
                vd += w * dd * dd;
            }
    st.sigma_a = std::sqrt(va / w_sum);
    st.sigma_d = std::sqrt(vd / w_sum);
    st.ok = true;
    return st;
}

// Per-step multiplicative size bounds; shrinking or growing without limit
// lets one bad crop collapse the whole trajectory.
constexpr double kRatioLo = 0.3, kRatioHi = 1.6;
// The windowed second moment truncates tails; a small inflation keeps boxes
// stuck inside a larger object growing toward its boundary.
constexpr double kSizeInflate = 1.08;
// Centroids only see mass inside the crop, so an off-center reading
// understates how far the object lies; overshoot to compensate.
constexpr double kCenterGain = 2.0;

// Second moment of a uniform segment of relative length f is f^2 / 12, so
// sqrt(12) * sigma estimates the occupied fraction of the crop.
double moment_ratio(double sigma) {
    return std::clamp(kSizeInflate * std::sqrt(12.0) * sigma, kRatioLo, kRatioHi);
}

}  // namespace

OracleDetector::OracleDetector(std::vector<Annotation> gts, double eta0,
                               SceneBounds bounds, std::uint64_t seed)
    : gts_(std::move(gts)), eta0_(eta0), bounds_(bounds), rng_(seed) {
    if (eta0 < 0 || eta0 >= 0.5)
        throw std::invalid_argument("OracleDetector: eta0 must be in [0, 0.5)");
    bounds_.validate();
}

DetectorOutput OracleDetector::run(const DetectorInput& in) {
    const size_t n = in.boxes3d.size();
    CostMatrix cost(n, std::vector<double>(gts_.size()));
    for (size_t i = 0; i < n; ++i) {
        const DiffusedBox cur = normalize(in.boxes3d[i], bounds_);
        for (size_t j = 0; j < gts_.size(); ++j) {
            const DiffusedBox gt = normalize(gts_[j].box3d, bounds_);
            double l1 = 0;
            for (int c = 0; c < 6; ++c) l1 += std::abs(cur[c] - gt[c]);
            cost[i][j] = l1;
        }
    }
    const std::vector<int> assigned = gts_.empty()
                                          ? std::vector<int>(n, -1)
                                          : hungarian(cost);
    DetectorOutput out;
    out.offsets3d.resize(n);
    out.offsets2d.resize(n);
    out.scores.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const int j = assigned[i];
        if (j < 0) {
            out.offsets3d[i] = {};
            out.offsets2d[i] = {};
            out.scores[i] = {eta0_, 1.0 - eta0_};
            continue;
        }
        BoxOffsets3D o3 = exact_offsets_3d(in.boxes3d[i], gts_[j].box3d);
        // With an exact 3D prediction the projected anchor matches the
        // annotation's pre-shrink projection, so the shrink prior is exact.
        BoxOffsets2D o2{0, 0, std::log(kImageShrinkW), std::log(kImageShrinkH)};
        if (eta0_ > 0) {
            double* comps3[6] = {&o3.dx, &o3.dy, &o3.dz, &o3.dw, &o3.dh, &o3.dd};
            for (double* c : comps3) *c += rng_.uniform(-eta0_, eta0_);
            if (!in.boxes2d.empty()) {
                double* comps2[4] = {&o2.dx, &o2.dy, &o2.dw, &o2.dh};
                for (double* c : comps2) *c += rng_.uniform(-eta0_, eta0_);
            }
        }
        out.offsets3d[i] = o3;
        out.offsets2d[i] = o2;
        out.scores[i] = {1.0 - eta0_, eta0_};
    }
    return out;
}

CentroidDetector::CentroidDetector(double energy_mid, double energy_slope)
    : energy_mid_(energy_mid), energy_slope_(energy_slope) {
    if (!(energy_slope > 0))
        throw std::invalid_argument("CentroidDetector: slope must be positive");
}

DetectorOutput CentroidDetector::run(const DetectorInput& in) {
    const size_t n = in.crops.size();
    DetectorOutput out;
    out.offsets3d.resize(n);
    out.offsets2d.resize(n);
    out.scores.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const Tensor& crop = in.crops[i].data;
        const int r = static_cast<int>(crop.dims()[1]);
        const HalfStats hor = half_stats(crop, 0);
        const HalfStats ver = half_stats(crop, r);

        BoxOffsets3D o3{};
        if (hor.ok) {
            o3.dx = kCenterGain * (hor.mu_a - 0.5);
            o3.dw = std::log(moment_ratio(hor.sigma_a));
        }
        if (ver.ok) {
            o3.dy = ver.mu_a - 0.5;
            // Grounded boxes span [0, h] vertically, so the energy centroid
            // at height fraction mu pins the extent at 2*mu*h; stable exactly
            // when the mass is centered at mid-height.
            o3.dh = std::log(std::clamp(2.0 * ver.mu_a, kRatioLo, kRatioHi));
        }
        if (hor.ok && ver.ok) {
            o3.dz = kCenterGain * ((hor.mu_d + ver.mu_d) / 2.0 - 0.5);
            o3.dd = std::log(moment_ratio((hor.sigma_d + ver.sigma_d) / 2.0));
        } else if (hor.ok) {
            o3.dz = kCenterGain * (hor.mu_d - 0.5);
            o3.dd = std::log(moment_ratio(hor.sigma_d));
        } else if (ver.ok) {
            o3.dz = kCenterGain * (ver.mu_d - 0.5);
            o3.dd = std::log(moment_ratio(ver.sigma_d));
        }
        out.offsets3d[i] = o3;
        out.offsets2d[i] = {0, 0, std::log(kImageShrinkW), std::log(kImageShrinkH)};

        const double cells = static_cast<double>(crop.size());
        const double energy = cells > 0 ? (hor.weight + ver.weight) / cells : 0.0;
        double p = 1.0 / (1.0 + std::exp(-(energy - energy_mid_) / energy_slope_));
        // Down-rank crops whose mass sits off-center: they report a box that
        // is still chasing the object, not one that frames it.
        if (hor.ok && ver.ok) {
            const double off = sq(hor.mu_a - 0.5) + sq(hor.mu_d - 0.5) +
                               sq(ver.mu_a - 0.5) + sq(ver.mu_d - 0.5);
            p *= std::exp(-8.0 * off);
        } else {
            p *= 0.25;  // a view saw nothing at all
        }
        out.scores[i] = {p, 1.0 - p};
    }
    return out;
}

std::vector<DiffusedBox> pad_and_diffuse(const std::vector<Annotation>& gt,
                                         int n_train, int t, const NoiseSchedule& s,
                                         const SceneBounds& bounds, Rng& rng) {
    if (n_train < static_cast<int>(gt.size()))
        throw std::invalid_argument("pad_and_diffuse: N_train smaller than GT count");
    bounds.validate();
    std::vector<DiffusedBox> out;
    out.reserve(n_train);
    for (int i = 0; i < n_train; ++i) {
        Rng box_rng = rng.split(static_cast<std::uint64_t>(i));
        DiffusedBox x0;
        if (i < static_cast<int>(gt.size()))
            x0 = normalize(gt[i].box3d, bounds);
        else
            x0 = gauss6(box_rng);
        const DiffusedBox eps = gauss6(box_rng);
        out.push_back(ground_constraint(q_sample(x0, t, eps, s)));
    }
    return out;
}

DenoiseResult denoising_det(const std::vector<DiffusedBox>& x_t, int t,
                            const FeaturePyramid& hor, const FeaturePyramid& ver,
                            Detector& det, const SceneBounds& bounds,
                            const CameraCalib* calib, int roi_r, int embed_dim,
                            bool ground) {
    bounds.validate();
    const size_t n = x_t.size();
    DetectorInput in;
    in.t = t;
    in.e_t = timestep_embedding(t, embed_dim);
    in.crops.reserve(n);
    in.boxes3d.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        Box3D cur = denormalize(clamp_to_scale(x_t[i], bounds), bounds);
        if (ground) cur = ground_box(cur);
        const auto [hbox, vbox] = project_to_views(cur);
        const RoiCrop hcrop = roi_align(hor, assign_level(hbox, hor), hbox, roi_r);
        const RoiCrop vcrop = roi_align(ver, assign_level(vbox, ver), vbox, roi_r);
        in.crops.push_back(crop_and_concat(hcrop, vcrop));
        in.boxes3d.push_back(cur);
        if (calib)
            in.boxes2d.push_back(
                project_to_image(radar_to_camera(box_corners(cur), *calib), *calib));
    }

    DetectorOutput res = det.run(in);
    if (res.offsets3d.size() != n || res.offsets2d.size() != n || res.scores.size() != n)
        throw std::runtime_error("denoising_det: detector '" + det.name() +
                                 "' returned a mismatched batch");
    DenoiseResult dr;
    dr.x0_hat.resize(n);
    dr.scores.resize(n);
    dr.boxes3d.resize(n);
    dr.offsets2d.resize(n);
    if (calib) dr.boxes2d.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const BoxOffsets3D& o = res.offsets3d[i];
        const double comps[6] = {o.dx, o.dy, o.dz, o.dw, o.dh, o.dd};
        for (double c : comps)
            if (!std::isfinite(c))
                throw std::runtime_error("denoising_det: non-finite offsets at box " +
                                         std::to_string(i));
        const auto& sc = res.scores[i];
        if (!(sc[0] >= 0) || !(sc[1] >= 0) || std::abs(sc[0] + sc[1] - 1.0) > 1e-6)
            throw std::runtime_error("denoising_det: invalid class scores at box " +
                                     std::to_string(i));
        dr.boxes3d[i] = apply_offsets_3d(in.boxes3d[i], o);
        // With the constraint active the vertical center is not a free
        // parameter; predictions live on the ground manifold too.
        if (ground) dr.boxes3d[i] = ground_box(dr.boxes3d[i]);
        dr.x0_hat[i] = normalize(dr.boxes3d[i], bounds);
        dr.scores[i] = sc;
        dr.offsets2d[i] = res.offsets2d[i];
        // The refinement anchors on the projection of the predicted clean
        // box, decoded exactly as the sampler will decode it.
        if (calib) {
            Box3D clean = denormalize(clamp_to_scale(dr.x0_hat[i], bounds), bounds);
            if (ground) clean = ground_box(clean);
            const ImageBox2D anchor =
                project_to_image(radar_to_camera(box_corners(clean), *calib), *calib);
            dr.boxes2d[i] = apply_refinement_offsets(anchor, res.offsets2d[i]);
        }
    }
    return dr;
}

std::vector<Detection> nms_image(std::vector<Detection> dets, double iou_thr) {
    std::vector<int> order(dets.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return dets[a].person_score() > dets[b].person_score();
    });
    std::vector<Detection> kept;
    for (int idx : order) {
        bool suppressed = false;
        for (const Detection& k : kept)
            if (iou(k.box2d, dets[idx].box2d) > iou_thr) {
                suppressed = true;
                break;
            }
        if (!suppressed) kept.push_back(dets[idx]);
    }
    return kept;
}

std::vector<Detection> run_inference(const RadarFrameSet& frames, Detector& det,
                                     const CameraCalib& calib, const NoiseSchedule& s,
                                     const std::vector<int>& tau,
                                     const InferenceConfig& cfg, Rng& rng) {
    if (tau.empty()) throw std::invalid_argument("run_inference: empty step sequence");
    for (size_t k = 0; k < tau.size(); ++k) {
        if (tau[k] < 1 || tau[k] > s.T)
            throw std::invalid_argument("run_inference: step index out of range");
        if (k > 0 && tau[k] <= tau[k - 1])
            throw std::invalid_argument("run_inference: steps must be ascending");
    }
    if (cfg.n_boxes < 1) throw std::invalid_argument("run_inference: need N >= 1");
    calib.validate();
    cfg.bounds.validate();

    const auto [hor, ver] = build_pyramid(frames, cfg.pyramid_levels);

    std::vector<DiffusedBox> x_state(cfg.n_boxes);
    auto constrain = [&](const DiffusedBox& b) {
        return cfg.ground ? ground_constraint(b) : b;
    };
    auto decode = [&](const DiffusedBox& b) {
        Box3D p = denormalize(clamp_to_scale(b, cfg.bounds), cfg.bounds);
        return cfg.ground ? ground_box(p) : p;
    };
    auto observe = [&](int t) {
        if (!cfg.observer) return;
        std::vector<Box3D> decoded(cfg.n_boxes);
        for (int i = 0; i < cfg.n_boxes; ++i) decoded[i] = decode(x_state[i]);
        cfg.observer(t, decoded);
    };

    Rng init_rng = rng.split(1);
    for (int i = 0; i < cfg.n_boxes; ++i) {
        Rng r = init_rng.split(static_cast<std::uint64_t>(i));
        x_state[i] = constrain(gauss6(r));
    }
    observe(tau.back());

    DenoiseResult last;
    for (int k = static_cast<int>(tau.size()) - 1; k >= 0; --k) {
        const int t = tau[k];
        const int t_prev = k > 0 ? tau[k - 1] : 0;
        last = denoising_det(x_state, t, hor, ver, det, cfg.bounds, &calib,
                             cfg.roi_r, cfg.embed_dim, cfg.ground);
        if (cfg.observer) cfg.observer(t, last.boxes3d);
        const double sigma = ddim_sigma(s, t, t_prev, cfg.eta);
        Rng step_rng = rng.split(2).split(static_cast<std::uint64_t>(t));
        for (int i = 0; i < cfg.n_boxes; ++i) {
            DiffusedBox eps{};
            if (sigma > 0) {
                Rng r = step_rng.split(static_cast<std::uint64_t>(i));
                eps = gauss6(r);
            }
            x_state[i] = constrain(
                ddim_step(x_state[i], last.x0_hat[i], t, t_prev, sigma, eps, s));
        }
        if (cfg.box_renewal && k > 0) {
            // Low-confidence boxes restart from fresh prior draws.
            Rng renew_rng = rng.split(3).split(static_cast<std::uint64_t>(t));
            for (int i = 0; i < cfg.n_boxes; ++i)
                if (last.scores[i][kClassPerson] <= cfg.threshold) {
                    Rng r = renew_rng.split(static_cast<std::uint64_t>(i));
                    x_state[i] = constrain(gauss6(r));
                }
        }
        observe(t_prev);
    }

    std::vector<Detection> out;
    for (int i = 0; i < cfg.n_boxes; ++i) {
        if (!(last.scores[i][kClassPerson] > cfg.threshold)) continue;
        Detection d;
        d.box3d = decode(x_state[i]);
        d.box2d = last.boxes2d[i];
        d.scores = last.scores[i];
        out.push_back(d);
    }
    if (cfg.nms_iou >= 0) out = nms_image(std::move(out), cfg.nms_iou);
    return out;
}

}  // namespace rexo
