#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "rexo/diffusion.hpp"
#include "rexo/pipeline.hpp"
#include "rexo/scenegen.hpp"

using namespace rexo;

namespace {

Annotation make_person(double cx, double cz, double h = 1.8, double w = 0.6,
                       double d = 0.6) {
    Annotation a;
    a.box3d = ground_box({cx, 0, cz, w, h, d});
    const CameraCalib calib = default_calib();
    a.box2d = shrink_image_box(
        project_to_image(radar_to_camera(box_corners(a.box3d), calib), calib),
        kImageShrinkW, kImageShrinkH);
    return a;
}

std::vector<Scatterer> person_scatterers(const Annotation& a) {
    std::vector<Scatterer> pts;
    const Box3D& b = a.box3d;
    for (double fy : {0.25, 0.5, 0.75})
        for (double fx : {-0.25, 0.25})
            pts.push_back({b.cx + fx * b.w, fy * b.h, b.cz, 1.0});
    return pts;
}

RadarFrameSet zero_frames(int m = 2) {
    RadarFrameSet fs;
    fs.grid = kDefaultGrid;
    fs.hor = Tensor(Tensor::shape(m, fs.grid.n_a, fs.grid.n_d));
    fs.ver = Tensor(Tensor::shape(m, fs.grid.n_a, fs.grid.n_d));
    return fs;
}

// Captures the conditioning batch and answers with inert offsets.
class ProbeDetector : public Detector {
  public:
    DetectorInput seen;
    DetectorOutput run(const DetectorInput& in) override {
        seen = in;
        DetectorOutput out;
        out.offsets3d.resize(in.boxes3d.size());
        out.offsets2d.resize(in.boxes3d.size());
        out.scores.assign(in.boxes3d.size(), {0.5, 0.5});
        return out;
    }
    std::string name() const override { return "probe"; }
};

class BrokenDetector : public Detector {
  public:
    enum Mode { kShortBatch, kBadScoreSum, kNegativeScore, kNonFinite } mode;
    explicit BrokenDetector(Mode m) : mode(m) {}
    DetectorOutput run(const DetectorInput& in) override {
        DetectorOutput out;
        const size_t n = in.boxes3d.size();
        out.offsets3d.resize(mode == kShortBatch ? n - 1 : n);
        out.offsets2d.resize(n);
        out.scores.assign(n, {0.5, 0.5});
        if (mode == kBadScoreSum) out.scores[0] = {0.7, 0.7};
        if (mode == kNegativeScore) out.scores[0] = {1.2, -0.2};
        if (mode == kNonFinite) out.offsets3d[0].dw = std::nan("");
        return out;
    }
    std::string name() const override { return "broken"; }
};

}  // namespace

TEST_SUITE("pipeline") {

TEST_CASE("pad_and_diffuse passes grounded annotations through at t = 0") {
    const NoiseSchedule s = build_schedule(1000, ScheduleKind::cosine);
    const SceneBounds bounds;
    const std::vector<Annotation> gt = {make_person(-1.0, 6.0),
                                        make_person(2.0, 9.0)};
    Rng rng(5);
    const auto out = pad_and_diffuse(gt, 6, 0, s, bounds, rng);
    REQUIRE(out.size() == 6);
    for (size_t i = 0; i < gt.size(); ++i) {
        const DiffusedBox want = ground_constraint(normalize(gt[i].box3d, bounds));
        for (int c = 0; c < 6; ++c) CHECK(out[i][c] == want[c]);
    }
    // Padding entries are grounded too; the constraint is a fixed point.
    for (size_t i = gt.size(); i < out.size(); ++i) {
        const DiffusedBox again = ground_constraint(out[i]);
        for (int c = 0; c < 6; ++c) CHECK(out[i][c] == again[c]);
    }
}

TEST_CASE("pad_and_diffuse draws one child stream per slot") {
    const NoiseSchedule s = build_schedule(1000, ScheduleKind::cosine);
    const SceneBounds bounds;
    const std::vector<Annotation> gt = {make_person(0.5, 7.0)};
    const int n_train = 5, t = 417;

    Rng rng(99);
    Rng mirror = rng;  // value copy: same stream
    const auto out = pad_and_diffuse(gt, n_train, t, s, bounds, rng);

    auto gauss6 = [](Rng& r) {
        DiffusedBox b;
        for (int c = 0; c < 6; ++c) b[c] = r.gaussian();
        return b;
    };
    for (int i = 0; i < n_train; ++i) {
        Rng box_rng = mirror.split(static_cast<std::uint64_t>(i));
        DiffusedBox x0 = i < static_cast<int>(gt.size())
                             ? normalize(gt[i].box3d, bounds)
                             : gauss6(box_rng);
        const DiffusedBox eps = gauss6(box_rng);
        const DiffusedBox want = ground_constraint(q_sample(x0, t, eps, s));
        for (int c = 0; c < 6; ++c) CHECK(out[i][c] == want[c]);
    }
}

TEST_CASE("pad_and_diffuse rejects a pad count below the annotation count") {
    const NoiseSchedule s = build_schedule(10, ScheduleKind::cosine);
    const std::vector<Annotation> gt = {make_person(0, 5), make_person(1, 6)};
    Rng rng(1);
    CHECK_THROWS_AS(pad_and_diffuse(gt, 1, 0, s, SceneBounds{}, rng),
                    std::invalid_argument);
}

TEST_CASE("denoising_det conditions the detector on the decoded state") {
    const SceneBounds bounds;
    const CameraCalib calib = default_calib();
    const auto [hor, ver] = build_pyramid(zero_frames(3), 4);

    const Annotation a = make_person(0.4, 7.5);
    std::vector<DiffusedBox> x_t = {normalize(a.box3d, bounds)};
    // Push one coordinate outside the clamp range to confirm decode order.
    x_t.push_back({5.0, 0.3, -0.2, 0.1, 0.7, -0.1});

    ProbeDetector probe;
    const int t = 333, embed = 32;
    denoising_det(x_t, t, hor, ver, probe, bounds, &calib, kRoiResolution, embed);

    REQUIRE(probe.seen.boxes3d.size() == 2);
    CHECK(probe.seen.t == t);
    const auto e_want = timestep_embedding(t, embed);
    REQUIRE(probe.seen.e_t.size() == e_want.size());
    for (size_t i = 0; i < e_want.size(); ++i) CHECK(probe.seen.e_t[i] == e_want[i]);

    for (size_t i = 0; i < x_t.size(); ++i) {
        const Box3D want = ground_box(denormalize(clamp_to_scale(x_t[i], bounds), bounds));
        CHECK(probe.seen.boxes3d[i].cx == want.cx);
        CHECK(probe.seen.boxes3d[i].cy == want.cy);
        CHECK(probe.seen.boxes3d[i].cz == want.cz);
        CHECK(probe.seen.boxes3d[i].w == want.w);
        CHECK(probe.seen.boxes3d[i].h == want.h);
        CHECK(probe.seen.boxes3d[i].d == want.d);
        const ImageBox2D proj =
            project_to_image(radar_to_camera(box_corners(want), calib), calib);
        CHECK(probe.seen.boxes2d[i].cx == proj.cx);
        CHECK(probe.seen.boxes2d[i].w == proj.w);
        // Crops: channels from the stack, hor and ver halves side by side.
        const auto& dims = probe.seen.crops[i].data.dims();
        CHECK(dims[0] == 3);
        CHECK(dims[1] == static_cast<size_t>(kRoiResolution));
        CHECK(dims[2] == static_cast<size_t>(2 * kRoiResolution));
    }

    // Without grounding the decoded box keeps its raw vertical placement.
    ProbeDetector raw;
    denoising_det(x_t, t, hor, ver, raw, bounds, &calib, kRoiResolution, embed,
                  false);
    const Box3D free0 = denormalize(clamp_to_scale(x_t[0], bounds), bounds);
    CHECK(raw.seen.boxes3d[0].cy == free0.cy);
}

TEST_CASE("denoising_det recovers annotations through the oracle head") {
    const SceneBounds bounds;
    const CameraCalib calib = default_calib();
    const auto [hor, ver] = build_pyramid(zero_frames(), 4);

    const std::vector<Annotation> gt = {make_person(-0.8, 6.5), make_person(1.4, 8.0)};
    OracleDetector det(gt, 0.0, bounds);

    std::vector<DiffusedBox> x_t;
    for (const Annotation& a : gt) {
        DiffusedBox b = normalize(a.box3d, bounds);
        b[0] += 0.4;  // displace so the offsets have work to do
        b[2] -= 0.3;
        x_t.push_back(ground_constraint(b));
    }

    const auto before = roi_align_call_count().load();
    const DenoiseResult dr =
        denoising_det(x_t, 500, hor, ver, det, bounds, &calib);
    CHECK(roi_align_call_count().load() - before == 2 * x_t.size());

    REQUIRE(dr.boxes3d.size() == 2);
    for (size_t i = 0; i < gt.size(); ++i) {
        // The oracle assigns by diffusion-space distance; displacement was
        // small so box i still maps to gt i.
        const Box3D& want = gt[i].box3d;
        CHECK(dr.boxes3d[i].cx == doctest::Approx(want.cx).epsilon(1e-9));
        CHECK(dr.boxes3d[i].cy == doctest::Approx(want.cy).epsilon(1e-9));
        CHECK(dr.boxes3d[i].cz == doctest::Approx(want.cz).epsilon(1e-9));
        CHECK(dr.boxes3d[i].w == doctest::Approx(want.w).epsilon(1e-9));
        CHECK(dr.boxes3d[i].h == doctest::Approx(want.h).epsilon(1e-9));
        CHECK(dr.boxes3d[i].d == doctest::Approx(want.d).epsilon(1e-9));
        CHECK(dr.scores[i][0] == 1.0);
        CHECK(dr.scores[i][1] == 0.0);
        const DiffusedBox renorm = normalize(dr.boxes3d[i], bounds);
        for (int c = 0; c < 6; ++c) CHECK(dr.x0_hat[i][c] == renorm[c]);
        CHECK(dr.boxes2d[i].cx == doctest::Approx(gt[i].box2d.cx).epsilon(1e-9));
        CHECK(dr.boxes2d[i].cy == doctest::Approx(gt[i].box2d.cy).epsilon(1e-9));
        CHECK(dr.boxes2d[i].w == doctest::Approx(gt[i].box2d.w).epsilon(1e-9));
        CHECK(dr.boxes2d[i].h == doctest::Approx(gt[i].box2d.h).epsilon(1e-9));
    }
}

TEST_CASE("denoising_det validates detector output") {
    const SceneBounds bounds;
    const auto [hor, ver] = build_pyramid(zero_frames(), 2);
    const std::vector<DiffusedBox> x_t(2);
    for (auto mode : {BrokenDetector::kShortBatch, BrokenDetector::kBadScoreSum,
                      BrokenDetector::kNegativeScore, BrokenDetector::kNonFinite}) {
        BrokenDetector det(mode);
        CHECK_THROWS_AS(denoising_det(x_t, 100, hor, ver, det, bounds),
                        std::runtime_error);
    }
}

TEST_CASE("oracle detector bounds its perturbation and flags unmatched boxes") {
    const SceneBounds bounds;
    CHECK_THROWS_AS(OracleDetector({}, -0.1, bounds), std::invalid_argument);
    CHECK_THROWS_AS(OracleDetector({}, 0.5, bounds), std::invalid_argument);

    const Annotation a = make_person(0.0, 7.0);
    const double eta0 = 0.2;
    OracleDetector det({a}, eta0, bounds, 42);

    DetectorInput in;
    Box3D near = a.box3d;
    near.cx += 0.3;
    Box3D far = a.box3d;
    far.cx += 4.0;
    far.cz += 3.0;
    in.boxes3d = {near, far};
    in.boxes2d.resize(2);

    const DetectorOutput out = det.run(in);
    REQUIRE(out.offsets3d.size() == 2);

    // Matched slot: exact offsets plus a uniform nudge no larger than eta0.
    CHECK(std::abs(out.offsets3d[0].dx - 0.3 / near.w * -1.0) <= eta0 + 1e-12);
    CHECK(std::abs(out.offsets3d[0].dy) <= eta0 + 1e-12);
    CHECK(std::abs(out.offsets3d[0].dw) <= eta0 + 1e-12);
    CHECK(std::abs(out.offsets2d[0].dw - std::log(kImageShrinkW)) <= eta0 + 1e-12);
    CHECK(out.scores[0][0] == 1.0 - eta0);
    CHECK(out.scores[0][1] == eta0);

    // Unmatched slot: inert offsets, background-dominant score.
    CHECK(out.offsets3d[1].dx == 0.0);
    CHECK(out.offsets3d[1].dw == 0.0);
    CHECK(out.offsets2d[1].dh == 0.0);
    CHECK(out.scores[1][0] == eta0);
    CHECK(out.scores[1][1] == 1.0 - eta0);

    // No annotations at all: everything is background.
    OracleDetector empty({}, 0.0, bounds);
    const DetectorOutput none = empty.run(in);
    CHECK(none.scores[0][0] == 0.0);
    CHECK(none.scores[1][1] == 1.0);
}

TEST_CASE("centroid detector scores crop energy") {
    CHECK_THROWS_AS(CentroidDetector(0.05, 0.0), std::invalid_argument);
    CentroidDetector det;  // mid 0.05, slope 0.02

    const int r = kRoiResolution;
    DetectorInput in;
    in.boxes3d.resize(2);
    CropPair blank;
    blank.data = Tensor(Tensor::shape(2, r, 2 * r));
    blank.empty_hor = blank.empty_ver = true;
    CropPair full = blank;
    full.empty_hor = full.empty_ver = false;
    for (size_t i = 0; i < full.data.size(); ++i) full.data.data()[i] = 1.0f;
    in.crops = {blank, full};

    const DetectorOutput out = det.run(in);

    // Empty crop: no movement, quarter-weighted logistic floor.
    CHECK(out.offsets3d[0].dx == 0.0);
    CHECK(out.offsets3d[0].dy == 0.0);
    CHECK(out.offsets3d[0].dz == 0.0);
    CHECK(out.offsets3d[0].dw == 0.0);
    const double floor = 0.25 / (1.0 + std::exp(0.05 / 0.02));
    CHECK(out.scores[0][0] == doctest::Approx(floor).epsilon(1e-12));

    // Uniform crop: centered mass keeps the center and the height anchor
    // (up to float accumulation order in the moment sums).
    CHECK(out.offsets3d[1].dx == doctest::Approx(0.0));
    CHECK(out.offsets3d[1].dy == doctest::Approx(0.0));
    CHECK(out.offsets3d[1].dz == doctest::Approx(0.0));
    CHECK(out.offsets3d[1].dh == doctest::Approx(0.0));
    CHECK(out.offsets3d[1].dw ==
          doctest::Approx(out.offsets3d[1].dd).epsilon(1e-12));
    CHECK(out.scores[1][0] > 0.99);
    CHECK(out.scores[1][0] + out.scores[1][1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.offsets2d[1].dw == std::log(kImageShrinkW));
    CHECK(out.offsets2d[1].dh == std::log(kImageShrinkH));
}

TEST_CASE("centroid denoising steps toward the energy mass") {
    const SceneBounds bounds;
    const Annotation a = make_person(0.0, 8.0);
    const RadarFrameSet frames = blob_heatmap(person_scatterers(a), 2, 0.3);
    const auto [hor, ver] = build_pyramid(frames, 4);

    Box3D start = a.box3d;
    start.cx += 0.8;
    start.cz += 0.8;
    const std::vector<DiffusedBox> x_t = {normalize(start, bounds)};

    CentroidDetector det;
    const DenoiseResult dr = denoising_det(x_t, 200, hor, ver, det, bounds);
    REQUIRE(dr.boxes3d.size() == 1);
    CHECK(std::abs(dr.boxes3d[0].cx - a.box3d.cx) < 0.8);
    CHECK(std::abs(dr.boxes3d[0].cz - a.box3d.cz) < 0.8);
}

TEST_CASE("run_inference recovers every annotation with the oracle head") {
    const std::vector<Annotation> gt = {make_person(-1.5, 5.5), make_person(2.0, 9.0)};
    std::vector<Scatterer> pts;
    for (const Annotation& a : gt)
        for (const Scatterer& s : person_scatterers(a)) pts.push_back(s);
    const RadarFrameSet frames = blob_heatmap(pts, 2, 0.15);

    OracleDetector det(gt, 0.0, SceneBounds{});
    const CameraCalib calib = default_calib();
    const NoiseSchedule s = build_schedule(1000, ScheduleKind::cosine);
    const std::vector<int> tau = tau_subsequence(1000, 5);

    InferenceConfig cfg;
    cfg.n_boxes = 6;
    cfg.threshold = 0.5;
    Rng rng(21);
    const auto dets = run_inference(frames, det, calib, s, tau, cfg, rng);

    REQUIRE(dets.size() == gt.size());
    std::vector<bool> hit(gt.size(), false);
    for (const Detection& d : dets) {
        CHECK(d.person_score() == 1.0);
        for (size_t j = 0; j < gt.size(); ++j) {
            const Box3D& w = gt[j].box3d;
            const double err = std::max(
                {std::abs(d.box3d.cx - w.cx), std::abs(d.box3d.cy - w.cy),
                 std::abs(d.box3d.cz - w.cz), std::abs(d.box3d.w - w.w),
                 std::abs(d.box3d.h - w.h), std::abs(d.box3d.d - w.d)});
            if (err <= 1e-9) {
                CHECK(!hit[j]);
                hit[j] = true;
                CHECK(d.box2d.cx == doctest::Approx(gt[j].box2d.cx).epsilon(1e-9));
                CHECK(d.box2d.h == doctest::Approx(gt[j].box2d.h).epsilon(1e-9));
            }
        }
    }
    for (bool h : hit) CHECK(h);
}

TEST_CASE("run_inference observer cadence") {
    const Annotation a = make_person(0.5, 7.0);
    const RadarFrameSet frames = blob_heatmap(person_scatterers(a), 1, 0.2);
    OracleDetector det({a}, 0.0, SceneBounds{});
    const NoiseSchedule s = build_schedule(1000, ScheduleKind::cosine);
    const std::vector<int> tau = tau_subsequence(1000, 4);

    std::vector<int> ts;
    InferenceConfig cfg;
    cfg.n_boxes = 3;
    cfg.observer = [&](int t, const std::vector<Box3D>& boxes) {
        ts.push_back(t);
        CHECK(boxes.size() == 3);
    };
    Rng rng(4);
    run_inference(frames, det, default_calib(), s, tau, cfg, rng);

    // Initial state, then per step the clean estimates at t and the advanced
    // state at t_prev.
    REQUIRE(ts.size() == 1 + 2 * tau.size());
    CHECK(ts.front() == tau.back());
    CHECK(ts[1] == tau.back());
    CHECK(ts.back() == 0);
    for (size_t k = 0; k < tau.size(); ++k) {
        CHECK(ts[1 + 2 * k] == tau[tau.size() - 1 - k]);
        const int t_prev = k + 1 < tau.size() ? tau[tau.size() - 2 - k] : 0;
        CHECK(ts[2 + 2 * k] == t_prev);
    }
}

TEST_CASE("run_inference is deterministic for a fixed seed") {
    const Annotation a = make_person(-0.5, 6.0);
    const RadarFrameSet frames = blob_heatmap(person_scatterers(a), 2, 0.2);
    const NoiseSchedule s = build_schedule(1000, ScheduleKind::cosine);
    const std::vector<int> tau = tau_subsequence(1000, 5);
    InferenceConfig cfg;
    cfg.n_boxes = 4;
    cfg.threshold = 0.1;
    cfg.eta = 1.0;  // exercise the stochastic sampler path
    cfg.box_renewal = true;

    auto run_once = [&] {
        CentroidDetector det;
        Rng rng(77);
        return run_inference(frames, det, default_calib(), s, tau, cfg, rng);
    };
    const auto d1 = run_once();
    const auto d2 = run_once();
    REQUIRE(d1.size() == d2.size());
    for (size_t i = 0; i < d1.size(); ++i) {
        CHECK(d1[i].box3d.cx == d2[i].box3d.cx);
        CHECK(d1[i].box3d.cy == d2[i].box3d.cy);
        CHECK(d1[i].box3d.cz == d2[i].box3d.cz);
        CHECK(d1[i].box2d.cx == d2[i].box2d.cx);
        CHECK(d1[i].scores[0] == d2[i].scores[0]);
    }
}

TEST_CASE("run_inference validates its step sequence") {
    const RadarFrameSet frames = zero_frames(1);
    OracleDetector det({}, 0.0, SceneBounds{});
    const NoiseSchedule s = build_schedule(1000, ScheduleKind::cosine);
    const CameraCalib calib = default_calib();
    InferenceConfig cfg;
    Rng rng(1);
    auto call = [&](const std::vector<int>& tau) {
        Rng r = rng;
        return run_inference(frames, det, calib, s, tau, cfg, r);
    };
    CHECK_THROWS_AS(call({}), std::invalid_argument);
    CHECK_THROWS_AS(call({0}), std::invalid_argument);
    CHECK_THROWS_AS(call({1001}), std::invalid_argument);
    CHECK_THROWS_AS(call({500, 100}), std::invalid_argument);
    CHECK_THROWS_AS(call({250, 250, 500}), std::invalid_argument);
    InferenceConfig bad = cfg;
    bad.n_boxes = 0;
    Rng r2(1);
    CHECK_THROWS_AS(run_inference(frames, det, calib, s, {1000}, bad, r2),
                    std::invalid_argument);
}

TEST_CASE("box renewal keeps the matched trajectory intact") {
    const Annotation a = make_person(1.0, 7.5);
    const RadarFrameSet frames = blob_heatmap(person_scatterers(a), 1, 0.2);
    OracleDetector det({a}, 0.0, SceneBounds{});
    const NoiseSchedule s = build_schedule(1000, ScheduleKind::cosine);
    InferenceConfig cfg;
    cfg.n_boxes = 5;
    cfg.threshold = 0.5;
    cfg.box_renewal = true;
    Rng rng(8);
    const auto dets =
        run_inference(frames, det, default_calib(), s, tau_subsequence(1000, 5), cfg, rng);
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].box3d.cx == doctest::Approx(a.box3d.cx).epsilon(1e-9));
    CHECK(dets[0].box3d.h == doctest::Approx(a.box3d.h).epsilon(1e-9));
}

TEST_CASE("image-plane nms collapses near-duplicate detections") {
    const std::vector<Annotation> gt = {make_person(0.0, 8.0),
                                        make_person(0.05, 8.02)};
    const RadarFrameSet frames = zero_frames(1);
    const NoiseSchedule s = build_schedule(1000, ScheduleKind::cosine);
    const std::vector<int> tau = tau_subsequence(1000, 3);

    InferenceConfig cfg;
    cfg.n_boxes = 6;
    cfg.threshold = 0.5;
    auto count = [&](double nms) {
        OracleDetector det(gt, 0.0, SceneBounds{});
        InferenceConfig c = cfg;
        c.nms_iou = nms;
        Rng rng(31);
        return run_inference(frames, det, default_calib(), s, tau, c, rng).size();
    };
    CHECK(count(-1.0) == 2);
    CHECK(count(0.5) == 1);
}

TEST_CASE("nms_image is greedy by score with index ties") {
    auto det = [](double score, double cx, double cy, double w, double h) {
        Detection d;
        d.scores = {score, 1.0 - score};
        d.box2d = {cx, cy, w, h};
        return d;
    };
    std::vector<Detection> dets = {det(0.6, 100, 100, 40, 40),
                                   det(0.9, 105, 100, 40, 40),
                                   det(0.7, 300, 100, 40, 40)};
    const auto kept = nms_image(dets, 0.5);
    REQUIRE(kept.size() == 2);
    CHECK(kept[0].person_score() == 0.9);
    CHECK(kept[1].person_score() == 0.7);

    // Equal scores: the lower index wins.
    std::vector<Detection> ties = {det(0.5, 50, 50, 20, 20), det(0.5, 50, 50, 20, 20)};
    const auto one = nms_image(ties, 0.3);
    REQUIRE(one.size() == 1);
    CHECK(one[0].box2d.cx == 50);

    // Overlap exactly at the threshold is kept: suppression needs iou > thr.
    std::vector<Detection> edge = {det(0.8, 1, 1, 2, 2), det(0.6, 2, 2, 2, 2)};
    CHECK(iou(edge[0].box2d, edge[1].box2d) == 1.0 / 7.0);
    CHECK(nms_image(edge, 1.0 / 7.0).size() == 2);
}

}  // TEST_SUITE
