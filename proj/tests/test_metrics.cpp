#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "rexo/metrics.hpp"

using namespace rexo;

namespace {

Detection det(double cx, double cy, double w, double h, double score) {
    Detection d;
    d.box2d = {cx, cy, w, h};
    d.scores = {score, 1 - score};
    return d;
}

Annotation gt(double cx, double cy, double w, double h) {
    Annotation a;
    a.box2d = {cx, cy, w, h};
    return a;
}

}  // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("perfect detections score ap one at every threshold") {
    std::vector<EvalFrame> frames(3);
    for (int f = 0; f < 3; ++f) {
        frames[f].gts = {gt(100 + f, 100, 40, 80), gt(200, 150 + f, 30, 60)};
        frames[f].dets = {det(100 + f, 100, 40, 80, 0.9), det(200, 150 + f, 30, 60, 0.8)};
    }
    const auto ap = average_precision(frames, ap_thresholds());
    REQUIRE(ap.has_value());
    for (double v : *ap) CHECK(v == 1.0);
    const EvalResult r = evaluate(frames);
    CHECK(*r.ap == 1.0);
    CHECK(*r.ap50 == 1.0);
    CHECK(*r.ap75 == 1.0);
    // ar@1 keeps one detection per frame, so only one of the two
    // annotations can be covered: (2/6) * 3 * (1 - 0.5) = 0.5
    CHECK(*r.ar1 == 0.5);
    CHECK(*r.ar10 == 1.0);
    CHECK(r.ious == std::vector<double>(6, 1.0));
}

TEST_CASE("a higher-scored false positive halves the interpolated ap") {
    std::vector<EvalFrame> frames(1);
    frames[0].gts = {gt(100, 100, 40, 80)};
    frames[0].dets = {det(300, 30, 10, 10, 0.9),     // misses everything
                      det(100, 100, 40, 80, 0.8)};   // perfect hit
    const auto ap = average_precision(frames, {0.5});
    CHECK((*ap)[0] == doctest::Approx(0.5).epsilon(1e-12));
    // reversing the scores restores ap = 1: the envelope ignores trailing FPs
    frames[0].dets[0].scores = {0.7, 0.3};
    const auto ap2 = average_precision(frames, {0.5});
    CHECK((*ap2)[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("each annotation is claimable once per threshold") {
    std::vector<EvalFrame> frames(1);
    frames[0].gts = {gt(100, 100, 40, 80)};
    frames[0].dets = {det(100, 100, 40, 80, 0.9), det(100, 100, 40, 80, 0.8)};
    // second duplicate is a false positive: precision 1/1 then 1/2
    const auto ap = average_precision(frames, {0.5});
    CHECK((*ap)[0] == doctest::Approx(1.0).epsilon(1e-12));
    const EvalResult r = evaluate(frames);
    CHECK(*r.ar1 == 1.0);
}

TEST_CASE("detections match the highest-iou unclaimed annotation") {
    std::vector<EvalFrame> frames(1);
    frames[0].gts = {gt(100, 100, 40, 80), gt(110, 100, 40, 80)};
    // one detection overlapping both, closer to the second
    frames[0].dets = {det(108, 100, 40, 80, 0.9), det(100, 100, 40, 80, 0.8)};
    const auto ap = average_precision(frames, {0.5});
    // first det takes gt 1, second det takes gt 0: both true positives
    CHECK((*ap)[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("score ties break by frame order then detection index") {
    std::vector<EvalFrame> frames(2);
    frames[0].gts = {gt(100, 100, 40, 80)};
    frames[1].gts = {gt(100, 100, 40, 80)};
    // same score everywhere; the frame-0 hit must rank first
    frames[0].dets = {det(100, 100, 40, 80, 0.5)};
    frames[1].dets = {det(300, 30, 10, 10, 0.5)};
    const auto ap = average_precision(frames, {0.5});
    // ranked list: TP then FP over 2 gts -> envelope 1.0 * 0.5 recall
    CHECK((*ap)[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("absent annotations yield absent metrics, not zeros") {
    std::vector<EvalFrame> frames(2);
    frames[0].dets = {det(1, 1, 1, 1, 0.9)};
    CHECK(!average_precision(frames, {0.5}).has_value());
    CHECK(!average_recall(frames, 10).has_value());
    const EvalResult r = evaluate(frames);
    CHECK(!r.ap.has_value());
    CHECK(!r.ar1.has_value());
    CHECK(r.ious.empty());
}

TEST_CASE("no detections with annotations present scores zero") {
    std::vector<EvalFrame> frames(1);
    frames[0].gts = {gt(100, 100, 40, 80)};
    const EvalResult r = evaluate(frames);
    CHECK(*r.ap == 0.0);
    CHECK(*r.ar10 == 0.0);
    CHECK(r.ious == std::vector<double>{0.0});
}

TEST_CASE("average recall is twice the clamped excess overlap") {
    std::vector<EvalFrame> frames(1);
    frames[0].gts = {gt(0.5, 0.5, 1, 1)};
    frames[0].dets = {det(0.5 + 1.0 / 9.0, 0.5, 1, 1, 0.9)};  // iou exactly 0.8
    CHECK(*average_recall(frames, 1) == doctest::Approx(0.6).epsilon(1e-12));
    // below the 0.5 floor the contribution clamps to zero
    frames[0].dets = {det(0.5 + 0.6, 0.5, 1, 1, 0.9)};  // iou = 0.25
    CHECK(*average_recall(frames, 1) == 0.0);
    CHECK_THROWS_AS(average_recall(frames, 0), std::invalid_argument);
}

TEST_CASE("ar at k uses the top-k detections by score, not by overlap") {
    std::vector<EvalFrame> frames(1);
    frames[0].gts = {gt(100, 100, 40, 80)};
    // best-overlap detection is outscored by a miss
    frames[0].dets = {det(300, 30, 10, 10, 0.9), det(100, 100, 40, 80, 0.2)};
    CHECK(*average_recall(frames, 1) == 0.0);
    CHECK(*average_recall(frames, 10) == 1.0);
}

TEST_CASE("iou histogram bins best overlaps with a closed top bin") {
    const auto counts = iou_histogram({0.0, 0.049, 0.05, 0.5, 0.999, 1.0}, 20);
    REQUIRE(counts.size() == 20);
    CHECK(counts[0] == 2);   // 0.0 and 0.049
    CHECK(counts[1] == 1);   // 0.05
    CHECK(counts[10] == 1);  // 0.5
    CHECK(counts[19] == 2);  // 0.999 and the exact 1.0 fold into the last bin
    int total = 0;
    for (int c : counts) total += c;
    CHECK(total == 6);
    CHECK_THROWS_AS(iou_histogram({0.5}, 0), std::invalid_argument);
}

TEST_CASE("ap thresholds span 0.5 to 0.95 by 0.05") {
    const auto t = ap_thresholds();
    REQUIRE(t.size() == 10);
    CHECK(t.front() == 0.5);
    CHECK(t.back() == doctest::Approx(0.95).epsilon(1e-12));
    for (size_t i = 1; i < t.size(); ++i)
        CHECK(t[i] - t[i - 1] == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("evaluate averages the per-threshold ap") {
    std::vector<EvalFrame> frames(1);
    frames[0].gts = {gt(100, 100, 40, 80)};
    // iou against gt: (40*80 - 40*8) inter... use a shifted box with iou ~ 0.68
    frames[0].dets = {det(100, 110, 40, 80, 0.9)};
    const EvalResult r = evaluate(frames);
    const auto per = average_precision(frames, ap_thresholds());
    double mean = 0;
    for (double v : *per) mean += v;
    mean /= per->size();
    CHECK(*r.ap == doctest::Approx(mean).epsilon(1e-12));
    CHECK(*r.ap50 == (*per)[0]);
    CHECK(*r.ap75 == (*per)[5]);
}

TEST_SUITE_END();
