#pragma once

#include <optional>
#include <vector>

#include "rexo/detection.hpp"
#include "rexo/geometry.hpp"

namespace rexo {

struct EvalFrame {
    std::vector<Detection> dets;
    std::vector<Annotation> gts;
};

// All values live in [0, 1]; emitters scale by 100. Metrics are absent (not 0)
// when there are no annotations to evaluate against.
struct EvalResult {
    std::optional<double> ap, ap50, ap75, ar1, ar10;
    std::vector<double> ious;  // best IoU per annotation, frame order
};

// Interpolated AP per threshold: greedy score-descending matching with each
// annotation claimable once per threshold, then the area under the
// max-to-the-right precision envelope. Ties in score break by frame order
// then detection index.
std::optional<std::vector<double>> average_precision(
    const std::vector<EvalFrame>& frames, const std::vector<double>& thresholds);

// AR = (2/n) * sum_i max(best_iou_i - 0.5, 0), best IoU taken against the
// top-k detections by score in the annotation's frame.
std::optional<double> average_recall(const std::vector<EvalFrame>& frames, int k);

std::vector<int> iou_histogram(const std::vector<double>& ious, int bins);

std::vector<double> ap_thresholds();  // 0.5 : 0.05 : 0.95

EvalResult evaluate(const std::vector<EvalFrame>& frames);

}  // namespace rexo
