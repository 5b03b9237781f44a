#pragma once

#include <array>
#include <vector>

#include "rexo/detection.hpp"
#include "rexo/geometry.hpp"

namespace rexo {

// cost[i][j] is the cost of assigning prediction i to ground truth j.
using CostMatrix = std::vector<std::vector<double>>;

struct LossWeights {
    double lambda_3d = 1.0;
    double lambda_2d = 1.0;
    double lambda_giou = 2.0;
    double lambda_l1 = 5.0;
    double no_object = 0.1;  // down-weight for background terms
};

struct LossBreakdown {
    double cls = 0, giou_3d = 0, l1_3d = 0, giou_2d = 0, l1_2d = 0;
    double total = 0;
};

struct MatchResult {
    std::vector<int> assignment;  // per prediction: gt index or -1
    LossBreakdown loss;
};

// Geometry-aware pair cost over both spaces; L1 runs on normalized
// coordinates (diffusion space in 3D, image-size fractions in 2D).
double box_cost_ga(const Detection& pred, const Annotation& gt, const LossWeights& w,
                   const SceneBounds& bounds, double image_w, double image_h);

// Negative log-likelihood; unmatched predictions score the background class
// with the no-object down-weight. Probabilities are clamped at 1e-12.
double classification_loss(const std::vector<std::array<double, 2>>& probs,
                           const std::vector<int>& assignment,
                           const std::vector<int>& gt_classes, const LossWeights& w);

// Min-cost assignment matching min(N_pred, N_gt) pairs. Among optima, returns
// the lexicographically smallest map (scanning predictions in order, lower gt
// index preferred, unmatched last).
std::vector<int> hungarian(const CostMatrix& cost);

// Combined matcher: class cost (-p_person) plus box_cost_ga, then Hungarian,
// then the per-term loss breakdown over the matched pairs.
MatchResult match_and_loss(const std::vector<Detection>& preds,
                           const std::vector<Annotation>& gts, const LossWeights& w,
                           const SceneBounds& bounds, double image_w, double image_h);

}  // namespace rexo
