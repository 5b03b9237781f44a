#include "rexo/assignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace rexo {

namespace {

constexpr double kProbFloor = 1e-12;

// Classic potentials-based solver; rows must not outnumber columns. Returns
// the minimum total cost of matching every row.
double solve_min_cost(const std::vector<std::vector<double>>& a) {
    const int n = static_cast<int>(a.size());
    if (n == 0) return 0.0;
    const int m = static_cast<int>(a[0].size());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0), v(m + 1, 0);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(m + 1, inf);
        std::vector<char> used(m + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            int j1 = -1;
            double delta = inf;
            for (int j = 1; j <= m; ++j)
                if (!used[j]) {
                    const double cur = a[i0 - 1][j - 1] - u[i0] - v[j];
                    if (cur < minv[j]) {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if (minv[j] < delta) {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            for (int j = 0; j <= m; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    double total = 0;
    for (int j = 1; j <= m; ++j)
        if (p[j] != 0) total += a[p[j] - 1][j - 1];
    return total;
}

// Min cost of matching min(|rows|, |cols|) pairs from a submatrix.
double sub_min_cost(const CostMatrix& c, const std::vector<int>& rows,
                    const std::vector<int>& cols) {
    if (rows.empty() || cols.empty()) return 0.0;
    const bool transpose = rows.size() > cols.size();
    const size_t n = transpose ? cols.size() : rows.size();
    const size_t m = transpose ? rows.size() : cols.size();
    std::vector<std::vector<double>> a(n, std::vector<double>(m));
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < cols.size(); ++j) {
            const double v = c[rows[i]][cols[j]];
            if (transpose)
                a[j][i] = v;
            else
                a[i][j] = v;
        }
    return solve_min_cost(a);
}

DiffusedBox normalized_or_throw(const Box3D& b, const SceneBounds& bounds) {
    bounds.validate();
    return normalize(b, bounds);
}

}  // namespace

double box_cost_ga(const Detection& pred, const Annotation& gt, const LossWeights& w,
                   const SceneBounds& bounds, double image_w, double image_h) {
    const DiffusedBox p3 = normalized_or_throw(pred.box3d, bounds);
    const DiffusedBox g3 = normalized_or_throw(gt.box3d, bounds);
    double l1_3d = 0;
    for (int i = 0; i < 6; ++i) l1_3d += std::abs(p3[i] - g3[i]);
    const double giou_loss_3d = 1.0 - giou(pred.box3d, gt.box3d);

    const double pn[4] = {pred.box2d.cx / image_w, pred.box2d.cy / image_h,
                          pred.box2d.w / image_w, pred.box2d.h / image_h};
    const double gn[4] = {gt.box2d.cx / image_w, gt.box2d.cy / image_h,
                          gt.box2d.w / image_w, gt.box2d.h / image_h};
    double l1_2d = 0;
    for (int i = 0; i < 4; ++i) l1_2d += std::abs(pn[i] - gn[i]);
    const double giou_loss_2d = 1.0 - giou(pred.box2d, gt.box2d);

    return w.lambda_3d * (w.lambda_giou * giou_loss_3d + w.lambda_l1 * l1_3d) +
           w.lambda_2d * (w.lambda_giou * giou_loss_2d + w.lambda_l1 * l1_2d);
}

double classification_loss(const std::vector<std::array<double, 2>>& probs,
                           const std::vector<int>& assignment,
                           const std::vector<int>& gt_classes, const LossWeights& w) {
    if (probs.size() != assignment.size())
        throw std::invalid_argument("classification_loss: batch size mismatch");
    double total = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
        const int gt = assignment[i];
        if (gt >= 0) {
            if (gt >= static_cast<int>(gt_classes.size()))
                throw std::out_of_range("classification_loss: assignment out of range");
            total += -std::log(std::max(probs[i][gt_classes[gt]], kProbFloor));
        } else {
            total += w.no_object * -std::log(std::max(probs[i][kClassBackground], kProbFloor));
        }
    }
    return total;
}

std::vector<int> hungarian(const CostMatrix& cost) {
    const int n_pred = static_cast<int>(cost.size());
    std::vector<int> out(n_pred, -1);
    if (n_pred == 0) return out;
    const int n_gt = static_cast<int>(cost[0].size());
    for (const auto& row : cost) {
        if (static_cast<int>(row.size()) != n_gt)
            throw std::invalid_argument("hungarian: ragged cost matrix");
        for (double v : row)
            if (!std::isfinite(v))
                throw std::invalid_argument("hungarian: non-finite cost");
    }
    if (n_gt == 0) return out;

    std::vector<int> all_preds(n_pred), all_gts(n_gt);
    for (int i = 0; i < n_pred; ++i) all_preds[i] = i;
    for (int j = 0; j < n_gt; ++j) all_gts[j] = j;
    const double optimum = sub_min_cost(cost, all_preds, all_gts);
    const double tol = 1e-9 * std::max(1.0, std::abs(optimum));

    // Fix predictions in order to the smallest gt that preserves optimality;
    // this realizes the lexicographic tie rule exactly.
    const int k = std::min(n_pred, n_gt);
    std::vector<char> gt_used(n_gt, 0);
    double fixed_cost = 0;
    int matched = 0;
    for (int i = 0; i < n_pred && matched < k; ++i) {
        std::vector<int> rest_preds;
        for (int p = i + 1; p < n_pred; ++p) rest_preds.push_back(p);
        const bool may_skip =
            static_cast<int>(rest_preds.size()) >= k - matched;
        int chosen = -1;
        for (int g = 0; g < n_gt; ++g) {
            if (gt_used[g]) continue;
            std::vector<int> rest_gts;
            for (int q = 0; q < n_gt; ++q)
                if (!gt_used[q] && q != g) rest_gts.push_back(q);
            const double completed =
                fixed_cost + cost[i][g] + sub_min_cost(cost, rest_preds, rest_gts);
            if (completed <= optimum + tol) {
                chosen = g;
                break;
            }
        }
        if (chosen >= 0) {
            out[i] = chosen;
            gt_used[chosen] = 1;
            fixed_cost += cost[i][chosen];
            ++matched;
        } else if (!may_skip) {
            throw std::logic_error("hungarian: failed to complete optimal assignment");
        }
    }
    return out;
}

MatchResult match_and_loss(const std::vector<Detection>& preds,
                           const std::vector<Annotation>& gts, const LossWeights& w,
                           const SceneBounds& bounds, double image_w, double image_h) {
    if (preds.size() < gts.size())
        throw std::invalid_argument("match_and_loss: need at least as many predictions as gts");
    CostMatrix cost(preds.size(), std::vector<double>(gts.size()));
    for (size_t i = 0; i < preds.size(); ++i)
        for (size_t j = 0; j < gts.size(); ++j)
            cost[i][j] = -preds[i].person_score() +
                         box_cost_ga(preds[i], gts[j], w, bounds, image_w, image_h);

    MatchResult res;
    res.assignment = hungarian(cost);

    std::vector<std::array<double, 2>> probs(preds.size());
    std::vector<int> gt_classes(gts.size());
    for (size_t i = 0; i < preds.size(); ++i) probs[i] = preds[i].scores;
    for (size_t j = 0; j < gts.size(); ++j) gt_classes[j] = gts[j].class_id;
    res.loss.cls = classification_loss(probs, res.assignment, gt_classes, w);

    for (size_t i = 0; i < preds.size(); ++i) {
        const int j = res.assignment[i];
        if (j < 0) continue;
        res.loss.giou_3d += 1.0 - giou(preds[i].box3d, gts[j].box3d);
        res.loss.giou_2d += 1.0 - giou(preds[i].box2d, gts[j].box2d);
        const DiffusedBox p3 = normalize(preds[i].box3d, bounds);
        const DiffusedBox g3 = normalize(gts[j].box3d, bounds);
        for (int c = 0; c < 6; ++c) res.loss.l1_3d += std::abs(p3[c] - g3[c]);
        res.loss.l1_2d += std::abs(preds[i].box2d.cx - gts[j].box2d.cx) / image_w +
                          std::abs(preds[i].box2d.cy - gts[j].box2d.cy) / image_h +
                          std::abs(preds[i].box2d.w - gts[j].box2d.w) / image_w +
                          std::abs(preds[i].box2d.h - gts[j].box2d.h) / image_h;
    }
    res.loss.total =
        res.loss.cls +
        w.lambda_3d * (w.lambda_giou * res.loss.giou_3d + w.lambda_l1 * res.loss.l1_3d) +
        w.lambda_2d * (w.lambda_giou * res.loss.giou_2d + w.lambda_l1 * res.loss.l1_2d);
    return res;
}

}  // namespace rexo
