#include "rexo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rexo {

namespace {

struct RankedDet {
    int frame;
    int index;  // position within the frame, for deterministic tie-breaks
    double score;
    const ImageBox2D* box;
};

std::vector<RankedDet> rank_detections(const std::vector<EvalFrame>& frames) {
    std::vector<RankedDet> ranked;
    for (int f = 0; f < static_cast<int>(frames.size()); ++f)
        for (int i = 0; i < static_cast<int>(frames[f].dets.size()); ++i)
            ranked.push_back({f, i, frames[f].dets[i].person_score(),
                              &frames[f].dets[i].box2d});
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedDet& a, const RankedDet& b) {
                         if (a.score != b.score) return a.score > b.score;
                         if (a.frame != b.frame) return a.frame < b.frame;
                         return a.index < b.index;
                     });
    return ranked;
}

size_t count_gts(const std::vector<EvalFrame>& frames) {
    size_t n = 0;
    for (const EvalFrame& f : frames) n += f.gts.size();
    return n;
}

double interpolated_ap(const std::vector<char>& is_tp, size_t n_gt) {
    // Precision/recall staircase over the ranked list, then the area under
    // the "max precision at recall >= r" envelope.
    std::vector<double> prec, rec;
    size_t tp = 0;
    for (size_t k = 0; k < is_tp.size(); ++k) {
        if (is_tp[k]) ++tp;
        prec.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
        rec.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
    }
    double ap = 0, best_prec = 0;
    for (size_t k = prec.size(); k-- > 0;) {
        best_prec = std::max(best_prec, prec[k]);
        const double prev_rec = k > 0 ? rec[k - 1] : 0.0;
        if (rec[k] > prev_rec) ap += (rec[k] - prev_rec) * best_prec;
    }
    return ap;
}

}  // namespace

std::optional<std::vector<double>> average_precision(
    const std::vector<EvalFrame>& frames, const std::vector<double>& thresholds) {
    const size_t n_gt = count_gts(frames);
    if (n_gt == 0) return std::nullopt;
    const std::vector<RankedDet> ranked = rank_detections(frames);
    std::vector<double> out;
    out.reserve(thresholds.size());
    for (double thr : thresholds) {
        std::vector<std::vector<char>> gt_used(frames.size());
        for (size_t f = 0; f < frames.size(); ++f)
            gt_used[f].assign(frames[f].gts.size(), 0);
        std::vector<char> is_tp(ranked.size(), 0);
        for (size_t k = 0; k < ranked.size(); ++k) {
            const RankedDet& d = ranked[k];
            const auto& gts = frames[d.frame].gts;
            int best = -1;
            double best_iou = thr;  // must meet the threshold to match
            for (int j = 0; j < static_cast<int>(gts.size()); ++j) {
                if (gt_used[d.frame][j]) continue;
                const double v = iou(*d.box, gts[j].box2d);
                if (v > best_iou || (best < 0 && v == best_iou)) {
                    best = j;
                    best_iou = v;
                }
            }
            if (best >= 0) {
                gt_used[d.frame][best] = 1;
                is_tp[k] = 1;
            }
        }
        out.push_back(interpolated_ap(is_tp, n_gt));
    }
    return out;
}

std::optional<double> average_recall(const std::vector<EvalFrame>& frames, int k) {
    if (k < 1) throw std::invalid_argument("average_recall: k must be >= 1");
    const size_t n_gt = count_gts(frames);
    if (n_gt == 0) return std::nullopt;
    double total = 0;
    for (const EvalFrame& frame : frames) {
        // Top-k by score, ties broken by detection index.
        std::vector<int> order(frame.dets.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            return frame.dets[a].person_score() > frame.dets[b].person_score();
        });
        if (static_cast<int>(order.size()) > k) order.resize(k);
        for (const Annotation& gt : frame.gts) {
            double best = 0;
            for (int idx : order) best = std::max(best, iou(frame.dets[idx].box2d, gt.box2d));
            total += std::max(best - 0.5, 0.0);
        }
    }
    return 2.0 * total / static_cast<double>(n_gt);
}

std::vector<int> iou_histogram(const std::vector<double>& ious, int bins) {
    if (bins < 1) throw std::invalid_argument("iou_histogram: bins must be >= 1");
    std::vector<int> counts(bins, 0);
    for (double v : ious) {
        int idx = static_cast<int>(std::floor(v * bins));
        idx = std::clamp(idx, 0, bins - 1);
        ++counts[idx];
    }
    return counts;
}

std::vector<double> ap_thresholds() {
    std::vector<double> t;
    for (int i = 0; i <= 9; ++i) t.push_back(0.5 + 0.05 * i);
    return t;
}

EvalResult evaluate(const std::vector<EvalFrame>& frames) {
    EvalResult res;
    for (const EvalFrame& f : frames)
        for (const Annotation& gt : f.gts) {
            double best = 0;
            for (const Detection& d : f.dets) best = std::max(best, iou(d.box2d, gt.box2d));
            res.ious.push_back(best);
        }
    const auto per_thr = average_precision(frames, ap_thresholds());
    if (per_thr) {
        double mean = 0;
        for (double v : *per_thr) mean += v;
        res.ap = mean / per_thr->size();
        res.ap50 = (*per_thr)[0];
        res.ap75 = (*per_thr)[5];
    }
    res.ar1 = average_recall(frames, 1);
    res.ar10 = average_recall(frames, 10);
    return res;
}

}  // namespace rexo
