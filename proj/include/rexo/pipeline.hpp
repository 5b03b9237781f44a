#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rexo/assignment.hpp"
#include "rexo/association.hpp"
#include "rexo/detection.hpp"
#include "rexo/diffusion.hpp"
#include "rexo/geometry.hpp"
#include "rexo/radarsim.hpp"
#include "rexo/rng.hpp"

namespace rexo {

// Batched conditioning for one denoising call. boxes3d holds the decoded
// current boxes the offsets will be applied to; boxes2d their image-plane
// projections when a calibration is in scope (else empty).
struct DetectorInput {
    std::vector<CropPair> crops;
    int t = 0;
    std::vector<double> e_t;
    std::vector<Box3D> boxes3d;
    std::vector<ImageBox2D> boxes2d;
};

struct DetectorOutput {
    std::vector<BoxOffsets3D> offsets3d;
    std::vector<BoxOffsets2D> offsets2d;
    std::vector<std::array<double, 2>> scores;  // {person, background}
};

// Stateless-per-call box head; runs one batch at a fixed timestep. Detectors
// hold no cross-call mutable state apart from their own seeded RNG stream.
class Detector {
  public:
    virtual ~Detector() = default;
    virtual DetectorOutput run(const DetectorInput& in) = 0;
    virtual std::string name() const = 0;
};

// Test stand-in with access to ground truth: Hungarian-assigns each current
// box to a GT and emits the exact offsets (uniformly perturbed by eta0).
class OracleDetector : public Detector {
  public:
    OracleDetector(std::vector<Annotation> gts, double eta0, SceneBounds bounds,
                   std::uint64_t seed = 0);
    DetectorOutput run(const DetectorInput& in) override;
    std::string name() const override { return "oracle"; }

  private:
    std::vector<Annotation> gts_;
    double eta0_;
    SceneBounds bounds_;
    Rng rng_;
};

// Non-learned heuristic conditioned only on the crop pair: energy centroid
// for center offsets, second moments for sizes, logistic energy for the
// score, and the fixed shrink prior for image-plane refinement.
class CentroidDetector : public Detector {
  public:
    explicit CentroidDetector(double energy_mid = 0.05, double energy_slope = 0.02);
    DetectorOutput run(const DetectorInput& in) override;
    std::string name() const override { return "centroid"; }

  private:
    double energy_mid_, energy_slope_;
};

// Training-path forward diffusion: normalized GT boxes padded with unit
// Gaussian draws to n_train, q-sampled at t, then grounded. Entry i < |gt|
// corresponds to gt[i]; padding follows.
std::vector<DiffusedBox> pad_and_diffuse(const std::vector<Annotation>& gt,
                                         int n_train, int t, const NoiseSchedule& s,
                                         const SceneBounds& bounds, Rng& rng);

struct DenoiseResult {
    std::vector<DiffusedBox> x0_hat;  // normalized, ready for the sampler
    std::vector<std::array<double, 2>> scores;
    std::vector<Box3D> boxes3d;           // decoded clean boxes, physical space
    std::vector<BoxOffsets2D> offsets2d;  // image-plane refinement offsets
    std::vector<ImageBox2D> boxes2d;      // refined image boxes (calib runs only)
};

// One conditioned denoising call: decode current boxes, cut one crop per view
// per box (2N RoIAligns), run the detector, decode its offsets.
DenoiseResult denoising_det(const std::vector<DiffusedBox>& x_t, int t,
                            const FeaturePyramid& hor, const FeaturePyramid& ver,
                            Detector& det, const SceneBounds& bounds,
                            const CameraCalib* calib = nullptr,
                            int roi_r = kRoiResolution, int embed_dim = 64,
                            bool ground = true);

struct InferenceConfig {
    int n_boxes = 10;
    double threshold = 0.5;
    double eta = 0.0;          // sigma policy; 0 = deterministic sampler
    bool box_renewal = false;  // replace low-score boxes with fresh noise
    double nms_iou = -1.0;     // image-plane NMS threshold; < 0 disables
    bool ground = true;        // project every state onto the ground plane
    SceneBounds bounds{};
    int roi_r = kRoiResolution;
    int embed_dim = 64;
    int pyramid_levels = 4;
    // Probe invoked with every decoded physical box set: once per sampler
    // step for the current state and once for the clean estimates.
    std::function<void(int t, const std::vector<Box3D>&)> observer;
};

// Full reverse process over the tau subsequence (descending), ending with the
// image-plane projection, refinement, score filtering, and optional NMS.
std::vector<Detection> run_inference(const RadarFrameSet& frames, Detector& det,
                                     const CameraCalib& calib, const NoiseSchedule& s,
                                     const std::vector<int>& tau,
                                     const InferenceConfig& cfg, Rng& rng);

// Greedy image-plane suppression, descending score, ties by index.
std::vector<Detection> nms_image(std::vector<Detection> dets, double iou_thr);

}  // namespace rexo
