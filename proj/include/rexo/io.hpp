#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rexo/assignment.hpp"
#include "rexo/detection.hpp"
#include "rexo/geometry.hpp"
#include "rexo/metrics.hpp"
#include "rexo/radarsim.hpp"
#include "rexo/scenegen.hpp"

namespace rexo::io {

using nlohmann::json;

// Bad config file or unusable inputs; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- JSON conversions (field names are the on-disk contract) ---

json to_json(const Box3D& b);
json to_json(const ImageBox2D& b);
json to_json(const CameraCalib& c);
Box3D box3d_from_json(const json& j);
ImageBox2D box2d_from_json(const json& j);
CameraCalib calib_from_json(const json& j);

// --- JSONL datasets (one object per line, frame_id tags the frame) ---

void save_scenes(const std::string& scatterer_path, const std::string& annotation_path,
                 const std::vector<Scene>& frames);
std::vector<Scene> load_scenes(const std::string& scatterer_path,
                               const std::string& annotation_path);

void save_detections(const std::string& path,
                     const std::vector<std::vector<Detection>>& per_frame);
std::vector<std::vector<Detection>> load_detections(const std::string& path);

// --- Reports ---

json metrics_json(const EvalResult& r);  // percentages; absent metrics -> null
void save_metrics_json(const std::string& path, const EvalResult& r);
void save_metrics_csv(const std::string& path, const EvalResult& r);
EvalResult load_metrics_json(const std::string& path);  // ious not restored

void save_histogram_csv(const std::string& path, const std::vector<int>& counts);
std::vector<int> load_histogram_csv(const std::string& path);

// One row per frame; frames with fewer detections than ground truths get
// empty loss cells (the matcher needs at least as many predictions).
void save_loss_csv(const std::string& path,
                   const std::vector<std::vector<Detection>>& dets,
                   const std::vector<Scene>& frames, const LossWeights& w);

// --- Run configuration ---

struct RunConfig {
    std::uint64_t seed = 1;
    std::string schedule = "cosine";  // cosine | linear
    int T = 1000;
    int steps = 5;
    int n = 10;        // boxes carried at inference
    int n_train = 10;  // padded set size on the training path
    double threshold = 0.5;
    double eta = 0.0;
    bool box_renewal = false;
    double nms_iou = -1.0;  // < 0 disables
    bool ground = true;     // ground-plane constraint on every sampler state
    std::string detector = "centroid";  // centroid | oracle
    double oracle_eta0 = 0.0;
    LossWeights weights{};
    SceneBounds bounds{};
    int frames = 8;  // scenes to generate
    int stack = 4;   // radar frames stacked per scene
    std::string sim = "blob";  // blob | fft
    double sigma_blob = 0.15;
    SceneGenConfig scenegen{};
    std::vector<int> steps_sweep;  // extra step counts for the sweep report
    std::string scene_dir;  // where scene JSONL files live; empty -> out
    std::string out = "out";

    void validate() const;  // throws ConfigError
    std::string scenes_dir() const { return scene_dir.empty() ? out : scene_dir; }
};

// Strict parse: unknown keys anywhere are rejected by name, wrong types and
// out-of-range values name the offending field.
RunConfig parse_config(const json& j);
RunConfig load_config(const std::string& path);

json config_json(const RunConfig& c);  // full echo, round-trips through parse_config

// --- Small file helpers ---

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace rexo::io
