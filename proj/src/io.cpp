#include "rexo/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace rexo::io {

namespace {

// Reject keys outside the allowed set so typos fail loudly instead of
// silently falling back to defaults.
void expect_keys(const json& j, const std::string& where,
                 const std::set<std::string>& allowed) {
    if (!j.is_object())
        throw ConfigError(where + ": expected a JSON object");
    for (const auto& item : j.items())
        if (!allowed.count(item.key()))
            throw ConfigError(where + ": unknown key \"" + item.key() + "\"");
}

double get_num(const json& j, const std::string& where, const char* key,
               double fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number())
        throw ConfigError(where + "." + key + ": expected a number");
    return v.get<double>();
}

int get_int(const json& j, const std::string& where, const char* key, int fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_number_integer())
        throw ConfigError(where + "." + key + ": expected an integer");
    return v.get<int>();
}

bool get_bool(const json& j, const std::string& where, const char* key, bool fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_boolean())
        throw ConfigError(where + "." + key + ": expected a boolean");
    return v.get<bool>();
}

std::string get_str(const json& j, const std::string& where, const char* key,
                    const std::string& fallback) {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_string())
        throw ConfigError(where + "." + key + ": expected a string");
    return v.get<std::string>();
}

double req_num(const json& j, const std::string& where, const char* key) {
    if (!j.contains(key))
        throw ConfigError(where + ": missing key \"" + key + "\"");
    const json& v = j.at(key);
    if (!v.is_number())
        throw ConfigError(where + "." + key + ": expected a number");
    return v.get<double>();
}

int req_frame_id(const json& j, const std::string& where) {
    if (!j.contains("frame_id"))
        throw ConfigError(where + ": missing key \"frame_id\"");
    const json& v = j.at("frame_id");
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError(where + ".frame_id: expected a non-negative integer");
    return v.get<int>();
}

std::ifstream open_in(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open " + path);
    return f;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path);
    return f;
}

json parse_line(const std::string& line, const std::string& where) {
    try {
        return json::parse(line);
    } catch (const json::parse_error& e) {
        throw ConfigError(where + ": " + e.what());
    }
}

// Grow the frame list to hold index id.
template <typename T>
std::vector<T>& frame_slot(std::vector<std::vector<T>>& frames, int id) {
    if (static_cast<int>(frames.size()) <= id) frames.resize(id + 1);
    return frames[id];
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

}  // namespace

json to_json(const Box3D& b) {
    return json{{"cx", b.cx}, {"cy", b.cy}, {"cz", b.cz},
                {"w", b.w},   {"h", b.h},   {"d", b.d}};
}

json to_json(const ImageBox2D& b) {
    return json{{"cbar_x", b.cx}, {"cbar_y", b.cy}, {"wbar", b.w}, {"hbar", b.h}};
}

json to_json(const CameraCalib& c) {
    return json{{"R", c.R},   {"v", c.v},   {"fx", c.fx},
                {"fy", c.fy}, {"px", c.px}, {"py", c.py},
                {"image_w", c.image_w}, {"image_h", c.image_h}};
}

Box3D box3d_from_json(const json& j) {
    expect_keys(j, "box3d", {"cx", "cy", "cz", "w", "h", "d"});
    Box3D b;
    b.cx = req_num(j, "box3d", "cx");
    b.cy = req_num(j, "box3d", "cy");
    b.cz = req_num(j, "box3d", "cz");
    b.w = req_num(j, "box3d", "w");
    b.h = req_num(j, "box3d", "h");
    b.d = req_num(j, "box3d", "d");
    return b;
}

ImageBox2D box2d_from_json(const json& j) {
    expect_keys(j, "box2d", {"cbar_x", "cbar_y", "wbar", "hbar"});
    ImageBox2D b;
    b.cx = req_num(j, "box2d", "cbar_x");
    b.cy = req_num(j, "box2d", "cbar_y");
    b.w = req_num(j, "box2d", "wbar");
    b.h = req_num(j, "box2d", "hbar");
    return b;
}

CameraCalib calib_from_json(const json& j) {
    expect_keys(j, "calib",
                {"R", "v", "fx", "fy", "px", "py", "image_w", "image_h"});
    CameraCalib c;
    const json& R = j.at("R");
    const json& v = j.at("v");
    if (!R.is_array() || R.size() != 9)
        throw ConfigError("calib.R: expected 9 numbers (row-major)");
    if (!v.is_array() || v.size() != 3)
        throw ConfigError("calib.v: expected 3 numbers");
    for (int i = 0; i < 9; ++i) c.R[i] = R.at(i).get<double>();
    for (int i = 0; i < 3; ++i) c.v[i] = v.at(i).get<double>();
    c.fx = req_num(j, "calib", "fx");
    c.fy = req_num(j, "calib", "fy");
    c.px = req_num(j, "calib", "px");
    c.py = req_num(j, "calib", "py");
    c.image_w = req_num(j, "calib", "image_w");
    c.image_h = req_num(j, "calib", "image_h");
    return c;
}

void save_scenes(const std::string& scatterer_path, const std::string& annotation_path,
                 const std::vector<Scene>& frames) {
    auto fs = open_out(scatterer_path);
    auto fa = open_out(annotation_path);
    for (size_t i = 0; i < frames.size(); ++i) {
        for (const Scatterer& s : frames[i].scatterers) {
            json j{{"frame_id", i}, {"x", s.x}, {"y", s.y}, {"z", s.z},
                   {"reflectivity", s.reflectivity}};
            fs << j.dump() << "\n";
        }
        for (const Annotation& a : frames[i].annotations) {
            json j{{"frame_id", i},
                   {"class", a.class_id == kClassPerson ? "person" : "background"},
                   {"box3d", to_json(a.box3d)},
                   {"box2d", to_json(a.box2d)}};
            fa << j.dump() << "\n";
        }
    }
}

std::vector<Scene> load_scenes(const std::string& scatterer_path,
                               const std::string& annotation_path) {
    std::vector<std::vector<Scatterer>> scats;
    std::vector<std::vector<Annotation>> anns;

    auto fs = open_in(scatterer_path);
    std::string line;
    int line_no = 0;
    while (std::getline(fs, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::string where = scatterer_path + ":" + std::to_string(line_no);
        json j = parse_line(line, where);
        expect_keys(j, where, {"frame_id", "x", "y", "z", "reflectivity"});
        int id = req_frame_id(j, where);
        Scatterer s;
        s.x = req_num(j, where, "x");
        s.y = req_num(j, where, "y");
        s.z = req_num(j, where, "z");
        s.reflectivity = req_num(j, where, "reflectivity");
        frame_slot(scats, id).push_back(s);
    }

    auto fa = open_in(annotation_path);
    line_no = 0;
    while (std::getline(fa, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::string where = annotation_path + ":" + std::to_string(line_no);
        json j = parse_line(line, where);
        expect_keys(j, where, {"frame_id", "class", "box3d", "box2d"});
        int id = req_frame_id(j, where);
        Annotation a;
        std::string cls = get_str(j, where, "class", "person");
        if (cls != "person")
            throw ConfigError(where + ".class: unknown class \"" + cls + "\"");
        a.class_id = kClassPerson;
        a.box3d = box3d_from_json(j.at("box3d"));
        a.box2d = box2d_from_json(j.at("box2d"));
        frame_slot(anns, id).push_back(a);
    }

    std::vector<Scene> frames(std::max(scats.size(), anns.size()));
    for (size_t i = 0; i < frames.size(); ++i) {
        if (i < scats.size()) frames[i].scatterers = std::move(scats[i]);
        if (i < anns.size()) frames[i].annotations = std::move(anns[i]);
    }
    return frames;
}

void save_detections(const std::string& path,
                     const std::vector<std::vector<Detection>>& per_frame) {
    auto f = open_out(path);
    for (size_t i = 0; i < per_frame.size(); ++i) {
        for (const Detection& d : per_frame[i]) {
            json j{{"frame_id", i},
                   {"box3d", to_json(d.box3d)},
                   {"box2d", to_json(d.box2d)},
                   {"score", d.person_score()}};
            f << j.dump() << "\n";
        }
    }
}

std::vector<std::vector<Detection>> load_detections(const std::string& path) {
    std::vector<std::vector<Detection>> frames;
    auto f = open_in(path);
    std::string line;
    int line_no = 0;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::string where = path + ":" + std::to_string(line_no);
        json j = parse_line(line, where);
        expect_keys(j, where, {"frame_id", "box3d", "box2d", "score"});
        int id = req_frame_id(j, where);
        Detection d;
        d.box3d = box3d_from_json(j.at("box3d"));
        d.box2d = box2d_from_json(j.at("box2d"));
        double s = req_num(j, where, "score");
        d.scores = {s, 1.0 - s};
        frame_slot(frames, id).push_back(d);
    }
    return frames;
}

json metrics_json(const EvalResult& r) {
    auto pct = [](const std::optional<double>& v) {
        return v ? json(*v * 100.0) : json(nullptr);
    };
    return json{{"ap", pct(r.ap)},   {"ap50", pct(r.ap50)}, {"ap75", pct(r.ap75)},
                {"ar1", pct(r.ar1)}, {"ar10", pct(r.ar10)},
                {"n_annotations", r.ious.size()}};
}

void save_metrics_json(const std::string& path, const EvalResult& r) {
    auto f = open_out(path);
    f << metrics_json(r).dump(2) << "\n";
}

void save_metrics_csv(const std::string& path, const EvalResult& r) {
    auto f = open_out(path);
    auto cell = [](const std::optional<double>& v) {
        return v ? fmt(*v * 100.0) : std::string();
    };
    f << "ap,ap50,ap75,ar1,ar10\n";
    f << cell(r.ap) << "," << cell(r.ap50) << "," << cell(r.ap75) << ","
      << cell(r.ar1) << "," << cell(r.ar10) << "\n";
}

EvalResult load_metrics_json(const std::string& path) {
    auto f = open_in(path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    expect_keys(j, path, {"ap", "ap50", "ap75", "ar1", "ar10", "n_annotations"});
    auto frac = [&](const char* key) -> std::optional<double> {
        if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
        return j.at(key).get<double>() / 100.0;
    };
    EvalResult r;
    r.ap = frac("ap");
    r.ap50 = frac("ap50");
    r.ap75 = frac("ap75");
    r.ar1 = frac("ar1");
    r.ar10 = frac("ar10");
    return r;
}

void save_histogram_csv(const std::string& path, const std::vector<int>& counts) {
    auto f = open_out(path);
    f << "bin_lo,bin_hi,count\n";
    int bins = static_cast<int>(counts.size());
    for (int i = 0; i < bins; ++i)
        f << fmt(static_cast<double>(i) / bins) << ","
          << fmt(static_cast<double>(i + 1) / bins) << "," << counts[i] << "\n";
}

std::vector<int> load_histogram_csv(const std::string& path) {
    auto f = open_in(path);
    std::string line;
    if (!std::getline(f, line) || line != "bin_lo,bin_hi,count")
        throw ConfigError(path + ": expected header bin_lo,bin_hi,count");
    std::vector<int> counts;
    int line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        double lo, hi;
        int c;
        if (std::sscanf(line.c_str(), "%lf,%lf,%d", &lo, &hi, &c) != 3)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": bad row");
        counts.push_back(c);
    }
    return counts;
}

void save_loss_csv(const std::string& path,
                   const std::vector<std::vector<Detection>>& dets,
                   const std::vector<Scene>& frames, const LossWeights& w) {
    auto f = open_out(path);
    f << "frame,n_det,n_gt,cls,giou_3d,l1_3d,giou_2d,l1_2d,total\n";
    CameraCalib calib = default_calib();
    SceneBounds bounds{};
    static const std::vector<Detection> kNoDets;
    for (size_t i = 0; i < frames.size(); ++i) {
        const auto& gts = frames[i].annotations;
        const auto& preds = i < dets.size() ? dets[i] : kNoDets;
        f << i << "," << preds.size() << "," << gts.size();
        if (preds.size() >= gts.size() && !gts.empty()) {
            LossBreakdown l =
                match_and_loss(preds, gts, w, bounds, calib.image_w, calib.image_h)
                    .loss;
            f << "," << fmt(l.cls) << "," << fmt(l.giou_3d) << "," << fmt(l.l1_3d)
              << "," << fmt(l.giou_2d) << "," << fmt(l.l1_2d) << ","
              << fmt(l.total);
        } else {
            f << ",,,,,,";  // not computable for this frame
        }
        f << "\n";
    }
}

void RunConfig::validate() const {
    auto bad = [](const std::string& msg) { throw ConfigError("config." + msg); };
    if (schedule != "cosine" && schedule != "linear")
        bad("schedule: expected \"cosine\" or \"linear\"");
    if (T < 1) bad("T: must be >= 1");
    if (steps < 1 || steps > T) bad("steps: must be in [1, T]");
    if (n < 1) bad("n: must be >= 1");
    if (n_train < 1) bad("n_train: must be >= 1");
    if (!(threshold >= 0.0 && threshold <= 1.0)) bad("threshold: must be in [0, 1]");
    if (!(eta >= 0.0 && eta <= 1.0)) bad("eta: must be in [0, 1]");
    if (detector != "centroid" && detector != "oracle")
        bad("detector: expected \"centroid\" or \"oracle\"");
    if (!(oracle_eta0 >= 0.0 && oracle_eta0 < 0.5))
        bad("oracle_eta0: must be in [0, 0.5)");
    if (frames < 1) bad("frames: must be >= 1");
    if (stack < 1) bad("stack: must be >= 1");
    if (sim != "blob" && sim != "fft") bad("sim: expected \"blob\" or \"fft\"");
    if (!(sigma_blob > 0.0)) bad("sigma_blob: must be > 0");
    if (weights.lambda_3d < 0 || weights.lambda_2d < 0 || weights.lambda_giou < 0 ||
        weights.lambda_l1 < 0 || weights.no_object < 0)
        bad("weights: must be non-negative");
    if (scenegen.min_persons < 0 || scenegen.max_persons < scenegen.min_persons)
        bad("scenegen: need 0 <= min_persons <= max_persons");
    if (scenegen.scatterers_per_person < 1)
        bad("scenegen.scatterers_per_person: must be >= 1");
    for (int s : steps_sweep)
        if (s < 1 || s > T) bad("steps_sweep: entries must be in [1, T]");
    if (out.empty()) bad("out: must be non-empty");
    try {
        bounds.validate();
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config.bounds: ") + e.what());
    }
}

RunConfig parse_config(const json& j) {
    expect_keys(j, "config",
                {"seed", "schedule", "T", "steps", "n", "n_train", "threshold",
                 "eta", "box_renewal", "nms_iou", "ground", "detector", "oracle_eta0",
                 "weights", "bounds", "frames", "stack", "sim", "sigma_blob",
                 "scenegen", "steps_sweep", "scene_dir", "out"});
    RunConfig c;
    if (j.contains("seed")) {
        const json& v = j.at("seed");
        if (!v.is_number_integer() || v.get<long long>() < 0)
            throw ConfigError("config.seed: expected a non-negative integer");
        c.seed = v.get<std::uint64_t>();
    }
    c.schedule = get_str(j, "config", "schedule", c.schedule);
    c.T = get_int(j, "config", "T", c.T);
    c.steps = get_int(j, "config", "steps", c.steps);
    c.n = get_int(j, "config", "n", c.n);
    c.n_train = get_int(j, "config", "n_train", c.n_train);
    c.threshold = get_num(j, "config", "threshold", c.threshold);
    c.eta = get_num(j, "config", "eta", c.eta);
    c.box_renewal = get_bool(j, "config", "box_renewal", c.box_renewal);
    c.nms_iou = get_num(j, "config", "nms_iou", c.nms_iou);
    c.ground = get_bool(j, "config", "ground", c.ground);
    c.detector = get_str(j, "config", "detector", c.detector);
    c.oracle_eta0 = get_num(j, "config", "oracle_eta0", c.oracle_eta0);
    if (j.contains("weights")) {
        const json& w = j.at("weights");
        expect_keys(w, "config.weights",
                    {"lambda_3d", "lambda_2d", "lambda_giou", "lambda_l1",
                     "no_object"});
        c.weights.lambda_3d = get_num(w, "config.weights", "lambda_3d", c.weights.lambda_3d);
        c.weights.lambda_2d = get_num(w, "config.weights", "lambda_2d", c.weights.lambda_2d);
        c.weights.lambda_giou = get_num(w, "config.weights", "lambda_giou", c.weights.lambda_giou);
        c.weights.lambda_l1 = get_num(w, "config.weights", "lambda_l1", c.weights.lambda_l1);
        c.weights.no_object = get_num(w, "config.weights", "no_object", c.weights.no_object);
    }
    if (j.contains("bounds")) {
        const json& b = j.at("bounds");
        expect_keys(b, "config.bounds",
                    {"x_min", "x_max", "y_min", "y_max", "z_min", "z_max", "scale"});
        c.bounds.x_min = get_num(b, "config.bounds", "x_min", c.bounds.x_min);
        c.bounds.x_max = get_num(b, "config.bounds", "x_max", c.bounds.x_max);
        c.bounds.y_min = get_num(b, "config.bounds", "y_min", c.bounds.y_min);
        c.bounds.y_max = get_num(b, "config.bounds", "y_max", c.bounds.y_max);
        c.bounds.z_min = get_num(b, "config.bounds", "z_min", c.bounds.z_min);
        c.bounds.z_max = get_num(b, "config.bounds", "z_max", c.bounds.z_max);
        c.bounds.scale = get_num(b, "config.bounds", "scale", c.bounds.scale);
    }
    c.frames = get_int(j, "config", "frames", c.frames);
    c.stack = get_int(j, "config", "stack", c.stack);
    c.sim = get_str(j, "config", "sim", c.sim);
    c.sigma_blob = get_num(j, "config", "sigma_blob", c.sigma_blob);
    if (j.contains("scenegen")) {
        const json& g = j.at("scenegen");
        expect_keys(g, "config.scenegen",
                    {"min_persons", "max_persons", "scatterers_per_person",
                     "min_separation", "x_lo", "x_hi", "z_lo", "z_hi"});
        c.scenegen.min_persons = get_int(g, "config.scenegen", "min_persons", c.scenegen.min_persons);
        c.scenegen.max_persons = get_int(g, "config.scenegen", "max_persons", c.scenegen.max_persons);
        c.scenegen.scatterers_per_person =
            get_int(g, "config.scenegen", "scatterers_per_person", c.scenegen.scatterers_per_person);
        c.scenegen.min_separation = get_num(g, "config.scenegen", "min_separation", c.scenegen.min_separation);
        c.scenegen.x_lo = get_num(g, "config.scenegen", "x_lo", c.scenegen.x_lo);
        c.scenegen.x_hi = get_num(g, "config.scenegen", "x_hi", c.scenegen.x_hi);
        c.scenegen.z_lo = get_num(g, "config.scenegen", "z_lo", c.scenegen.z_lo);
        c.scenegen.z_hi = get_num(g, "config.scenegen", "z_hi", c.scenegen.z_hi);
    }
    if (j.contains("steps_sweep")) {
        const json& s = j.at("steps_sweep");
        if (!s.is_array())
            throw ConfigError("config.steps_sweep: expected an array of integers");
        for (const json& v : s) {
            if (!v.is_number_integer())
                throw ConfigError("config.steps_sweep: expected an array of integers");
            c.steps_sweep.push_back(v.get<int>());
        }
    }
    c.scene_dir = get_str(j, "config", "scene_dir", c.scene_dir);
    c.out = get_str(j, "config", "out", c.out);
    c.validate();
    return c;
}

RunConfig load_config(const std::string& path) {
    auto f = open_in(path);
    json j;
    try {
        f >> j;
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

json config_json(const RunConfig& c) {
    return json{
        {"seed", c.seed},
        {"schedule", c.schedule},
        {"T", c.T},
        {"steps", c.steps},
        {"n", c.n},
        {"n_train", c.n_train},
        {"threshold", c.threshold},
        {"eta", c.eta},
        {"box_renewal", c.box_renewal},
        {"ground", c.ground},
        {"nms_iou", c.nms_iou},
        {"detector", c.detector},
        {"oracle_eta0", c.oracle_eta0},
        {"weights",
         {{"lambda_3d", c.weights.lambda_3d},
          {"lambda_2d", c.weights.lambda_2d},
          {"lambda_giou", c.weights.lambda_giou},
          {"lambda_l1", c.weights.lambda_l1},
          {"no_object", c.weights.no_object}}},
        {"bounds",
         {{"x_min", c.bounds.x_min},
          {"x_max", c.bounds.x_max},
          {"y_min", c.bounds.y_min},
          {"y_max", c.bounds.y_max},
          {"z_min", c.bounds.z_min},
          {"z_max", c.bounds.z_max},
          {"scale", c.bounds.scale}}},
        {"frames", c.frames},
        {"stack", c.stack},
        {"sim", c.sim},
        {"sigma_blob", c.sigma_blob},
        {"scenegen",
         {{"min_persons", c.scenegen.min_persons},
          {"max_persons", c.scenegen.max_persons},
          {"scatterers_per_person", c.scenegen.scatterers_per_person},
          {"min_separation", c.scenegen.min_separation},
          {"x_lo", c.scenegen.x_lo},
          {"x_hi", c.scenegen.x_hi},
          {"z_lo", c.scenegen.z_lo},
          {"z_hi", c.scenegen.z_hi}}},
        {"steps_sweep", c.steps_sweep},
        {"scene_dir", c.scene_dir},
        {"out", c.out}};
}

void write_text_file(const std::string& path, const std::string& content) {
    auto f = open_out(path);
    f << content;
}

std::string read_text_file(const std::string& path) {
    auto f = open_in(path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace rexo::io
