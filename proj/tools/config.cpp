#include "config.hpp"

#include <set>

#include "gspose/error.hpp"
#include "gspose/io.hpp"

namespace gspose::cli {

using nlohmann::json;

namespace {

// Reads keys from one JSON object and remembers which ones were used so
// that leftovers can be reported.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(ErrorCode::Config, path_ + " must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    used_.insert(key);
    try {
      out = it->get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Config, path_ + "." + key + ": " + e.what());
    }
  }

  void get_vec3(const char* key, Vec3& out) {
    std::vector<double> v;
    if (!j_.contains(key)) return;
    get(key, v);
    if (v.size() != 3) throw Error(ErrorCode::Config, path_ + "." + key + " needs three numbers");
    out = Vec3(v[0], v[1], v[2]);
  }

  const json* child(const char* key) {
    const auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }

  std::string sub(const char* key) const { return path_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.count(k)) throw Error(ErrorCode::Config, "unknown key " + path_ + "." + k);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

FitInit parse_init(const std::string& s) {
  if (s == "random_in_sphere") return FitInit::RandomInSphere;
  if (s == "from_points") return FitInit::FromPoints;
  throw Error(ErrorCode::Config, "unknown fit init '" + s + "'");
}

std::string init_name(FitInit i) { return i == FitInit::RandomInSphere ? "random_in_sphere" : "from_points"; }

Aggregator parse_aggregator(const std::string& s) {
  if (s == "max") return Aggregator::Max;
  if (s == "top_mean") return Aggregator::TopMean;
  throw Error(ErrorCode::Config, "unknown aggregator '" + s + "'");
}

std::string aggregator_name(Aggregator a) { return a == Aggregator::Max ? "max" : "top_mean"; }

void read_synth(SynthConfig& c, const json& j) {
  Section s(j, "synth");
  s.get("n_primitives", c.n_primitives);
  s.get("splats_per_primitive", c.splats_per_primitive);
  s.get("object_radius", c.object_radius);
  s.get("n_train_views", c.n_train_views);
  s.get("n_test_normal", c.n_test_normal);
  s.get("n_test_anomalous", c.n_test_anomalous);
  std::string mode;
  if (j.contains("train_mode")) {
    s.get("train_mode", mode);
    c.train_mode = parse_view_mode(mode);
  }
  if (j.contains("test_mode")) {
    s.get("test_mode", mode);
    c.test_mode = parse_view_mode(mode);
  }
  s.get("camera_distance", c.camera_distance);
  s.get("fov_x", c.fov_x);
  s.get("orbit_elevation_min", c.orbit_elevation_min);
  s.get("orbit_elevation_max", c.orbit_elevation_max);
  s.get("width", c.width);
  s.get("height", c.height);
  s.get("sparsity", c.sparsity);
  s.get_vec3("background", c.background);
  s.get("min_mask_fraction", c.min_mask_fraction);
  s.get("init_points", c.init_points);
  if (const json* a = s.child("anomalies")) {
    if (!a->is_array()) throw Error(ErrorCode::Config, "synth.anomalies must be an array");
    c.anomalies.clear();
    for (const auto& item : *a) {
      Section e(item, "synth.anomalies[]");
      AnomalySpec spec;
      std::string kind;
      e.get("kind", kind);
      spec.kind = parse_anomaly_kind(kind);
      e.get("size_min", spec.size_min);
      e.get("size_max", spec.size_max);
      e.get("strength_min", spec.strength_min);
      e.get("strength_max", spec.strength_max);
      e.finish();
      c.anomalies.push_back(spec);
    }
  }
  s.finish();
}

void read_fit(FitConfig& c, const json& j) {
  Section s(j, "fit");
  s.get("iterations", c.iterations);
  s.get("lr_mean", c.lr_mean);
  s.get("lr_mean_final", c.lr_mean_final);
  s.get("lr_scale", c.lr_scale);
  s.get("lr_rotation", c.lr_rotation);
  s.get("lr_opacity", c.lr_opacity);
  s.get("lr_color", c.lr_color);
  s.get("densify_interval", c.densify_interval);
  s.get("densify_from", c.densify_from);
  s.get("densify_until", c.densify_until);
  s.get("densify_grad_threshold", c.densify_grad_threshold);
  s.get("prune_opacity_threshold", c.prune_opacity_threshold);
  s.get("max_splats", c.max_splats);
  if (j.contains("init")) {
    std::string init;
    s.get("init", init);
    c.init = parse_init(init);
  }
  s.get("init_count", c.init_count);
  s.get("init_radius", c.init_radius);
  s.get_vec3("init_center", c.init_center);
  s.get("init_opacity", c.init_opacity);
  s.get("scene_extent", c.scene_extent);
  s.get("log_interval", c.log_interval);
  s.get("checkpoint_interval", c.checkpoint_interval);
  s.finish();
}

void read_refine(RefineConfig& c, const json& j) {
  Section s(j, "refine");
  s.get("k", c.k);
  s.get("lr", c.adam.lr);
  s.get("beta1", c.adam.beta1);
  s.get("beta2", c.adam.beta2);
  s.get("eps", c.adam.eps);
  s.get("early_stop", c.early_stop);
  s.get("plateau_tol", c.plateau_tol);
  s.get("plateau_window", c.plateau_window);
  s.finish();
}

void read_loss(LossConfig& c, const json& j) {
  Section s(j, "loss");
  s.get("lambda", c.lambda);
  s.get("ssim_window", c.ssim_window);
  s.get("ssim_sigma", c.ssim_sigma);
  s.finish();
}

void read_render(RenderConfig& c, const json& j) {
  Section s(j, "render");
  s.get_vec3("background", c.background);
  s.get("tile_size", c.tile_size);
  s.get("alpha_cutoff", c.alpha_cutoff);
  s.get("transmittance_floor", c.transmittance_floor);
  s.get("low_pass", c.low_pass);
  s.finish();
}

void read_anomaly(AnomalyConfig& c, const json& j) {
  Section s(j, "anomaly");
  s.get("levels", c.levels);
  s.get("smooth_sigma", c.smooth_sigma);
  if (j.contains("aggregator")) {
    std::string a;
    s.get("aggregator", a);
    c.aggregator = parse_aggregator(a);
  }
  s.get("top_fraction", c.top_fraction);
  s.finish();
}

json vec3(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

void PipelineConfig::finalize() {
  if (threads < 0) throw Error(ErrorCode::Config, "threads must be >= 0");
  if (!(fpr_limit > 0.0 && fpr_limit <= 1.0)) throw Error(ErrorCode::Config, "fpr_limit must be in (0, 1]");
  synth.seed = seed;
  fit.seed = seed;
  fit.loss = detect.refine.loss;
  fit.render = detect.refine.render;
  synth.validate();
  fit.validate();
  detect.validate();
}

void merge_config(PipelineConfig& cfg, const json& j) {
  Section s(j, "config");
  s.get("seed", cfg.seed);
  s.get("threads", cfg.threads);
  s.get("category", cfg.category);
  s.get("fpr_limit", cfg.fpr_limit);
  if (const json* c = s.child("synth")) read_synth(cfg.synth, *c);
  if (const json* c = s.child("fit")) read_fit(cfg.fit, *c);
  if (const json* c = s.child("refine")) read_refine(cfg.detect.refine, *c);
  if (const json* c = s.child("loss")) read_loss(cfg.detect.refine.loss, *c);
  if (const json* c = s.child("render")) read_render(cfg.detect.refine.render, *c);
  if (const json* c = s.child("anomaly")) read_anomaly(cfg.detect.anomaly, *c);
  s.finish();
}

PipelineConfig load_config(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
  PipelineConfig cfg;
  merge_config(cfg, j);
  return cfg;
}

json to_json(const PipelineConfig& cfg) {
  const SynthConfig& sy = cfg.synth;
  json anomalies = json::array();
  for (const auto& a : sy.anomalies) {
    anomalies.push_back({{"kind", to_string(a.kind)},
                         {"size_min", a.size_min},
                         {"size_max", a.size_max},
                         {"strength_min", a.strength_min},
                         {"strength_max", a.strength_max}});
  }
  const FitConfig& f = cfg.fit;
  const RefineConfig& r = cfg.detect.refine;
  const AnomalyConfig& an = cfg.detect.anomaly;
  return {
      {"seed", cfg.seed},
      {"threads", cfg.threads},
      {"category", cfg.category},
      {"fpr_limit", cfg.fpr_limit},
      {"synth",
       {{"n_primitives", sy.n_primitives},
        {"splats_per_primitive", sy.splats_per_primitive},
        {"object_radius", sy.object_radius},
        {"n_train_views", sy.n_train_views},
        {"n_test_normal", sy.n_test_normal},
        {"n_test_anomalous", sy.n_test_anomalous},
        {"train_mode", to_string(sy.train_mode)},
        {"test_mode", to_string(sy.test_mode)},
        {"camera_distance", sy.camera_distance},
        {"fov_x", sy.fov_x},
        {"orbit_elevation_min", sy.orbit_elevation_min},
        {"orbit_elevation_max", sy.orbit_elevation_max},
        {"width", sy.width},
        {"height", sy.height},
        {"sparsity", sy.sparsity},
        {"background", vec3(sy.background)},
        {"min_mask_fraction", sy.min_mask_fraction},
        {"init_points", sy.init_points},
        {"anomalies", anomalies}}},
      {"fit",
       {{"iterations", f.iterations},
        {"lr_mean", f.lr_mean},
        {"lr_mean_final", f.lr_mean_final},
        {"lr_scale", f.lr_scale},
        {"lr_rotation", f.lr_rotation},
        {"lr_opacity", f.lr_opacity},
        {"lr_color", f.lr_color},
        {"densify_interval", f.densify_interval},
        {"densify_from", f.densify_from},
        {"densify_until", f.densify_until},
        {"densify_grad_threshold", f.densify_grad_threshold},
        {"prune_opacity_threshold", f.prune_opacity_threshold},
        {"max_splats", f.max_splats},
        {"init", init_name(f.init)},
        {"init_count", f.init_count},
        {"init_radius", f.init_radius},
        {"init_center", vec3(f.init_center)},
        {"init_opacity", f.init_opacity},
        {"scene_extent", f.scene_extent},
        {"log_interval", f.log_interval},
        {"checkpoint_interval", f.checkpoint_interval}}},
      {"refine",
       {{"k", r.k},
        {"lr", r.adam.lr},
        {"beta1", r.adam.beta1},
        {"beta2", r.adam.beta2},
        {"eps", r.adam.eps},
        {"early_stop", r.early_stop},
        {"plateau_tol", r.plateau_tol},
        {"plateau_window", r.plateau_window}}},
      {"loss", {{"lambda", r.loss.lambda}, {"ssim_window", r.loss.ssim_window}, {"ssim_sigma", r.loss.ssim_sigma}}},
      {"render",
       {{"background", vec3(r.render.background)},
        {"tile_size", r.render.tile_size},
        {"alpha_cutoff", r.render.alpha_cutoff},
        {"transmittance_floor", r.render.transmittance_floor},
        {"low_pass", r.render.low_pass}}},
      {"anomaly",
       {{"levels", an.levels},
        {"smooth_sigma", an.smooth_sigma},
        {"aggregator", aggregator_name(an.aggregator)},
        {"top_fraction", an.top_fraction}}},
  };
}

}  // namespace gspose::cli
