#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "config.hpp"
#include "gspose/error.hpp"
#include "gspose/io.hpp"
#include "gspose/metrics.hpp"
#include "gspose/parallel.hpp"
#include "gspose/pipeline.hpp"
#include "plot.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gspose;
using namespace gspose::cli;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kIo = 3,
  kParse = 4,
  kBadInput = 5,
  kNumerical = 6,
};

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::Config:
      return kUsage;
    case ErrorCode::Io:
      return kIo;
    case ErrorCode::Parse:
      return kParse;
    case ErrorCode::StaleForwardState:
    case ErrorCode::DegenerateAxis:
    case ErrorCode::NonFiniteGradient:
    case ErrorCode::NonFiniteLoss:
    case ErrorCode::DivergedFit:
      return kNumerical;
    default:
      return kBadInput;
  }
}

bool g_quiet = false;

void note(const std::string& msg) {
  if (!g_quiet) std::cerr << msg << '\n';
}

class Timings {
 public:
  template <class F>
  auto run(const std::string& stage, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Record {
      Timings* self;
      std::string stage;
      std::chrono::steady_clock::time_point t0;
      ~Record() {
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        self->stages_.push_back({stage, s});
        char buf[128];
        std::snprintf(buf, sizeof buf, "[time] %-10s %9.3f s", stage.c_str(), s);
        note(buf);
      }
    } rec{this, stage, t0};
    return f();
  }

  json to_json() const {
    json j = json::object();
    for (const auto& [name, s] : stages_) j[name] = j.value(name, 0.0) + s;
    return j;
  }

 private:
  std::vector<std::pair<std::string, double>> stages_;
};

json mat_json(const Mat4& m) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

Mat4 mat_from(const json& j) {
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

json screw_json(const ScrewTransform& t) {
  return {{"omega", {t.omega.x(), t.omega.y(), t.omega.z()}}, {"v", {t.v.x(), t.v.y(), t.v.z()}}, {"theta", t.theta}};
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  write_text(path, j.dump(2) + "\n");
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse, path.string() + ": " + e.what());
  }
}

std::vector<View> training_views(const Dataset& ds, double fraction) {
  return fraction < 1.0 ? sparsify(ds.train, fraction) : ds.train;
}

std::vector<ImageBuffer> test_images(const Dataset& ds) {
  std::vector<ImageBuffer> out;
  out.reserve(ds.test.size());
  for (const auto& t : ds.test) out.push_back(t.view.image);
  return out;
}

fs::path with_suffix(const fs::path& p, const std::string& suffix) {
  return p.parent_path() / (p.stem().string() + suffix);
}

// ---- subcommands ----------------------------------------------------------

struct Shared {
  PipelineConfig cfg;
  Timings timings;
  double view_fraction = 1.0;
};

void cmd_synth(Shared& sh, const fs::path& out) {
  const SynthScene scene = sh.timings.run("generate", [&] { return generate_scene(sh.cfg.synth); });
  sh.timings.run("write", [&] {
    write_dataset(out, scene, sh.cfg.synth, sh.cfg.category);
    write_json(out / "config.json", to_json(sh.cfg));
    return 0;
  });
  note("wrote " + std::to_string(scene.train.size()) + " train / " +
       std::to_string(scene.test_normal.size() + scene.test_anomalous.size()) + " test views to " + out.string());
}

void cmd_fit(Shared& sh, const fs::path& dataset, const fs::path& out) {
  const Dataset ds = sh.timings.run("load", [&] { return read_dataset(dataset); });
  const std::vector<View> views = training_views(ds, sh.view_fraction);
  FitConfig fc = sh.cfg.fit;
  fc.render.background = ds.render.background;

  GaussianCloud init;
  const GaussianCloud* initial = nullptr;
  if (fc.init == FitInit::FromPoints) {
    std::vector<Vec3> pts, cols;
    read_points_ply(dataset / "points3d.ply", pts, cols);
    init = init_from_points(pts, cols, fc.init_opacity);
    initial = &init;
  }

  FitCallbacks cb;
  cb.on_log = [](const FitLogEntry& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "[fit] it %6d  loss %.5f  psnr %6.2f  splats %zu", e.iteration, e.loss, e.psnr,
                  e.splats);
    note(buf);
  };
  if (fc.checkpoint_interval > 0) {
    cb.on_checkpoint = [&](int it, const GaussianCloud& c) {
      write_ply(with_suffix(out, ".iter" + std::to_string(it) + ".ply"), c);
    };
  }
  const FitResult r = sh.timings.run("fit", [&] { return fit_cloud(views, fc, initial, cb); });

  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_ply(out, r.cloud);
  json log = json::array();
  Series curve;
  curve.b = 200;
  for (const auto& e : r.log) {
    log.push_back({{"iteration", e.iteration}, {"loss", e.loss}, {"psnr", e.psnr}, {"splats", e.splats}});
    curve.x.push_back(e.iteration);
    curve.y.push_back(e.loss);
  }
  write_json(with_suffix(out, ".log.json"),
             {{"views", views.size()}, {"splats", r.cloud.size()}, {"log", log}, {"timings", sh.timings.to_json()}});
  if (curve.x.size() > 1) write_line_plot(with_suffix(out, ".curve.png"), {curve});
  note("wrote " + out.string() + " (" + std::to_string(r.cloud.size()) + " splats)");
}

std::size_t resolve_query(const Dataset& ds, const std::optional<std::size_t>& index, const std::string& name) {
  if (!name.empty()) {
    for (std::size_t i = 0; i < ds.test_names.size(); ++i)
      if (ds.test_names[i] == name) return i;
    throw Error(ErrorCode::InvalidArgument, "no test view named " + name);
  }
  const std::size_t i = index.value_or(0);
  if (i >= ds.test.size()) throw Error(ErrorCode::InvalidArgument, "query index out of range");
  return i;
}

void cmd_refine(Shared& sh, const fs::path& dataset, const fs::path& cloud_path, std::optional<std::size_t> index,
                const std::string& name, const fs::path& out) {
  const Dataset ds = sh.timings.run("load", [&] { return read_dataset(dataset); });
  const GaussianCloud cloud = read_ply(cloud_path);
  const std::size_t qi = resolve_query(ds, index, name);
  const std::vector<View> train = training_views(ds, sh.view_fraction);
  RefineConfig rc = sh.cfg.detect.refine;
  rc.render.background = ds.render.background;
  const ImageBuffer& query = ds.test[qi].view.image;

  const CoarsePose coarse = sh.timings.run("coarse", [&] { return coarse_pose(query, train); });
  const PoseEstimate est = sh.timings.run("refine", [&] { return refine_pose(query, coarse.camera, cloud, rc); });
  const PoseError before = camera_pose_error(coarse.camera, ds.test[qi].view.camera);
  const PoseError after = camera_pose_error(est.effective_camera(), ds.test[qi].view.camera);

  write_json(out, {{"query", qi},
                   {"name", ds.test_names[qi]},
                   {"coarse_index", coarse.index},
                   {"coarse_score", coarse.scores[coarse.index]},
                   {"k", rc.k},
                   {"steps", est.steps},
                   {"loss_trace", est.loss_trace},
                   {"final_loss", est.final_loss},
                   {"degraded", est.degraded},
                   {"diagnostic", est.diagnostic},
                   {"transform", screw_json(est.transform)},
                   {"coarse_pose", mat_json(coarse.camera.world_to_camera())},
                   {"effective_pose", mat_json(est.effective_pose)},
                   {"pose_error",
                    {{"coarse_rotation", before.rotation},
                     {"coarse_translation", before.translation},
                     {"rotation", after.rotation},
                     {"translation", after.translation}}},
                   {"timings", sh.timings.to_json()}});
  char buf[200];
  std::snprintf(buf, sizeof buf, "[refine] %s: coarse #%zu, rotation error %.4f -> %.4f rad, loss %.5f -> %.5f",
                ds.test_names[qi].c_str(), coarse.index, before.rotation, after.rotation,
                est.loss_trace.empty() ? est.final_loss : est.loss_trace.front(), est.final_loss);
  note(buf);
}

std::vector<QueryResult> detect_all(Shared& sh, const Dataset& ds, const GaussianCloud& cloud,
                                    const std::vector<View>& train, DetectConfig dc) {
  dc.refine.render.background = ds.render.background;
  NccMatcher matcher;
  sh.timings.run("match-prep", [&] {
    matcher.prepare(train);
    return 0;
  });
  return sh.timings.run("detect", [&] { return process_queries(test_images(ds), train, matcher, cloud, dc); });
}

void cmd_detect(Shared& sh, const fs::path& dataset, const fs::path& cloud_path, const fs::path& out, bool aligned) {
  const Dataset ds = sh.timings.run("load", [&] { return read_dataset(dataset); });
  const GaussianCloud cloud = read_ply(cloud_path);
  const std::vector<View> train = training_views(ds, sh.view_fraction);
  const std::vector<QueryResult> res = detect_all(sh, ds, cloud, train, sh.cfg.detect);

  fs::create_directories(out / "maps");
  if (aligned) fs::create_directories(out / "aligned");
  json queries = json::array();
  for (std::size_t i = 0; i < res.size(); ++i) {
    const std::string& n = ds.test_names[i];
    const QueryResult& r = res[i];
    write_score_map(out / "maps" / (n + ".smap"), r.anomaly.score_map);
    write_score_png16(out / "maps" / (n + ".png"), r.anomaly.score_map);
    if (aligned) write_png(out / "aligned" / (n + ".png"), r.anomaly.aligned_render);
    queries.push_back({{"name", n},
                       {"anomalous", ds.test[i].anomalous},
                       {"image_score", r.anomaly.image_score},
                       {"map", "maps/" + n + ".smap"},
                       {"coarse_index", r.coarse_index},
                       {"steps", r.pose.steps},
                       {"final_loss", r.pose.final_loss},
                       {"degraded", r.pose.degraded},
                       {"transform", screw_json(r.pose.transform)},
                       {"effective_pose", mat_json(r.pose.effective_pose)},
                       {"seconds", r.seconds}});
  }
  write_json(out / "results.json", {{"category", ds.category},
                                    {"dataset", fs::absolute(dataset).string()},
                                    {"cloud", fs::absolute(cloud_path).string()},
                                    {"config", to_json(sh.cfg)},
                                    {"queries", queries},
                                    {"timings", sh.timings.to_json()}});
  note("scored " + std::to_string(res.size()) + " test views into " + out.string());
}

json report_json(const CategoryReport& r) {
  return {{"category", r.name},
          {"images", r.images},
          {"image_auroc", r.image_auroc},
          {"pixel_auroc", r.pixel_auroc},
          {"aupro", r.aupro},
          {"rotation_error", r.rotation_error_mean},
          {"translation_error", r.translation_error_mean}};
}

void cmd_eval(Shared& sh, const std::vector<fs::path>& results_dirs, const std::vector<fs::path>& datasets,
              const fs::path& out) {
  if (results_dirs.size() != datasets.size()) {
    throw Error(ErrorCode::Config, "give one --dataset per --results directory");
  }
  std::vector<EvalInput> inputs;
  for (std::size_t d = 0; d < results_dirs.size(); ++d) {
    const Dataset ds = read_dataset(datasets[d]);
    const json res = read_json(results_dirs[d] / "results.json");
    EvalInput in;
    in.category = res.value("category", ds.category);
    std::vector<std::string> names;
    try {
      for (const auto& q : res.at("queries")) {
        const std::string n = q.at("name").get<std::string>();
        std::size_t i = 0;
        while (i < ds.test_names.size() && ds.test_names[i] != n) ++i;
        if (i == ds.test_names.size()) throw Error(ErrorCode::ShapeMismatch, "result " + n + " not in dataset");
        in.image_scores.push_back(q.at("image_score").get<double>());
        in.image_labels.push_back(ds.test[i].anomalous ? 1 : 0);
        in.maps.push_back(read_score_map(results_dirs[d] / q.at("map").get<std::string>()));
        in.masks.push_back(ds.test[i].mask);
        Camera est = ds.test[i].view.camera;
        est.set_world_to_camera(mat_from(q.at("effective_pose")));
        in.pose_errors.push_back(camera_pose_error(est, ds.test[i].view.camera));
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Parse, "results.json: " + std::string(e.what()));
    }
    inputs.push_back(std::move(in));
  }
  const EvalReport rep = sh.timings.run("eval", [&] { return evaluate(inputs, sh.cfg.fpr_limit); });

  json cats = json::array();
  std::ostringstream csv;
  csv << "category,images,image_auroc,pixel_auroc,aupro,rotation_error,translation_error\n";
  for (const auto& c : rep.categories) {
    cats.push_back(report_json(c));
    csv << c.name << ',' << c.images << ',' << c.image_auroc << ',' << c.pixel_auroc << ',' << c.aupro << ','
        << c.rotation_error_mean << ',' << c.translation_error_mean << '\n';
  }
  csv << "mean,," << rep.image_auroc << ',' << rep.pixel_auroc << ',' << rep.aupro << ',' << rep.rotation_error_mean
      << ',' << rep.translation_error_mean << '\n';
  write_json(out, {{"image_auroc", rep.image_auroc},
                   {"pixel_auroc", rep.pixel_auroc},
                   {"aupro", rep.aupro},
                   {"rotation_error", rep.rotation_error_mean},
                   {"translation_error", rep.translation_error_mean},
                   {"fpr_limit", sh.cfg.fpr_limit},
                   {"categories", cats}});
  write_text(with_suffix(out, ".csv"), csv.str());
  note(format_table(rep));
}

void cmd_ablate_k(Shared& sh, const fs::path& dataset, const fs::path& cloud_path, const std::vector<int>& ks,
                  const fs::path& out) {
  if (ks.empty()) throw Error(ErrorCode::Config, "empty k list");
  const Dataset ds = sh.timings.run("load", [&] { return read_dataset(dataset); });
  const GaussianCloud cloud = read_ply(cloud_path);
  const std::vector<View> train = training_views(ds, sh.view_fraction);

  std::ostringstream csv;
  csv << "k,image_auroc,pixel_auroc,aupro,rotation_error,translation_error,seconds_per_query\n";
  Series auroc, rot;
  auroc.g = 140;
  rot.r = 200;
  for (int k : ks) {
    DetectConfig dc = sh.cfg.detect;
    dc.refine.k = k;
    std::vector<QueryResult> res;
    try {
      res = detect_all(sh, ds, cloud, train, dc);
    } catch (const Error& e) {
      throw Error(e.code(), "k=" + std::to_string(k) + ", " + e.detail());
    }
    const CategoryReport rep = evaluate_category(collect_eval_input(ds.category, res, ds.test), sh.cfg.fpr_limit);
    double secs = 0.0;
    for (const auto& r : res) secs += r.seconds;
    secs /= static_cast<double>(std::max<std::size_t>(res.size(), 1));
    csv << k << ',' << rep.image_auroc << ',' << rep.pixel_auroc << ',' << rep.aupro << ','
        << rep.rotation_error_mean << ',' << rep.translation_error_mean << ',' << secs << '\n';
    auroc.x.push_back(k);
    auroc.y.push_back(rep.image_auroc);
    rot.x.push_back(k);
    rot.y.push_back(rep.rotation_error_mean);
    char buf[200];
    std::snprintf(buf, sizeof buf, "[ablate] k %4d  image AUROC %.4f  pixel AUROC %.4f  rot %.4f  %.3f s/query", k,
                  rep.image_auroc, rep.pixel_auroc, rep.rotation_error_mean, secs);
    note(buf);
  }
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_text(out, csv.str());
  if (ks.size() > 1) {
    write_line_plot(with_suffix(out, ".auroc.png"), {auroc});
    write_line_plot(with_suffix(out, ".rotation.png"), {rot});
  }
}

void cmd_render(Shared& sh, const fs::path& dataset, const fs::path& cloud_path, const std::string& split,
                std::size_t index, const fs::path& pose_json, const fs::path& out) {
  const Dataset ds = read_dataset(dataset);
  const GaussianCloud cloud = read_ply(cloud_path);
  Camera cam;
  if (split == "train") {
    if (index >= ds.train.size()) throw Error(ErrorCode::InvalidArgument, "train index out of range");
    cam = ds.train[index].camera;
  } else {
    if (index >= ds.test.size()) throw Error(ErrorCode::InvalidArgument, "test index out of range");
    cam = ds.test[index].view.camera;
  }
  if (!pose_json.empty()) cam.set_world_to_camera(mat_from(read_json(pose_json).at("effective_pose")));
  RenderConfig rc = sh.cfg.detect.refine.render;
  rc.background = ds.render.background;
  const ImageBuffer img = sh.timings.run("render", [&] { return render(cloud, cam, rc); });
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_png(out, img);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian splat scene fitting, pose refinement and anomaly detection"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  std::string config_path;
  std::optional<int> threads, k, fit_iters;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda, lr;
  bool full_scale = false;
  double view_fraction = 1.0;
  std::string dump_config;
  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--threads", threads, "Worker threads (0: all cores)");
  app.add_option("--seed", seed, "Random seed for every stage");
  app.add_option("--k", k, "Pose refinement steps (default 175)");
  app.add_option("--lambda", lambda, "SSIM weight in the photometric loss (default 0.2)");
  app.add_option("--lr", lr, "Pose refinement learning rate (default 1e-3)");
  app.add_option("--fit-iters", fit_iters, "Scene fitting iterations (default 3000)");
  app.add_flag("--paper-scale", full_scale, "Fit for 30000 iterations unless --fit-iters is given");
  app.add_option("--view-fraction", view_fraction, "Use a uniform-stride subset of the training views")
      ->check(CLI::Range(0.0, 1.0));
  app.add_option("--dump-config", dump_config, "Write the effective configuration as JSON and continue");
  app.add_flag("-q,--quiet", g_quiet, "Suppress progress output");

  fs::path dataset, cloud, out, pose_json;
  std::vector<fs::path> results_dirs, datasets;
  std::optional<std::size_t> query_index;
  std::string query_name, split = "test", category;
  std::size_t view_index = 0;
  std::vector<int> ks{25, 50, 100, 175, 300};
  bool write_aligned = false;
  std::optional<int> width, height, train_views, test_normal, test_anomalous;
  std::optional<double> sparsity;
  std::string view_mode;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic benchmark dataset");
  synth->add_option("--out", out, "Dataset directory")->required();
  synth->add_option("--category", category, "Category name recorded in meta.json");
  synth->add_option("--width", width, "Image width");
  synth->add_option("--height", height, "Image height");
  synth->add_option("--train-views", train_views, "Number of training views");
  synth->add_option("--test-normal", test_normal, "Number of anomaly-free test views");
  synth->add_option("--test-anomalous", test_anomalous, "Number of anomalous test views");
  synth->add_option("--sparsity", sparsity, "Fraction of training views to keep");
  synth->add_option("--view-mode", view_mode, "uniform_sphere or orbit, for train and test");

  auto* fit = app.add_subcommand("fit", "Fit a Gaussian cloud to the training views");
  fit->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  fit->add_option("--out", out, "Output PLY")->required();

  auto* refine = app.add_subcommand("refine", "Estimate the pose of one test view");
  refine->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  refine->add_option("--cloud", cloud, "Fitted PLY")->required()->check(CLI::ExistingFile);
  refine->add_option("--query", query_index, "Test view index");
  refine->add_option("--name", query_name, "Test view name, e.g. anomaly_0003");
  refine->add_option("--out", out, "Pose JSON")->required();

  auto* detect = app.add_subcommand("detect", "Pose-align and score every test view");
  detect->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  detect->add_option("--cloud", cloud, "Fitted PLY")->required()->check(CLI::ExistingFile);
  detect->add_option("--out", out, "Results directory")->required();
  detect->add_flag("--aligned", write_aligned, "Also write the aligned renders");

  auto* eval = app.add_subcommand("eval", "Compute AUROC, AUPRO and pose errors from detect results");
  eval->add_option("--results", results_dirs, "Results directories (one per category)")->required();
  eval->add_option("--dataset", datasets, "Dataset directories, matching --results")->required();
  eval->add_option("--out", out, "Report JSON; a CSV is written next to it")->required();

  auto* ablate = app.add_subcommand("ablate-k", "Detection quality and time as a function of k");
  ablate->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ablate->add_option("--cloud", cloud, "Fitted PLY")->required()->check(CLI::ExistingFile);
  ablate->add_option("--ks", ks, "Step counts")->delimiter(',');
  ablate->add_option("--out", out, "CSV output")->required();

  auto* rend = app.add_subcommand("render", "Render a cloud from a dataset camera");
  rend->add_option("--dataset", dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  rend->add_option("--cloud", cloud, "PLY cloud")->required()->check(CLI::ExistingFile);
  rend->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  rend->add_option("--index", view_index, "View index");
  rend->add_option("--pose", pose_json, "Use the effective pose from a refine JSON");
  rend->add_option("--out", out, "Output PNG")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    Shared sh;
    if (!config_path.empty()) sh.cfg = load_config(config_path);
    if (threads) sh.cfg.threads = *threads;
    if (seed) sh.cfg.seed = *seed;
    if (k) sh.cfg.detect.refine.k = *k;
    if (lambda) sh.cfg.detect.refine.loss.lambda = *lambda;
    if (lr) sh.cfg.detect.refine.adam.lr = *lr;
    if (full_scale) sh.cfg.fit.iterations = 30000;
    if (fit_iters) sh.cfg.fit.iterations = *fit_iters;
    if (!category.empty()) sh.cfg.category = category;
    if (width) sh.cfg.synth.width = *width;
    if (height) sh.cfg.synth.height = *height;
    if (train_views) sh.cfg.synth.n_train_views = *train_views;
    if (test_normal) sh.cfg.synth.n_test_normal = *test_normal;
    if (test_anomalous) sh.cfg.synth.n_test_anomalous = *test_anomalous;
    if (sparsity) sh.cfg.synth.sparsity = *sparsity;
    if (!view_mode.empty()) sh.cfg.synth.train_mode = sh.cfg.synth.test_mode = parse_view_mode(view_mode);
    if (!(view_fraction > 0.0)) throw Error(ErrorCode::Config, "--view-fraction must be > 0");
    sh.view_fraction = view_fraction;
    sh.cfg.finalize();
    set_num_threads(sh.cfg.threads);
    if (!dump_config.empty()) write_json(dump_config, to_json(sh.cfg));

    if (*synth) cmd_synth(sh, out);
    if (*fit) cmd_fit(sh, dataset, out);
    if (*refine) cmd_refine(sh, dataset, cloud, query_index, query_name, out);
    if (*detect) cmd_detect(sh, dataset, cloud, out, write_aligned);
    if (*eval) cmd_eval(sh, results_dirs, datasets, out);
    if (*ablate) cmd_ablate_k(sh, dataset, cloud, ks, out);
    if (*rend) cmd_render(sh, dataset, cloud, split, view_index, pose_json, out);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return kInternal;
  }
  return kOk;
}
