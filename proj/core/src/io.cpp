#include "gspose/io.hpp"

#include <png.h>

#include <Eigen/SVD>
#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "gspose/error.hpp"
#include "gspose/se3.hpp"

namespace gspose {

using nlohmann::json;

namespace {

constexpr double kShC0 = 0.28209479177387814;

double srgb_to_linear(double v) { return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4); }
double linear_to_srgb(double v) { return v <= 0.0031308 ? 12.92 * v : 1.055 * std::pow(v, 1.0 / 2.4) - 0.055; }

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

std::vector<std::uint8_t> read_png_raw(const fs::path& path, std::uint32_t format, int& w, int& h) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw Error(ErrorCode::Io, "cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = format;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::Io, "cannot decode PNG " + path.string() + ": " + image.message);
  }
  w = static_cast<int>(image.width);
  h = static_cast<int>(image.height);
  return buf;
}

void write_png_raw(const fs::path& path, std::uint32_t format, int w, int h, const void* data) {
  ensure_parent(path);
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = format;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, data, 0, nullptr)) {
    throw Error(ErrorCode::Io, "cannot write PNG " + path.string() + ": " + image.message);
  }
}

template <typename T>
void put(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little, "little-endian host expected");
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!is) throw Error(ErrorCode::Parse, "unexpected end of binary data");
  return v;
}

struct PlyProperty {
  std::string name;
  std::string type;
};

struct PlyHeader {
  std::size_t count = 0;
  std::vector<PlyProperty> props;
};

std::size_t type_size(const std::string& t) {
  if (t == "float" || t == "float32" || t == "int" || t == "int32" || t == "uint" || t == "uint32") return 4;
  if (t == "double" || t == "float64") return 8;
  if (t == "uchar" || t == "uint8" || t == "char" || t == "int8") return 1;
  if (t == "short" || t == "int16" || t == "ushort" || t == "uint16") return 2;
  throw Error(ErrorCode::Parse, "unsupported PLY property type '" + t + "'");
}

double read_typed(const char* p, const std::string& t) {
  auto load = [p]<typename T>(T) {
    T v;
    std::memcpy(&v, p, sizeof v);
    return static_cast<double>(v);
  };
  if (t == "float" || t == "float32") return load(float{});
  if (t == "double" || t == "float64") return load(double{});
  if (t == "uchar" || t == "uint8") return load(std::uint8_t{});
  if (t == "char" || t == "int8") return load(std::int8_t{});
  if (t == "short" || t == "int16") return load(std::int16_t{});
  if (t == "ushort" || t == "uint16") return load(std::uint16_t{});
  if (t == "int" || t == "int32") return load(std::int32_t{});
  if (t == "uint" || t == "uint32") return load(std::uint32_t{});
  throw Error(ErrorCode::Parse, "unsupported PLY property type '" + t + "'");
}

PlyHeader read_ply_header(std::istream& is, const fs::path& path) {
  std::string line;
  std::getline(is, line);
  if (line != "ply") throw Error(ErrorCode::Parse, path.string() + " is not a PLY file");
  PlyHeader h;
  bool in_vertex = false, binary_le = false;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string kw;
    ls >> kw;
    if (kw == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (kw == "element") {
      std::string name;
      std::size_t n = 0;
      ls >> name >> n;
      in_vertex = name == "vertex";
      if (in_vertex) h.count = n;
      else if (n > 0) throw Error(ErrorCode::Parse, "PLY element '" + name + "' is not supported");
    } else if (kw == "property") {
      std::string type, name;
      ls >> type;
      if (type == "list") throw Error(ErrorCode::Parse, "PLY list properties are not supported");
      ls >> name;
      if (in_vertex) h.props.push_back({name, type});
    } else if (kw == "end_header") {
      if (!binary_le) throw Error(ErrorCode::Parse, "only binary_little_endian PLY is supported");
      return h;
    }
  }
  throw Error(ErrorCode::Parse, "PLY header of " + path.string() + " is truncated");
}

// Rows of named columns from the vertex element.
std::vector<std::vector<double>> read_ply_columns(const fs::path& path, const std::vector<std::string>& names) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  const PlyHeader h = read_ply_header(is, path);
  std::vector<int> col(names.size(), -1);
  std::vector<std::size_t> offset(h.props.size());
  std::size_t stride = 0;
  for (std::size_t p = 0; p < h.props.size(); ++p) {
    offset[p] = stride;
    stride += type_size(h.props[p].type);
    for (std::size_t n = 0; n < names.size(); ++n)
      if (h.props[p].name == names[n]) col[n] = static_cast<int>(p);
  }
  for (std::size_t n = 0; n < names.size(); ++n) {
    if (col[n] < 0) throw Error(ErrorCode::Parse, path.string() + " lacks property '" + names[n] + "'");
  }
  std::vector<char> row(stride);
  std::vector<std::vector<double>> out(h.count, std::vector<double>(names.size()));
  for (std::size_t i = 0; i < h.count; ++i) {
    is.read(row.data(), static_cast<std::streamsize>(stride));
    if (!is) throw Error(ErrorCode::Parse, path.string() + " ends before its vertex data");
    for (std::size_t n = 0; n < names.size(); ++n) {
      out[i][n] = read_typed(row.data() + offset[col[n]], h.props[col[n]].type);
    }
  }
  return out;
}

json mat_to_json(const Mat4& m) {
  json rows = json::array();
  for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
  return rows;
}

Mat4 mat_from_json(const json& j) {
  Mat4 m;
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) m(r, c) = j.at(r).at(c).get<double>();
  return m;
}

json camera_frame(const Camera& cam, const std::string& file) {
  return {{"file_path", file}, {"transform_matrix", mat_to_json(camera_to_world_gl(cam))}};
}

const Mat4& gl_flip() {
  static const Mat4 f = Vec4(1, -1, -1, 1).asDiagonal();
  return f;
}

}  // namespace

ImageBuffer read_png(const fs::path& path, bool srgb) {
  int w = 0, h = 0;
  const auto raw = read_png_raw(path, PNG_FORMAT_RGB, w, h);
  ImageBuffer img(w, h, 3);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = raw[i] / 255.0;
    img.data[i] = srgb ? srgb_to_linear(v) : v;
  }
  return img;
}

void write_png(const fs::path& path, const ImageBuffer& img, bool srgb) {
  if (img.channels != 3) throw Error(ErrorCode::InvalidArgument, "write_png expects RGB");
  std::vector<std::uint8_t> raw(img.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double v = std::clamp(img.data[i], 0.0, 1.0);
    raw[i] = to_byte(srgb ? linear_to_srgb(v) : v);
  }
  write_png_raw(path, PNG_FORMAT_RGB, img.width, img.height, raw.data());
}

void write_mask_png(const fs::path& path, const BinaryMask& mask) {
  std::vector<std::uint8_t> raw(mask.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = mask.data[i] ? 255 : 0;
  write_png_raw(path, PNG_FORMAT_GRAY, mask.width, mask.height, raw.data());
}

BinaryMask read_mask_png(const fs::path& path) {
  int w = 0, h = 0;
  const auto raw = read_png_raw(path, PNG_FORMAT_GRAY, w, h);
  BinaryMask m(w, h);
  for (std::size_t i = 0; i < raw.size(); ++i) m.data[i] = raw[i] >= 128 ? 1 : 0;
  return m;
}

void write_score_png16(const fs::path& path, const ScalarMap& map) {
  if (map.empty()) throw Error(ErrorCode::EmptyMap, "cannot export an empty map");
  const auto [lo_it, hi_it] = std::minmax_element(map.data.begin(), map.data.end());
  const double lo = *lo_it, hi = *hi_it;
  const double range = hi > lo ? hi - lo : 1.0;
  std::vector<std::uint16_t> raw(map.data.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    raw[i] = static_cast<std::uint16_t>(std::lround((map.data[i] - lo) / range * 65535.0));
  }
  write_png_raw(path, PNG_FORMAT_LINEAR_Y, map.width, map.height, raw.data());
  json side = {{"min", lo}, {"max", hi}, {"width", map.width}, {"height", map.height}, {"bits", 16}};
  write_text(fs::path(path.string() + ".json"), side.dump(2) + "\n");
}

ScalarMap read_score_png16(const fs::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw Error(ErrorCode::Io, "cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_LINEAR_Y;
  std::vector<std::uint16_t> raw(PNG_IMAGE_SIZE(image) / 2);
  if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error(ErrorCode::Io, "cannot decode PNG " + path.string());
  }
  const json side = json::parse(read_text(fs::path(path.string() + ".json")));
  const double lo = side.at("min").get<double>(), hi = side.at("max").get<double>();
  const double range = hi > lo ? hi - lo : 1.0;
  ScalarMap m(static_cast<int>(image.width), static_cast<int>(image.height));
  for (std::size_t i = 0; i < raw.size(); ++i) m.data[i] = lo + raw[i] / 65535.0 * range;
  return m;
}

void write_score_map(const fs::path& path, const ScalarMap& map) {
  ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os.write("SMAP", 4);
  put<std::uint32_t>(os, 1);
  put<std::uint32_t>(os, static_cast<std::uint32_t>(map.height));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(map.width));
  for (double v : map.data) put<float>(os, static_cast<float>(v));
  if (!os) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

ScalarMap read_score_map(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "SMAP", 4) != 0) throw Error(ErrorCode::Parse, path.string() + " is not a score map");
  const auto version = get<std::uint32_t>(is);
  if (version != 1) throw Error(ErrorCode::Parse, "unsupported score map version " + std::to_string(version));
  const auto h = get<std::uint32_t>(is);
  const auto w = get<std::uint32_t>(is);
  ScalarMap m(static_cast<int>(w), static_cast<int>(h));
  for (double& v : m.data) v = get<float>(is);
  return m;
}

void write_ply(const fs::path& path, const GaussianCloud& cloud) {
  ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size() << "\n";
  for (const char* n : {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0",
                        "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"}) {
    os << "property float " << n << "\n";
  }
  os << "end_header\n";
  for (const auto& g : cloud.splats) {
    for (int k = 0; k < 3; ++k) put<float>(os, static_cast<float>(g.mean[k]));
    for (int k = 0; k < 3; ++k) put<float>(os, 0.0f);
    for (int k = 0; k < 3; ++k) put<float>(os, static_cast<float>((g.color[k] - 0.5) / kShC0));
    put<float>(os, static_cast<float>(g.opacity_logit));
    for (int k = 0; k < 3; ++k) put<float>(os, static_cast<float>(g.log_scale[k]));
    for (int k = 0; k < 4; ++k) put<float>(os, static_cast<float>(g.rotation[k]));
  }
  if (!os) throw Error(ErrorCode::Io, "failed writing " + path.string());
}

GaussianCloud read_ply(const fs::path& path) {
  const auto rows = read_ply_columns(path, {"x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2", "opacity", "scale_0",
                                            "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3"});
  GaussianCloud cloud;
  cloud.splats.reserve(rows.size());
  for (const auto& r : rows) {
    Gaussian3D g;
    g.mean = Vec3(r[0], r[1], r[2]);
    g.color = Vec3(r[3], r[4], r[5]) * kShC0 + Vec3::Constant(0.5);
    g.opacity_logit = r[6];
    g.log_scale = Vec3(r[7], r[8], r[9]);
    Quat q(r[10], r[11], r[12], r[13]);
    if (q.norm() < 1e-12) throw Error(ErrorCode::Parse, "zero quaternion in " + path.string());
    g.rotation = normalized(q);
    cloud.splats.push_back(g);
  }
  if (!cloud.empty()) cloud.recompute_radius();
  return cloud;
}

void write_points_ply(const fs::path& path, const std::vector<Vec3>& points, const std::vector<Vec3>& colors) {
  if (points.size() != colors.size()) throw Error(ErrorCode::ShapeMismatch, "point and color counts differ");
  ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os << "ply\nformat binary_little_endian 1.0\nelement vertex " << points.size()
     << "\nproperty float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (int k = 0; k < 3; ++k) put<float>(os, static_cast<float>(points[i][k]));
    for (int k = 0; k < 3; ++k) put<std::uint8_t>(os, to_byte(colors[i][k]));
  }
}

void read_points_ply(const fs::path& path, std::vector<Vec3>& points, std::vector<Vec3>& colors) {
  const auto rows = read_ply_columns(path, {"x", "y", "z", "red", "green", "blue"});
  points.clear();
  colors.clear();
  for (const auto& r : rows) {
    points.emplace_back(r[0], r[1], r[2]);
    colors.emplace_back(r[3] / 255.0, r[4] / 255.0, r[5] / 255.0);
  }
}

Mat4 camera_to_world_gl(const Camera& cam) { return rigid_inverse(cam.world_to_camera()) * gl_flip(); }

Camera camera_from_gl(const Mat4& c2w, int width, int height, double fx, double fy, double cx, double cy) {
  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = fx;
  cam.fy = fy;
  cam.cx = cx;
  cam.cy = cy;
  const Mat4 w2c = rigid_inverse(c2w * gl_flip());
  // Re-orthonormalize what came through text.
  Eigen::JacobiSVD<Mat3> svd(w2c.topLeftCorner<3, 3>(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat4 clean = w2c;
  clean.topLeftCorner<3, 3>() = svd.matrixU() * svd.matrixV().transpose();
  cam.set_world_to_camera(clean);
  return cam;
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  ensure_parent(path);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorCode::Io, "cannot write " + path.string());
  os << text;
}

void write_dataset(const fs::path& dir, const SynthScene& scene, const SynthConfig& cfg, const std::string& category) {
  fs::create_directories(dir);
  auto header = [&](const Camera& cam) {
    return json{{"camera_angle_x", 2.0 * std::atan(0.5 * cam.width / cam.fx)},
                {"fl_x", cam.fx},
                {"fl_y", cam.fy},
                {"cx", cam.cx},
                {"cy", cam.cy},
                {"w", cam.width},
                {"h", cam.height},
                {"frames", json::array()}};
  };
  if (scene.train.empty()) throw Error(ErrorCode::NoViews, "scene has no training views");
  json train = header(scene.train.front().camera);
  char name[64];
  for (std::size_t i = 0; i < scene.train.size(); ++i) {
    std::snprintf(name, sizeof name, "train/r_%04zu", i);
    write_png(dir / (std::string(name) + ".png"), scene.train[i].image);
    train["frames"].push_back(camera_frame(scene.train[i].camera, std::string("./") + name));
  }
  write_text(dir / "transforms_train.json", train.dump(2) + "\n");

  const Camera& ref = !scene.test_normal.empty() ? scene.test_normal.front().view.camera
                                                 : scene.test_anomalous.front().view.camera;
  json test = header(ref);
  json anomalies = json::array();
  auto emit = [&](const TestView& tv, const std::string& stem) {
    write_png(dir / (stem + ".png"), tv.view.image);
    write_mask_png(dir / (stem + "_mask.png"), tv.mask);
    json f = camera_frame(tv.view.camera, "./" + stem);
    f["anomalous"] = tv.anomalous;
    f["mask_path"] = "./" + stem + "_mask.png";
    test["frames"].push_back(f);
    if (tv.anomalous) {
      anomalies.push_back({{"file_path", "./" + stem},
                           {"kind", to_string(tv.kind)},
                           {"seed_splat", tv.seed_splat},
                           {"cluster_size", tv.cluster_size},
                           {"strength", tv.strength},
                           {"mask_pixels", tv.mask.count()}});
    }
  };
  for (std::size_t i = 0; i < scene.test_normal.size(); ++i) {
    std::snprintf(name, sizeof name, "test/good_%04zu", i);
    emit(scene.test_normal[i], name);
  }
  for (std::size_t i = 0; i < scene.test_anomalous.size(); ++i) {
    std::snprintf(name, sizeof name, "test/anomaly_%04zu", i);
    emit(scene.test_anomalous[i], name);
  }
  write_text(dir / "transforms_test.json", test.dump(2) + "\n");

  json meta = {{"category", category},
               {"seed", cfg.seed},
               {"object_radius", cfg.object_radius},
               {"scene_radius", scene.cloud_gt.scene_radius},
               {"background", {cfg.background.x(), cfg.background.y(), cfg.background.z()}},
               {"train_mode", to_string(cfg.train_mode)},
               {"test_mode", to_string(cfg.test_mode)},
               {"n_train_views", cfg.n_train_views},
               {"sparsity", cfg.sparsity},
               {"splats", scene.cloud_gt.size()},
               {"anomalies", anomalies}};
  write_text(dir / "meta.json", meta.dump(2) + "\n");
  write_ply(dir / "gt.ply", scene.cloud_gt);
  if (!scene.init_points.empty()) write_points_ply(dir / "points3d.ply", scene.init_points, scene.init_colors);
}

Dataset read_dataset(const fs::path& dir) {
  Dataset ds;
  ds.root = dir;
  json meta;
  try {
    meta = json::parse(read_text(dir / "meta.json"));
    ds.category = meta.value("category", dir.filename().string());
    ds.object_radius = meta.value("object_radius", 1.0);
    if (meta.contains("background")) {
      const auto& b = meta["background"];
      ds.render.background = Vec3(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>());
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, "meta.json: " + std::string(e.what()));
  }

  auto load = [&](const std::string& file, auto&& on_frame) {
    json j;
    try {
      j = json::parse(read_text(dir / file));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Parse, file + ": " + e.what());
    }
    try {
      for (const auto& f : j.at("frames")) {
        std::string stem = f.at("file_path").get<std::string>();
        const fs::path img_path = dir / (stem.ends_with(".png") ? stem : stem + ".png");
        ImageBuffer img = read_png(img_path);
        const int w = j.value("w", img.width), h = j.value("h", img.height);
        if (w != img.width || h != img.height) throw Error(ErrorCode::ShapeMismatch, img_path.string() + " size");
        double fx, fy, cx, cy;
        if (j.contains("fl_x")) {
          fx = j.at("fl_x").get<double>();
          fy = j.value("fl_y", fx);
          cx = j.value("cx", 0.5 * w);
          cy = j.value("cy", 0.5 * h);
        } else {
          fx = fy = 0.5 * w / std::tan(0.5 * j.at("camera_angle_x").get<double>());
          cx = 0.5 * w;
          cy = 0.5 * h;
        }
        Camera cam = camera_from_gl(mat_from_json(f.at("transform_matrix")), w, h, fx, fy, cx, cy);
        on_frame(f, View{std::move(img), cam}, stem);
      }
    } catch (const json::exception& e) {
      throw Error(ErrorCode::Parse, file + ": " + e.what());
    }
  };
  load("transforms_train.json", [&](const json&, View v, const std::string&) { ds.train.push_back(std::move(v)); });
  load("transforms_test.json", [&](const json& f, View v, const std::string& stem) {
    TestView tv;
    tv.anomalous = f.value("anomalous", false);
    if (f.contains("mask_path")) {
      tv.mask = read_mask_png(dir / f["mask_path"].get<std::string>());
    } else {
      tv.mask = BinaryMask(v.image.width, v.image.height);
    }
    tv.view = std::move(v);
    ds.test.push_back(std::move(tv));
    ds.test_names.push_back(fs::path(stem).filename().string());
  });
  return ds;
}

}  // namespace gspose
