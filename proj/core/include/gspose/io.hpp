#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gspose/fit.hpp"
#include "gspose/image.hpp"
#include "gspose/scene.hpp"
#include "gspose/synth.hpp"

namespace gspose {

namespace fs = std::filesystem;

/// 8-bit RGB PNG. `srgb` converts between sRGB-encoded files and linear
/// buffers; by default values are taken as linear.
ImageBuffer read_png(const fs::path& path, bool srgb = false);
void write_png(const fs::path& path, const ImageBuffer& img, bool srgb = false);

void write_mask_png(const fs::path& path, const BinaryMask& mask);
BinaryMask read_mask_png(const fs::path& path);

/// Min-max normalized 16-bit grayscale PNG plus a JSON sidecar
/// (`<path>.json`) holding the range needed to undo the normalization.
void write_score_png16(const fs::path& path, const ScalarMap& map);
/// Reads the PNG and its sidecar back into score units.
ScalarMap read_score_png16(const fs::path& path);

/// Raw map container: "SMAP", uint32 version, uint32 height, uint32 width,
/// then height*width little-endian float32 values, row-major.
void write_score_map(const fs::path& path, const ScalarMap& map);
ScalarMap read_score_map(const fs::path& path);

/// Binary little-endian PLY in the common splatting layout: x y z nx ny nz
/// f_dc_0..2 opacity scale_0..2 rot_0..3 (float32).
void write_ply(const fs::path& path, const GaussianCloud& cloud);
GaussianCloud read_ply(const fs::path& path);

/// Colored point set: x y z (float32) red green blue (uint8).
void write_points_ply(const fs::path& path, const std::vector<Vec3>& points, const std::vector<Vec3>& colors);
void read_points_ply(const fs::path& path, std::vector<Vec3>& points, std::vector<Vec3>& colors);

/// A dataset directory as written by write_dataset.
struct Dataset {
  fs::path root;
  std::vector<View> train;
  std::vector<TestView> test;  // normal and anomalous, in file order
  std::vector<std::string> test_names;
  RenderConfig render;
  double object_radius = 1.0;
  std::string category;
};

/// transforms_train.json / transforms_test.json in the NeRF synthetic
/// convention (OpenGL camera-to-world matrices), PNG images and masks,
/// meta.json, gt.ply and points3d.ply.
void write_dataset(const fs::path& dir, const SynthScene& scene, const SynthConfig& cfg,
                   const std::string& category = "synthetic");
Dataset read_dataset(const fs::path& dir);

/// Camera-to-world in OpenGL axes (y up, z backwards) and back.
Mat4 camera_to_world_gl(const Camera& cam);
Camera camera_from_gl(const Mat4& c2w, int width, int height, double fx, double fy, double cx, double cy);

std::string read_text(const fs::path& path);
void write_text(const fs::path& path, const std::string& text);

}  // namespace gspose
