/*
 * Copyright 2026 The slaug Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "slaug/grid.hpp"
#include "slaug/random.hpp"

namespace slaug {

// ---------------------------------------------------------------------------
// Raster container
//
//   offset  size  field
//   0       8     magic "SLAUGIMG"
//   8       2     format version (1)
//   10      4     height
//   14      4     width
//   18      2     channels
//   20      2     dtype tag (1 = f32, 2 = u8)
//   22      ...   payload, row-major, channel-interleaved, little-endian
// ---------------------------------------------------------------------------

enum class RasterDType : std::uint16_t { kF32 = 1, kU8 = 2 };

struct Raster {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint16_t channels = 1;
  RasterDType dtype = RasterDType::kF32;
  std::vector<float> f32;         ///< payload when dtype == kF32
  std::vector<std::uint8_t> u8;   ///< payload when dtype == kU8
};

void write_raster(const Raster& raster, const std::filesystem::path& path);
/// Throws FormatError (with byte offset) on bad magic, version, dtype or a truncated payload.
Raster read_raster(const std::filesystem::path& path);

void write_raster(const ScalarGrid2D& grid, const std::filesystem::path& path);
void write_raster(const LabelGrid2D& labels, const std::filesystem::path& path);
ScalarGrid2D read_scalar_grid(const std::filesystem::path& path);
/// num_classes <= 0 infers max label + 1.
LabelGrid2D read_label_grid(const std::filesystem::path& path, int num_classes = 0);

// ---------------------------------------------------------------------------
// Dataset directory: root/manifest.tsv with lines id<TAB>image<TAB>label<TAB>split,
// paths relative to root, split in {train, val, test}. '#' lines are comments.
// ---------------------------------------------------------------------------

struct ManifestEntry {
  std::string id;
  std::string image_path;
  std::string label_path;
  std::string split;
};

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& root);
void write_manifest(const std::filesystem::path& root, const std::vector<ManifestEntry>& entries);

struct DatasetItem {
  std::string id;
  std::string split;
  ScalarGrid2D image;
  LabelGrid2D labels;
};

/**
 * Loads every manifest entry. Throws InvalidInput if the directory, the
 * manifest, or a referenced file is missing, or if image and label shapes
 * differ. num_classes <= 0 infers it from the largest label in the set.
 */
std::vector<DatasetItem> load_dataset(const std::filesystem::path& root, int num_classes = 0);

/// Writes images/<id>.slimg, labels/<id>.slimg and the manifest.
void save_dataset(const std::filesystem::path& root, const std::vector<DatasetItem>& items);

// ---------------------------------------------------------------------------
// Phantoms
// ---------------------------------------------------------------------------

struct EllipseRange {
  double center_row_min = 0.0, center_row_max = 0.0;  ///< fractions of the body box
  double center_col_min = 0.0, center_col_max = 0.0;
  double radius_row_min = 0.0, radius_row_max = 0.0;  ///< fractions of the image size
  double radius_col_min = 0.0, radius_col_max = 0.0;
};

struct IntensityBand {
  double lo = 0.0;
  double hi = 0.0;
};

/**
 * @brief Synthetic abdomen-like slice generator.
 *
 * Class 0 is background: air outside a body ellipse, tissue inside it. Classes
 * 1..C-1 are organ ellipses placed inside the body without overlap. Each class
 * gets one mean intensity per image, drawn from its band, plus truncated
 * Gaussian texture.
 */
struct PhantomSpec {
  std::size_t size = 96;
  int num_classes = 5;
  IntensityBand body_band{0.30, 0.40};
  std::vector<IntensityBand> organ_bands;      ///< classes 1..C-1
  std::vector<EllipseRange> organ_geometry;    ///< classes 1..C-1
  double body_radius_min = 0.36, body_radius_max = 0.46;  ///< fractions of size
  double texture_std = 0.02;
  double texture_clip = 2.0;                   ///< texture truncated at +-clip * std
  int max_retries = 200;                       ///< placement attempts per organ within one layout
  IntensityBand target_alpha{0.6, 1.4};        ///< class-level scale of the shifted domain
  IntensityBand target_beta{0.0, 0.5};         ///< class-level shift of the shifted domain

  /// Defaults for C = 5: four organs with distinct sizes and band ordering.
  static PhantomSpec abdominal();
  void validate() const;
  double noise_bound() const { return texture_std * texture_clip; }
  IntensityBand band(int cls) const;
};

struct Phantom {
  ScalarGrid2D image;
  LabelGrid2D labels;
};

/// Throws GenerationError if no layout places every organ within max_retries attempts each.
Phantom generate_phantom(const PhantomSpec& spec, RandomStream& rng);

/// Class-level location-scale shift: class c body pixels become alpha[c] * x + beta[c].
struct DomainShift {
  std::vector<double> alpha;
  std::vector<double> beta;
};

/// Draws alpha^c ~ U(target_alpha), beta^c ~ U(target_beta) for every class.
DomainShift sample_domain_shift(const PhantomSpec& spec, RandomStream& rng);

/// Applies a recorded shift to foreground (x > 0) pixels. Throws InvalidInput on shape mismatch.
ScalarGrid2D apply_domain_shift(const ScalarGrid2D& x, const LabelGrid2D& m, const DomainShift& shift);

struct ShiftResult {
  ScalarGrid2D image;
  DomainShift shift;
};

ShiftResult shift_domain(const ScalarGrid2D& x, const LabelGrid2D& m, const PhantomSpec& spec,
                         RandomStream& rng);

// ---------------------------------------------------------------------------
// Panels
// ---------------------------------------------------------------------------

/// Binary PGM (P5), 8-bit.
struct GrayImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> pixels;
};

void write_pgm(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_pgm(const std::filesystem::path& path);

inline constexpr std::size_t kPanelSeparator = 2;

/**
 * Each grid is independently min-max scaled to 0..255 (constant grids render
 * as 128) and the grids are laid out left to right with 2-pixel white
 * separators. Throws InvalidInput if heights differ or the list is empty.
 */
GrayImage make_panel(const std::vector<std::pair<std::string, ScalarGrid2D>>& images);
void export_panel(const std::vector<std::pair<std::string, ScalarGrid2D>>& images,
                  const std::filesystem::path& path);

}  // namespace slaug
