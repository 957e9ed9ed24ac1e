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
#include "slaug/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "binary_io.hpp"
#include "slaug/error.hpp"

namespace slaug {
namespace {

namespace fs = std::filesystem;

constexpr std::string_view kRasterMagic = "SLAUGIMG";
constexpr std::uint16_t kRasterVersion = 1;

double uniform_in(RandomStream& rng, double lo, double hi) { return rng.uniform(lo, hi); }

}  // namespace

// ---------------------------------------------------------------------------
// Raster
// ---------------------------------------------------------------------------

void write_raster(const Raster& raster, const fs::path& path) {
  const std::size_t count = static_cast<std::size_t>(raster.height) * raster.width * raster.channels;
  const std::size_t have = raster.dtype == RasterDType::kF32 ? raster.f32.size() : raster.u8.size();
  if (have != count) throw InvalidInput("write_raster: payload length does not match header");
  detail::ByteWriter w;
  w.bytes(kRasterMagic);
  w.u16(kRasterVersion);
  w.u32(raster.height);
  w.u32(raster.width);
  w.u16(raster.channels);
  w.u16(static_cast<std::uint16_t>(raster.dtype));
  if (raster.dtype == RasterDType::kF32) {
    for (float v : raster.f32) w.f32(v);
  } else {
    for (std::uint8_t v : raster.u8) w.u8(v);
  }
  w.write_file(path);
}

Raster read_raster(const fs::path& path) {
  auto r = detail::ByteReader::from_file(path);
  if (r.bytes(kRasterMagic.size(), "magic") != kRasterMagic) {
    throw FormatError(path.string() + ": bad raster magic", 0);
  }
  std::size_t at = r.offset();
  if (r.u16("version") != kRasterVersion) throw FormatError(path.string() + ": unsupported raster version", at);
  Raster out;
  out.height = r.u32("height");
  out.width = r.u32("width");
  out.channels = r.u16("channels");
  at = r.offset();
  const std::uint16_t tag = r.u16("dtype");
  if (tag != static_cast<std::uint16_t>(RasterDType::kF32) &&
      tag != static_cast<std::uint16_t>(RasterDType::kU8)) {
    throw FormatError(path.string() + ": unknown dtype tag " + std::to_string(tag), at);
  }
  out.dtype = static_cast<RasterDType>(tag);
  const std::size_t count = static_cast<std::size_t>(out.height) * out.width * out.channels;
  const std::size_t elem = out.dtype == RasterDType::kF32 ? 4 : 1;
  if (r.remaining() < count * elem) {
    throw FormatError(path.string() + ": truncated payload", r.offset() + r.remaining());
  }
  if (r.remaining() > count * elem) {
    throw FormatError(path.string() + ": trailing bytes after payload", r.offset() + count * elem);
  }
  if (out.dtype == RasterDType::kF32) {
    out.f32.resize(count);
    for (float& v : out.f32) v = r.f32("payload");
  } else {
    const char* p = r.raw(count, "payload");
    out.u8.assign(reinterpret_cast<const std::uint8_t*>(p), reinterpret_cast<const std::uint8_t*>(p) + count);
  }
  return out;
}

void write_raster(const ScalarGrid2D& grid, const fs::path& path) {
  Raster r;
  r.height = static_cast<std::uint32_t>(grid.height());
  r.width = static_cast<std::uint32_t>(grid.width());
  r.dtype = RasterDType::kF32;
  r.f32.assign(grid.values().begin(), grid.values().end());
  write_raster(r, path);
}

void write_raster(const LabelGrid2D& labels, const fs::path& path) {
  Raster r;
  r.height = static_cast<std::uint32_t>(labels.height());
  r.width = static_cast<std::uint32_t>(labels.width());
  r.dtype = RasterDType::kU8;
  r.u8.assign(labels.labels().begin(), labels.labels().end());
  write_raster(r, path);
}

ScalarGrid2D read_scalar_grid(const fs::path& path) {
  Raster r = read_raster(path);
  if (r.channels != 1) throw InvalidInput(path.string() + ": expected a single-channel raster");
  if (r.dtype == RasterDType::kF32) return ScalarGrid2D(r.height, r.width, std::move(r.f32));
  std::vector<float> v(r.u8.begin(), r.u8.end());
  return ScalarGrid2D(r.height, r.width, std::move(v));
}

LabelGrid2D read_label_grid(const fs::path& path, int num_classes) {
  Raster r = read_raster(path);
  if (r.channels != 1 || r.dtype != RasterDType::kU8) {
    throw InvalidInput(path.string() + ": labels must be a single-channel u8 raster");
  }
  if (num_classes <= 0) {
    const auto mx = r.u8.empty() ? 0 : *std::max_element(r.u8.begin(), r.u8.end());
    num_classes = std::max(2, mx + 1);
  }
  return LabelGrid2D(r.height, r.width, num_classes, std::move(r.u8));
}

// ---------------------------------------------------------------------------
// Dataset directory
// ---------------------------------------------------------------------------

std::vector<ManifestEntry> read_manifest(const fs::path& root) {
  const fs::path path = root / "manifest.tsv";
  std::ifstream in(path);
  if (!in) throw InvalidInput("missing manifest: " + path.string());
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() != 4) {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields");
    }
    if (fields[3] != "train" && fields[3] != "val" && fields[3] != "test") {
      throw InvalidInput(path.string() + ":" + std::to_string(line_no) + ": unknown split '" + fields[3] + "'");
    }
    entries.push_back({fields[0], fields[1], fields[2], fields[3]});
  }
  return entries;
}

void write_manifest(const fs::path& root, const std::vector<ManifestEntry>& entries) {
  std::ofstream out(root / "manifest.tsv", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write manifest in " + root.string());
  for (const ManifestEntry& e : entries) {
    out << e.id << '\t' << e.image_path << '\t' << e.label_path << '\t' << e.split << '\n';
  }
}

std::vector<DatasetItem> load_dataset(const fs::path& root, int num_classes) {
  if (!fs::is_directory(root)) throw InvalidInput("dataset directory not found: " + root.string());
  if (!fs::is_directory(root / "images")) throw InvalidInput("missing images/ in " + root.string());
  if (!fs::is_directory(root / "labels")) throw InvalidInput("missing labels/ in " + root.string());
  const std::vector<ManifestEntry> entries = read_manifest(root);

  std::vector<DatasetItem> items;
  std::vector<Raster> label_rasters;
  int max_label = 0;
  for (const ManifestEntry& e : entries) {
    const fs::path img = root / e.image_path;
    const fs::path lab = root / e.label_path;
    if (!fs::exists(img)) throw InvalidInput("missing image file: " + img.string());
    if (!fs::exists(lab)) throw InvalidInput("missing label file: " + lab.string());
    DatasetItem item;
    item.id = e.id;
    item.split = e.split;
    item.image = read_scalar_grid(img);
    label_rasters.push_back(read_raster(lab));
    const Raster& lr = label_rasters.back();
    if (lr.dtype != RasterDType::kU8 || lr.channels != 1) {
      throw InvalidInput(lab.string() + ": labels must be a single-channel u8 raster");
    }
    if (lr.height != item.image.height() || lr.width != item.image.width()) {
      throw InvalidInput("image and label dimensions differ for id " + e.id);
    }
    for (std::uint8_t v : lr.u8) max_label = std::max<int>(max_label, v);
    items.push_back(std::move(item));
  }
  const int classes = num_classes > 0 ? num_classes : std::max(2, max_label + 1);
  for (std::size_t i = 0; i < items.size(); ++i) {
    Raster& lr = label_rasters[i];
    items[i].labels = LabelGrid2D(lr.height, lr.width, classes, std::move(lr.u8));
  }
  return items;
}

void save_dataset(const fs::path& root, const std::vector<DatasetItem>& items) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "labels");
  std::vector<ManifestEntry> entries;
  for (const DatasetItem& item : items) {
    ManifestEntry e{item.id, "images/" + item.id + ".slimg", "labels/" + item.id + ".slimg", item.split};
    write_raster(item.image, root / e.image_path);
    write_raster(item.labels, root / e.label_path);
    entries.push_back(std::move(e));
  }
  write_manifest(root, entries);
}

// ---------------------------------------------------------------------------
// Phantoms
// ---------------------------------------------------------------------------

PhantomSpec PhantomSpec::abdominal() {
  PhantomSpec s;
  s.num_classes = 5;
  s.organ_bands = {{0.55, 0.62}, {0.66, 0.74}, {0.80, 0.90}, {0.12, 0.20}};
  s.organ_geometry = {
      // large, lateral
      {-0.30, 0.15, -0.55, -0.30, 0.14, 0.18, 0.10, 0.14},
      // medium round, opposite side
      {-0.30, 0.10, 0.35, 0.55, 0.07, 0.09, 0.07, 0.09},
      // flat, lower
      {0.35, 0.55, -0.25, 0.25, 0.035, 0.05, 0.10, 0.13},
      // small round, upper
      {-0.65, -0.45, -0.15, 0.20, 0.04, 0.055, 0.04, 0.055},
  };
  return s;
}

void PhantomSpec::validate() const {
  if (size < 16) throw InvalidConfig("phantom size must be >= 16");
  if (num_classes < 2) throw InvalidConfig("phantom needs at least two classes");
  const auto organs = static_cast<std::size_t>(num_classes - 1);
  if (organ_bands.size() != organs || organ_geometry.size() != organs) {
    throw InvalidConfig("phantom needs one band and one geometry per organ class");
  }
  auto band_ok = [](const IntensityBand& b) { return b.lo >= 0.0 && b.lo <= b.hi && b.hi <= 1.0; };
  if (!band_ok(body_band) || !std::all_of(organ_bands.begin(), organ_bands.end(), band_ok)) {
    throw InvalidConfig("intensity bands must lie within [0, 1]");
  }
  if (texture_std < 0.0 || texture_clip < 0.0) throw InvalidConfig("texture parameters must be >= 0");
  if (!(target_alpha.lo > 0.0 && target_alpha.lo <= target_alpha.hi) || target_beta.lo > target_beta.hi) {
    throw InvalidConfig("target shift ranges must be ordered with positive scale");
  }
}

IntensityBand PhantomSpec::band(int cls) const {
  return cls == 0 ? body_band : organ_bands.at(static_cast<std::size_t>(cls - 1));
}

Phantom generate_phantom(const PhantomSpec& spec, RandomStream& rng) {
  spec.validate();
  const std::size_t n = spec.size;
  const double size = static_cast<double>(n);
  RandomStream geo = rng.child("geometry");
  RandomStream tex = rng.child("texture");

  const double body_cr = size / 2.0 + uniform_in(geo, -0.03, 0.03) * size;
  const double body_cc = size / 2.0 + uniform_in(geo, -0.03, 0.03) * size;
  const double body_rr = uniform_in(geo, spec.body_radius_min, spec.body_radius_max) * size * 0.85;
  const double body_rc = uniform_in(geo, spec.body_radius_min, spec.body_radius_max) * size;

  auto inside = [](double r, double c, double cr, double cc, double rr, double rc) {
    const double dr = (r - cr) / rr, dc = (c - cc) / rc;
    return dr * dr + dc * dc <= 1.0;
  };

  std::vector<std::uint8_t> labels(n * n, 0);
  std::vector<bool> body(n * n, false);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      body[r * n + c] = inside(static_cast<double>(r) + 0.5, static_cast<double>(c) + 0.5, body_cr,
                               body_cc, body_rr, body_rc);
    }
  }

  constexpr int kLayoutRestarts = 20;
  int failed = 0;
  for (int layout = 0; layout < kLayoutRestarts; ++layout) {
    std::fill(labels.begin(), labels.end(), 0);
    failed = 0;
    for (int cls = 1; cls < spec.num_classes && failed == 0; ++cls) {
      const EllipseRange& g = spec.organ_geometry[static_cast<std::size_t>(cls - 1)];
      bool placed = false;
      for (int attempt = 0; attempt < spec.max_retries && !placed; ++attempt) {
        const double cr = body_cr + uniform_in(geo, g.center_row_min, g.center_row_max) * body_rr;
        const double cc = body_cc + uniform_in(geo, g.center_col_min, g.center_col_max) * body_rc;
        const double rr = std::max(1.5, uniform_in(geo, g.radius_row_min, g.radius_row_max) * size);
        const double rc = std::max(1.5, uniform_in(geo, g.radius_col_min, g.radius_col_max) * size);
        // One-pixel margin against the body edge and other organs.
        std::vector<std::size_t> pixels;
        bool ok = true;
        for (std::size_t r = 0; r < n && ok; ++r) {
          for (std::size_t c = 0; c < n && ok; ++c) {
            const double pr = static_cast<double>(r) + 0.5, pc = static_cast<double>(c) + 0.5;
            if (inside(pr, pc, cr, cc, rr + 1.0, rc + 1.0)) {
              if (!body[r * n + c] || labels[r * n + c] != 0) ok = false;
              if (inside(pr, pc, cr, cc, rr, rc)) pixels.push_back(r * n + c);
            }
          }
        }
        if (ok && !pixels.empty()) {
          for (std::size_t p : pixels) labels[p] = static_cast<std::uint8_t>(cls);
          placed = true;
        }
      }
      if (!placed) failed = cls;
    }
    if (failed == 0) break;
  }
  if (failed != 0) {
    throw GenerationError("could not place organ class " + std::to_string(failed) + " after " +
                          std::to_string(kLayoutRestarts) + " layouts of " +
                          std::to_string(spec.max_retries) + " attempts");
  }

  std::vector<double> level(static_cast<std::size_t>(spec.num_classes));
  for (int cls = 0; cls < spec.num_classes; ++cls) {
    const IntensityBand b = spec.band(cls);
    level[static_cast<std::size_t>(cls)] = uniform_in(geo, b.lo, b.hi);
  }
  std::vector<float> values(n * n, 0.0F);
  const double bound = spec.noise_bound();
  for (std::size_t i = 0; i < n * n; ++i) {
    if (!body[i]) continue;
    double noise = 0.0;
    if (spec.texture_std > 0.0) {
      do {
        noise = tex.normal(0.0, spec.texture_std);
      } while (std::abs(noise) > bound);
    }
    values[i] = static_cast<float>(level[labels[i]] + noise);
  }
  return {ScalarGrid2D(n, n, std::move(values)), LabelGrid2D(n, n, spec.num_classes, std::move(labels))};
}

DomainShift sample_domain_shift(const PhantomSpec& spec, RandomStream& rng) {
  DomainShift s;
  for (int c = 0; c < spec.num_classes; ++c) {
    s.alpha.push_back(rng.uniform(spec.target_alpha.lo, spec.target_alpha.hi));
    s.beta.push_back(rng.uniform(spec.target_beta.lo, spec.target_beta.hi));
  }
  return s;
}

ScalarGrid2D apply_domain_shift(const ScalarGrid2D& x, const LabelGrid2D& m, const DomainShift& shift) {
  if (!x.same_shape(m)) throw InvalidInput("shift_domain: image and label shapes differ");
  if (shift.alpha.size() < static_cast<std::size_t>(m.num_classes()) ||
      shift.beta.size() < static_cast<std::size_t>(m.num_classes())) {
    throw InvalidInput("shift_domain: need alpha and beta for every class");
  }
  ScalarGrid2D out = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] > 0.0F) out[i] = static_cast<float>(shift.alpha[m[i]] * x[i] + shift.beta[m[i]]);
  }
  return out;
}

ShiftResult shift_domain(const ScalarGrid2D& x, const LabelGrid2D& m, const PhantomSpec& spec,
                         RandomStream& rng) {
  if (!x.same_shape(m)) throw InvalidInput("shift_domain: image and label shapes differ");
  ShiftResult r;
  r.shift = sample_domain_shift(spec, rng);
  r.image = apply_domain_shift(x, m, r.shift);
  return r;
}

// ---------------------------------------------------------------------------
// Panels
// ---------------------------------------------------------------------------

void write_pgm(const GrayImage& image, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
}

GrayImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  if (magic != "P5" || maxval != 255 || !in) throw FormatError(path.string() + ": not an 8-bit P5 image", 0);
  in.get();
  GrayImage img{h, w, std::vector<std::uint8_t>(w * h)};
  in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
  if (in.gcount() != static_cast<std::streamsize>(img.pixels.size())) {
    throw FormatError(path.string() + ": truncated pixel data", static_cast<std::size_t>(in.gcount()));
  }
  return img;
}

GrayImage make_panel(const std::vector<std::pair<std::string, ScalarGrid2D>>& images) {
  if (images.empty()) throw InvalidInput("export_panel: no images");
  const std::size_t h = images.front().second.height();
  std::size_t total_w = 0;
  for (const auto& [name, g] : images) {
    if (g.height() != h) throw InvalidInput("export_panel: '" + name + "' has a different height");
    total_w += g.width();
  }
  total_w += kPanelSeparator * (images.size() - 1);
  GrayImage panel{h, total_w, std::vector<std::uint8_t>(h * total_w, 255)};
  std::size_t x0 = 0;
  for (const auto& [name, g] : images) {
    const auto [lo_it, hi_it] = std::minmax_element(g.values().begin(), g.values().end());
    const double lo = g.empty() ? 0.0 : *lo_it;
    const double range = g.empty() ? 0.0 : static_cast<double>(*hi_it) - lo;
    for (std::size_t r = 0; r < h; ++r) {
      for (std::size_t c = 0; c < g.width(); ++c) {
        const double v = range > 0.0 ? std::round(255.0 * (g(r, c) - lo) / range) : 128.0;
        panel.pixels[r * total_w + x0 + c] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
    x0 += g.width() + kPanelSeparator;
  }
  return panel;
}

void export_panel(const std::vector<std::pair<std::string, ScalarGrid2D>>& images, const fs::path& path) {
  write_pgm(make_panel(images), path);
}

}  // namespace slaug
