#include "l2g/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "l2g/error.hpp"
#include "l2g/parallel.hpp"
#include "l2g/pnm.hpp"

namespace l2g {

namespace {

constexpr std::array<std::array<double, 3>, kMaxClasses> kBaseColors = {{
    {0.85, 0.25, 0.20},  // disk
    {0.20, 0.75, 0.30},  // square
    {0.20, 0.35, 0.85},  // triangle
    {0.85, 0.80, 0.20},  // cross
    {0.75, 0.25, 0.80},  // ring
}};

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

double gaussian(Rng& rng) {
  // Box-Muller; one draw per call keeps the stream layout simple.
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Smooth value noise in [0, 1] over a canvas, lattice of cells+1 points.
std::vector<double> value_noise(int canvas, int cells, Rng& rng) {
  const int n = cells + 1;
  std::vector<double> lattice(static_cast<std::size_t>(n) * n);
  for (auto& v : lattice) v = rng.uniform();
  std::vector<double> out(static_cast<std::size_t>(canvas) * canvas);
  for (int y = 0; y < canvas; ++y) {
    const double fy = (y + 0.5) / canvas * cells;
    const int iy = std::min(static_cast<int>(fy), cells - 1);
    const double ty = smoothstep(fy - iy);
    for (int x = 0; x < canvas; ++x) {
      const double fx = (x + 0.5) / canvas * cells;
      const int ix = std::min(static_cast<int>(fx), cells - 1);
      const double tx = smoothstep(fx - ix);
      const double a = lattice[iy * n + ix], b = lattice[iy * n + ix + 1];
      const double c = lattice[(iy + 1) * n + ix], d = lattice[(iy + 1) * n + ix + 1];
      out[static_cast<std::size_t>(y) * canvas + x] =
          (a + (b - a) * tx) + ((c + (d - c) * tx) - (a + (b - a) * tx)) * ty;
    }
  }
  return out;
}

// Signed inside test in the shape's rotated frame; R = size / 2.
bool inside_shape(int cls, double u, double v, double R) {
  switch (cls) {
    case 0:  // disk
      return u * u + v * v <= R * R;
    case 1: {  // square
      const double h = 0.75 * R;
      return std::abs(u) <= h && std::abs(v) <= h;
    }
    case 2: {  // equilateral triangle, circumradius R
      for (int k = 0; k < 3; ++k) {
        const double a = std::numbers::pi / 2 + k * 2 * std::numbers::pi / 3;
        if (u * std::cos(a) + v * std::sin(a) > R / 2) return false;
      }
      return true;
    }
    case 3: {  // cross, bar half-width R/3
      const double w = R / 3;
      return (std::abs(u) <= R && std::abs(v) <= w) ||
             (std::abs(v) <= R && std::abs(u) <= w);
    }
    case 4: {  // ring
      const double r2 = u * u + v * v;
      return r2 <= R * R && r2 >= 0.25 * R * R;
    }
    default:
      return false;
  }
}

// Foreground union grown (radius > 0) or shrunk (radius < 0) with a disk
// structuring element.
std::vector<std::uint8_t> morph(const std::vector<std::uint8_t>& fg, int w, int h,
                                int radius) {
  if (radius == 0) return fg;
  const int r = std::abs(radius);
  const bool dilate = radius > 0;
  std::vector<std::uint8_t> out(fg.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      bool hit = !dilate;
      for (int dy = -r; dy <= r && hit != dilate; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          const int yy = y + dy, xx = x + dx;
          const bool v = (yy >= 0 && yy < h && xx >= 0 && xx < w) &&
                         fg[static_cast<std::size_t>(yy) * w + xx];
          if (dilate && v) {
            hit = true;
            break;
          }
          if (!dilate && !v) {
            hit = false;
            break;
          }
        }
      out[static_cast<std::size_t>(y) * w + x] = hit ? 1 : 0;
    }
  return out;
}

std::string sample_name(std::uint64_t id) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << id;
  return os.str();
}

}  // namespace

void GenConfig::validate() const {
  std::vector<std::string> errs;
  if (canvas < 8) errs.push_back("canvas must be >= 8");
  if (num_classes < 1 || num_classes > kMaxClasses)
    errs.push_back("num_classes must be in [1, " + std::to_string(kMaxClasses) + "]");
  if (min_shapes < 1 || max_shapes < min_shapes)
    errs.push_back("shape count range must satisfy 1 <= min_shapes <= max_shapes");
  if (min_size < 4 || max_size < min_size)
    errs.push_back("size range must satisfy 4 <= min_size <= max_size");
  if (canvas < min_size)
    errs.push_back("canvas " + std::to_string(canvas) +
                   " smaller than minimum shape size " + std::to_string(min_size));
  if (max_size > canvas)
    errs.push_back("max_size " + std::to_string(max_size) + " exceeds canvas");
  if (!(center_spread > 0 && center_spread <= 1))
    errs.push_back("center_spread must be in (0, 1]");
  if (noise_cells < 1) errs.push_back("noise_cells must be >= 1");
  if (!(bg_lo >= 0 && bg_hi <= 1 && bg_lo <= bg_hi))
    errs.push_back("background range must satisfy 0 <= bg_lo <= bg_hi <= 1");
  if (bg_chroma < 0 || bg_chroma > 1) errs.push_back("bg_chroma must be in [0, 1]");
  if (pixel_noise < 0) errs.push_back("pixel_noise must be >= 0");
  if (color_jitter < 0 || color_jitter > 1) errs.push_back("color_jitter must be in [0, 1]");
  if (core_fraction < 0 || core_fraction > 1) errs.push_back("core_fraction must be in [0, 1]");
  if (core_jitter < 0 || core_jitter > 1) errs.push_back("core_jitter must be in [0, 1]");
  if (core_offset < 0 || core_offset > 1) errs.push_back("core_offset must be in [0, 1]");
  if (rim_contrast < 0 || rim_contrast > 1) errs.push_back("rim_contrast must be in [0, 1]");
  if (sal_morph_radius < 0) errs.push_back("sal_morph_radius must be >= 0");
  if (sal_flip_rate < 0 || sal_flip_rate > 1) errs.push_back("sal_flip_rate must be in [0, 1]");
  if (sal_empty_prob < 0 || sal_empty_prob > 1) errs.push_back("sal_empty_prob must be in [0, 1]");
  if (sal_blur_radius < 0) errs.push_back("sal_blur_radius must be >= 0");
  if (!errs.empty()) {
    std::string msg = "invalid GenConfig:";
    for (const auto& e : errs) msg += "\n  " + e;
    throw ConfigError(msg);
  }
}

KeyValues GenConfig::to_key_values() const {
  return {
      {"canvas", std::to_string(canvas)},
      {"num_classes", std::to_string(num_classes)},
      {"min_shapes", std::to_string(min_shapes)},
      {"max_shapes", std::to_string(max_shapes)},
      {"min_size", std::to_string(min_size)},
      {"max_size", std::to_string(max_size)},
      {"allow_empty", allow_empty ? "true" : "false"},
      {"center_spread", format_double(center_spread)},
      {"noise_cells", std::to_string(noise_cells)},
      {"bg_lo", format_double(bg_lo)},
      {"bg_hi", format_double(bg_hi)},
      {"bg_chroma", format_double(bg_chroma)},
      {"pixel_noise", format_double(pixel_noise)},
      {"color_jitter", format_double(color_jitter)},
      {"core_fraction", format_double(core_fraction)},
      {"core_jitter", format_double(core_jitter)},
      {"core_offset", format_double(core_offset)},
      {"rim_contrast", format_double(rim_contrast)},
      {"sal_morph_radius", std::to_string(sal_morph_radius)},
      {"sal_flip_rate", format_double(sal_flip_rate)},
      {"sal_empty_prob", format_double(sal_empty_prob)},
      {"sal_blur_radius", std::to_string(sal_blur_radius)},
      {"data_seed", std::to_string(seed)},
  };
}

GenConfig GenConfig::from_fields(FieldReader& r) {
  GenConfig c;
  r.read("canvas", c.canvas);
  r.read("num_classes", c.num_classes);
  r.read("min_shapes", c.min_shapes);
  r.read("max_shapes", c.max_shapes);
  r.read("min_size", c.min_size);
  r.read("max_size", c.max_size);
  r.read("allow_empty", c.allow_empty);
  r.read("center_spread", c.center_spread);
  r.read("noise_cells", c.noise_cells);
  r.read("bg_lo", c.bg_lo);
  r.read("bg_hi", c.bg_hi);
  r.read("bg_chroma", c.bg_chroma);
  r.read("pixel_noise", c.pixel_noise);
  r.read("color_jitter", c.color_jitter);
  r.read("core_fraction", c.core_fraction);
  r.read("core_jitter", c.core_jitter);
  r.read("core_offset", c.core_offset);
  r.read("rim_contrast", c.rim_contrast);
  r.read("sal_morph_radius", c.sal_morph_radius);
  r.read("sal_flip_rate", c.sal_flip_rate);
  r.read("sal_empty_prob", c.sal_empty_prob);
  r.read("sal_blur_radius", c.sal_blur_radius);
  r.read("data_seed", c.seed);
  return c;
}

std::vector<std::uint8_t> labels_from_mask(const LabelMap& mask, int num_classes) {
  std::vector<std::uint8_t> y(static_cast<std::size_t>(num_classes), 0);
  for (auto v : mask.labels)
    if (v >= 1 && v <= num_classes) y[v - 1] = 1;
  return y;
}

Image degrade_saliency(const LabelMap& gt_mask, const GenConfig& cfg, Rng& rng) {
  const int w = gt_mask.width, h = gt_mask.height;
  Image sal(w, h, 1);
  // Draws happen unconditionally so the stream layout is independent of
  // which branch is taken.
  const bool empty = rng.bernoulli(cfg.sal_empty_prob);
  const int radius = cfg.sal_morph_radius > 0
                         ? rng.range(-cfg.sal_morph_radius, cfg.sal_morph_radius)
                         : 0;
  if (empty) return sal;

  std::vector<std::uint8_t> fg(gt_mask.labels.size());
  for (std::size_t i = 0; i < fg.size(); ++i) fg[i] = gt_mask.labels[i] > 0;
  fg = morph(fg, w, h, radius);
  std::vector<double> soft(fg.size());
  for (std::size_t i = 0; i < fg.size(); ++i) {
    const bool v = fg[i] != 0;
    const bool flip = cfg.sal_flip_rate > 0 && rng.bernoulli(cfg.sal_flip_rate);
    soft[i] = (v != flip) ? 1.0 : 0.0;
  }
  if (cfg.sal_blur_radius > 0) {
    const int r = cfg.sal_blur_radius;
    std::vector<double> blurred(soft.size());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double s = 0.0;
        int n = 0;
        for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy)
          for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
            s += soft[static_cast<std::size_t>(yy) * w + xx];
            ++n;
          }
        blurred[static_cast<std::size_t>(y) * w + x] = s / n;
      }
    soft = std::move(blurred);
  }
  for (std::size_t i = 0; i < soft.size(); ++i) sal.pixels[i] = quantize(soft[i]);
  return sal;
}

Sample gen_sample(std::uint64_t seed, const GenConfig& cfg) {
  cfg.validate();
  Rng rng(seed);
  const int n = cfg.canvas;
  const auto npix = static_cast<std::size_t>(n) * n;

  const auto lum = value_noise(n, cfg.noise_cells, rng);
  std::array<std::vector<double>, 3> rgb;
  for (auto& ch : rgb) {
    ch = value_noise(n, cfg.noise_cells, rng);
    for (std::size_t i = 0; i < npix; ++i)
      ch[i] = cfg.bg_lo + (cfg.bg_hi - cfg.bg_lo) * lum[i] + cfg.bg_chroma * (ch[i] - 0.5);
  }

  LabelMap mask(n, n, Provenance::kGroundTruth);
  const int count =
      cfg.allow_empty ? rng.range(0, cfg.max_shapes)
                      : rng.range(cfg.min_shapes, cfg.max_shapes);
  for (int s = 0; s < count; ++s) {
    const int cls = static_cast<int>(rng.below(static_cast<std::uint64_t>(cfg.num_classes)));
    const int size = rng.range(cfg.min_size, cfg.max_size);
    const double R = size / 2.0;
    const double lo = std::max(R, 0.5 * n * (1.0 - cfg.center_spread));
    const double hi = std::max(lo, std::min(n - R, 0.5 * n * (1.0 + cfg.center_spread)));
    const double cx = rng.uniform(lo, hi);
    const double cy = rng.uniform(lo, hi);
    const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
    std::array<double, 3> color{};
    for (int c = 0; c < 3; ++c) {
      const double random = rng.uniform();
      color[c] = (1.0 - cfg.color_jitter) * kBaseColors[cls][c] +
                 cfg.color_jitter * random;
    }
    std::array<double, 3> core_color{};
    for (int c = 0; c < 3; ++c) {
      const double random = rng.uniform();
      core_color[c] = (1.0 - cfg.core_jitter) * kBaseColors[cls][c] + cfg.core_jitter * random;
    }
    // Core centre by rejection in the shape frame; a fixed number of draws
    // keeps the stream layout independent of the shape.
    double cu = 0.0, cv = 0.0;
    bool placed = false;
    for (int k = 0; k < 16; ++k) {
      const double pu = rng.uniform(-R, R), pv = rng.uniform(-R, R);
      const bool far = pu * pu + pv * pv >= std::pow(cfg.core_offset * R, 2);
      if (!placed && far && inside_shape(cls, pu, pv, R)) {
        cu = pu;
        cv = pv;
        placed = true;
      }
    }
    const double core_r2 = std::pow(cfg.core_fraction * R, 2);
    const double ca = std::cos(angle), sa = std::sin(angle);
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - R)) - 1);
    const int x1 = std::min(n - 1, static_cast<int>(std::ceil(cx + R)) + 1);
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - R)) - 1);
    const int y1 = std::min(n - 1, static_cast<int>(std::ceil(cy + R)) + 1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
        const double u = ca * dx + sa * dy, v = -sa * dx + ca * dy;
        if (!inside_shape(cls, u, v, R)) continue;
        mask.at(y, x) = static_cast<std::uint8_t>(cls + 1);
        double shade = 1.0;
        if (cfg.rim_contrast > 0.0) {
          // Darken pixels within 2 px of the boundary.
          bool rim = false;
          for (int k = 0; k < 8 && !rim; ++k) {
            const double a = k * std::numbers::pi / 4;
            const double pu = u + 2.0 * std::cos(a), pv = v + 2.0 * std::sin(a);
            rim = !inside_shape(cls, pu, pv, R);
          }
          if (rim) shade = 1.0 - cfg.rim_contrast;
        }
        const auto idx = static_cast<std::size_t>(y) * n + x;
        const bool core = (u - cu) * (u - cu) + (v - cv) * (v - cv) <= core_r2;
        for (int c = 0; c < 3; ++c) rgb[c][idx] = (core ? core_color[c] : color[c]) * shade;
      }
  }

  Sample out;
  out.image = Image(n, n, 3);
  for (std::size_t i = 0; i < npix; ++i)
    for (int c = 0; c < 3; ++c) {
      const double noise = cfg.pixel_noise > 0 ? cfg.pixel_noise * gaussian(rng) : 0.0;
      out.image.pixels[i * 3 + c] = quantize(rgb[c][i] + noise);
    }
  out.labels = labels_from_mask(mask, cfg.num_classes);
  out.saliency = degrade_saliency(mask, cfg, rng);
  out.gt_mask = std::move(mask);
  return out;
}

Sample gen_indexed_sample(std::uint64_t index, const GenConfig& cfg,
                          std::uint64_t split_offset) {
  Sample s = gen_sample(derive_seed(cfg.seed, split_offset + index), cfg);
  s.id = split_offset + index;
  return s;
}

std::vector<Sample> gen_dataset(const GenConfig& cfg, std::size_t count,
                                std::uint64_t first_index) {
  cfg.validate();
  std::vector<Sample> out(count);
  parallel_for(count, [&](std::size_t i) {
    out[i] = gen_indexed_sample(i, cfg, first_index);
  });
  return out;
}

void validate_sample(const Sample& s, int num_classes) {
  const std::string who = "sample " + sample_name(s.id);
  if (s.image.channels != 3) throw ValidationError(who + ": image must have 3 channels");
  if (s.gt_mask.width != s.image.width || s.gt_mask.height != s.image.height)
    throw ValidationError(who + ": mask size differs from image size");
  if (s.saliency.width != s.image.width || s.saliency.height != s.image.height ||
      s.saliency.channels != 1)
    throw ValidationError(who + ": saliency size differs from image size");
  for (auto v : s.gt_mask.labels)
    if (v > num_classes)
      throw ValidationError(who + ": mask value " + std::to_string(v) +
                            " exceeds class count " + std::to_string(num_classes));
  if (s.labels != labels_from_mask(s.gt_mask, num_classes))
    throw ValidationError(who + ": image-level labels disagree with mask");
}

void write_dataset(const std::vector<Sample>& samples, const GenConfig& cfg,
                   const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  for (const char* sub : {"images", "masks", "saliency"}) fs::create_directories(dir / sub);
  auto kv = cfg.to_key_values();
  kv["count"] = std::to_string(samples.size());
  write_key_values(dir / "manifest.txt", kv);

  std::ofstream csv(dir / "labels.csv");
  if (!csv) throw IoError("cannot open " + (dir / "labels.csv").string());
  csv << "sample_id";
  for (int c = 0; c < cfg.num_classes; ++c) csv << ",c" << c;
  csv << '\n';
  for (const auto& s : samples) {
    csv << s.id;
    for (auto v : s.labels) csv << ',' << static_cast<int>(v);
    csv << '\n';
  }
  if (!csv) throw IoError("write failed: " + (dir / "labels.csv").string());

  parallel_for(samples.size(), [&](std::size_t i) {
    const auto& s = samples[i];
    const auto name = sample_name(s.id);
    write_pnm(dir / "images" / (name + ".ppm"), s.image);
    Image mask(s.gt_mask.width, s.gt_mask.height, 1);
    mask.pixels = s.gt_mask.labels;
    write_pnm(dir / "masks" / (name + ".pgm"), mask);
    write_pnm(dir / "saliency" / (name + ".pgm"), s.saliency);
  });
}

Dataset read_dataset(const std::filesystem::path& dir) {
  Dataset ds;
  const auto kv = read_key_values(dir / "manifest.txt");
  FieldReader reader(kv);
  ds.config = GenConfig::from_fields(reader);
  int count = -1;
  reader.read("count", count);
  if (!reader.errors().empty() || count < 0) {
    std::string msg = "bad dataset manifest " + (dir / "manifest.txt").string();
    for (const auto& e : reader.errors()) msg += "\n  " + e;
    throw ConfigError(msg);
  }
  ds.config.validate();
  const int C = ds.config.num_classes;

  const auto csv_path = dir / "labels.csv";
  std::ifstream csv(csv_path);
  if (!csv) throw IoError("cannot open " + csv_path.string());
  std::string line;
  std::getline(csv, line);
  std::string header = "sample_id";
  for (int c = 0; c < C; ++c) header += ",c" + std::to_string(c);
  if (line != header)
    throw IoError(csv_path.string() + ": unexpected header '" + line + "'");

  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string field;
    Sample s;
    if (!std::getline(row, field, ','))
      throw IoError(csv_path.string() + ": empty row");
    try {
      s.id = std::stoull(field);
    } catch (const std::exception&) {
      throw IoError(csv_path.string() + ": bad sample_id '" + field + "'");
    }
    while (std::getline(row, field, ',')) {
      if (field != "0" && field != "1")
        throw IoError(csv_path.string() + ": bad label '" + field + "' for sample " +
                      sample_name(s.id));
      s.labels.push_back(field == "1");
    }
    if (static_cast<int>(s.labels.size()) != C)
      throw IoError(csv_path.string() + ": sample " + sample_name(s.id) + " has " +
                    std::to_string(s.labels.size()) + " label columns");
    ds.samples.push_back(std::move(s));
  }
  if (static_cast<int>(ds.samples.size()) != count)
    throw ValidationError(csv_path.string() + ": " + std::to_string(ds.samples.size()) +
                          " rows but manifest count is " + std::to_string(count));

  parallel_for(ds.samples.size(), [&](std::size_t i) {
    auto& s = ds.samples[i];
    const auto name = sample_name(s.id);
    s.image = read_pnm(dir / "images" / (name + ".ppm"));
    const auto mask = read_pnm(dir / "masks" / (name + ".pgm"));
    s.gt_mask = LabelMap(mask.width, mask.height, Provenance::kGroundTruth);
    s.gt_mask.labels = mask.pixels;
    s.saliency = read_pnm(dir / "saliency" / (name + ".pgm"));
    validate_sample(s, C);
  });
  return ds;
}

}  // namespace l2g
