#include "imghop/synth.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>

namespace imghop {

using nlohmann::json;

namespace synthdetail {

double disc_coverage(double px, double py, double cx, double cy, double radius) {
  double d = std::hypot(px - cx, py - cy);
  return std::clamp(radius - d + 0.5, 0.0, 1.0);
}

double square_coverage(double px, double py, double cx, double cy, double half_side) {
  double ox = std::clamp(std::min(px + 0.5, cx + half_side) - std::max(px - 0.5, cx - half_side),
                         0.0, 1.0);
  double oy = std::clamp(std::min(py + 0.5, cy + half_side) - std::max(py - 0.5, cy - half_side),
                         0.0, 1.0);
  return ox * oy;
}

void hsv_to_rgb(double h, double s, double v, double* r, double* g, double* b) {
  h = std::fmod(h, 360.0);
  if (h < 0) h += 360.0;
  double c = v * s;
  double hp = h / 60.0;
  double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r1 = 0, g1 = 0, b1 = 0;
  if (hp < 1) {
    r1 = c; g1 = x;
  } else if (hp < 2) {
    r1 = x; g1 = c;
  } else if (hp < 3) {
    g1 = c; b1 = x;
  } else if (hp < 4) {
    g1 = x; b1 = c;
  } else if (hp < 5) {
    r1 = x; b1 = c;
  } else {
    r1 = c; b1 = x;
  }
  double m = v - c;
  *r = r1 + m;
  *g = g1 + m;
  *b = b1 + m;
}

void rgb_to_hsv(double r, double g, double b, double* h, double* s, double* v) {
  double mx = std::max({r, g, b});
  double mn = std::min({r, g, b});
  double d = mx - mn;
  *v = mx;
  *s = mx > 0 ? d / mx : 0.0;
  if (d <= 0) {
    *h = 0.0;
    return;
  }
  double hh;
  if (mx == r) {
    hh = std::fmod((g - b) / d, 6.0);
  } else if (mx == g) {
    hh = (b - r) / d + 2.0;
  } else {
    hh = (r - g) / d + 4.0;
  }
  hh *= 60.0;
  if (hh < 0) hh += 360.0;
  *h = hh;
}

}  // namespace synthdetail

const char* to_string(FamilyId id) {
  return id == FamilyId::kHueShift ? "hue-shift" : "disc-square";
}

FamilyId family_id_from_string(const std::string& s) {
  if (s == "hue-shift") return FamilyId::kHueShift;
  if (s == "disc-square") return FamilyId::kDiscSquare;
  throw ConfigError("unknown synthetic family '" + s + "'");
}

void SyntheticFamily::validate() const {
  if (image_size < 8 || image_size % 4 != 0)
    throw ConfigError("SyntheticFamily: image_size must be a multiple of 4, >= 8");
  auto check_range = [](double lo, double hi, const char* what) {
    if (lo < 0 || hi > 360 || lo > hi) throw ConfigError(std::string("SyntheticFamily: bad ") + what);
  };
  check_range(hue_x_lo, hue_x_hi, "X hue interval");
  check_range(hue_y_lo, hue_y_hi, "Y hue interval");
  if (std::max(hue_x_lo, hue_y_lo) <= std::min(hue_x_hi, hue_y_hi))
    throw ConfigError("SyntheticFamily: hue intervals must be disjoint");
  if (saturation <= 0.2 || saturation > 1.0)
    throw ConfigError("SyntheticFamily: saturation must be in (0.2, 1]");
  if (min_size_frac <= 0 || max_size_frac < min_size_frac || max_size_frac > 0.45)
    throw ConfigError("SyntheticFamily: bad shape size range");
  if (background <= 0 || background >= 1)
    throw ConfigError("SyntheticFamily: background must be inside (0, 1)");
  if (min_lum_contrast <= 0 || min_lum_contrast > 0.5)
    throw ConfigError("SyntheticFamily: min_lum_contrast must be in (0, 0.5]");
}

namespace {

Image make_hue_image(const SyntheticFamily& fam, double hue_lo, double hue_hi, Rng& rng) {
  const int s = fam.image_size;
  double hue = rng.uniform(hue_lo, hue_hi);

  // Smooth pattern: a few random cosine waves, min-max scaled to [0, 1].
  constexpr int kWaves = 4;
  double fx[kWaves], fy[kWaves], ph[kWaves], amp[kWaves];
  for (int k = 0; k < kWaves; ++k) {
    fx[k] = rng.uniform(-3.0, 3.0) / s;
    fy[k] = rng.uniform(-3.0, 3.0) / s;
    ph[k] = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
    amp[k] = rng.uniform(0.5, 1.0);
  }
  std::vector<double> pattern(static_cast<std::size_t>(s) * s);
  double lo = 1e300, hi = -1e300;
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      double v = 0;
      for (int k = 0; k < kWaves; ++k)
        v += amp[k] * std::cos(2.0 * 3.14159265358979323846 * (fx[k] * x + fy[k] * y) + ph[k]);
      pattern[static_cast<std::size_t>(y) * s + x] = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  double span = hi - lo > 1e-12 ? hi - lo : 1.0;

  Image img = Image::blank(s, s);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      double p = (pattern[static_cast<std::size_t>(y) * s + x] - lo) / span;
      double value = 0.2 + 0.75 * p;
      double r, g, b;
      synthdetail::hsv_to_rgb(hue, fam.saturation, value, &r, &g, &b);
      img.at(y, x, 0) = static_cast<float>(2.0 * r - 1.0);
      img.at(y, x, 1) = static_cast<float>(2.0 * g - 1.0);
      img.at(y, x, 2) = static_cast<float>(2.0 * b - 1.0);
    }
  }
  return img;
}

Image make_shape_image(const SyntheticFamily& fam, bool disc, Rng& rng) {
  const int s = fam.image_size;
  const double margin = 2.0;
  double size = rng.uniform(fam.min_size_frac * s, fam.max_size_frac * s);
  double cx = rng.uniform(size + margin, s - size - margin);
  double cy = rng.uniform(size + margin, s - size - margin);
  double cr, cg, cb;
  do {
    cr = rng.real01();
    cg = rng.real01();
    cb = rng.real01();
  } while (std::abs((cr + cg + cb) / 3.0 - fam.background) < fam.min_lum_contrast);

  Image img = Image::blank(s, s);
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      double px = x + 0.5, py = y + 0.5;
      double a = disc ? synthdetail::disc_coverage(px, py, cx, cy, size)
                      : synthdetail::square_coverage(px, py, cx, cy, size);
      double r = fam.background + (cr - fam.background) * a;
      double g = fam.background + (cg - fam.background) * a;
      double b = fam.background + (cb - fam.background) * a;
      img.at(y, x, 0) = static_cast<float>(2.0 * r - 1.0);
      img.at(y, x, 1) = static_cast<float>(2.0 * g - 1.0);
      img.at(y, x, 2) = static_cast<float>(2.0 * b - 1.0);
    }
  }
  return img;
}

}  // namespace

UnpairedDataset synth_generate(const SyntheticFamily& family, DomainLabel domain_label, int count,
                               std::uint64_t seed) {
  family.validate();
  if (count < 1) throw ConfigError("synth_generate: count must be >= 1");
  // Domain-distinct seeding keeps the X and Y streams independent.
  Rng rng(seed * 2654435761u + (domain_label == DomainLabel::kX ? 0u : 1u));

  UnpairedDataset ds;
  ds.domain_label = domain_label;
  ds.source = std::string("synthetic:") + to_string(family.family_id) + "/" +
              to_string(domain_label) + "/seed" + std::to_string(seed);
  ds.items.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    if (family.family_id == FamilyId::kHueShift) {
      bool x = domain_label == DomainLabel::kX;
      ds.items.push_back(make_hue_image(family, x ? family.hue_x_lo : family.hue_y_lo,
                                        x ? family.hue_x_hi : family.hue_y_hi, rng));
    } else {
      ds.items.push_back(make_shape_image(family, domain_label == DomainLabel::kX, rng));
    }
  }
  return ds;
}

void save_family(const SyntheticFamily& family, const std::string& path) {
  family.validate();
  json j;
  j["family_id"] = to_string(family.family_id);
  j["image_size"] = family.image_size;
  j["hue_x"] = {family.hue_x_lo, family.hue_x_hi};
  j["hue_y"] = {family.hue_y_lo, family.hue_y_hi};
  j["saturation"] = family.saturation;
  j["size_frac"] = {family.min_size_frac, family.max_size_frac};
  j["background"] = family.background;
  j["min_lum_contrast"] = family.min_lum_contrast;
  std::ofstream os(path);
  if (!os) throw Error("save_family: cannot write " + path);
  os << j.dump(2) << "\n";
}

SyntheticFamily load_family(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("load_family: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw IntegrityError("load_family: malformed descriptor " + path + ": " + e.what());
  }
  SyntheticFamily fam;
  try {
    fam.family_id = family_id_from_string(j.at("family_id").get<std::string>());
    fam.image_size = j.at("image_size").get<int>();
    fam.hue_x_lo = j.at("hue_x").at(0).get<double>();
    fam.hue_x_hi = j.at("hue_x").at(1).get<double>();
    fam.hue_y_lo = j.at("hue_y").at(0).get<double>();
    fam.hue_y_hi = j.at("hue_y").at(1).get<double>();
    fam.saturation = j.at("saturation").get<double>();
    fam.min_size_frac = j.at("size_frac").at(0).get<double>();
    fam.max_size_frac = j.at("size_frac").at(1).get<double>();
    fam.background = j.at("background").get<double>();
    fam.min_lum_contrast = j.at("min_lum_contrast").get<double>();
  } catch (const json::exception& e) {
    throw IntegrityError("load_family: missing field in " + path + ": " + e.what());
  }
  fam.validate();
  return fam;
}

}  // namespace imghop
