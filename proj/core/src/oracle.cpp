#include "imghop/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace imghop {

namespace {

double circular_distance_deg(double a, double b) {
  double d = std::fmod(std::abs(a - b), 360.0);
  return d > 180.0 ? 360.0 - d : d;
}

double distance_to_interval_deg(double h, double lo, double hi) {
  if (h >= lo && h <= hi) return 0.0;
  return std::min(circular_distance_deg(h, lo), circular_distance_deg(h, hi));
}

double hue_shift_score(const Image& img, const SyntheticFamily& fam) {
  constexpr double kMinSaturation = 0.2;
  constexpr double kMinValue = 0.1;
  double sx = 0, sy = 0;
  std::size_t qualifying = 0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      double r = std::clamp((img.at(y, x, 0) + 1.0) / 2.0, 0.0, 1.0);
      double g = std::clamp((img.at(y, x, 1) + 1.0) / 2.0, 0.0, 1.0);
      double b = std::clamp((img.at(y, x, 2) + 1.0) / 2.0, 0.0, 1.0);
      double h, s, v;
      synthdetail::rgb_to_hsv(r, g, b, &h, &s, &v);
      if (s >= kMinSaturation && v >= kMinValue) {
        double rad = h * 3.14159265358979323846 / 180.0;
        sx += std::cos(rad);
        sy += std::sin(rad);
        ++qualifying;
      }
    }
  }
  if (qualifying == 0) return 0.5;  // hue undefined: maximally ambiguous
  if (std::hypot(sx, sy) / static_cast<double>(qualifying) < 1e-6) return 0.5;
  double mean_hue = std::atan2(sy, sx) * 180.0 / 3.14159265358979323846;
  if (mean_hue < 0) mean_hue += 360.0;
  double dx = distance_to_interval_deg(mean_hue, fam.hue_x_lo, fam.hue_x_hi);
  double dy = distance_to_interval_deg(mean_hue, fam.hue_y_lo, fam.hue_y_hi);
  if (dx + dy <= 0) return 0.5;
  return std::clamp(dx / (dx + dy), 0.0, 1.0);
}

// Least-squares fit of (background + contrast * coverage) templates over a
// coarse grid; closed-form optimal contrast per candidate.
double best_template_residual(const std::vector<double>& lum, int size_px, bool disc,
                              double total_sq, double min_size, double max_size) {
  double best = total_sq;
  int lo_size = std::max(2, static_cast<int>(std::lround(min_size)) - 2);
  int hi_size = static_cast<int>(std::lround(max_size)) + 2;
  for (int sz = lo_size; sz <= hi_size; sz += 2) {
    double s = static_cast<double>(sz);
    double c_lo = s, c_hi = static_cast<double>(size_px) - s;
    if (c_hi < c_lo) continue;
    for (double cy = c_lo; cy <= c_hi; cy += 2.0) {
      for (double cx = c_lo; cx <= c_hi; cx += 2.0) {
        int x0 = std::max(0, static_cast<int>(std::floor(cx - s - 1)));
        int x1 = std::min(size_px - 1, static_cast<int>(std::ceil(cx + s + 1)));
        int y0 = std::max(0, static_cast<int>(std::floor(cy - s - 1)));
        int y1 = std::min(size_px - 1, static_cast<int>(std::ceil(cy + s + 1)));
        double sa = 0, saa = 0;
        for (int y = y0; y <= y1; ++y) {
          const double* row = lum.data() + static_cast<std::size_t>(y) * size_px;
          for (int x = x0; x <= x1; ++x) {
            double px = x + 0.5, py = y + 0.5;
            double a = disc ? synthdetail::disc_coverage(px, py, cx, cy, s)
                            : synthdetail::square_coverage(px, py, cx, cy, s);
            if (a > 0) {
              sa += a * row[x];
              saa += a * a;
            }
          }
        }
        if (saa > 1e-9) best = std::min(best, total_sq - sa * sa / saa);
      }
    }
  }
  return std::max(best, 0.0);
}

double disc_square_score(const Image& img, const SyntheticFamily& fam) {
  const int s = fam.image_size;
  std::vector<double> lum(static_cast<std::size_t>(s) * s);
  double total_sq = 0;
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      double m = (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0;
      double v = (m + 1.0) / 2.0 - fam.background;
      lum[static_cast<std::size_t>(y) * s + x] = v;
      total_sq += v * v;
    }
  }
  double min_size = fam.min_size_frac * s, max_size = fam.max_size_frac * s;
  double rd = best_template_residual(lum, s, true, total_sq, min_size, max_size);
  double rs = best_template_residual(lum, s, false, total_sq, min_size, max_size);
  if (rd + rs < 1e-12) return 0.5;
  return std::clamp(rd / (rd + rs), 0.0, 1.0);
}

}  // namespace

double domain_oracle_score(const Image& image, const SyntheticFamily& family) {
  family.validate();
  if (image.height != family.image_size || image.width != family.image_size)
    throw ContractError("domain_oracle_score: image does not match family.image_size");
  return family.family_id == FamilyId::kHueShift ? hue_shift_score(image, family)
                                                 : disc_square_score(image, family);
}

}  // namespace imghop
