#ifndef IMGHOP_SYNTH_HPP
#define IMGHOP_SYNTH_HPP

#include <cstdint>
#include <string>

#include "imghop/dataset.hpp"

namespace imghop {

enum class FamilyId { kHueShift, kDiscSquare };

const char* to_string(FamilyId id);
FamilyId family_id_from_string(const std::string& s);

// Parameters of a synthetic two-domain image family. The two domains are
// disjoint under the family's oracle by construction.
struct SyntheticFamily {
  FamilyId family_id = FamilyId::kHueShift;
  int image_size = 32;

  // hue-shift: smooth grayscale patterns colorized with a per-image hue
  // drawn from the domain's interval (degrees).
  double hue_x_lo = 0.0, hue_x_hi = 60.0;
  double hue_y_lo = 180.0, hue_y_hi = 240.0;
  double saturation = 0.75;

  // disc-square: one anti-aliased filled disc (X) or axis-aligned square
  // (Y) on a neutral background. Sizes are the disc radius / square
  // half-side as a fraction of the image size.
  double min_size_frac = 0.125, max_size_frac = 0.25;
  double background = 0.6;         // neutral gray, in [0, 1]
  double min_lum_contrast = 0.25;  // shape luminance must differ from background

  void validate() const;
};

// Deterministic given (family, domain_label, count, seed).
UnpairedDataset synth_generate(const SyntheticFamily& family, DomainLabel domain_label, int count,
                               std::uint64_t seed);

// Family descriptor file (JSON).
void save_family(const SyntheticFamily& family, const std::string& path);
SyntheticFamily load_family(const std::string& path);

namespace synthdetail {

// Shared shape-coverage functions; the oracle fits the same templates the
// generator draws.
double disc_coverage(double px, double py, double cx, double cy, double radius);
double square_coverage(double px, double py, double cx, double cy, double half_side);

// HSV (h in degrees, s/v in [0,1]) -> RGB in [0,1].
void hsv_to_rgb(double h, double s, double v, double* r, double* g, double* b);
// RGB in [0,1] -> HSV.
void rgb_to_hsv(double r, double g, double b, double* h, double* s, double* v);

}  // namespace synthdetail

}  // namespace imghop

#endif  // IMGHOP_SYNTH_HPP
