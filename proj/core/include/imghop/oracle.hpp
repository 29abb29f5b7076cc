#ifndef IMGHOP_ORACLE_HPP
#define IMGHOP_ORACLE_HPP

#include "imghop/synth.hpp"

namespace imghop {

// Analytic domain-membership score in [0, 1]: 0 is fully domain X, 1 fully
// domain Y.
//
// hue-shift: circular-mean hue of sufficiently saturated pixels, mapped by
// the ratio of circular distances to the two domain hue intervals (linear
// in hue angle between the intervals, 0/1 inside them). Degenerate images
// with no usable hue score 0.5.
//
// disc-square: best-fit disc residual vs best-fit square residual over a
// discretized parameter grid (position and size stride 2 px), mapped as
// residual_disc / (residual_disc + residual_square).
double domain_oracle_score(const Image& image, const SyntheticFamily& family);

}  // namespace imghop

#endif  // IMGHOP_ORACLE_HPP
