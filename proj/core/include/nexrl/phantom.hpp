#pragma once

#include <cstdint>
#include <vector>

#include "nexrl/image.hpp"

namespace nexrl {

/// One elliptical region contributing a constant complex amplitude.
struct Ellipse {
  double center_y = 0.0;  // fractions of image height/width in [0,1]
  double center_x = 0.0;
  double radius_y = 0.0;
  double radius_x = 0.0;
  double rotation = 0.0;  // radians
  double amp_real = 0.0;
  double amp_imag = 0.0;
};

/// Deterministic recipe for one synthetic slice: overlapping ellipses times a
/// smooth phase ramp. Amplitudes are kept small enough that the summed
/// magnitude stays <= 1 everywhere.
struct PhantomSpec {
  std::uint64_t seed = 0;
  int height = 0;
  int width = 0;
  std::vector<Ellipse> ellipses;
  double phase_const = 0.0;
  double phase_ramp_y = 0.0;  // radians across the full height
  double phase_ramp_x = 0.0;  // radians across the full width
};

/// Rasterizes the spec with 2x2 supersampling for anti-aliased edges.
/// Pure function of the spec.
ComplexImage generate_phantom(const PhantomSpec& spec);

/// Draws a randomized spec: one large body ellipse plus a few interior
/// structures, total |amplitude| budget <= 1.
PhantomSpec random_phantom_spec(std::uint64_t seed, int height, int width);

/// Smooth spatial noise-amplification map:
/// 1 + 0.8 * exp(-r^2 / (2 * (0.25 * min(H, W))^2)) with the bump centered
/// off-axis, mimicking the g-factor of parallel-imaging reconstruction.
Image default_gfactor(int height, int width);

/// Spatially uniform map (== 1): stationary noise.
Image constant_gfactor(int height, int width);

}  // namespace nexrl
