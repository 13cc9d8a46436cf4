#include "nexrl/phantom.hpp"

#include <cmath>

#include "nexrl/rng.hpp"

namespace nexrl {
namespace {

struct ComplexAmp {
  double re = 0.0;
  double im = 0.0;
};

// Summed ellipse amplitude at one normalized point (y, x in [0,1]).
ComplexAmp sample_point(const PhantomSpec& spec, double y, double x) {
  ComplexAmp a;
  for (const Ellipse& e : spec.ellipses) {
    const double dy = y - e.center_y;
    const double dx = x - e.center_x;
    const double c = std::cos(e.rotation), s = std::sin(e.rotation);
    const double rx = c * dx + s * dy;
    const double ry = -s * dx + c * dy;
    const double u = rx / e.radius_x;
    const double v = ry / e.radius_y;
    if (u * u + v * v <= 1.0) {
      a.re += e.amp_real;
      a.im += e.amp_imag;
    }
  }
  return a;
}

}  // namespace

ComplexImage generate_phantom(const PhantomSpec& spec) {
  if (spec.height < 16 || spec.width < 16)
    throw DataError("generate_phantom: extent must be at least 16x16, got " +
                    std::to_string(spec.height) + "x" +
                    std::to_string(spec.width));

  ComplexImage img(spec.height, spec.width);
  const double inv_h = 1.0 / spec.height;
  const double inv_w = 1.0 / spec.width;
  for (int i = 0; i < spec.height; ++i) {
    for (int j = 0; j < spec.width; ++j) {
      // 2x2 supersampling for anti-aliased ellipse boundaries. The phase
      // ramp applies once per pixel, at its center, so phase parameters
      // modulate but never attenuate the rasterized magnitude.
      double re = 0.0, im = 0.0;
      for (int si = 0; si < 2; ++si) {
        for (int sj = 0; sj < 2; ++sj) {
          const double y = (i + 0.25 + 0.5 * si) * inv_h;
          const double x = (j + 0.25 + 0.5 * sj) * inv_w;
          const ComplexAmp a = sample_point(spec, y, x);
          re += a.re;
          im += a.im;
        }
      }
      const double phi = spec.phase_const +
                         spec.phase_ramp_y * (i + 0.5) * inv_h +
                         spec.phase_ramp_x * (j + 0.5) * inv_w;
      const double c = std::cos(phi), s = std::sin(phi);
      img.real.at(i, j) = 0.25 * (re * c - im * s);
      img.imag.at(i, j) = 0.25 * (re * s + im * c);
    }
  }
  return img;
}

PhantomSpec random_phantom_spec(std::uint64_t seed, int height, int width) {
  PhantomSpec spec;
  spec.seed = seed;
  spec.height = height;
  spec.width = width;

  Rng rng(substream(seed, "phantom"));

  Ellipse body;
  body.center_y = 0.5 + rng.uniform(-0.05, 0.05);
  body.center_x = 0.5 + rng.uniform(-0.05, 0.05);
  body.radius_y = rng.uniform(0.30, 0.40);
  body.radius_x = rng.uniform(0.30, 0.40);
  body.rotation = rng.uniform(-0.4, 0.4);
  const double body_mag = rng.uniform(0.50, 0.60);
  const double body_phase = rng.uniform(-0.5, 0.5);
  body.amp_real = body_mag * std::cos(body_phase);
  body.amp_imag = body_mag * std::sin(body_phase);
  spec.ellipses.push_back(body);

  const int inner = rng.uniform_int(3, 6);
  double budget = body_mag;
  for (int k = 0; k < inner; ++k) {
    Ellipse e;
    e.center_y = rng.uniform(0.30, 0.70);
    e.center_x = rng.uniform(0.30, 0.70);
    e.radius_y = rng.uniform(0.04, 0.16);
    e.radius_x = rng.uniform(0.04, 0.16);
    e.rotation = rng.uniform(0.0, 3.141592653589793);
    const double mag = rng.uniform(0.05, 0.12);
    const double phase = rng.uniform(-3.0, 3.0);
    e.amp_real = mag * std::cos(phase);
    e.amp_imag = mag * std::sin(phase);
    spec.ellipses.push_back(e);
    budget += mag;
  }
  // Worst-case overlap magnitude stays below 1.
  if (budget > 0.98) {
    const double scale = 0.98 / budget;
    for (Ellipse& e : spec.ellipses) {
      e.amp_real *= scale;
      e.amp_imag *= scale;
    }
  }

  spec.phase_const = rng.uniform(-3.0, 3.0);
  spec.phase_ramp_y = rng.uniform(-2.0, 2.0);
  spec.phase_ramp_x = rng.uniform(-2.0, 2.0);
  return spec;
}

Image default_gfactor(int height, int width) {
  Image g(height, width);
  const double cy = 0.35 * height;
  const double cx = 0.60 * width;
  const double s = 0.25 * std::min(height, width);
  const double inv = 1.0 / (2.0 * s * s);
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      const double dy = i - cy, dx = j - cx;
      g.at(i, j) = 1.0 + 0.8 * std::exp(-(dy * dy + dx * dx) * inv);
    }
  return g;
}

Image constant_gfactor(int height, int width) {
  return Image(height, width, 1.0);
}

}  // namespace nexrl
