#pragma once

#include <cstdint>

#include "gahcda/core.hpp"

namespace gahcda {

/// Generator for an elliptical-annulus "myocardium" on a dark background.
/// Lengths are in pixels unless noted; every range is [min, max].
struct SynthConfig {
  int image_size = 64;
  int n_source = 120;
  int n_target = 100;

  double center_jitter = 0.08;  ///< fraction of image_size
  double semi_axis_min = 0.20;  ///< fraction of image_size
  double semi_axis_max = 0.32;
  double wall_min = 3.0;
  double wall_max = 6.0;
  double area_min = 0.04;  ///< accepted foreground fraction range
  double area_max = 0.30;

  double background_level = 0.12;
  double wall_level = 0.80;
  double cavity_level = 0.04;
  int clutter_blobs = 2;  ///< faint background structures, both domains
  double clutter_level = 0.35;

  double source_noise = 0.05;

  double speckle = 1.0;       ///< 0 disables multiplicative Rayleigh speckle
  double gamma = 3.0;         ///< 1 disables the intensity remap
  double offset = 0.05;       ///< additive intensity offset
  double blur_sigma = 0.8;    ///< 0 disables blur
  double target_noise = 0.03; ///< additive noise after the shift

  int gaze_samples = 30;
  double gaze_jitter = 1.5;

  std::uint64_t seed = 7;

  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

/// Throws ValidationError("degenerate shape config") for empty/inverted ranges.
void validate(const SynthConfig& cfg, int stride = 16);

/// Deterministic in (cfg, role). Target items carry gaze and an
/// evaluation-only mask.
DomainDataset generate_domain(const SynthConfig& cfg, DomainRole role);

/// Samples near the mask boundary, 200 ms apart. Throws DataError("no structure
/// to gaze at") for an empty mask.
GazeTrajectory synthesize_gaze(const SegMask& truth, const SynthConfig& cfg, std::uint64_t seed,
                               const std::string& frame_id = {});

}  // namespace gahcda
