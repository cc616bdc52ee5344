// Copyright 2026 The sps Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Photon-counting analysis of click records. Nothing in here looks at
// ClickRecord::origin; that tag exists for diagnostics only.

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sps/experiment.hpp"

namespace sps {

struct ArrivalHistogram {
  double bin_width = 0;
  std::vector<double> centers;  // time within the period, s
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const;
};

/// Clicks that share an interaction window with at least `min_clicks - 1`
/// other clicks, i.e. some window of length `window` holds >= min_clicks
/// clicks including this one. Input order is preserved.
std::vector<ClickRecord> strongly_coupled(std::span<const ClickRecord> clicks, double window, int min_clicks = 2);

/// Click times folded modulo the pulse period and binned over [0, period).
/// bin_width must not be finer than the timing resolution.
ArrivalHistogram arrival_histogram(std::span<const ClickRecord> clicks, const PulseSequence& seq,
                                   double bin_width, double time_resolution = 8e-9);

/// Full width at half maximum of a sampled curve, with linear interpolation
/// between samples on both flanks of the global maximum.
double fwhm(std::span<const double> x, std::span<const double> y);

struct CorrelationHistogram {
  double bin_width = 0;
  std::vector<double> lags;  // bin centers k * bin_width, k = -K..K
  std::vector<std::uint64_t> counts;
  std::vector<double> normalized;  // g2
  double noise_floor = 0;
  std::vector<double> noise_subtracted;  // g2 - noise_floor, may go negative
  /// Expected counts per bin for two uncorrelated streams: N1 N2 bin / T.
  double uncorrelated_counts = 0;
  std::uint64_t n_d1 = 0;
  std::uint64_t n_d2 = 0;
  double acquisition_time = 0;

  int half_bins() const { return static_cast<int>(lags.size() / 2); }
  /// Bins with |lag - center| <= half_width.
  double area(double center, double half_width, bool subtracted = true) const;
  /// Counts in the same bins, after removing the noise floor.
  double excess_counts(double center, double half_width) const;
};

/// All D1 x D2 pairs with lag t_D1 - t_D2 inside
/// [-(K + 1/2) bin, (K + 1/2) bin), K = round(max_lag / bin). The histogram is
/// normalized so two independent Poisson streams give g2 = 1.
CorrelationHistogram cross_correlation(std::span<const ClickRecord> clicks, double bin_width, double max_lag,
                                       std::optional<double> acquisition_time = std::nullopt);

struct DetectorRates {
  double d1 = 0;
  double d2 = 0;
};

/// Removes the flat accidental floor (dark x dark + dark x signal) in g2 units.
CorrelationHistogram subtract_noise(CorrelationHistogram h, DetectorRates dark, DetectorRates signal);

struct ConditionalCalibration {
  double photons = 0;  // noise-subtracted number of detected photons
  double splitter_ratio = 0.5;
  /// Peak integration half-width; defaults to the pump duration.
  std::optional<double> peak_half_width;
};

/// P_k = (N_{+k} + N_{-k}) / (photons * 2 r (1 - r)) for k = 1..max_lag_pulses,
/// where N_{+-k} are the noise-subtracted counts in the side peaks at +-k periods.
std::vector<double> conditional_probabilities(const CorrelationHistogram& h, const PulseSequence& seq,
                                              int max_lag_pulses, const ConditionalCalibration& cal);

struct EmissionProfileFit {
  double amplitude = 0;  // P_emit at z = 0
  double sigma_z = 0;    // 1/e half-width, m
  double residual = 0;   // root-mean-square misfit of the areas
  int iterations = 0;
};

/// Conditional area at lag k for P(z) = A exp(-(z / sigma)^2) and atoms
/// uniformly distributed in z:
///   int P(z) P(z - d) dz / int P(z) dz = (A / sqrt 2) exp(-d^2 / (2 sigma^2)),
/// with d = k v T.
double pemit_forward(double amplitude, double sigma_z, double displacement);

/// Least-squares fit of (A, sigma) to areas at lags 1..N.
EmissionProfileFit deconvolve_pemit(std::span<const double> peak_areas, double velocity, double period);

struct Occupancy {
  double mean = 0;
  double p_one = 0;
  double p_many = 0;
};

Occupancy occupancy_statistics(double flux, double interaction_time);

/// Monte Carlo occupancy: fraction of `probes` evenly spaced instants at which
/// exactly one / more than one atom is within interaction_time / 2 of its axis
/// crossing.
Occupancy sampled_occupancy(std::span<const AtomTransit> transits, double interaction_time, double run_duration,
                            int probes);

/// Fourier-limited FWHM linewidth (Hz) of a Gaussian pulse with the given
/// intensity FWHM: 2 ln 2 / (pi tau).
double transform_limited_linewidth(double fwhm_duration);

}  // namespace sps
