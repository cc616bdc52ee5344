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

#include "sps/analysis.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace sps {

namespace {

std::int64_t to_ns(double seconds) { return static_cast<std::int64_t>(std::llround(seconds * 1e9)); }

// floor(a / b) for b > 0.
std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  const std::int64_t q = a / b;
  return (a % b != 0 && a < 0) ? q - 1 : q;
}

std::vector<std::int64_t> sorted_times(std::span<const ClickRecord> clicks, Detector d) {
  std::vector<std::int64_t> t;
  for (const auto& c : clicks)
    if (c.detector == d) t.push_back(c.t_ns);
  std::sort(t.begin(), t.end());
  return t;
}

}  // namespace

std::uint64_t ArrivalHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

std::vector<ClickRecord> strongly_coupled(std::span<const ClickRecord> clicks, double window, int min_clicks) {
  if (!(window >= 0)) throw AnalysisError("strongly_coupled: window must be >= 0");
  if (min_clicks < 1) throw AnalysisError("strongly_coupled: min_clicks must be >= 1");
  const std::size_t n = clicks.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return clicks[a].t_ns < clicks[b].t_ns; });

  // For every click j, [t_j, t_j + window] is a candidate window; any window
  // holding k clicks can be slid right until it starts on a click, so these
  // candidates suffice. Marked ranges are accumulated with a difference array.
  const std::int64_t w = to_ns(window);
  std::vector<int> cover(n + 1, 0);
  std::size_t hi = 0;
  for (std::size_t lo = 0; lo < n; ++lo) {
    hi = std::max(hi, lo);
    while (hi + 1 < n && clicks[order[hi + 1]].t_ns - clicks[order[lo]].t_ns <= w) ++hi;
    if (static_cast<int>(hi - lo + 1) >= min_clicks) {
      ++cover[lo];
      --cover[hi + 1];
    }
  }
  std::vector<char> keep(n, 0);
  int running = 0;
  for (std::size_t r = 0; r < n; ++r) {
    running += cover[r];
    if (running > 0) keep[order[r]] = 1;
  }
  std::vector<ClickRecord> out;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.push_back(clicks[i]);
  return out;
}

ArrivalHistogram arrival_histogram(std::span<const ClickRecord> clicks, const PulseSequence& seq,
                                   double bin_width, double time_resolution) {
  if (!(bin_width > 0) || bin_width < time_resolution * (1 - 1e-9))
    throw AnalysisError("arrival_histogram: bin_width must be >= the time resolution");
  const std::int64_t period = to_ns(seq.period);
  if (period <= 0) throw ConfigError("pulses.period: must be > 0");
  const auto n_bins = static_cast<std::size_t>(std::ceil(double(period) * 1e-9 / bin_width - 1e-9));

  ArrivalHistogram h;
  h.bin_width = bin_width;
  h.centers.resize(n_bins);
  h.counts.assign(n_bins, 0);
  for (std::size_t i = 0; i < n_bins; ++i) h.centers[i] = (double(i) + 0.5) * bin_width;
  // Whole-nanosecond bins are indexed exactly.
  const std::int64_t bw = to_ns(bin_width);
  const bool whole = std::abs(double(bw) - bin_width * 1e9) < 1e-6;
  for (const auto& c : clicks) {
    const std::int64_t tau = c.t_ns - floor_div(c.t_ns, period) * period;
    auto bin = whole ? static_cast<std::size_t>(tau / bw) : static_cast<std::size_t>(double(tau) * 1e-9 / bin_width);
    h.counts[std::min(bin, n_bins - 1)] += 1;
  }
  return h;
}

double fwhm(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 3) throw AnalysisError("fwhm: need >= 3 matching samples");
  const auto peak = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  const double half = 0.5 * y[peak];
  if (!(half > 0)) throw AnalysisError("fwhm: curve has no positive maximum");

  auto crossing = [&](std::size_t a, std::size_t b) {
    return x[a] + (half - y[a]) * (x[b] - x[a]) / (y[b] - y[a]);
  };
  std::size_t l = peak;
  while (l > 0 && y[l - 1] > half) --l;
  std::size_t r = peak;
  while (r + 1 < y.size() && y[r + 1] > half) ++r;
  if (l == 0 || r + 1 == y.size()) throw AnalysisError("fwhm: curve does not fall to half maximum");
  return crossing(r, r + 1) - crossing(l - 1, l);
}

double CorrelationHistogram::area(double center, double half_width, bool subtracted) const {
  const auto& v = subtracted && !noise_subtracted.empty() ? noise_subtracted : normalized;
  double sum = 0;
  for (std::size_t i = 0; i < lags.size(); ++i)
    if (std::abs(lags[i] - center) <= half_width + 1e-3 * bin_width) sum += v[i];
  return sum;
}

double CorrelationHistogram::excess_counts(double center, double half_width) const {
  double sum = 0;
  for (std::size_t i = 0; i < lags.size(); ++i)
    if (std::abs(lags[i] - center) <= half_width + 1e-3 * bin_width)
      sum += double(counts[i]) - noise_floor * uncorrelated_counts;
  return sum;
}

CorrelationHistogram cross_correlation(std::span<const ClickRecord> clicks, double bin_width, double max_lag,
                                       std::optional<double> acquisition_time) {
  const std::int64_t bw = to_ns(bin_width);
  if (bw < 1) throw AnalysisError("cross_correlation: bin_width must be >= 1 ns");
  if (!(max_lag >= 0)) throw AnalysisError("cross_correlation: max_lag must be >= 0");
  const auto t1 = sorted_times(clicks, Detector::D1);
  const auto t2 = sorted_times(clicks, Detector::D2);
  if (t1.empty() || t2.empty())
    throw AnalysisError("cross_correlation: normalization undefined, a detector has zero counts");

  double T = 0;
  if (acquisition_time) {
    T = *acquisition_time;
  } else {
    const auto lo = std::min(t1.front(), t2.front());
    const auto hi = std::max(t1.back(), t2.back());
    T = double(hi - lo) * 1e-9;
  }
  if (!(T >= 2 * max_lag) || !(T > 0))
    throw AnalysisError("cross_correlation: acquisition time must cover at least 2 * max_lag");

  const auto K = static_cast<std::int64_t>(std::llround(max_lag / bin_width));
  const std::int64_t reach = 2 * K * bw + bw;  // twice the half-open range limit (K + 1/2) bw

  CorrelationHistogram h;
  h.bin_width = bin_width;
  h.counts.assign(static_cast<std::size_t>(2 * K + 1), 0);
  h.lags.resize(h.counts.size());
  for (std::int64_t k = -K; k <= K; ++k) h.lags[static_cast<std::size_t>(k + K)] = double(k) * bin_width;

  // lag = t1 - t2 lies in bin k iff (k - 1/2) bw <= lag < (k + 1/2) bw.
  std::size_t first = 0;
  for (const auto a : t1) {
    while (first < t2.size() && 2 * (a - t2[first]) >= reach) ++first;
    for (std::size_t j = first; j < t2.size(); ++j) {
      const std::int64_t lag = a - t2[j];
      if (2 * lag < -reach) break;
      const std::int64_t k = floor_div(2 * lag + bw, 2 * bw);
      if (k < -K || k > K) continue;
      h.counts[static_cast<std::size_t>(k + K)] += 1;
    }
  }

  h.n_d1 = t1.size();
  h.n_d2 = t2.size();
  h.acquisition_time = T;
  h.uncorrelated_counts = double(h.n_d1) * double(h.n_d2) * bin_width / T;
  h.normalized.resize(h.counts.size());
  for (std::size_t i = 0; i < h.counts.size(); ++i) h.normalized[i] = double(h.counts[i]) / h.uncorrelated_counts;
  h.noise_subtracted = h.normalized;
  return h;
}

CorrelationHistogram subtract_noise(CorrelationHistogram h, DetectorRates dark, DetectorRates signal) {
  if (dark.d1 < 0 || dark.d2 < 0 || signal.d1 < 0 || signal.d2 < 0)
    throw AnalysisError("subtract_noise: rates must be >= 0");
  const double r1 = dark.d1 + signal.d1;
  const double r2 = dark.d2 + signal.d2;
  h.noise_floor = (r1 > 0 && r2 > 0) ? (dark.d1 * dark.d2 + dark.d1 * signal.d2 + signal.d1 * dark.d2) / (r1 * r2)
                                     : 0.0;
  h.noise_subtracted.resize(h.normalized.size());
  for (std::size_t i = 0; i < h.normalized.size(); ++i) h.noise_subtracted[i] = h.normalized[i] - h.noise_floor;
  return h;
}

std::vector<double> conditional_probabilities(const CorrelationHistogram& h, const PulseSequence& seq,
                                              int max_lag_pulses, const ConditionalCalibration& cal) {
  const double half = cal.peak_half_width.value_or(seq.pump_duration);
  if (!(half > 0)) throw ConfigError("analysis.peak_half_width: must be > 0");
  if (2 * half >= seq.period)
    throw ConfigError("analysis.peak_half_width: peak integration windows overlap (2 * half width >= period)");
  if (max_lag_pulses < 1) throw ConfigError("analysis.max_lag_pulses: must be >= 1");
  const double reach = (h.half_bins() + 0.5) * h.bin_width;
  if (max_lag_pulses * seq.period + half > reach + 1e-12)
    throw ConfigError("analysis.max_lag_pulses: side peaks extend beyond the correlation range");
  const double r = cal.splitter_ratio;
  if (!(r > 0 && r < 1)) throw ConfigError("apparatus.splitter_ratio: must lie strictly inside (0, 1)");
  if (!(cal.photons > 0)) throw AnalysisError("conditional_probabilities: no conditioning photons");

  std::vector<double> p(static_cast<std::size_t>(max_lag_pulses));
  for (int k = 1; k <= max_lag_pulses; ++k) {
    const double n_k = h.excess_counts(k * seq.period, half) + h.excess_counts(-k * seq.period, half);
    p[static_cast<std::size_t>(k - 1)] = n_k / (cal.photons * 2 * r * (1 - r));
  }
  return p;
}

double pemit_forward(double amplitude, double sigma_z, double displacement) {
  return amplitude / std::numbers::sqrt2 * std::exp(-displacement * displacement / (2 * sigma_z * sigma_z));
}

EmissionProfileFit deconvolve_pemit(std::span<const double> peak_areas, double velocity, double period) {
  if (peak_areas.size() < 3) throw AnalysisError("deconvolve_pemit: need at least 3 peak areas");
  if (!(velocity > 0) || !(period > 0)) throw AnalysisError("deconvolve_pemit: velocity and period must be > 0");
  const auto n = static_cast<Eigen::Index>(peak_areas.size());
  Eigen::VectorXd d(n), y(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    d[k] = double(k + 1) * velocity * period;
    y[k] = peak_areas[static_cast<std::size_t>(k)];
  }

  // Starting point from a straight-line fit of ln y against d^2 over the
  // positive areas.
  std::vector<std::pair<double, double>> pts;
  for (Eigen::Index k = 0; k < n; ++k)
    if (y[k] > 0) pts.emplace_back(d[k] * d[k], std::log(y[k]));
  if (pts.size() < 2) throw FitError("deconvolve_pemit: fewer than 2 positive peak areas");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [px, py] : pts) {
    sx += px;
    sy += py;
    sxx += px * px;
    sxy += px * py;
  }
  const double m = double(pts.size());
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  const double scale = d[n - 1] * d[n - 1];
  if (!(slope * scale < -1e-9))
    throw FitError("deconvolve_pemit: areas do not decrease with lag, sigma is unbounded");
  const double intercept = (sy - slope * sx) / m;

  double A = std::numbers::sqrt2 * std::exp(intercept);
  double s = std::sqrt(-1.0 / (2 * slope));

  auto residuals = [&](double a, double sig) {
    Eigen::VectorXd r(n);
    for (Eigen::Index k = 0; k < n; ++k) r[k] = pemit_forward(a, sig, d[k]) - y[k];
    return r;
  };

  // Levenberg-Marquardt on (A, sigma).
  double lambda = 1e-3;
  Eigen::VectorXd r = residuals(A, s);
  double cost = r.squaredNorm();
  int it = 0;
  bool converged = false;
  for (; it < 200; ++it) {
    Eigen::MatrixXd J(n, 2);
    for (Eigen::Index k = 0; k < n; ++k) {
      const double f = pemit_forward(A, s, d[k]);
      J(k, 0) = f / A;
      J(k, 1) = f * d[k] * d[k] / (s * s * s);
    }
    const Eigen::Matrix2d JtJ = J.transpose() * J;
    const Eigen::Vector2d g = J.transpose() * r;
    bool improved = false;
    while (lambda < 1e12) {
      Eigen::Matrix2d M = JtJ;
      M.diagonal() *= (1 + lambda);
      const Eigen::Vector2d step = M.ldlt().solve(-g);
      const double A_new = A + step[0];
      const double s_new = s + step[1];
      if (s_new > 0 && A_new > 0) {
        const Eigen::VectorXd r_new = residuals(A_new, s_new);
        const double c_new = r_new.squaredNorm();
        if (c_new <= cost) {
          const bool small = std::abs(step[0]) <= 1e-12 * A + 1e-15 && std::abs(step[1]) <= 1e-12 * s;
          const bool flat = cost - c_new <= 1e-14 * cost;
          A = A_new;
          s = s_new;
          r = r_new;
          cost = c_new;
          lambda = std::max(lambda / 10, 1e-12);
          improved = true;
          converged = small || flat;
          break;
        }
      }
      lambda *= 10;
    }
    if (!improved) {
      converged = true;  // no descent direction left: at a minimum
      break;
    }
    if (converged) break;
  }
  if (!converged || !std::isfinite(A) || !std::isfinite(s))
    throw FitError("deconvolve_pemit: no convergence after " + std::to_string(it) + " iterations (A = " +
                   std::to_string(A) + ", sigma = " + std::to_string(s) + ", cost = " + std::to_string(cost) + ")");
  if (A > 1) throw FitError("deconvolve_pemit: fitted amplitude " + std::to_string(A) + " exceeds 1");
  return {A, s, std::sqrt(cost / double(n)), it + 1};
}

Occupancy occupancy_statistics(double flux, double interaction_time) {
  if (flux < 0 || interaction_time < 0) throw AnalysisError("occupancy_statistics: inputs must be >= 0");
  const double lambda = flux * interaction_time;
  const double e = std::exp(-lambda);
  return {lambda, lambda * e, -std::expm1(-lambda) - lambda * e};
}

Occupancy sampled_occupancy(std::span<const AtomTransit> transits, double interaction_time, double run_duration,
                            int probes) {
  if (probes < 1 || !(run_duration > 0)) throw AnalysisError("sampled_occupancy: need probes and a duration");
  std::vector<double> arrivals;
  arrivals.reserve(transits.size());
  for (const auto& t : transits) arrivals.push_back(t.t_arrival);
  std::sort(arrivals.begin(), arrivals.end());
  const double half = interaction_time / 2;
  long one = 0, many = 0, total = 0;
  for (int i = 0; i < probes; ++i) {
    const double t = (i + 0.5) * run_duration / probes;
    const auto lo = std::lower_bound(arrivals.begin(), arrivals.end(), t - half);
    const auto hi = std::upper_bound(arrivals.begin(), arrivals.end(), t + half);
    const auto c = hi - lo;
    total += c;
    if (c == 1) ++one;
    if (c > 1) ++many;
  }
  return {double(total) / probes, double(one) / probes, double(many) / probes};
}

double transform_limited_linewidth(double fwhm_duration) {
  if (!(fwhm_duration > 0)) throw AnalysisError("transform_limited_linewidth: duration must be > 0");
  return 2 * std::numbers::ln2 / (std::numbers::pi * fwhm_duration);
}

}  // namespace sps
