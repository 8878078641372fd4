#pragma once

#include <iosfwd>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "wordimp/signal_io.hpp"

namespace wordimp {

struct DspConfig {
  double frame_s = 0.025;
  double hop_s = 0.010;
  double fmin_hz = 75.0;
  double fmax_hz = 500.0;
  double voicing_threshold = 0.45;
  // Per-octave penalty on longer lags, suppresses sub-harmonic picks.
  double octave_cost = 0.01;
  double band_lo_hz = 500.0;
  double band_hi_hz = 2000.0;
  double intensity_floor = 1e-10;
  double syllable_dip_db = 2.0;
};

/// Per-frame prosodic contours over one utterance. Optional entries are
/// absent on unvoiced frames.
struct FrameTrack {
  std::vector<double> frame_times;
  std::vector<std::optional<double>> pitch_hz;
  std::vector<double> voicing_strength;
  std::vector<double> rms;
  std::vector<double> band_rms;
  std::vector<std::optional<double>> tilt_db;
  std::vector<std::optional<double>> hnr_db;

  std::size_t size() const { return frame_times.size(); }
};

struct PitchEstimate {
  std::optional<double> pitch_hz;
  double strength = 0.0;
};

/// The ten summary statistics of a contour. Times are relative to the origin
/// of the `times` argument given to contour_stats.
struct ContourStats {
  double min = 0, time_of_min = 0, max = 0, time_of_max = 0, mean = 0;
  double median = 0, range = 0, slope = 0, std = 0, skewness = 0;

  static constexpr int kSize = 10;
  Eigen::Matrix<double, kSize, 1> as_vector() const;
};

FrameTrack compute_frame_track(const AudioBuffer& buf, const DspConfig& cfg = {});

/// Number of analysis frames that fit in `n_samples`; 0 when none fit.
Eigen::Index frame_count(Eigen::Index n_samples, double rate, const DspConfig& cfg = {});

/// Normalized autocorrelation pitch estimate with parabolic peak interpolation.
PitchEstimate estimate_pitch(const Eigen::Ref<const Eigen::VectorXd>& frame, double rate,
                             double fmin, double fmax, double voicing_threshold = 0.45,
                             double octave_cost = 0.01);

/// Normalized autocorrelation of the mean-removed frame at a (possibly
/// fractional) lag. Returns 0 for degenerate frames.
double normalized_autocorrelation(const Eigen::Ref<const Eigen::VectorXd>& frame, double lag);

double rms_energy(const Eigen::Ref<const Eigen::VectorXd>& frame);

/// RMS of the signal after zeroing all FFT bins outside [lo, hi].
double band_rms(const Eigen::Ref<const Eigen::VectorXd>& frame, double rate, double lo = 500.0,
                double hi = 2000.0);

/// H1-H2 in dB; absent when the second harmonic is at or above Nyquist.
std::optional<double> spectral_tilt_h1h2(const Eigen::Ref<const Eigen::VectorXd>& frame,
                                         double rate, double f0);

/// 10*log10(r/(1-r)) with r clamped to [1e-6, 1-1e-6].
double hnr_from_correlation(double r);
double hnr(const Eigen::Ref<const Eigen::VectorXd>& frame, double rate, double f0);

/// Throws DataError on empty or mismatched input.
ContourStats contour_stats(const Eigen::Ref<const Eigen::VectorXd>& values,
                           const Eigen::Ref<const Eigen::VectorXd>& times);

/// Intensity-peak syllable count over [interval.first, interval.second]
/// seconds, using frames of `track` (computed from `buf`).
int detect_syllable_nuclei(const AudioBuffer& buf, std::pair<double, double> interval,
                           const FrameTrack& track, const DspConfig& cfg = {});

/// Columnar text dump, one row per frame; unvoiced entries print as "nan".
void dump_frame_track(std::ostream& os, const FrameTrack& track);

}  // namespace wordimp
