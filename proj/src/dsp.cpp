#include "wordimp/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <ostream>
#include <string>

#include <unsupported/Eigen/FFT>

#include "wordimp/errors.hpp"

namespace wordimp {
namespace {

using ComplexVec = std::vector<std::complex<double>>;

double bin_frequency(std::size_t k, std::size_t n, double rate) {
  const std::size_t folded = k <= n / 2 ? k : n - k;
  return static_cast<double>(folded) * rate / static_cast<double>(n);
}

Eigen::VectorXd hann(Eigen::Index n) {
  Eigen::VectorXd w(n);
  if (n == 1) {
    w[0] = 1.0;
    return w;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                                static_cast<double>(n - 1));
  }
  return w;
}

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Normalized cross-correlation between x[0, n-lag) and x[lag, n).
double correlation_at(const Eigen::VectorXd& x, Eigen::Index lag) {
  const Eigen::Index m = x.size() - lag;
  if (lag < 0 || m <= 0) return 0.0;
  const auto head = x.head(m);
  const auto tail = x.segment(lag, m);
  const double e = head.squaredNorm() * tail.squaredNorm();
  if (e <= 0.0) return 0.0;
  return head.dot(tail) / std::sqrt(e);
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

Eigen::Matrix<double, ContourStats::kSize, 1> ContourStats::as_vector() const {
  Eigen::Matrix<double, kSize, 1> v;
  v << min, time_of_min, max, time_of_max, mean, median, range, slope, std, skewness;
  return v;
}

double rms_energy(const Eigen::Ref<const Eigen::VectorXd>& frame) {
  return std::sqrt(signal_power(frame));
}

double band_rms(const Eigen::Ref<const Eigen::VectorXd>& frame, double rate, double lo,
                double hi) {
  const std::size_t n = static_cast<std::size_t>(frame.size());
  if (n == 0) return 0.0;
  Eigen::FFT<double> fft;
  ComplexVec in(n), spec;
  for (std::size_t i = 0; i < n; ++i) in[i] = frame[static_cast<Eigen::Index>(i)];
  fft.fwd(spec, in);
  for (std::size_t k = 0; k < n; ++k) {
    const double f = bin_frequency(k, n, rate);
    if (f < lo || f > hi) spec[k] = 0.0;
  }
  ComplexVec band;
  fft.inv(band, spec);
  double acc = 0.0;
  for (const auto& c : band) acc += c.real() * c.real();
  return std::sqrt(acc / static_cast<double>(n));
}

double normalized_autocorrelation(const Eigen::Ref<const Eigen::VectorXd>& frame, double lag) {
  if (frame.size() < 2 || !(lag >= 0.0)) return 0.0;
  const Eigen::VectorXd x = frame.array() - frame.mean();
  const auto lo = static_cast<Eigen::Index>(std::floor(lag));
  const double frac = lag - static_cast<double>(lo);
  const double r0 = correlation_at(x, lo);
  if (frac == 0.0) return r0;
  return (1.0 - frac) * r0 + frac * correlation_at(x, lo + 1);
}

PitchEstimate estimate_pitch(const Eigen::Ref<const Eigen::VectorXd>& frame, double rate,
                             double fmin, double fmax, double voicing_threshold,
                             double octave_cost) {
  PitchEstimate est;
  const Eigen::Index n = frame.size();
  if (n < 4) return est;
  const Eigen::VectorXd x = frame.array() - frame.mean();
  if (x.squaredNorm() <= 0.0) return est;

  const Eigen::Index min_lag = std::max<Eigen::Index>(2, static_cast<Eigen::Index>(std::ceil(rate / fmax)));
  const Eigen::Index max_lag = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(rate / fmin)),
                                                      (2 * n) / 3);
  if (max_lag <= min_lag) return est;

  // One extra lag on each side so interior maxima at the range ends are visible.
  const Eigen::Index first = min_lag - 1;
  const Eigen::Index last = max_lag + 1;
  Eigen::VectorXd r(last - first + 1);
  for (Eigen::Index lag = first; lag <= last; ++lag) r[lag - first] = correlation_at(x, lag);

  Eigen::Index best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (Eigen::Index lag = min_lag; lag <= max_lag; ++lag) {
    const double v = r[lag - first];
    if (v < r[lag - first - 1] || v < r[lag - first + 1]) continue;
    const double score = v - octave_cost * std::log2(static_cast<double>(lag) / min_lag);
    if (score > best_score) {
      best_score = score;
      best = lag;
    }
  }
  if (best < 0) {
    Eigen::Index idx;
    r.segment(1, max_lag - min_lag + 1).maxCoeff(&idx);
    best = min_lag + idx;
  }

  const double ym = r[best - first - 1], y0 = r[best - first], yp = r[best - first + 1];
  const double denom = ym - 2.0 * y0 + yp;
  double delta = 0.0, peak = y0;
  if (denom < 0.0) {
    delta = std::clamp(0.5 * (ym - yp) / denom, -0.5, 0.5);
    peak = y0 - 0.25 * (ym - yp) * delta;
  }
  est.strength = std::clamp(peak, 0.0, 1.0);
  if (est.strength >= voicing_threshold) {
    est.pitch_hz = std::clamp(rate / (static_cast<double>(best) + delta), fmin, fmax);
  }
  return est;
}

std::optional<double> spectral_tilt_h1h2(const Eigen::Ref<const Eigen::VectorXd>& frame,
                                         double rate, double f0) {
  if (!(f0 > 0.0) || 2.0 * f0 >= rate / 2.0 || frame.size() < 2) return std::nullopt;
  const Eigen::Index n = frame.size();
  const std::size_t nfft = next_pow2(std::max<std::size_t>(8 * static_cast<std::size_t>(n), 8192));
  const Eigen::VectorXd w = hann(n);
  const Eigen::VectorXd x = (frame.array() - frame.mean()) * w.array();

  std::vector<double> padded(nfft, 0.0);
  for (Eigen::Index i = 0; i < n; ++i) padded[static_cast<std::size_t>(i)] = x[i];
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::HalfSpectrum);
  ComplexVec spec;
  fft.fwd(spec, padded);

  auto peak_near = [&](double f) {
    const double df = rate / static_cast<double>(nfft);
    const auto lo = static_cast<std::size_t>(std::max(0.0, std::ceil((f - f0 / 4.0) / df)));
    const auto hi = std::min(spec.size() - 1, static_cast<std::size_t>(std::floor((f + f0 / 4.0) / df)));
    double best = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) best = std::max(best, std::abs(spec[k]));
    return best;
  };
  const double h1 = peak_near(f0);
  const double h2 = peak_near(2.0 * f0);
  if (h1 <= 0.0 || h2 <= 0.0) return std::nullopt;
  return 20.0 * std::log10(h1 / h2);
}

double hnr_from_correlation(double r) {
  r = std::clamp(r, 1e-6, 1.0 - 1e-6);
  return 10.0 * std::log10(r / (1.0 - r));
}

double hnr(const Eigen::Ref<const Eigen::VectorXd>& frame, double rate, double f0) {
  return hnr_from_correlation(normalized_autocorrelation(frame, rate / f0));
}

ContourStats contour_stats(const Eigen::Ref<const Eigen::VectorXd>& values,
                           const Eigen::Ref<const Eigen::VectorXd>& times) {
  if (values.size() == 0) throw DataError("contour_stats: empty contour");
  if (values.size() != times.size()) throw DataError("contour_stats: values/times length mismatch");
  for (Eigen::Index i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) throw DataError("contour_stats: times must be strictly increasing");
  }

  const Eigen::Index n = values.size();
  const double count = static_cast<double>(n);
  ContourStats s;
  Eigen::Index imin, imax;
  s.min = values.minCoeff(&imin);
  s.max = values.maxCoeff(&imax);
  s.time_of_min = times[imin];
  s.time_of_max = times[imax];
  s.range = s.max - s.min;
  s.mean = values.mean();
  s.median = median_of(std::vector<double>(values.begin(), values.end()));

  const Eigen::ArrayXd dv = values.array() - s.mean;
  const double m2 = dv.square().sum() / count;
  const double scale = values.cwiseAbs().maxCoeff();
  if (m2 > std::pow(1e-12 * scale, 2)) {
    const double m3 = dv.cube().sum() / count;
    s.std = std::sqrt(m2);
    s.skewness = m3 / std::pow(m2, 1.5);
  }

  if (n > 1) {
    const Eigen::ArrayXd dt = times.array() - times.mean();
    const double stt = dt.square().sum();
    if (stt > 0.0 && s.std > 0.0) s.slope = (dt * dv).sum() / stt;
  }
  return s;
}

Eigen::Index frame_count(Eigen::Index n_samples, double rate, const DspConfig& cfg) {
  const auto frame = static_cast<Eigen::Index>(std::lround(cfg.frame_s * rate));
  const auto hop = static_cast<Eigen::Index>(std::lround(cfg.hop_s * rate));
  if (frame <= 0 || hop <= 0 || n_samples < frame) return 0;
  return (n_samples - frame) / hop + 1;
}

FrameTrack compute_frame_track(const AudioBuffer& buf, const DspConfig& cfg) {
  const double rate = buf.sample_rate;
  const Eigen::Index n_frames = frame_count(buf.size(), rate, cfg);
  if (n_frames == 0) {
    throw DataError("compute_frame_track: buffer of " + std::to_string(buf.size()) +
                    " samples is shorter than one analysis frame");
  }
  const auto frame = static_cast<Eigen::Index>(std::lround(cfg.frame_s * rate));
  const auto hop = static_cast<Eigen::Index>(std::lround(cfg.hop_s * rate));

  FrameTrack track;
  const auto m = static_cast<std::size_t>(n_frames);
  track.frame_times.resize(m);
  track.pitch_hz.resize(m);
  track.voicing_strength.resize(m);
  track.rms.resize(m);
  track.band_rms.resize(m);
  track.tilt_db.resize(m);
  track.hnr_db.resize(m);

  for (std::size_t i = 0; i < m; ++i) {
    const Eigen::Index start = static_cast<Eigen::Index>(i) * hop;
    const auto x = buf.samples.segment(start, frame);
    track.frame_times[i] = (static_cast<double>(start) + 0.5 * static_cast<double>(frame)) / rate;
    track.rms[i] = rms_energy(x);
    track.band_rms[i] = band_rms(x, rate, cfg.band_lo_hz, cfg.band_hi_hz);
    const PitchEstimate p =
        estimate_pitch(x, rate, cfg.fmin_hz, cfg.fmax_hz, cfg.voicing_threshold, cfg.octave_cost);
    track.voicing_strength[i] = p.strength;
    track.pitch_hz[i] = p.pitch_hz;
    if (p.pitch_hz) {
      track.tilt_db[i] = spectral_tilt_h1h2(x, rate, *p.pitch_hz);
      track.hnr_db[i] = hnr(x, rate, *p.pitch_hz);
    }
  }
  return track;
}

int detect_syllable_nuclei(const AudioBuffer& buf, std::pair<double, double> interval,
                           const FrameTrack& track, const DspConfig& cfg) {
  const auto [lo, hi] = interval;
  if (lo < 0.0 || hi > buf.duration() + 1e-9) {
    throw DataError("detect_syllable_nuclei: interval outside buffer");
  }
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < track.size(); ++i) {
    if (track.frame_times[i] >= lo && track.frame_times[i] <= hi) idx.push_back(i);
  }
  if (idx.empty()) return 0;

  std::vector<double> db(idx.size());
  for (std::size_t k = 0; k < idx.size(); ++k) {
    db[k] = 20.0 * std::log10(track.rms[idx[k]] + cfg.intensity_floor);
  }
  const double threshold = median_of(db);
  const std::size_t n = db.size();

  // Local maxima, with a flat run counted once (at its first frame).
  std::vector<std::size_t> candidates;
  for (std::size_t k = 0; k < n;) {
    std::size_t end = k;
    while (end + 1 < n && db[end + 1] == db[k]) ++end;
    const bool left_ok = k == 0 || db[k - 1] < db[k];
    const bool right_ok = end + 1 == n || db[end + 1] < db[k];
    if (left_ok && right_ok) candidates.push_back(k);
    k = end + 1;
  }

  std::vector<std::size_t> accepted;
  for (std::size_t c : candidates) {
    if (db[c] < threshold || !track.pitch_hz[idx[c]]) continue;
    if (!accepted.empty()) {
      const std::size_t p = accepted.back();
      const double dip = *std::min_element(db.begin() + static_cast<std::ptrdiff_t>(p),
                                           db.begin() + static_cast<std::ptrdiff_t>(c) + 1);
      const double lower = std::min(db[p], db[c]);
      if (lower - dip < cfg.syllable_dip_db) {
        if (db[c] > db[p]) accepted.back() = c;
        continue;
      }
    }
    accepted.push_back(c);
  }
  return static_cast<int>(accepted.size());
}

void dump_frame_track(std::ostream& os, const FrameTrack& track) {
  auto opt = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string("nan");
  };
  os << "time_s\tpitch_hz\tvoicing\trms\tband_rms\ttilt_db\thnr_db\n";
  for (std::size_t i = 0; i < track.size(); ++i) {
    os << track.frame_times[i] << '\t' << opt(track.pitch_hz[i]) << '\t'
       << track.voicing_strength[i] << '\t' << track.rms[i] << '\t' << track.band_rms[i] << '\t'
       << opt(track.tilt_db[i]) << '\t' << opt(track.hnr_db[i]) << '\n';
  }
}

}  // namespace wordimp
