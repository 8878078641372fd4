#pragma once

#include <cstdint>
#include <filesystem>

#include <Eigen/Core>

namespace wordimp {

/// Mono PCM signal in 64-bit reals, nominal range [-1, 1].
struct AudioBuffer {
  Eigen::VectorXd samples;
  double sample_rate = 0.0;

  Eigen::Index size() const { return samples.size(); }
  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

/// Decodes a RIFF/WAVE file (8/16/24/32-bit integer PCM or 32/64-bit float).
/// Multi-channel input is averaged down to one channel. Throws WavError.
AudioBuffer load_wav(const std::filesystem::path& path);

/// Writes a mono buffer as PCM. Samples are clipped to [-1, 1].
void write_wav(const std::filesystem::path& path, const AudioBuffer& buf,
               int bits_per_sample = 16);

/// Samples in [floor(start*rate), floor(end*rate)). Throws DataError when
/// the interval is empty or falls outside the buffer.
AudioBuffer slice(const AudioBuffer& buf, double start, double end);

/// Adds i.i.d. Gaussian noise scaled so that the realised SNR (mean-square
/// ratio) equals `snr_db` exactly. Throws DataError on all-zero input.
AudioBuffer add_white_noise(const AudioBuffer& buf, double snr_db, std::uint64_t seed);

/// Mean squared amplitude.
double signal_power(const Eigen::Ref<const Eigen::VectorXd>& x);

}  // namespace wordimp
