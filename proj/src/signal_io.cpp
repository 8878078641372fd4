#include "wordimp/signal_io.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include "wordimp/errors.hpp"

namespace wordimp {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint32_t read_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

[[noreturn]] void malformed(const std::filesystem::path& path, const std::string& why) {
  throw WavError(WavErrc::MalformedHeader, path.string() + ": malformed WAV header: " + why);
}

[[noreturn]] void unsupported(const std::filesystem::path& path, const std::string& why) {
  throw WavError(WavErrc::UnsupportedEncoding, path.string() + ": unsupported encoding: " + why);
}

double decode_sample(const std::uint8_t* p, std::uint16_t format, std::uint16_t bits) {
  if (format == kFormatFloat) {
    if (bits == 32) {
      float f;
      std::uint32_t u = read_u32(p);
      std::memcpy(&f, &u, sizeof f);
      return f;
    }
    std::uint64_t u = static_cast<std::uint64_t>(read_u32(p)) |
                      (static_cast<std::uint64_t>(read_u32(p + 4)) << 32);
    double d;
    std::memcpy(&d, &u, sizeof d);
    return d;
  }
  switch (bits) {
    case 8: return (static_cast<double>(p[0]) - 128.0) / 128.0;
    case 16: return static_cast<std::int16_t>(read_u16(p)) / 32768.0;
    case 24: {
      std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
      if (v & 0x800000) v -= 0x1000000;
      return v / 8388608.0;
    }
    case 32: return static_cast<std::int32_t>(read_u32(p)) / 2147483648.0;
  }
  return 0.0;
}

}  // namespace

double signal_power(const Eigen::Ref<const Eigen::VectorXd>& x) {
  return x.size() == 0 ? 0.0 : x.squaredNorm() / static_cast<double>(x.size());
}

AudioBuffer load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError(WavErrc::FileNotFound, path.string() + ": cannot open file");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());

  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    malformed(path, "missing RIFF/WAVE signature");
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  const std::uint8_t* data = nullptr;
  std::size_t data_len = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    std::uint32_t len = read_u32(chunk + 4);
    std::size_t body = pos + 8;
    std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (len < 16 || avail < 16) malformed(path, "short fmt chunk");
      const std::uint8_t* f = bytes.data() + body;
      format = read_u16(f);
      channels = read_u16(f + 2);
      rate = read_u32(f + 4);
      bits = read_u16(f + 14);
      if (format == kFormatExtensible) {
        if (len < 40 || avail < 40) malformed(path, "short extensible fmt chunk");
        format = read_u16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      // Streams written without a final length report 0 or 0xFFFFFFFF.
      data_len = (len == 0 || len > avail) ? avail : len;
      break;
    }
    pos = body + len + (len & 1u);
  }

  if (!have_fmt) malformed(path, "no fmt chunk");
  if (data == nullptr) malformed(path, "no data chunk");
  if (channels == 0) malformed(path, "zero channels");
  if (rate == 0) malformed(path, "zero sample rate");

  if (format == kFormatPcm) {
    if (bits != 8 && bits != 16 && bits != 24 && bits != 32) {
      unsupported(path, std::to_string(bits) + "-bit integer PCM");
    }
  } else if (format == kFormatFloat) {
    if (bits != 32 && bits != 64) unsupported(path, std::to_string(bits) + "-bit float");
  } else {
    unsupported(path, "format tag " + std::to_string(format));
  }

  const std::size_t sample_bytes = bits / 8;
  const std::size_t frame_bytes = sample_bytes * channels;
  const std::size_t frames = data_len / frame_bytes;

  AudioBuffer buf;
  buf.sample_rate = rate;
  buf.samples.resize(static_cast<Eigen::Index>(frames));
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) {
      acc += decode_sample(data + i * frame_bytes + c * sample_bytes, format, bits);
    }
    buf.samples[static_cast<Eigen::Index>(i)] = acc / channels;
  }
  return buf;
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& buf, int bits_per_sample) {
  if (bits_per_sample != 16 && bits_per_sample != 24) {
    throw ConfigError("write_wav supports 16- or 24-bit output, got " +
                      std::to_string(bits_per_sample));
  }
  if (buf.sample_rate <= 0) throw DataError("write_wav: non-positive sample rate");

  const auto rate = static_cast<std::uint32_t>(std::lround(buf.sample_rate));
  const std::uint32_t block = static_cast<std::uint32_t>(bits_per_sample / 8);
  const auto data_len = static_cast<std::uint32_t>(buf.samples.size() * block);

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_len);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put_u32(out, 36 + data_len);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, rate);
  put_u32(out, rate * block);
  put_u16(out, static_cast<std::uint16_t>(block));
  put_u16(out, static_cast<std::uint16_t>(bits_per_sample));
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put_u32(out, data_len);

  const double scale = bits_per_sample == 16 ? 32768.0 : 8388608.0;
  const double lo = -scale, hi = scale - 1.0;
  for (Eigen::Index i = 0; i < buf.samples.size(); ++i) {
    const double v = std::clamp(std::round(buf.samples[i] * scale), lo, hi);
    const auto s = static_cast<std::int32_t>(v);
    for (std::uint32_t b = 0; b < block; ++b) {
      out.push_back(static_cast<std::uint8_t>((static_cast<std::uint32_t>(s) >> (8 * b)) & 0xFF));
    }
  }

  std::ofstream os(path, std::ios::binary);
  if (!os) throw WavError(WavErrc::WriteFailed, path.string() + ": cannot open for writing");
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!os) throw WavError(WavErrc::WriteFailed, path.string() + ": write failed");
}

AudioBuffer slice(const AudioBuffer& buf, double start, double end) {
  const double dur = buf.duration();
  // Timestamps are often rounded to the millisecond; tolerate a hair past the end.
  constexpr double kSlack = 1e-9;
  if (!(start >= 0.0) || !(start < end) || end > dur + kSlack) {
    throw DataError("slice: interval [" + std::to_string(start) + ", " + std::to_string(end) +
                    ") outside buffer of " + std::to_string(dur) + " s");
  }
  const auto first = static_cast<Eigen::Index>(std::floor(start * buf.sample_rate));
  const auto last = std::min<Eigen::Index>(
      static_cast<Eigen::Index>(std::floor(end * buf.sample_rate)), buf.samples.size());
  AudioBuffer out;
  out.sample_rate = buf.sample_rate;
  out.samples = buf.samples.segment(first, std::max<Eigen::Index>(0, last - first));
  return out;
}

AudioBuffer add_white_noise(const AudioBuffer& buf, double snr_db, std::uint64_t seed) {
  if (!std::isfinite(snr_db)) throw ConfigError("add_white_noise: snr_db must be finite");
  const double p_signal = signal_power(buf.samples);
  if (p_signal <= 0.0) throw DataError("add_white_noise: input signal has zero power");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd noise(buf.samples.size());
  for (Eigen::Index i = 0; i < noise.size(); ++i) noise[i] = gauss(rng);

  const double p_target = p_signal / std::pow(10.0, snr_db / 10.0);
  const double p_raw = signal_power(noise);
  AudioBuffer out;
  out.sample_rate = buf.sample_rate;
  out.samples = buf.samples + noise * std::sqrt(p_target / p_raw);
  return out;
}

}  // namespace wordimp
