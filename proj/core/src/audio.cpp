#include "cmls/audio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>

#include "cmls/errors.hpp"

namespace cmls {

namespace {

static_assert(std::endian::native == std::endian::little, "WAV I/O assumes a little-endian host");

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

Real decode_sample(const unsigned char* p, std::uint16_t format, std::uint16_t bits) {
  if (format == kFormatFloat) {
    if (bits == 32) {
      float f;
      std::memcpy(&f, p, 4);
      return static_cast<Real>(f);
    }
    double d;
    std::memcpy(&d, p, 8);
    return d;
  }
  switch (bits) {
    case 8: return (static_cast<Real>(p[0]) - 128.0) / 128.0;
    case 16: return static_cast<Real>(static_cast<std::int16_t>(read_u16(p))) / 32768.0;
    case 24: {
      std::int32_t v = static_cast<std::int32_t>(p[0] | (p[1] << 8) | (p[2] << 16));
      if (v & 0x800000) v -= 0x1000000;
      return static_cast<Real>(v) / 8388608.0;
    }
    default: return static_cast<Real>(static_cast<std::int32_t>(read_u32(p))) / 2147483648.0;
  }
}

}  // namespace

Audio read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ResolutionError("cannot open audio file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw ParseError(where + ": not a RIFF/WAVE file");

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = read_u32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || avail < 16) throw ParseError(where + ": truncated fmt chunk");
      format = read_u16(chunk + 8);
      channels = read_u16(chunk + 10);
      rate = read_u32(chunk + 12);
      bits = read_u16(chunk + 22);
      if (format == kFormatExtensible && size >= 40 && avail >= 40) format = read_u16(chunk + 8 + 24);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = std::min<std::size_t>(size, avail);
    }
    pos = body + size + (size & 1U);
  }
  if (format == 0) throw ParseError(where + ": missing fmt chunk");
  if (data == nullptr) throw ParseError(where + ": missing data chunk");
  if (channels == 0 || rate == 0) throw ParseError(where + ": invalid channel count or sample rate");
  const bool int_ok = format == kFormatPcm && (bits == 8 || bits == 16 || bits == 24 || bits == 32);
  const bool float_ok = format == kFormatFloat && (bits == 32 || bits == 64);
  if (!int_ok && !float_ok)
    throw ParseError(where + ": unsupported sample format " + std::to_string(format) + "/" + std::to_string(bits) + " bits");

  const std::size_t frame_bytes = static_cast<std::size_t>(bits / 8) * channels;
  const std::size_t frames = data_size / frame_bytes;
  Audio audio;
  audio.sample_rate = static_cast<int>(rate);
  audio.samples.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    Real acc = 0.0;
    for (std::uint16_t c = 0; c < channels; ++c) acc += decode_sample(data + i * frame_bytes + c * (bits / 8), format, bits);
    audio.samples[i] = acc / channels;
  }
  return audio;
}

void write_wav_pcm16(const std::filesystem::path& path, const Audio& audio) {
  if (audio.sample_rate <= 0) throw ValidationError("write_wav_pcm16: invalid sample rate");
  const auto n = static_cast<std::uint32_t>(audio.samples.size());
  const std::uint32_t data_bytes = n * 2;
  std::vector<unsigned char> out(44 + data_bytes);
  auto put32 = [&](std::size_t at, std::uint32_t v) {
    for (int k = 0; k < 4; ++k) out[at + k] = static_cast<unsigned char>((v >> (8 * k)) & 0xFF);
  };
  auto put16 = [&](std::size_t at, std::uint16_t v) {
    out[at] = static_cast<unsigned char>(v & 0xFF);
    out[at + 1] = static_cast<unsigned char>(v >> 8);
  };
  std::memcpy(out.data(), "RIFF", 4);
  put32(4, 36 + data_bytes);
  std::memcpy(out.data() + 8, "WAVEfmt ", 8);
  put32(16, 16);
  put16(20, kFormatPcm);
  put16(22, 1);
  put32(24, static_cast<std::uint32_t>(audio.sample_rate));
  put32(28, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put16(32, 2);
  put16(34, 16);
  std::memcpy(out.data() + 36, "data", 4);
  put32(40, data_bytes);
  for (std::uint32_t i = 0; i < n; ++i) {
    const Real s = std::clamp(audio.samples[i], -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(std::clamp(std::lround(s * 32768.0), -32768L, 32767L));
    put16(44 + 2 * i, static_cast<std::uint16_t>(v));
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write audio file " + path.string());
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw Error("short write to " + path.string());
}

std::vector<Real> resample(std::span<const Real> samples, int from_hz, int to_hz, ResamplerOptions opt) {
  if (from_hz <= 0 || to_hz <= 0) throw ValidationError("resample: sample rates must be positive");
  if (from_hz == to_hz) return {samples.begin(), samples.end()};
  const auto n_in = static_cast<long>(samples.size());
  const auto n_out = static_cast<long>(std::ceil(static_cast<double>(n_in) * to_hz / from_hz));
  // Cutoff as a fraction of the input Nyquist band.
  const double cutoff = opt.rolloff * std::min(1.0, static_cast<double>(to_hz) / from_hz);
  const double half_span = opt.filter_width / cutoff;
  std::vector<Real> out(static_cast<std::size_t>(std::max(0L, n_out)));
  for (long j = 0; j < n_out; ++j) {
    const double t = static_cast<double>(j) * from_hz / to_hz;
    const long lo = std::max(0L, static_cast<long>(std::ceil(t - half_span)));
    const long hi = std::min(n_in - 1, static_cast<long>(std::floor(t + half_span)));
    double acc = 0.0;
    for (long k = lo; k <= hi; ++k) {
      const double x = (t - static_cast<double>(k)) * cutoff;
      const double sinc = x == 0.0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x);
      const double w = std::cos(std::numbers::pi * x / (2.0 * opt.filter_width));
      acc += samples[static_cast<std::size_t>(k)] * cutoff * sinc * w * w;
    }
    out[static_cast<std::size_t>(j)] = acc;
  }
  return out;
}

}  // namespace cmls
