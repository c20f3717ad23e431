#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "cmls/tensor.hpp"

namespace cmls {

/// Mono PCM samples in [-1, 1] with their sample rate.
struct Audio {
  std::vector<Real> samples;
  int sample_rate = 0;

  double duration_seconds() const { return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0; }
};

/// Reads RIFF/WAVE: integer PCM (8/16/24/32-bit) or IEEE float (32/64-bit),
/// including WAVE_FORMAT_EXTENSIBLE. Multi-channel input is averaged to mono.
Audio read_wav(const std::filesystem::path& path);

/// Writes 16-bit mono PCM. Samples are clamped to [-1, 1].
void write_wav_pcm16(const std::filesystem::path& path, const Audio& audio);

/// Band-limited resampling by Hann-windowed sinc interpolation.
///
/// Output length is ceil(n * to / from). The low-pass cutoff is
/// rolloff * min(from, to) / 2 and the kernel spans filter_width zero
/// crossings of the cutoff on each side.
struct ResamplerOptions {
  int filter_width = 6;
  double rolloff = 0.99;
};
std::vector<Real> resample(std::span<const Real> samples, int from_hz, int to_hz, ResamplerOptions options = {});

}  // namespace cmls
