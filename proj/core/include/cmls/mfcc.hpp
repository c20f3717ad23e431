#pragma once

#include <cstdint>
#include <string>

#include "cmls/audio.hpp"
#include "cmls/tensor.hpp"

namespace cmls {

/// MFCC front-end settings. Knobs beyond window/hop/mfcc/mel counts pin the
/// torchaudio MFCC defaults (no pre-emphasis, no lifter, power spectrum,
/// HTK mel scale, 10*log10 with amin 1e-10 and top_db 80, orthonormal DCT-II)
/// so runs are reproducible. Frames are not centered: T = 1 + (n - win) / hop.
struct FeatureConfig {
  double window_ms = 25.0;
  double hop_ms = 10.0;
  int num_mfcc = 40;
  int num_mel_bins = 80;
  int sample_rate_hz = 16000;
  int n_fft = 0;            // 0: equal to the window length in samples
  double f_min_hz = 0.0;
  double f_max_hz = 0.0;    // 0: Nyquist
  double preemphasis = 0.0;
  double lifter = 0.0;
  double log_floor = 1e-10;
  double top_db = 80.0;     // <= 0 disables the dynamic-range clamp
  bool periodic_window = true;

  int window_samples() const;
  int hop_samples() const;
  int fft_size() const;

  /// Throws ValidationError unless window > hop > 0, num_mfcc <= num_mel_bins, etc.
  void validate() const;
  /// Stable textual form covering every knob; the hash is taken over it.
  std::string canonical() const;
  std::uint64_t hash() const;
};

/// Frame count for n samples; 0 when n < window.
long expected_frames(long num_samples, int window_samples, int hop_samples);

struct FeatureSequence {
  Matrix frames;  // T x num_mfcc
  std::string utterance_id;

  long length() const { return static_cast<long>(frames.rows()); }
};

/// Precomputed window, mel filterbank and DCT for one FeatureConfig.
class MfccExtractor {
 public:
  explicit MfccExtractor(FeatureConfig cfg);

  const FeatureConfig& config() const { return cfg_; }
  /// Audio at another rate is resampled to cfg.sample_rate_hz first.
  FeatureSequence operator()(const Audio& audio, std::string utterance_id = {}) const;

  const Matrix& mel_filterbank() const { return filterbank_; }  // n_freqs x n_mels
  const Matrix& dct() const { return dct_; }                    // n_mels x n_mfcc

 private:
  FeatureConfig cfg_;
  Vector window_;
  Matrix filterbank_;
  Matrix dct_;
};

FeatureSequence extract_mfcc(const Audio& audio, const FeatureConfig& cfg, std::string utterance_id = {});

}  // namespace cmls
