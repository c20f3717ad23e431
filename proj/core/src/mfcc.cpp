#include "cmls/mfcc.hpp"

#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>

#include <unsupported/Eigen/FFT>

#include "cmls/errors.hpp"

namespace cmls {

namespace {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

}  // namespace

int FeatureConfig::window_samples() const {
  return static_cast<int>(std::lround(window_ms * sample_rate_hz / 1000.0));
}
int FeatureConfig::hop_samples() const { return static_cast<int>(std::lround(hop_ms * sample_rate_hz / 1000.0)); }
int FeatureConfig::fft_size() const { return n_fft > 0 ? n_fft : window_samples(); }

void FeatureConfig::validate() const {
  if (sample_rate_hz <= 0) throw ValidationError("feature config: sample_rate_hz must be positive");
  if (!(hop_ms > 0.0) || !(window_ms > hop_ms)) throw ValidationError("feature config: require window_ms > hop_ms > 0");
  if (hop_samples() < 1) throw ValidationError("feature config: hop shorter than one sample");
  if (num_mfcc < 1 || num_mel_bins < 1 || num_mfcc > num_mel_bins)
    throw ValidationError("feature config: require 1 <= num_mfcc <= num_mel_bins");
  if (fft_size() < window_samples()) throw ValidationError("feature config: n_fft shorter than the window");
  const double nyquist = sample_rate_hz / 2.0;
  const double fmax = f_max_hz > 0 ? f_max_hz : nyquist;
  if (f_min_hz < 0 || fmax <= f_min_hz || fmax > nyquist) throw ValidationError("feature config: invalid mel band edges");
  if (!(log_floor > 0)) throw ValidationError("feature config: log_floor must be positive");
  if (preemphasis < 0 || preemphasis >= 1) throw ValidationError("feature config: preemphasis must be in [0, 1)");
}

std::string FeatureConfig::canonical() const {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "mfcc/v1;window_ms=%.17g;hop_ms=%.17g;num_mfcc=%d;num_mel_bins=%d;sample_rate_hz=%d;n_fft=%d;"
                "f_min_hz=%.17g;f_max_hz=%.17g;preemphasis=%.17g;lifter=%.17g;log_floor=%.17g;top_db=%.17g;"
                "window=hamming;periodic=%d;power=2;mel=htk;dct=ortho;center=0",
                window_ms, hop_ms, num_mfcc, num_mel_bins, sample_rate_hz, fft_size(), f_min_hz, f_max_hz, preemphasis,
                lifter, log_floor, top_db, periodic_window ? 1 : 0);
  return buf;
}

std::uint64_t FeatureConfig::hash() const { return fnv1a(canonical()); }

long expected_frames(long num_samples, int window_samples, int hop_samples) {
  if (num_samples < window_samples) return 0;
  return 1 + (num_samples - window_samples) / hop_samples;
}

MfccExtractor::MfccExtractor(FeatureConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  const int win = cfg_.window_samples();
  const int nfft = cfg_.fft_size();
  const int n_freqs = nfft / 2 + 1;
  const int n_mels = cfg_.num_mel_bins;

  window_.resize(win);
  const double denom = cfg_.periodic_window ? win : (win - 1);
  for (int n = 0; n < win; ++n) window_(n) = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * n / denom);

  const double fmax = cfg_.f_max_hz > 0 ? cfg_.f_max_hz : cfg_.sample_rate_hz / 2.0;
  const double m_min = hz_to_mel(cfg_.f_min_hz), m_max = hz_to_mel(fmax);
  std::vector<double> f_pts(static_cast<std::size_t>(n_mels + 2));
  for (int i = 0; i < n_mels + 2; ++i) f_pts[i] = mel_to_hz(m_min + (m_max - m_min) * i / (n_mels + 1));
  filterbank_ = Matrix::Zero(n_freqs, n_mels);
  for (int k = 0; k < n_freqs; ++k) {
    const double f = n_freqs > 1 ? (cfg_.sample_rate_hz / 2.0) * k / (n_freqs - 1) : 0.0;
    for (int m = 0; m < n_mels; ++m) {
      const double down = (f - f_pts[m]) / (f_pts[m + 1] - f_pts[m]);
      const double up = (f_pts[m + 2] - f) / (f_pts[m + 2] - f_pts[m + 1]);
      filterbank_(k, m) = std::max(0.0, std::min(down, up));
    }
  }

  dct_.resize(n_mels, cfg_.num_mfcc);
  for (int n = 0; n < n_mels; ++n) {
    for (int k = 0; k < cfg_.num_mfcc; ++k) {
      const double s = k == 0 ? std::sqrt(1.0 / n_mels) : std::sqrt(2.0 / n_mels);
      dct_(n, k) = s * std::cos(std::numbers::pi / n_mels * (n + 0.5) * k);
    }
  }
}

FeatureSequence MfccExtractor::operator()(const Audio& audio, std::string utterance_id) const {
  if (audio.sample_rate <= 0) throw ValidationError("extract_mfcc: audio has no sample rate");
  for (Real s : audio.samples)
    if (!std::isfinite(s)) throw ValidationError("extract_mfcc: non-finite sample in audio");

  std::vector<Real> x = audio.sample_rate == cfg_.sample_rate_hz
                            ? audio.samples
                            : resample(audio.samples, audio.sample_rate, cfg_.sample_rate_hz);
  if (cfg_.preemphasis > 0) {
    for (std::size_t i = x.size(); i-- > 1;) x[i] -= cfg_.preemphasis * x[i - 1];
  }

  const int win = cfg_.window_samples();
  const int hop = cfg_.hop_samples();
  const int nfft = cfg_.fft_size();
  const int n_freqs = nfft / 2 + 1;
  const long frames = expected_frames(static_cast<long>(x.size()), win, hop);
  if (frames == 0)
    throw ValidationError("extract_mfcc: audio shorter than one window (" + std::to_string(x.size()) + " < " +
                          std::to_string(win) + " samples)");

  Eigen::FFT<double> fft;
  std::vector<double> buf(static_cast<std::size_t>(nfft), 0.0);
  std::vector<std::complex<double>> spec;
  const int offset = (nfft - win) / 2;
  Matrix power(frames, n_freqs);
  for (long t = 0; t < frames; ++t) {
    std::fill(buf.begin(), buf.end(), 0.0);
    const std::size_t start = static_cast<std::size_t>(t) * static_cast<std::size_t>(hop);
    for (int n = 0; n < win; ++n) buf[static_cast<std::size_t>(offset + n)] = x[start + n] * window_(n);
    fft.fwd(spec, buf);
    for (int k = 0; k < n_freqs; ++k) power(t, k) = std::norm(spec[static_cast<std::size_t>(k)]);
  }

  Matrix mel_db = (power * filterbank_).unaryExpr([this](Real v) { return 10.0 * std::log10(std::max(v, cfg_.log_floor)); });
  if (cfg_.top_db > 0) {
    const Real floor = mel_db.maxCoeff() - cfg_.top_db;
    mel_db = mel_db.cwiseMax(floor);
  }
  FeatureSequence out;
  out.frames = mel_db * dct_;
  if (cfg_.lifter > 0) {
    for (int k = 0; k < cfg_.num_mfcc; ++k)
      out.frames.col(k) *= 1.0 + 0.5 * cfg_.lifter * std::sin(std::numbers::pi * k / cfg_.lifter);
  }
  out.utterance_id = std::move(utterance_id);
  return out;
}

FeatureSequence extract_mfcc(const Audio& audio, const FeatureConfig& cfg, std::string utterance_id) {
  return MfccExtractor(cfg)(audio, std::move(utterance_id));
}

}  // namespace cmls
