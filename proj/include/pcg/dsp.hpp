#pragma once

#include <complex>
#include <vector>

#include "pcg/audio.hpp"

namespace pcg {

// Rate the pipeline conditions everything to. Canine heart sounds live below
// ~400 Hz, so 2 kHz keeps 5x oversampling over the analysis band.
inline constexpr int kAnalysisRateHz = 2000;
inline constexpr double kBandLoHz = 25.0;
inline constexpr double kBandHiHz = 200.0;
inline constexpr double kEnvelopeSmoothMs = 20.0;

// Nonnegative, peak-normalized salience signal derived from the band-passed
// audio; the carrier for periodicity detection.
struct Envelope {
    std::vector<double> values;
    int rate = 0;  // Hz

    double duration_s() const {
        return static_cast<double>(values.size()) / static_cast<double>(rate);
    }
};

struct Window {
    double start_s = 0.0;
    std::vector<double> values;
    int rate = 0;
};

struct NoiseProfile {
    double snr_proxy_db = 0.0;      // in-band [25,200] Hz energy vs the rest
    double clipping_fraction = 0.0;  // share of samples at |x| >= 0.999
};

// Bandlimited rate conversion (polyphase windowed sinc, low-pass at
// 0.45 * target rate before decimation). Identity when rates match.
AudioBuffer resample(const AudioBuffer& buf, int target_rate);

// Zero-phase Butterworth band-pass (order-4 sections run forward-backward),
// >= 40 dB one octave outside [lo, hi].
AudioBuffer bandpass(const AudioBuffer& buf, double lo_hz, double hi_hz);

// Shannon energy -x^2*log(x^2) of the amplitude-normalized signal, smoothed
// by a centered moving average of smooth_ms, peak-normalized.
Envelope shannon_envelope(const AudioBuffer& buf, double smooth_ms);

// Hop-spaced windows covering [0, duration]; a tail window anchored to the
// end is added when the hop grid leaves a remainder.
std::vector<Window> segment_windows(const Envelope& env, double window_s, double hop_s);

NoiseProfile estimate_noise(const AudioBuffer& buf);

// In-place iterative radix-2 FFT; size must be a power of two. Exposed for
// the detector and for test oracles.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);
size_t next_pow2(size_t n);

}  // namespace pcg
