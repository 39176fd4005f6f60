#include "pcg/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace pcg {

namespace {

constexpr double kPi = std::numbers::pi;

// ---- resampling ----

double sinc(double x) {
    if (std::abs(x) < 1e-12) return 1.0;
    return std::sin(kPi * x) / (kPi * x);
}

double blackman(double v) {  // v in [-1, 1]
    return 0.42 + 0.5 * std::cos(kPi * v) + 0.08 * std::cos(2.0 * kPi * v);
}

// Kernel tap at offset u (input samples) for normalized cutoff a (cycles per
// input sample) and half-width w.
double kernel_tap(double u, double a, double w) {
    if (std::abs(u) >= w) return 0.0;
    return 2.0 * a * sinc(2.0 * a * u) * blackman(u / w);
}

constexpr int kSincZeroCrossings = 16;

}  // namespace

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) fail(Errc::InvalidArgument, "FFT size must be a power of two");

    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * kPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<double> u = a[i + k];
                std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        for (auto& x : a) x /= static_cast<double>(n);
    }
}

AudioBuffer resample(const AudioBuffer& buf, int target_rate) {
    if (target_rate < 1000) fail(Errc::InvalidRate, "target rate below 1000 Hz");
    if (buf.sample_rate <= 0) fail(Errc::InvalidRate, "source rate must be positive");
    if (buf.samples.empty()) fail(Errc::EmptyInput, "resample of empty buffer");
    if (target_rate == buf.sample_rate) return buf;

    const int src = buf.sample_rate;
    const int dst = target_rate;
    const std::int64_t n_in = static_cast<std::int64_t>(buf.samples.size());
    const std::int64_t n_out =
        std::llround(static_cast<double>(n_in) * static_cast<double>(dst) / static_cast<double>(src));

    // Cutoff at 0.45x the lower of the two rates, expressed per input sample.
    const double cutoff_hz = 0.45 * static_cast<double>(std::min(src, dst));
    const double a = cutoff_hz / static_cast<double>(src);
    const double w = kSincZeroCrossings / (2.0 * a);
    const int half = static_cast<int>(std::ceil(w));

    // Output grid in input-sample units advances by M/L per sample, so the
    // fractional part cycles through L phases; precompute one kernel per phase.
    const int g = static_cast<int>(std::gcd(src, dst));
    const std::int64_t up = dst / g;    // L
    const std::int64_t down = src / g;  // M

    std::vector<std::vector<double>> phase_kernels;
    const bool cache_phases = up <= 4096;
    if (cache_phases) {
        phase_kernels.resize(static_cast<size_t>(up));
        for (std::int64_t p = 0; p < up; ++p) {
            const double frac =
                static_cast<double>(p * down % up) / static_cast<double>(up);
            auto& k = phase_kernels[static_cast<size_t>(p)];
            k.resize(static_cast<size_t>(2 * half + 1));
            double sum = 0.0;
            for (int j = -half; j <= half; ++j) {
                double tap = kernel_tap(static_cast<double>(j) - frac, a, w);
                k[static_cast<size_t>(j + half)] = tap;
                sum += tap;
            }
            // unit DC gain per phase
            if (sum != 0.0)
                for (double& t : k) t /= sum;
        }
    }

    AudioBuffer out;
    out.sample_rate = dst;
    out.samples.resize(static_cast<size_t>(n_out));
    for (std::int64_t i = 0; i < n_out; ++i) {
        const std::int64_t num = i * down;
        const std::int64_t base = num / up;  // integer part of input position
        double acc = 0.0;
        if (cache_phases) {
            const auto& k = phase_kernels[static_cast<size_t>(i % up)];
            for (int j = -half; j <= half; ++j) {
                const std::int64_t idx = base + j;
                if (idx < 0 || idx >= n_in) continue;
                acc += buf.samples[static_cast<size_t>(idx)] * k[static_cast<size_t>(j + half)];
            }
        } else {
            const double t = static_cast<double>(num) / static_cast<double>(up);
            const double frac = t - static_cast<double>(base);
            double sum = 0.0, val = 0.0;
            for (int j = -half; j <= half; ++j) {
                const double tap = kernel_tap(static_cast<double>(j) - frac, a, w);
                sum += tap;
                const std::int64_t idx = base + j;
                if (idx < 0 || idx >= n_in) continue;
                val += buf.samples[static_cast<size_t>(idx)] * tap;
            }
            acc = sum != 0.0 ? val / sum : 0.0;
        }
        out.samples[static_cast<size_t>(i)] = acc;
    }
    return out;
}

// ---- zero-phase band-pass ----

namespace {

struct Biquad {
    double b0, b1, b2, a1, a2;
};

// RBJ cookbook sections; a pair of these with Butterworth Q values gives an
// order-4 response.
Biquad design_lowpass(double fc, double fs, double q) {
    const double w0 = 2.0 * kPi * fc / fs;
    const double cw = std::cos(w0), sw = std::sin(w0);
    const double alpha = sw / (2.0 * q);
    const double a0 = 1.0 + alpha;
    return {(1.0 - cw) / 2.0 / a0, (1.0 - cw) / a0, (1.0 - cw) / 2.0 / a0, -2.0 * cw / a0,
            (1.0 - alpha) / a0};
}

Biquad design_highpass(double fc, double fs, double q) {
    const double w0 = 2.0 * kPi * fc / fs;
    const double cw = std::cos(w0), sw = std::sin(w0);
    const double alpha = sw / (2.0 * q);
    const double a0 = 1.0 + alpha;
    return {(1.0 + cw) / 2.0 / a0, -(1.0 + cw) / a0, (1.0 + cw) / 2.0 / a0, -2.0 * cw / a0,
            (1.0 - alpha) / a0};
}

constexpr double kButterQ1 = 0.5411961001461970;  // poles at 22.5 deg
constexpr double kButterQ2 = 1.3065629648763766;  // poles at 67.5 deg

void filter_in_place(std::vector<double>& x, const Biquad& f) {
    double z1 = 0.0, z2 = 0.0;  // transposed direct form II
    for (double& v : x) {
        const double in = v;
        const double out = f.b0 * in + z1;
        z1 = f.b1 * in - f.a1 * out + z2;
        z2 = f.b2 * in - f.a2 * out;
        v = out;
    }
}

}  // namespace

AudioBuffer bandpass(const AudioBuffer& buf, double lo_hz, double hi_hz) {
    const double nyquist = buf.sample_rate / 2.0;
    if (!(lo_hz > 0.0 && lo_hz < hi_hz && hi_hz < nyquist))
        fail(Errc::InvalidBand, "band must satisfy 0 < lo < hi < rate/2");
    if (buf.samples.empty()) fail(Errc::EmptyInput, "bandpass of empty buffer");

    const double fs = static_cast<double>(buf.sample_rate);
    const Biquad sections[4] = {
        design_highpass(lo_hz, fs, kButterQ1),
        design_highpass(lo_hz, fs, kButterQ2),
        design_lowpass(hi_hz, fs, kButterQ1),
        design_lowpass(hi_hz, fs, kButterQ2),
    };

    // Mirror the signal into the pads with a cosine fade to silence. The
    // junctions stay smooth (the fade has zero slope there) and the padded
    // signal starts and ends at rest, so zero filter state is exact; the
    // pads absorb every edge transient. Pad length covers the ring-down of
    // the low cutoff.
    const size_t n = buf.samples.size();
    const size_t pad = std::min(n - 1, static_cast<size_t>(std::llround(6.0 * fs / lo_hz)));

    std::vector<double> x;
    x.reserve(n + 2 * pad);
    for (size_t i = pad; i >= 1; --i) {
        const double w = 0.5 + 0.5 * std::cos(kPi * static_cast<double>(i) / static_cast<double>(pad));
        x.push_back(w * buf.samples[i]);
    }
    x.insert(x.end(), buf.samples.begin(), buf.samples.end());
    for (size_t i = 1; i <= pad; ++i) {
        const double w = 0.5 + 0.5 * std::cos(kPi * static_cast<double>(i) / static_cast<double>(pad));
        x.push_back(w * buf.samples[n - 1 - i]);
    }

    for (const Biquad& f : sections) filter_in_place(x, f);
    std::reverse(x.begin(), x.end());
    for (const Biquad& f : sections) filter_in_place(x, f);
    std::reverse(x.begin(), x.end());

    AudioBuffer out;
    out.sample_rate = buf.sample_rate;
    out.samples.assign(x.begin() + static_cast<std::ptrdiff_t>(pad),
                       x.begin() + static_cast<std::ptrdiff_t>(pad + n));
    return out;
}

// ---- Shannon energy envelope ----

Envelope shannon_envelope(const AudioBuffer& buf, double smooth_ms) {
    if (buf.samples.empty()) fail(Errc::EmptyInput, "envelope of empty buffer");
    if (smooth_ms <= 0.0) fail(Errc::InvalidArgument, "smooth_ms must be positive");

    const size_t n = buf.samples.size();
    double peak = 0.0;
    for (double v : buf.samples) peak = std::max(peak, std::abs(v));

    Envelope env;
    env.rate = buf.sample_rate;
    env.values.assign(n, 0.0);
    if (peak == 0.0) return env;  // all-zero input keeps an all-zero envelope

    std::vector<double> e(n);
    for (size_t i = 0; i < n; ++i) {
        const double x = buf.samples[i] / peak;
        const double u = x * x;
        e[i] = u > 0.0 ? -u * std::log(u) : 0.0;
    }

    // centered moving average, truncated at the edges
    int w = static_cast<int>(std::llround(smooth_ms / 1000.0 * buf.sample_rate));
    if (w < 1) w = 1;
    const int half = w / 2;
    std::vector<double> prefix(n + 1, 0.0);
    for (size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + e[i];
    double emax = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const size_t lo = i >= static_cast<size_t>(half) ? i - static_cast<size_t>(half) : 0;
        const size_t hi = std::min(n - 1, i + static_cast<size_t>(half));
        env.values[i] = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
        emax = std::max(emax, env.values[i]);
    }
    if (emax > 0.0)
        for (double& v : env.values) v /= emax;
    return env;
}

// ---- windowing ----

std::vector<Window> segment_windows(const Envelope& env, double window_s, double hop_s) {
    if (env.rate <= 0) fail(Errc::InvalidArgument, "envelope rate must be positive");
    if (window_s < 4.0) fail(Errc::InvalidConfig, "window must be at least 4 s");
    if (!(hop_s > 0.0 && hop_s <= window_s)) fail(Errc::InvalidConfig, "need 0 < hop <= window");

    // integer sample arithmetic keeps the count formula exact
    const std::int64_t n = static_cast<std::int64_t>(env.values.size());
    const std::int64_t win = std::llround(window_s * env.rate);
    const std::int64_t hop = std::llround(hop_s * env.rate);
    if (n < win) fail(Errc::RecordingTooShort, "recording shorter than one window");

    const std::int64_t regular = (n - win) / hop + 1;
    std::vector<Window> out;
    out.reserve(static_cast<size_t>(regular) + 1);
    for (std::int64_t k = 0; k < regular; ++k) {
        const std::int64_t start = k * hop;
        Window w;
        w.start_s = static_cast<double>(start) / env.rate;
        w.rate = env.rate;
        w.values.assign(env.values.begin() + start, env.values.begin() + start + win);
        out.push_back(std::move(w));
    }
    const std::int64_t covered = (regular - 1) * hop + win;
    if (covered < n) {
        // anchor a final window to the end so the tail still contributes
        Window w;
        w.start_s = static_cast<double>(n - win) / env.rate;
        w.rate = env.rate;
        w.values.assign(env.values.end() - win, env.values.end());
        out.push_back(std::move(w));
    }
    return out;
}

// ---- noise profile ----

NoiseProfile estimate_noise(const AudioBuffer& buf) {
    if (buf.samples.empty()) fail(Errc::EmptyInput, "noise estimate of empty buffer");

    const size_t n = buf.samples.size();
    size_t clipped = 0;
    for (double v : buf.samples)
        if (std::abs(v) >= 0.999) ++clipped;

    // Hann-windowed periodogram; energy split at the analysis band edges.
    const size_t m = next_pow2(n);
    std::vector<std::complex<double>> spec(m, {0.0, 0.0});
    for (size_t i = 0; i < n; ++i) {
        const double win =
            0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) / static_cast<double>(n));
        spec[i] = buf.samples[i] * win;
    }
    fft_inplace(spec, false);

    double in_band = 0.0, out_band = 0.0;
    const double bin_hz = static_cast<double>(buf.sample_rate) / static_cast<double>(m);
    for (size_t k = 0; k <= m / 2; ++k) {
        const double f = bin_hz * static_cast<double>(k);
        // count both halves of the spectrum except DC and Nyquist
        const double mult = (k == 0 || k == m / 2) ? 1.0 : 2.0;
        const double p = mult * std::norm(spec[k]);
        if (f >= kBandLoHz && f <= kBandHiHz)
            in_band += p;
        else
            out_band += p;
    }

    NoiseProfile np;
    np.clipping_fraction = static_cast<double>(clipped) / static_cast<double>(n);
    if (out_band <= 0.0) {
        np.snr_proxy_db = 80.0;
    } else if (in_band <= 0.0) {
        np.snr_proxy_db = -80.0;
    } else {
        np.snr_proxy_db = std::clamp(10.0 * std::log10(in_band / out_band), -80.0, 80.0);
    }
    return np;
}

}  // namespace pcg
