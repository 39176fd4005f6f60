#include "pcg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pcg/dsp.hpp"

namespace pcg {

namespace {

// S2 is quieter than S1 at the usual recording site.
constexpr double kS2Amplitude = 0.5;
constexpr double kMurmurRelDb = -10.0;  // relative to the S1 track

// Additive noise is confined to the spectral core of the synthetic S1/S2
// bursts so snr_db meters noise that genuinely competes with the heart
// sounds; broadband hiss would mostly fall outside the analysis band and
// turn the knob into a no-op.
constexpr double kNoiseBandLoHz = 40.0;
constexpr double kNoiseBandHiHz = 80.0;

// Damped sinusoid burst, ~2% residual amplitude at the stated duration.
void add_burst(std::vector<double>& x, int rate, double onset_s, double freq_hz, double dur_s,
               double amp) {
    const double decay = dur_s / std::log(50.0);
    const auto begin = static_cast<std::int64_t>(std::ceil(onset_s * rate));
    const auto end = static_cast<std::int64_t>(std::floor((onset_s + dur_s) * rate));
    for (std::int64_t i = std::max<std::int64_t>(begin, 0);
         i <= end && i < static_cast<std::int64_t>(x.size()); ++i) {
        const double dt = static_cast<double>(i) / rate - onset_s;
        x[static_cast<size_t>(i)] += amp * std::exp(-dt / decay) * std::sin(2.0 * M_PI * freq_hz * dt);
    }
}

double mean_square(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

// Paul Kellet's 3-section pink filter over white input.
struct PinkFilter {
    double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;

    double step(double white) {
        b0 = 0.99886 * b0 + white * 0.0555179;
        b1 = 0.99332 * b1 + white * 0.0750759;
        b2 = 0.96900 * b2 + white * 0.1538520;
        b3 = 0.86650 * b3 + white * 0.3104856;
        b4 = 0.55000 * b4 + white * 0.5329522;
        b5 = -0.7616 * b5 - white * 0.0168980;
        const double pink = b0 + b1 + b2 + b3 + b4 + b5 + b6 + white * 0.5362;
        b6 = white * 0.115926;
        return pink;
    }
};

}  // namespace

void SynthSpec::validate() const {
    if (!(duration_s > 0.0)) fail(Errc::InvalidSpec, "duration must be positive");
    if (hr_profile.empty()) fail(Errc::InvalidSpec, "empty HR profile");
    double prev_t = -1.0;
    for (const HrPoint& p : hr_profile) {
        if (p.bpm < 40.0 || p.bpm > 220.0)
            fail(Errc::InvalidSpec, "HR outside canine bounds [40, 220]");
        if (p.time_s < prev_t) fail(Errc::InvalidSpec, "HR profile times must be nondecreasing");
        prev_t = p.time_s;
    }
    if (systole_fraction < 0.2 || systole_fraction > 0.5)
        fail(Errc::InvalidSpec, "systole_fraction outside [0.2, 0.5]");
    if (std::isnan(snr_db)) fail(Errc::InvalidSpec, "snr_db must not be NaN");
    if (hr_jitter_pct < 0.0 || hr_jitter_pct > 10.0)
        fail(Errc::InvalidSpec, "hr_jitter_pct outside [0, 10]");
    if (sample_rate < 1000) fail(Errc::InvalidSpec, "sample rate below 1000 Hz");
    const double nyq = sample_rate / 2.0;
    if (!(s1_freq_hz > 0.0 && s1_freq_hz < nyq && s2_freq_hz > 0.0 && s2_freq_hz < nyq))
        fail(Errc::InvalidSpec, "burst frequency outside (0, rate/2)");
    if (!(s1_dur_ms > 0.0 && s2_dur_ms > 0.0)) fail(Errc::InvalidSpec, "burst duration must be positive");
}

double SynthSpec::hr_at(double t) const {
    const auto& pts = hr_profile;
    if (t <= pts.front().time_s) return pts.front().bpm;
    if (t >= pts.back().time_s) return pts.back().bpm;
    for (size_t i = 1; i < pts.size(); ++i) {
        if (t <= pts[i].time_s) {
            const double span = pts[i].time_s - pts[i - 1].time_s;
            if (span <= 0.0) return pts[i].bpm;
            const double a = (t - pts[i - 1].time_s) / span;
            return pts[i - 1].bpm + a * (pts[i].bpm - pts[i - 1].bpm);
        }
    }
    return pts.back().bpm;
}

namespace {

struct CyclePlan {
    std::vector<double> s1_onsets;
    std::vector<double> s2_onsets;   // same cycle order as s1
    std::vector<double> murmur_from; // systole span per cycle
    std::vector<double> murmur_to;
};

// Draw order per cycle: exactly one jitter draw, so the plan is reproducible
// regardless of which optional tracks are enabled.
CyclePlan plan_cycles(const SynthSpec& spec, Rng& rng) {
    CyclePlan plan;
    double t = 0.0;
    while (t < spec.duration_s) {
        const double nominal = 60.0 / spec.hr_at(t);
        const double u = rng.symmetric();
        const double period = nominal * (1.0 + spec.hr_jitter_pct / 100.0 * u);
        plan.s1_onsets.push_back(t);
        const double s2 = t + spec.systole_fraction * period;
        plan.s2_onsets.push_back(s2);
        plan.murmur_from.push_back(t + spec.s1_dur_ms / 1000.0);
        plan.murmur_to.push_back(s2);
        t += period;
    }
    return plan;
}

}  // namespace

SynthTracks synth_tracks(const SynthSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const int rate = spec.sample_rate;
    const auto n = static_cast<size_t>(std::llround(spec.duration_s * rate));

    const CyclePlan plan = plan_cycles(spec, rng);

    std::vector<double> s1(n, 0.0), s2(n, 0.0);
    for (double onset : plan.s1_onsets)
        add_burst(s1, rate, onset, spec.s1_freq_hz, spec.s1_dur_ms / 1000.0, 1.0);
    for (double onset : plan.s2_onsets)
        if (onset < spec.duration_s)
            add_burst(s2, rate, onset, spec.s2_freq_hz, spec.s2_dur_ms / 1000.0, kS2Amplitude);

    SynthTracks tracks;
    tracks.sample_rate = rate;
    tracks.heart.assign(n, 0.0);
    for (size_t i = 0; i < n; ++i) tracks.heart[i] = s1[i] + s2[i];

    if (spec.murmur) {
        // band-limited noise over each systolic span, scaled against S1 power
        std::vector<double> raw(n, 0.0);
        for (size_t c = 0; c < plan.murmur_from.size(); ++c) {
            const auto a = static_cast<std::int64_t>(std::ceil(plan.murmur_from[c] * rate));
            const auto b = static_cast<std::int64_t>(std::floor(plan.murmur_to[c] * rate));
            for (std::int64_t i = std::max<std::int64_t>(a, 0);
                 i <= b && i < static_cast<std::int64_t>(n); ++i)
                raw[static_cast<size_t>(i)] = rng.gaussian();
        }
        AudioBuffer mb{std::move(raw), rate};
        mb = bandpass(mb, 100.0, 200.0);
        const double p_m = mean_square(mb.samples);
        const double p_s1 = mean_square(s1);
        if (p_m > 0.0) {
            const double scale = std::sqrt(p_s1 * std::pow(10.0, kMurmurRelDb / 10.0) / p_m);
            for (size_t i = 0; i < n; ++i) tracks.heart[i] += scale * mb.samples[i];
        }
    }

    tracks.noise.assign(n, 0.0);
    if (std::isfinite(spec.snr_db)) {
        PinkFilter pink;
        for (size_t i = 0; i < n; ++i) {
            const double w = rng.gaussian();
            tracks.noise[i] = spec.noise_color == NoiseColor::Pink ? pink.step(w) : w;
        }
        AudioBuffer nb{std::move(tracks.noise), rate};
        nb = bandpass(nb, kNoiseBandLoHz, kNoiseBandHiHz);
        tracks.noise = std::move(nb.samples);
        const double p_h = mean_square(tracks.heart);
        const double p_n = mean_square(tracks.noise);
        if (p_h > 0.0 && p_n > 0.0) {
            const double scale = std::sqrt(p_h / (p_n * std::pow(10.0, spec.snr_db / 10.0)));
            for (double& v : tracks.noise) v *= scale;
        }
    }
    return tracks;
}

SynthRecording synth_recording(const SynthSpec& spec) {
    SynthTracks tracks = synth_tracks(spec);
    const size_t n = tracks.heart.size();

    SynthRecording rec;
    rec.audio.sample_rate = tracks.sample_rate;
    rec.audio.samples.resize(n);
    double peak = 0.0;
    for (size_t i = 0; i < n; ++i) {
        rec.audio.samples[i] = tracks.heart[i] + tracks.noise[i];
        peak = std::max(peak, std::abs(rec.audio.samples[i]));
    }
    if (peak > 0.0) {
        const double scale = 0.9 / peak;
        for (double& v : rec.audio.samples) v *= scale;
    }

    // regenerate the plan with the same seed for exact annotation times
    Rng rng(spec.seed);
    const CyclePlan plan = plan_cycles(spec, rng);
    rec.annotations.source_duration_s = spec.duration_s;
    for (size_t c = 0; c < plan.s1_onsets.size(); ++c) {
        rec.annotations.events.push_back({plan.s1_onsets[c], EventLabel::S1});
        if (spec.murmur && plan.murmur_from[c] < spec.duration_s &&
            plan.murmur_from[c] < plan.murmur_to[c])
            rec.annotations.events.push_back({plan.murmur_from[c], EventLabel::Murmur});
        if (plan.s2_onsets[c] < spec.duration_s)
            rec.annotations.events.push_back({plan.s2_onsets[c], EventLabel::S2});
    }
    return rec;
}

std::vector<CorpusItem> synth_corpus(const SynthSpec& base, int n, double hr_lo, double hr_hi,
                                     const std::vector<double>& snr_values, std::uint64_t seed) {
    if (n < 1) fail(Errc::InvalidSpec, "corpus size must be at least 1");
    if (!(hr_lo <= hr_hi)) fail(Errc::InvalidSpec, "bad HR range");

    Rng draw(mix_seed(seed, 0));
    std::vector<CorpusItem> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        CorpusItem item;
        item.spec = base;
        item.spec.hr_profile = {{0.0, draw.uniform(hr_lo, hr_hi)}};
        if (!snr_values.empty())
            item.spec.snr_db = snr_values[static_cast<size_t>(i) % snr_values.size()];
        item.spec.seed = mix_seed(seed, static_cast<std::uint64_t>(i) + 1);
        char name[32];
        std::snprintf(name, sizeof name, "synth-%04d", i);
        item.id = name;
        SynthRecording rec = synth_recording(item.spec);
        item.audio = std::move(rec.audio);
        item.annotations = std::move(rec.annotations);
        out.push_back(std::move(item));
    }
    return out;
}

}  // namespace pcg
