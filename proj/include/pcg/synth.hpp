#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcg/audio.hpp"
#include "pcg/rng.hpp"

namespace pcg {

enum class NoiseColor { White, Pink };

struct HrPoint {
    double time_s = 0.0;
    double bpm = 0.0;
};

// Recipe for one synthetic phonocardiogram. Fully determined by the seed.
struct SynthSpec {
    double duration_s = 60.0;
    std::vector<HrPoint> hr_profile = {{0.0, 100.0}};  // constant, or piecewise linear
    double systole_fraction = 0.35;                    // S1->S2 offset as a cycle fraction
    double s1_freq_hz = 50.0;
    double s2_freq_hz = 60.0;
    double s1_dur_ms = 100.0;
    double s2_dur_ms = 80.0;
    // Additive noise is band-limited to the analysis band before scaling, so
    // this is an in-band, signal-competing SNR. +infinity disables it.
    double snr_db = 20.0;
    NoiseColor noise_color = NoiseColor::White;
    bool murmur = false;
    double hr_jitter_pct = 0.0;  // multiplicative, uniform per cycle
    std::uint64_t seed = 1;
    int sample_rate = 4000;

    void validate() const;  // throws InvalidSpec
    double hr_at(double t) const;
};

// Heart-sound and noise components before mixing; lets tests verify the
// achieved SNR directly.
struct SynthTracks {
    std::vector<double> heart;
    std::vector<double> noise;  // already scaled to the requested SNR
    int sample_rate = 0;
};

struct SynthRecording {
    AudioBuffer audio;
    AnnotationSet annotations;
};

SynthTracks synth_tracks(const SynthSpec& spec);

// Mixes the tracks and peak-normalizes to 0.9 so written WAVs never clip;
// annotations carry the exact S1/S2 (and MURMUR) onset times.
SynthRecording synth_recording(const SynthSpec& spec);

struct CorpusItem {
    std::string id;
    SynthSpec spec;
    AudioBuffer audio;
    AnnotationSet annotations;
};

// n specs with HR drawn uniformly from [hr_lo, hr_hi] and SNR cycling
// through snr_values; child seeds derive from (seed, index).
std::vector<CorpusItem> synth_corpus(const SynthSpec& base, int n, double hr_lo, double hr_hi,
                                     const std::vector<double>& snr_values, std::uint64_t seed);

}  // namespace pcg
