#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pcg/error.hpp"

namespace pcg {

// Mono sample sequence, amplitudes in [-1, 1] after load normalization.
struct AudioBuffer {
    std::vector<double> samples;
    int sample_rate = 0;  // Hz

    double duration_s() const {
        return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
    }
};

enum class EventLabel { S1, S2, Murmur, Ectopic, Arrhythmia };

const char* label_name(EventLabel l);
EventLabel label_from_name(const std::string& name);  // throws UnknownLabel

struct Event {
    double time_s = 0.0;
    EventLabel label = EventLabel::S1;

    bool operator==(const Event&) const = default;
};

// Timestamped cardiologist events, times nondecreasing within
// [0, source_duration_s].
struct AnnotationSet {
    std::vector<Event> events;
    double source_duration_s = 0.0;
};

// Reads a PCM RIFF/WAVE file: 1 or 2 channels, 8/16/24-bit integer or 32-bit
// float. Stereo is downmixed by channel mean; integer samples are scaled to
// [-1, 1] (e.g. 16-bit -32768 -> -1.0).
AudioBuffer load_wav(const std::filesystem::path& path);

// Writes a mono 16-bit PCM WAV. Samples are clamped to [-1, 1] before
// quantization.
void write_wav(const AudioBuffer& buf, const std::filesystem::path& path);

// Annotation text format, one event per line:
//   duration<TAB><seconds>     -- optional header, first non-comment line
//   <time_s><TAB><LABEL>       -- LABEL in {S1,S2,MURMUR,ECTOPIC,ARRHYTHMIA}
// '#' starts a comment line. Times must be nondecreasing. When the duration
// header is missing the duration is the last event time.
AnnotationSet parse_annotations(const std::filesystem::path& path);
AnnotationSet parse_annotations_text(const std::string& text);  // same grammar, from memory

// Millisecond timestamp precision; parse(write(s)) == s within 0.5 ms.
void write_annotations(const AnnotationSet& set, const std::filesystem::path& path);
std::string format_annotations(const AnnotationSet& set);

// Events with start_s <= t <= start_s + length_s, re-based to segment-local
// time. Cropped duration is length_s.
AnnotationSet crop_annotations(const AnnotationSet& set, double start_s, double length_s);

}  // namespace pcg
