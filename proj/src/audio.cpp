#include "pcg/audio.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace pcg {

const char* errc_name(Errc c) {
    switch (c) {
        case Errc::NotFound: return "NotFound";
        case Errc::CorruptHeader: return "CorruptHeader";
        case Errc::UnsupportedFormat: return "UnsupportedFormat";
        case Errc::IoError: return "IoError";
        case Errc::ParseError: return "ParseError";
        case Errc::UnknownLabel: return "UnknownLabel";
        case Errc::NonMonotonicTime: return "NonMonotonicTime";
        case Errc::InvalidRate: return "InvalidRate";
        case Errc::InvalidBand: return "InvalidBand";
        case Errc::EmptyInput: return "EmptyInput";
        case Errc::RecordingTooShort: return "RecordingTooShort";
        case Errc::WindowTooShort: return "WindowTooShort";
        case Errc::NoPeriodEstimate: return "NoPeriodEstimate";
        case Errc::TooFewBeats: return "TooFewBeats";
        case Errc::InsufficientS1Events: return "InsufficientS1Events";
        case Errc::InvalidGroundTruth: return "InvalidGroundTruth";
        case Errc::EmptyList: return "EmptyList";
        case Errc::InvalidSpec: return "InvalidSpec";
        case Errc::InvalidConfig: return "InvalidConfig";
        case Errc::MissingPair: return "MissingPair";
        case Errc::InvalidArgument: return "InvalidArgument";
    }
    return "Error";
}

const char* label_name(EventLabel l) {
    switch (l) {
        case EventLabel::S1: return "S1";
        case EventLabel::S2: return "S2";
        case EventLabel::Murmur: return "MURMUR";
        case EventLabel::Ectopic: return "ECTOPIC";
        case EventLabel::Arrhythmia: return "ARRHYTHMIA";
    }
    return "?";
}

EventLabel label_from_name(const std::string& name) {
    if (name == "S1") return EventLabel::S1;
    if (name == "S2") return EventLabel::S2;
    if (name == "MURMUR") return EventLabel::Murmur;
    if (name == "ECTOPIC") return EventLabel::Ectopic;
    if (name == "ARRHYTHMIA") return EventLabel::Arrhythmia;
    fail(Errc::UnknownLabel, "unknown event label '" + name + "'");
}

namespace {

// ---- WAV ----

struct Reader {
    const std::uint8_t* p;
    size_t n;
    size_t pos = 0;

    bool has(size_t k) const { return pos + k <= n; }

    std::uint32_t u32() {
        if (!has(4)) fail(Errc::CorruptHeader, "truncated WAV header");
        std::uint32_t v = static_cast<std::uint32_t>(p[pos]) | (p[pos + 1] << 8) |
                          (p[pos + 2] << 16) | (static_cast<std::uint32_t>(p[pos + 3]) << 24);
        pos += 4;
        return v;
    }

    std::uint16_t u16() {
        if (!has(2)) fail(Errc::CorruptHeader, "truncated WAV header");
        std::uint16_t v = static_cast<std::uint16_t>(p[pos] | (p[pos + 1] << 8));
        pos += 2;
        return v;
    }

    std::array<char, 4> tag() {
        if (!has(4)) fail(Errc::CorruptHeader, "truncated WAV header");
        std::array<char, 4> t;
        std::memcpy(t.data(), p + pos, 4);
        pos += 4;
        return t;
    }
};

bool tag_is(const std::array<char, 4>& t, const char* s) { return std::memcmp(t.data(), s, 4) == 0; }

double decode_sample(const std::uint8_t* q, int bits, bool is_float) {
    if (is_float) {
        float f;
        std::memcpy(&f, q, 4);
        if (!std::isfinite(f)) fail(Errc::CorruptHeader, "non-finite float sample");
        if (f > 1.0f) f = 1.0f;
        if (f < -1.0f) f = -1.0f;
        return static_cast<double>(f);
    }
    switch (bits) {
        case 8:
            // 8-bit WAV is unsigned with midpoint 128
            return (static_cast<int>(q[0]) - 128) / 128.0;
        case 16: {
            std::int16_t v = static_cast<std::int16_t>(q[0] | (q[1] << 8));
            return v / 32768.0;
        }
        case 24: {
            std::int32_t v = q[0] | (q[1] << 8) | (q[2] << 16);
            if (v & 0x800000) v -= 0x1000000;
            return v / 8388608.0;
        }
        default: break;
    }
    fail(Errc::UnsupportedFormat, "unsupported bit depth");
}

}  // namespace

AudioBuffer load_wav(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) fail(Errc::NotFound, path.string());

    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::NotFound, path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r{reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()};
    if (!tag_is(r.tag(), "RIFF")) fail(Errc::CorruptHeader, "missing RIFF tag");
    r.u32();  // declared file size; trust actual bytes instead
    if (!tag_is(r.tag(), "WAVE")) fail(Errc::CorruptHeader, "missing WAVE tag");

    int channels = 0, sample_rate = 0, bits = 0;
    bool is_float = false, have_fmt = false;
    const std::uint8_t* data = nullptr;
    size_t data_len = 0;

    while (r.has(8)) {
        auto id = r.tag();
        std::uint32_t size = r.u32();
        if (!r.has(size)) fail(Errc::CorruptHeader, "chunk exceeds file size");
        if (tag_is(id, "fmt ")) {
            if (size < 16) fail(Errc::CorruptHeader, "fmt chunk too small");
            size_t body = r.pos;
            Reader f{r.p + body, size};
            std::uint16_t format = f.u16();
            channels = f.u16();
            sample_rate = static_cast<int>(f.u32());
            f.u32();  // byte rate
            f.u16();  // block align
            bits = f.u16();
            if (format == 1) {
                is_float = false;
            } else if (format == 3) {
                is_float = true;
            } else {
                fail(Errc::UnsupportedFormat, "non-PCM WAV format " + std::to_string(format));
            }
            have_fmt = true;
        } else if (tag_is(id, "data")) {
            data = r.p + r.pos;
            data_len = size;
        }
        r.pos += size + (size & 1);  // chunks are word aligned
    }

    if (!have_fmt || data == nullptr) fail(Errc::CorruptHeader, "missing fmt or data chunk");
    if (channels < 1 || channels > 2) fail(Errc::UnsupportedFormat, "more than 2 channels");
    if (sample_rate <= 0) fail(Errc::CorruptHeader, "invalid sample rate");
    if (is_float && bits != 32) fail(Errc::UnsupportedFormat, "float WAV must be 32-bit");
    if (!is_float && bits != 8 && bits != 16 && bits != 24)
        fail(Errc::UnsupportedFormat, "unsupported bit depth " + std::to_string(bits));

    const size_t bytes_per = static_cast<size_t>(bits / 8);
    const size_t frame = bytes_per * static_cast<size_t>(channels);
    const size_t frames = data_len / frame;

    AudioBuffer out;
    out.sample_rate = sample_rate;
    out.samples.resize(frames);
    for (size_t i = 0; i < frames; ++i) {
        const std::uint8_t* q = data + i * frame;
        double s = decode_sample(q, bits, is_float);
        if (channels == 2) s = (s + decode_sample(q + bytes_per, bits, is_float)) / 2.0;
        out.samples[i] = s;
    }
    return out;
}

void write_wav(const AudioBuffer& buf, const std::filesystem::path& path) {
    if (buf.sample_rate <= 0) fail(Errc::InvalidArgument, "sample rate must be positive");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot open " + path.string());

    auto put16 = [&](std::uint16_t v) {
        char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
        out.write(b, 2);
    };
    auto put32 = [&](std::uint32_t v) {
        char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                     static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
        out.write(b, 4);
    };

    const std::uint32_t data_bytes = static_cast<std::uint32_t>(buf.samples.size() * 2);
    out.write("RIFF", 4);
    put32(36 + data_bytes);
    out.write("WAVE", 4);
    out.write("fmt ", 4);
    put32(16);
    put16(1);  // PCM
    put16(1);  // mono
    put32(static_cast<std::uint32_t>(buf.sample_rate));
    put32(static_cast<std::uint32_t>(buf.sample_rate) * 2);
    put16(2);
    put16(16);
    out.write("data", 4);
    put32(data_bytes);
    for (double s : buf.samples) {
        double c = s > 1.0 ? 1.0 : (s < -1.0 ? -1.0 : s);
        long v = std::lround(c * 32768.0);
        if (v > 32767) v = 32767;
        if (v < -32768) v = -32768;
        put16(static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
    }
    if (!out) fail(Errc::IoError, "write failed: " + path.string());
}

// ---- annotations ----

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_seconds(const std::string& field, int line_no) {
    const std::string t = trim(field);
    if (t.empty()) fail(Errc::ParseError, "line " + std::to_string(line_no) + ": empty time field");
    size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(t, &used);
    } catch (const std::exception&) {
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": bad number '" + t + "'");
    }
    if (used != t.size() || !std::isfinite(v))
        fail(Errc::ParseError, "line " + std::to_string(line_no) + ": bad number '" + t + "'");
    return v;
}

}  // namespace

AnnotationSet parse_annotations_text(const std::string& text) {
    AnnotationSet set;
    bool have_duration = false;
    bool have_events = false;
    double prev_time = 0.0;

    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;

        size_t tab = t.find('\t');
        if (tab == std::string::npos)
            fail(Errc::ParseError, "line " + std::to_string(line_no) + ": expected <field>\\t<field>");
        std::string first = trim(t.substr(0, tab));
        std::string second = trim(t.substr(tab + 1));

        if (first == "duration") {
            if (have_duration || have_events)
                fail(Errc::ParseError,
                     "line " + std::to_string(line_no) + ": duration header must come first");
            set.source_duration_s = parse_seconds(second, line_no);
            if (set.source_duration_s < 0.0)
                fail(Errc::ParseError, "line " + std::to_string(line_no) + ": negative duration");
            have_duration = true;
            continue;
        }

        Event ev;
        ev.time_s = parse_seconds(first, line_no);
        ev.label = label_from_name(second);
        if (ev.time_s < 0.0)
            fail(Errc::ParseError, "line " + std::to_string(line_no) + ": negative event time");
        if (have_events && ev.time_s < prev_time)
            fail(Errc::NonMonotonicTime,
                 "line " + std::to_string(line_no) + ": time decreases");
        if (have_duration && ev.time_s > set.source_duration_s)
            fail(Errc::ParseError,
                 "line " + std::to_string(line_no) + ": event time exceeds declared duration");
        prev_time = ev.time_s;
        have_events = true;
        set.events.push_back(ev);
    }

    if (!have_duration) set.source_duration_s = set.events.empty() ? 0.0 : set.events.back().time_s;
    return set;
}

AnnotationSet parse_annotations(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) fail(Errc::NotFound, path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::NotFound, path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_annotations_text(text);
}

std::string format_annotations(const AnnotationSet& set) {
    char buf[64];
    std::string out;
    std::snprintf(buf, sizeof buf, "duration\t%.3f\n", set.source_duration_s);
    out += buf;
    for (const Event& ev : set.events) {
        std::snprintf(buf, sizeof buf, "%.3f\t%s\n", ev.time_s, label_name(ev.label));
        out += buf;
    }
    return out;
}

void write_annotations(const AnnotationSet& set, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot open " + path.string());
    out << format_annotations(set);
    if (!out) fail(Errc::IoError, "write failed: " + path.string());
}

AnnotationSet crop_annotations(const AnnotationSet& set, double start_s, double length_s) {
    if (length_s <= 0.0) fail(Errc::InvalidArgument, "segment length must be positive");
    AnnotationSet out;
    out.source_duration_s = length_s;
    const double end = start_s + length_s;
    for (const Event& ev : set.events) {
        if (ev.time_s < start_s || ev.time_s > end) continue;
        out.events.push_back({ev.time_s - start_s, ev.label});
    }
    return out;
}

}  // namespace pcg
