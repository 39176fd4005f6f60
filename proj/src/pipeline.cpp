#include "pcg/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace pcg {

const char* variant_name(Variant v) { return v == Variant::Primary ? "PRIMARY" : "FAST"; }

Variant variant_from_name(const std::string& name) {
    std::string lower;
    for (char c : name) lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    if (lower == "primary") return Variant::Primary;
    if (lower == "fast") return Variant::Fast;
    fail(Errc::InvalidArgument, "unknown variant '" + name + "'");
}

namespace {

std::array<StageConfig, 3> make_schedule(double window_s, double hop_s) {
    return {{
        {1, window_s, hop_s, 0.50, 0.08, 0.70},
        {2, window_s, hop_s, 0.35, 0.12, 0.55},
        {3, window_s, hop_s, 0.25, 0.20, 0.40},
    }};
}

struct DurationRange {
    double lo;
    double hi;  // +inf when open-ended
};

DurationRange expected_duration(Variant v) {
    if (v == Variant::Primary) return {55.0, std::numeric_limits<double>::infinity()};
    return {28.0, 45.0};
}

}  // namespace

PipelineConfig::PipelineConfig()
    : primary_stages(make_schedule(10.0, 5.0)), fast_stages(make_schedule(6.0, 3.0)) {}

std::array<StageConfig, 3> stage_schedule(Variant v) {
    PipelineConfig def;
    return def.stages(v);
}

void PipelineConfig::validate() const {
    bounds.validate();
    for (const auto* stages : {&primary_stages, &fast_stages}) {
        for (int k = 0; k < 3; ++k) {
            const StageConfig& s = (*stages)[static_cast<size_t>(k)];
            if (s.stage_index != k + 1) fail(Errc::InvalidConfig, "stage indices must be 1..3");
            if (s.window_s < 4.0) fail(Errc::InvalidConfig, "window_s must be >= 4 s");
            if (!(s.hop_s > 0.0 && s.hop_s <= s.window_s))
                fail(Errc::InvalidConfig, "need 0 < hop_s <= window_s");
            if (!(s.prominence_min > 0.0 && s.prominence_min <= 1.0))
                fail(Errc::InvalidConfig, "prominence_min outside (0, 1]");
            if (!(s.consistency_tol > 0.0)) fail(Errc::InvalidConfig, "consistency_tol must be positive");
            if (!(s.min_valid_fraction > 0.0 && s.min_valid_fraction <= 1.0))
                fail(Errc::InvalidConfig, "min_valid_fraction outside (0, 1]");
        }
        // monotone relaxation across the schedule
        for (int k = 1; k < 3; ++k) {
            const StageConfig& a = (*stages)[static_cast<size_t>(k - 1)];
            const StageConfig& b = (*stages)[static_cast<size_t>(k)];
            if (!(b.prominence_min < a.prominence_min))
                fail(Errc::InvalidConfig, "prominence_min must strictly decrease with stage");
            if (!(b.consistency_tol > a.consistency_tol))
                fail(Errc::InvalidConfig, "consistency_tol must strictly increase with stage");
            if (b.min_valid_fraction > a.min_valid_fraction)
                fail(Errc::InvalidConfig, "min_valid_fraction must not increase with stage");
        }
    }
    if (qs.stage_weight < 0.0 || qs.confidence_weight < 0.0 || qs.consistency_weight < 0.0)
        fail(Errc::InvalidConfig, "QS weights must be nonnegative");
    for (double f : qs.stage_factor)
        if (f < 0.0 || f > 1.0) fail(Errc::InvalidConfig, "stage factors must lie in [0, 1]");
    if (qs.stage_factor[1] > qs.stage_factor[0] || qs.stage_factor[2] > qs.stage_factor[1])
        fail(Errc::InvalidConfig, "stage factors must not increase with stage");
    if (gate_threshold < 0.0 || gate_threshold > 100.0)
        fail(Errc::InvalidConfig, "gate threshold outside [0, 100]");
}

namespace {

std::string trim_ws(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

PipelineConfig parse_config_text(const std::string& text) {
    PipelineConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim_ws(line);
        if (t.empty() || t[0] == '#') continue;
        const size_t eq = t.find('=');
        if (eq == std::string::npos)
            fail(Errc::InvalidConfig, "line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim_ws(t.substr(0, eq));
        const std::string val_str = trim_ws(t.substr(eq + 1));
        double value = 0.0;
        try {
            size_t used = 0;
            value = std::stod(val_str, &used);
            if (used != val_str.size()) throw std::invalid_argument(val_str);
        } catch (const std::exception&) {
            fail(Errc::InvalidConfig,
                 "line " + std::to_string(line_no) + ": bad numeric value '" + val_str + "'");
        }

        auto set_stage_field = [&](StageConfig& s, const std::string& field) {
            if (field == "window_s") s.window_s = value;
            else if (field == "hop_s") s.hop_s = value;
            else if (field == "prominence_min") s.prominence_min = value;
            else if (field == "consistency_tol") s.consistency_tol = value;
            else if (field == "min_valid_fraction") s.min_valid_fraction = value;
            else fail(Errc::InvalidConfig, "line " + std::to_string(line_no) + ": unknown field '" + field + "'");
        };

        if (key.rfind("qs.", 0) == 0) {
            const std::string f = key.substr(3);
            if (f == "weight_stage") cfg.qs.stage_weight = value;
            else if (f == "weight_confidence") cfg.qs.confidence_weight = value;
            else if (f == "weight_consistency") cfg.qs.consistency_weight = value;
            else if (f == "stage_factor_1") cfg.qs.stage_factor[0] = value;
            else if (f == "stage_factor_2") cfg.qs.stage_factor[1] = value;
            else if (f == "stage_factor_3") cfg.qs.stage_factor[2] = value;
            else if (f == "gate_threshold") cfg.gate_threshold = value;
            else fail(Errc::InvalidConfig, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
            continue;
        }

        const size_t dot = key.find('.');
        if (dot == std::string::npos)
            fail(Errc::InvalidConfig, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        const std::string head = key.substr(0, dot);
        const std::string rest = key.substr(dot + 1);
        std::array<StageConfig, 3>* stages = nullptr;
        if (head == "primary") stages = &cfg.primary_stages;
        else if (head == "fast") stages = &cfg.fast_stages;
        else fail(Errc::InvalidConfig, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");

        if (rest.rfind("stage", 0) == 0 && rest.size() > 6 && rest[6] == '.') {
            const char idx = rest[5];
            if (idx < '1' || idx > '3')
                fail(Errc::InvalidConfig, "line " + std::to_string(line_no) + ": stage must be 1..3");
            set_stage_field((*stages)[static_cast<size_t>(idx - '1')], rest.substr(7));
        } else if (rest == "window_s" || rest == "hop_s") {
            for (StageConfig& s : *stages) set_stage_field(s, rest);
        } else {
            fail(Errc::InvalidConfig, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) fail(Errc::NotFound, path.string());
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::NotFound, path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config_text(text);
}

int quality_score(int stage_reached, double mean_confidence, double consistency,
                  const QsWeights& weights) {
    if (stage_reached < 0 || stage_reached > 3)
        fail(Errc::InvalidArgument, "stage_reached must be 0 (failed) or 1..3");
    if (mean_confidence < 0.0 || mean_confidence > 1.0 || consistency < 0.0 || consistency > 1.0)
        fail(Errc::InvalidArgument, "confidence and consistency must lie in [0, 1]");
    if (stage_reached == kStageFailed) return 0;
    const double factor = weights.stage_factor[static_cast<size_t>(stage_reached - 1)];
    const double score = 100.0 * (weights.stage_weight * factor +
                                  weights.confidence_weight * mean_confidence +
                                  weights.consistency_weight * consistency);
    return static_cast<int>(std::clamp(std::llround(score), 0ll, 100ll));
}

bool gate(const AnalysisReport& report, double threshold) {
    return report.hr_bpm.has_value() && report.quality_score >= threshold;
}

AnalysisReport analyze(const AudioBuffer& buf, Variant variant, const PipelineConfig& config) {
    config.validate();
    if (buf.samples.empty()) fail(Errc::EmptyInput, "empty recording");

    AnalysisReport report;
    report.variant = variant;

    const DurationRange expect = expected_duration(variant);
    const double dur = buf.duration_s();
    if (dur < expect.lo || dur > expect.hi) {
        char hi_str[32];
        if (std::isinf(expect.hi)) std::snprintf(hi_str, sizeof hi_str, "inf");
        else std::snprintf(hi_str, sizeof hi_str, "%.0f", expect.hi);
        char msg[160];
        std::snprintf(msg, sizeof msg,
                      "DurationMismatch: %.1f s outside %s expected range [%.0f, %s]", dur,
                      variant_name(variant), expect.lo, hi_str);
        report.warnings.emplace_back(msg);
    }

    // condition once; every stage reuses the same envelope
    const AudioBuffer at_rate = resample(buf, kAnalysisRateHz);
    report.noise = estimate_noise(at_rate);
    const AudioBuffer filtered = bandpass(at_rate, kBandLoHz, kBandHiHz);
    const Envelope env = shannon_envelope(filtered, kEnvelopeSmoothMs);

    const auto& stages = config.stages(variant);

    std::vector<PeriodicityAnalyzer> analyzers;
    double cached_window = -1.0, cached_hop = -1.0;
    for (const StageConfig& stage : stages) {
        if (stage.window_s != cached_window || stage.hop_s != cached_hop) {
            analyzers.clear();
            for (const Window& w : segment_windows(env, stage.window_s, stage.hop_s))
                analyzers.emplace_back(w, config.bounds);
            cached_window = stage.window_s;
            cached_hop = stage.hop_s;
        }

        std::vector<WindowEstimate> estimates;
        estimates.reserve(analyzers.size());
        for (const PeriodicityAnalyzer& a : analyzers) estimates.push_back(a.estimate(stage.prominence_min));

        const AggregateResult agg =
            aggregate_hr(estimates, stage.consistency_tol, stage.min_valid_fraction);

        report.window_estimates = std::move(estimates);
        report.consistency = agg.consistency;
        report.mean_confidence = agg.mean_confidence;

        if (agg.accepted) {
            report.stage_reached = stage.stage_index;
            report.hr_bpm = agg.hr_bpm;
            break;
        }
    }

    if (report.hr_bpm) {
        const std::vector<double> beats = detect_beats(env, 60.0 / *report.hr_bpm);
        try {
            report.hrv_trend = hrv_trend(beats, 5, config.bounds);
        } catch (const Error& e) {
            if (e.code() != Errc::TooFewBeats) throw;  // too few beats: report simply omits the trend
        }
    }

    report.quality_score =
        quality_score(report.stage_reached, report.mean_confidence, report.consistency, config.qs);
    report.presentable = gate(report, config.gate_threshold);
    return report;
}

std::string report_to_json(const AnalysisReport& report) {
    nlohmann::ordered_json j;
    if (report.hr_bpm) j["hr_bpm"] = *report.hr_bpm;
    else j["hr_bpm"] = nullptr;
    if (report.stage_reached == kStageFailed) j["stage_reached"] = "FAILED";
    else j["stage_reached"] = report.stage_reached;
    j["quality_score"] = report.quality_score;
    j["presentable"] = report.presentable;
    j["consistency"] = report.consistency;
    j["mean_confidence"] = report.mean_confidence;
    j["variant"] = variant_name(report.variant);
    j["warnings"] = report.warnings;
    j["noise"] = {{"snr_proxy_db", report.noise.snr_proxy_db},
                  {"clipping_fraction", report.noise.clipping_fraction}};

    nlohmann::ordered_json wins = nlohmann::ordered_json::array();
    for (const WindowEstimate& e : report.window_estimates) {
        nlohmann::ordered_json w;
        w["start_s"] = e.start_s;
        if (e.hr_bpm) w["hr_bpm"] = *e.hr_bpm;
        else w["hr_bpm"] = nullptr;
        w["confidence"] = e.confidence;
        w["valid"] = e.valid;
        wins.push_back(std::move(w));
    }
    j["window_estimates"] = std::move(wins);

    if (report.hrv_trend) {
        nlohmann::ordered_json pts = nlohmann::ordered_json::array();
        for (const TrendPoint& p : report.hrv_trend->points)
            pts.push_back({{"t_s", p.time_s}, {"ibi_ms", p.value_ms}});
        j["hrv_trend"] = {{"points", std::move(pts)}};
    } else {
        j["hrv_trend"] = nullptr;
    }
    return j.dump(2) + "\n";
}

}  // namespace pcg
