#include <doctest.h>

#include <cmath>
#include <limits>

#include <json.hpp>

#include "pcg/eval.hpp"
#include "pcg/pipeline.hpp"
#include "pcg/rng.hpp"
#include "pcg/synth.hpp"

using namespace pcg;

namespace {

AudioBuffer noise_recording(double dur_s, int rate, std::uint64_t seed) {
    Rng rng(seed);
    AudioBuffer buf;
    buf.sample_rate = rate;
    const auto n = static_cast<size_t>(std::llround(dur_s * rate));
    buf.samples.reserve(n);
    for (size_t i = 0; i < n; ++i) buf.samples.push_back(0.3 * rng.gaussian());
    return buf;
}

AudioBuffer clean_recording(double hr, double snr_db, std::uint64_t seed, double dur_s = 60.0) {
    SynthSpec spec;
    spec.duration_s = dur_s;
    spec.hr_profile = {{0.0, hr}};
    spec.snr_db = snr_db;
    spec.hr_jitter_pct = 2.0;
    spec.seed = seed;
    return synth_recording(spec).audio;
}

}  // namespace

TEST_CASE("stage_schedule carries the shipped threshold triples") {
    const auto primary = stage_schedule(Variant::Primary);
    const double prom[] = {0.50, 0.35, 0.25};
    const double tol[] = {0.08, 0.12, 0.20};
    const double mvf[] = {0.70, 0.55, 0.40};
    for (int k = 0; k < 3; ++k) {
        CHECK(primary[k].stage_index == k + 1);
        CHECK(primary[k].window_s == 10.0);
        CHECK(primary[k].hop_s == 5.0);
        CHECK(primary[k].prominence_min == prom[k]);
        CHECK(primary[k].consistency_tol == tol[k]);
        CHECK(primary[k].min_valid_fraction == mvf[k]);
    }
    const auto fast = stage_schedule(Variant::Fast);
    for (int k = 0; k < 3; ++k) {
        CHECK(fast[k].window_s == 6.0);
        CHECK(fast[k].hop_s == 3.0);
        CHECK(fast[k].prominence_min == prom[k]);
        CHECK(fast[k].consistency_tol == tol[k]);
        CHECK(fast[k].min_valid_fraction == mvf[k]);
    }
    // the monotone-relaxation checker accepts both shipped schedules
    PipelineConfig{}.validate();
}

TEST_CASE("quality_score: anchors and hand-computed midpoint") {
    CHECK(quality_score(1, 1.0, 1.0) == 100);
    CHECK(quality_score(kStageFailed, 1.0, 1.0) == 0);
    CHECK(quality_score(kStageFailed, 0.0, 0.0) == 0);
    // round(100 * (0.30*0.75 + 0.35*0.8 + 0.35*0.9)) = 82
    CHECK(quality_score(2, 0.8, 0.9) == 82);
}

TEST_CASE("quality_score: range and monotonicity over random triples") {
    Rng rng(55);
    for (int i = 0; i < 1000; ++i) {
        const int stage = static_cast<int>(rng.next_u64() % 4);
        const double c = rng.uniform01();
        const double k = rng.uniform01();
        const int qs = quality_score(stage, c, k);
        CHECK(qs >= 0);
        CHECK(qs <= 100);
        if (stage >= 1) {
            CHECK(quality_score(stage, std::min(1.0, c + 0.1), k) >= qs);
            CHECK(quality_score(stage, c, std::min(1.0, k + 0.1)) >= qs);
            if (stage < 3) CHECK(quality_score(stage + 1, c, k) <= qs);
        }
    }
}

TEST_CASE("stage-1 acceptance arithmetic implies a presentable score") {
    // consistency >= 0.70 and confidence >= 0.50 at stage 1 forces QS >= 70
    for (double c = 0.5; c <= 1.0; c += 0.05) {
        for (double k = 0.7; k <= 1.0; k += 0.05) {
            CHECK(quality_score(1, c, k) >= 70);
        }
    }
}

TEST_CASE("gate: inclusive at the threshold, requires an estimate") {
    AnalysisReport r;
    r.hr_bpm = 100.0;
    r.quality_score = 70;
    CHECK(gate(r, 70.0));
    r.quality_score = 69;
    CHECK_FALSE(gate(r, 70.0));
    r.quality_score = 95;
    r.hr_bpm.reset();
    CHECK_FALSE(gate(r, 70.0));
}

TEST_CASE("analyze: clean 120 bpm recording resolves at stage 1 and presents") {
    const AudioBuffer buf = clean_recording(120.0, 20.0, 42);
    const AnalysisReport report = analyze(buf, Variant::Primary);
    CHECK(report.stage_reached == 1);
    REQUIRE(report.hr_bpm.has_value());
    CHECK(*report.hr_bpm == doctest::Approx(120.0).epsilon(0.02));
    CHECK(report.presentable);
    CHECK(report.quality_score >= 70);
    CHECK(report.window_estimates.size() == 11);
    REQUIRE(report.hrv_trend.has_value());
    CHECK(!report.hrv_trend->points.empty());
    // burst trains carry ~10% of their energy in sub-25 Hz repetition lines,
    // so even a clean recording reads just under +10 dB on this proxy
    CHECK(report.noise.snr_proxy_db > 5.0);
    CHECK(report.warnings.empty());
}

TEST_CASE("analyze: a noise-free recording closes the loop at stage 1 within 1%") {
    SynthSpec spec;
    spec.duration_s = 60.0;
    spec.hr_profile = {{0.0, 132.0}};
    spec.snr_db = std::numeric_limits<double>::infinity();
    spec.seed = 2;
    const AnalysisReport report = analyze(synth_recording(spec).audio, Variant::Primary);
    CHECK(report.stage_reached == 1);
    REQUIRE(report.hr_bpm.has_value());
    CHECK(*report.hr_bpm == doctest::Approx(132.0).epsilon(0.01));
    CHECK(report.presentable);
}

TEST_CASE("analyze: constant-HR sweep stays within 2% end to end") {
    for (double hr : {50.0, 80.0, 110.0, 140.0, 180.0, 210.0}) {
        SynthSpec spec;
        spec.duration_s = 60.0;
        spec.hr_profile = {{0.0, hr}};
        spec.snr_db = 20.0;
        spec.seed = 1000 + static_cast<std::uint64_t>(hr);
        const SynthRecording rec = synth_recording(spec);
        const AnalysisReport report = analyze(rec.audio, Variant::Primary);
        REQUIRE_MESSAGE(report.hr_bpm.has_value(), "hr=", hr);
        const double gt = ground_truth_hr(rec.annotations);
        CHECK_MESSAGE(std::abs(*report.hr_bpm - gt) / gt < 0.02, "hr=", hr, " est=", *report.hr_bpm);
    }
}

TEST_CASE("analyze: heavy noise either fails or falls back, never lies") {
    int beyond_stage1 = 0;
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        const AudioBuffer buf = clean_recording(120.0, 0.0, seed);
        const AnalysisReport report = analyze(buf, Variant::Primary);
        if (report.stage_reached != 1) ++beyond_stage1;
        if (report.hr_bpm) CHECK(*report.hr_bpm == doctest::Approx(120.0).epsilon(0.05));
    }
    CHECK(beyond_stage1 >= 1);  // the fallback visibly engages at 0 dB
}

TEST_CASE("analyze: pure noise comes back FAILED and unpresentable") {
    const AudioBuffer buf = noise_recording(60.0, 4000, 7);
    const AnalysisReport report = analyze(buf, Variant::Primary);
    CHECK(report.stage_reached == kStageFailed);
    CHECK_FALSE(report.hr_bpm.has_value());
    CHECK(report.quality_score == 0);
    CHECK_FALSE(report.presentable);
    CHECK(report.window_estimates.size() == 11);  // last stage's estimates, not 3x
}

TEST_CASE("analyze: duration mismatch is a warning, not an error") {
    const AudioBuffer buf = clean_recording(100.0, 20.0, 5, 35.0);
    const AnalysisReport primary = analyze(buf, Variant::Primary);
    REQUIRE(primary.warnings.size() == 1);
    CHECK(primary.warnings[0].find("DurationMismatch") != std::string::npos);

    const AnalysisReport fast = analyze(buf, Variant::Fast);
    CHECK(fast.warnings.empty());
    CHECK(fast.stage_reached == 1);
    CHECK(*fast.hr_bpm == doctest::Approx(100.0).epsilon(0.02));
}

TEST_CASE("analyze: error taxonomy") {
    AudioBuffer empty;
    empty.sample_rate = 4000;
    try {
        analyze(empty, Variant::Primary);
        FAIL("expected EmptyInput");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyInput);
    }
    const AudioBuffer five_s = clean_recording(100.0, 20.0, 5, 5.0);
    try {
        analyze(five_s, Variant::Primary);
        FAIL("expected RecordingTooShort");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::RecordingTooShort);
    }
}

TEST_CASE("analyze: byte-identical reports across repeated runs") {
    const AudioBuffer buf = clean_recording(90.0, 6.0, 11);
    const std::string a = report_to_json(analyze(buf, Variant::Primary));
    const std::string b = report_to_json(analyze(buf, Variant::Primary));
    const std::string c = report_to_json(analyze(buf, Variant::Primary));
    CHECK(a == b);
    CHECK(b == c);
}

TEST_CASE("report JSON carries the stable schema") {
    const AudioBuffer buf = clean_recording(110.0, 20.0, 8);
    const nlohmann::json j = nlohmann::json::parse(report_to_json(analyze(buf, Variant::Primary)));
    for (const char* key : {"hr_bpm", "stage_reached", "quality_score", "presentable",
                            "consistency", "mean_confidence", "variant", "warnings", "noise",
                            "window_estimates", "hrv_trend"})
        CHECK_MESSAGE(j.contains(key), key);
    CHECK(j["noise"].contains("snr_proxy_db"));
    CHECK(j["noise"].contains("clipping_fraction"));
    CHECK(j["variant"] == "PRIMARY");
    CHECK(j["window_estimates"].is_array());
}

TEST_CASE("config: overrides apply and are validated") {
    const PipelineConfig cfg = parse_config_text(
        "# loosen the first stage\n"
        "primary.stage1.prominence_min = 0.45\n"
        "fast.window_s = 8\n"
        "fast.hop_s = 4\n"
        "qs.weight_stage = 0.2\n"
        "qs.gate_threshold = 60\n");
    CHECK(cfg.primary_stages[0].prominence_min == 0.45);
    CHECK(cfg.fast_stages[0].window_s == 8.0);
    CHECK(cfg.fast_stages[2].window_s == 8.0);
    CHECK(cfg.fast_stages[1].hop_s == 4.0);
    CHECK(cfg.qs.stage_weight == 0.2);
    CHECK(cfg.gate_threshold == 60.0);
}

TEST_CASE("config: broken relaxation order or unknown keys are rejected") {
    try {
        parse_config_text("primary.stage2.prominence_min = 0.6\n");  // above stage 1
        FAIL("expected InvalidConfig");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InvalidConfig);
    }
    try {
        parse_config_text("primary.stage1.prominance = 0.5\n");  // typo
        FAIL("expected InvalidConfig");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InvalidConfig);
    }
    try {
        parse_config_text("qs.weight_stage = oops\n");
        FAIL("expected InvalidConfig");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InvalidConfig);
    }
}

TEST_CASE("config: gate threshold override changes presentability") {
    PipelineConfig strict = parse_config_text("qs.gate_threshold = 99\n");
    const AudioBuffer buf = clean_recording(120.0, 20.0, 42);
    const AnalysisReport report = analyze(buf, Variant::Primary, strict);
    CHECK(report.quality_score >= 70);
    if (report.quality_score < 99) CHECK_FALSE(report.presentable);
}
