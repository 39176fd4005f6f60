// Acceptance suite: one test case per shipped acceptance criterion, each
// printing a PASS/FAIL line. Corpora are seeded and deterministic.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include <sys/wait.h>

#include "pcg/eval.hpp"
#include "pcg/pipeline.hpp"
#include "pcg/rng.hpp"
#include "pcg/synth.hpp"

using namespace pcg;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kCorpusSeed = 20250810;

void report_line(int criterion, bool ok, const std::string& detail) {
    std::printf("[criterion %d] %s - %s\n", criterion, ok ? "PASS" : "FAIL", detail.c_str());
    std::fflush(stdout);
}

SynthSpec corpus_base() {
    SynthSpec base;
    base.duration_s = 60.0;
    base.hr_jitter_pct = 2.0;
    base.noise_color = NoiseColor::Pink;
    return base;
}

struct CorpusRun {
    std::vector<AnalysisReport> reports;
    std::vector<double> gt;
};

CorpusRun run_corpus(const std::vector<CorpusItem>& corpus, Variant variant) {
    CorpusRun run;
    for (const CorpusItem& item : corpus) {
        run.reports.push_back(analyze(item.audio, variant));
        run.gt.push_back(ground_truth_hr(item.annotations));
    }
    return run;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PCGHR_BIN) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("criterion 1: metric-math exactness") {
    bool ok = true;
    // the reference error/accuracy pairs, exact to two decimals
    ok &= round2(accuracy(11.14)) == 88.86;
    ok &= round2(accuracy(7.02)) == 92.98;
    ok &= round2(accuracy(8.37)) == 91.63;
    ok &= round2(accuracy(5.05)) == 94.95;

    // gating-ratio arithmetic on crafted result sets
    std::vector<RecordingResult> large, small;
    for (int i = 0; i < 114; ++i) {
        RecordingResult r;
        r.id = "L" + std::to_string(i);
        r.hr_gt = 100.0;
        r.hr_est = 100.0;
        r.error_pct = 0.0;
        r.quality_score = i < 98 ? 85 : 40;
        large.push_back(r);
    }
    for (int i = 0; i < 38; ++i) {
        RecordingResult r;
        r.id = "S" + std::to_string(i);
        r.hr_gt = 100.0;
        r.hr_est = 100.0;
        r.error_pct = 0.0;
        r.quality_score = i < 32 ? 85 : 40;
        small.push_back(r);
    }
    const EvalSummary ls = summarize(large, 70.0);
    const EvalSummary ss = summarize(small, 70.0);
    ok &= ls.n_gated == 98 && ls.n_total == 114;
    ok &= std::llround(100.0 * double(ls.n_gated) / double(ls.n_total)) == 86;
    ok &= ss.n_gated == 32 && ss.n_total == 38;
    ok &= round2(100.0 * double(ss.n_gated) / double(ss.n_total)) == 84.21;

    report_line(1, ok, "accuracy formula and gating ratios reproduce the reference figures");
    CHECK(ok);
}

TEST_CASE("criterion 2: clean-corpus calibration") {
    const auto t0 = std::chrono::steady_clock::now();
    const auto corpus = synth_corpus(corpus_base(), 50, 50.0, 180.0, {20.0}, kCorpusSeed);
    const CorpusRun run = run_corpus(corpus, Variant::Primary);

    int stage1_accurate = 0, qs_ok = 0;
    for (size_t i = 0; i < run.reports.size(); ++i) {
        const AnalysisReport& r = run.reports[i];
        if (r.stage_reached == 1 && r.hr_bpm && hr_error_pct(*r.hr_bpm, run.gt[i]) < 2.0)
            ++stage1_accurate;
        if (r.quality_score >= 70) ++qs_ok;
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const bool ok = stage1_accurate >= 48 && qs_ok >= 48;  // >= 95% of 50
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "SNR 20 dB: %d/50 stage-1 with error <2%%, %d/50 with QS >= 70 (%.1f s)",
                  stage1_accurate, qs_ok, secs);
    report_line(2, ok, detail);
    CHECK(ok);
    CHECK(secs < 60.0);
}

TEST_CASE("criterion 3: degradation and fallback engagement at 0 dB") {
    const auto corpus = synth_corpus(corpus_base(), 50, 50.0, 180.0, {0.0}, kCorpusSeed);
    const CorpusRun run = run_corpus(corpus, Variant::Primary);

    int beyond_stage1 = 0;
    std::vector<double> errs_all, errs_pres;
    for (size_t i = 0; i < run.reports.size(); ++i) {
        const AnalysisReport& r = run.reports[i];
        if (r.stage_reached != 1) ++beyond_stage1;
        if (r.hr_bpm) {
            const double e = hr_error_pct(*r.hr_bpm, run.gt[i]);
            errs_all.push_back(e);
            if (r.presentable) errs_pres.push_back(e);
        }
    }

    const bool engaged = beyond_stage1 >= 10;  // 20% of 50
    char detail[220];
    std::snprintf(detail, sizeof detail, "fallback engages: %d/50 recordings beyond stage 1",
                  beyond_stage1);
    report_line(3, engaged, detail);
    CHECK(engaged);

    bool strict = false;
    double p90_all = 0.0, p90_pres = 0.0;
    if (!errs_all.empty() && !errs_pres.empty()) {
        p90_all = percentile_accuracy(errs_all, 90.0);
        p90_pres = percentile_accuracy(errs_pres, 90.0);
        strict = p90_pres > p90_all;
    }
    std::snprintf(detail, sizeof detail,
                  "QS-gated p90 accuracy strictly above ungated at 0 dB (%.3f vs %.3f, "
                  "%zu/%zu presentable: the gate excludes nothing at this operating point)",
                  p90_pres, p90_all, errs_pres.size(), errs_all.size());
    report_line(3, strict, detail);
    CHECK(strict);

    // Supplementary: the same directional claim in the regime where the gate
    // actually discriminates (just past the 0 dB knee of this synthetic noise
    // model).
    const auto deep = synth_corpus(corpus_base(), 50, 50.0, 180.0, {-1.5}, kCorpusSeed);
    const CorpusRun deep_run = run_corpus(deep, Variant::Primary);
    std::vector<double> d_all, d_pres;
    for (size_t i = 0; i < deep_run.reports.size(); ++i) {
        const AnalysisReport& r = deep_run.reports[i];
        if (r.hr_bpm) {
            const double e = hr_error_pct(*r.hr_bpm, deep_run.gt[i]);
            d_all.push_back(e);
            if (r.presentable) d_pres.push_back(e);
        }
    }
    bool deep_strict = false;
    if (!d_all.empty() && !d_pres.empty() && d_pres.size() < d_all.size())
        deep_strict = percentile_accuracy(d_pres, 90.0) > percentile_accuracy(d_all, 90.0);
    std::snprintf(detail, sizeof detail,
                  "supplementary: gating direction at -1.5 dB (%zu/%zu presentable, p90 %.3f vs %.3f)",
                  d_pres.size(), d_all.size(),
                  d_pres.empty() ? 0.0 : percentile_accuracy(d_pres, 90.0),
                  d_all.empty() ? 0.0 : percentile_accuracy(d_all, 90.0));
    report_line(3, deep_strict, detail);
    CHECK(deep_strict);
}

TEST_CASE("criterion 4: fast-vs-primary ordering at SNR 6") {
    const auto corpus = synth_corpus(corpus_base(), 50, 50.0, 180.0, {6.0}, kCorpusSeed);
    double primary_sum = 0.0, fast_sum = 0.0;
    int primary_n = 0, fast_n = 0;
    for (size_t i = 0; i < corpus.size(); ++i) {
        const CorpusItem& item = corpus[i];
        const AnalysisReport rp = analyze(item.audio, Variant::Primary);
        if (rp.hr_bpm) {
            primary_sum += hr_error_pct(*rp.hr_bpm, ground_truth_hr(item.annotations));
            ++primary_n;
        }
        const auto segs =
            subsample(item.audio, item.annotations, 1, 35.0, 35.0, mix_seed(kCorpusSeed, 5000 + i));
        const AnalysisReport rf = analyze(segs[0].audio, Variant::Fast);
        if (rf.hr_bpm) {
            fast_sum += hr_error_pct(*rf.hr_bpm, ground_truth_hr(segs[0].annotations));
            ++fast_n;
        }
    }
    const double primary_mean = primary_sum / primary_n;
    const double fast_mean = fast_sum / fast_n;
    const bool ok = primary_mean <= fast_mean;
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "primary mean error %.4f%% <= fast-on-35s mean error %.4f%%", primary_mean,
                  fast_mean);
    report_line(4, ok, detail);
    CHECK(ok);
}

TEST_CASE("criterion 5: subsampling protocol") {
    const auto corpus = synth_corpus(corpus_base(), 38, 50.0, 180.0, {20.0}, kCorpusSeed + 5);

    size_t total_segments = 0;
    bool lengths_ok = true, rebase_ok = true, deterministic = true;
    for (size_t i = 0; i < corpus.size(); ++i) {
        const std::uint64_t seed = mix_seed(kCorpusSeed, 900 + i);
        const auto segs = subsample(corpus[i].audio, corpus[i].annotations, 3, 30.0, 40.0, seed);
        const auto segs2 = subsample(corpus[i].audio, corpus[i].annotations, 3, 30.0, 40.0, seed);
        total_segments += segs.size();
        for (size_t k = 0; k < segs.size(); ++k) {
            const Segment& s = segs[k];
            lengths_ok &= s.length_s >= 30.0 && s.length_s <= 40.0;
            deterministic &= s.audio.samples == segs2[k].audio.samples;
            deterministic &= s.annotations.events.size() == segs2[k].annotations.events.size();

            // independent hand-crop of the source annotations
            std::vector<Event> expect;
            for (const Event& ev : corpus[i].annotations.events) {
                if (ev.time_s >= s.start_s && ev.time_s <= s.start_s + s.length_s)
                    expect.push_back({ev.time_s - s.start_s, ev.label});
            }
            rebase_ok &= expect.size() == s.annotations.events.size();
            if (rebase_ok) {
                for (size_t j = 0; j < expect.size(); ++j) {
                    rebase_ok &= std::abs(expect[j].time_s - s.annotations.events[j].time_s) < 1e-9;
                    rebase_ok &= expect[j].label == s.annotations.events[j].label;
                }
            }
        }
    }
    const bool ok = total_segments == 114 && lengths_ok && rebase_ok && deterministic;
    char detail[200];
    std::snprintf(detail, sizeof detail,
                  "38 recordings -> %zu segments, lengths in [30,40]: %s, re-based annotations: %s, "
                  "seed-deterministic: %s",
                  total_segments, lengths_ok ? "yes" : "no", rebase_ok ? "yes" : "no",
                  deterministic ? "yes" : "no");
    report_line(5, ok, detail);
    CHECK(ok);
}

TEST_CASE("criterion 6: fallback monotonicity over a mixed-SNR corpus") {
    const auto corpus =
        synth_corpus(corpus_base(), 200, 50.0, 180.0, {20.0, 12.0, 6.0, 3.0, 0.0}, kCorpusSeed + 6);

    const auto schedule = stage_schedule(Variant::Primary);
    const HrBounds bounds;
    int violations = 0;
    std::array<int, 3> accepted_count = {0, 0, 0};
    for (const CorpusItem& item : corpus) {
        const AudioBuffer at_rate = resample(item.audio, kAnalysisRateHz);
        const Envelope env =
            shannon_envelope(bandpass(at_rate, kBandLoHz, kBandHiHz), kEnvelopeSmoothMs);
        std::vector<PeriodicityAnalyzer> analyzers;
        for (const Window& w : segment_windows(env, schedule[0].window_s, schedule[0].hop_s))
            analyzers.emplace_back(w, bounds);

        std::array<bool, 3> accepted{};
        for (int k = 0; k < 3; ++k) {
            std::vector<WindowEstimate> estimates;
            for (const auto& a : analyzers)
                estimates.push_back(a.estimate(schedule[static_cast<size_t>(k)].prominence_min));
            const AggregateResult agg =
                aggregate_hr(estimates, schedule[static_cast<size_t>(k)].consistency_tol,
                             schedule[static_cast<size_t>(k)].min_valid_fraction);
            accepted[static_cast<size_t>(k)] = agg.accepted;
            if (agg.accepted) ++accepted_count[static_cast<size_t>(k)];
        }
        if ((accepted[0] && !accepted[1]) || (accepted[1] && !accepted[2])) ++violations;
    }
    const bool ok = violations == 0;
    char detail[160];
    std::snprintf(detail, sizeof detail,
                  "acceptance nesting A1(%d) <= A2(%d) <= A3(%d) over 200 recordings, %d violations",
                  accepted_count[0], accepted_count[1], accepted_count[2], violations);
    report_line(6, ok, detail);
    CHECK(ok);
}

TEST_CASE("criterion 7: quality score properties") {
    Rng rng(77);
    bool ok = true;
    for (int i = 0; i < 10000 && ok; ++i) {
        const int stage = static_cast<int>(rng.next_u64() % 4);
        const double c = rng.uniform01();
        const double k = rng.uniform01();
        const int qs = quality_score(stage, c, k);
        ok &= qs >= 0 && qs <= 100;
        if (stage == 0) ok &= qs == 0;
        if (stage >= 1) {
            ok &= quality_score(stage, std::min(1.0, c + rng.uniform01() * (1.0 - c)), k) >= qs;
            ok &= quality_score(stage, c, std::min(1.0, k + rng.uniform01() * (1.0 - k))) >= qs;
            if (stage < 3) ok &= quality_score(stage + 1, c, k) <= qs;
        }
    }
    AnalysisReport r;
    r.hr_bpm = 100.0;
    r.quality_score = 70;
    ok &= gate(r, 70.0);
    r.quality_score = 69;
    ok &= !gate(r, 70.0);
    report_line(7, ok, "QS in [0,100], monotone, FAILED -> 0, gate inclusive at 70");
    CHECK(ok);
}

TEST_CASE("criterion 8: noise rejection") {
    int presentable = 0;
    for (int i = 0; i < 50; ++i) {
        Rng rng(mix_seed(kCorpusSeed, 800 + static_cast<std::uint64_t>(i)));
        AudioBuffer buf;
        buf.sample_rate = 4000;
        buf.samples.reserve(240000);
        for (int k = 0; k < 240000; ++k) buf.samples.push_back(0.3 * rng.gaussian());
        const AnalysisReport rep = analyze(buf, Variant::Primary);
        if (rep.presentable) ++presentable;
    }
    const bool ok = presentable <= 2;  // < 5% of 50
    char detail[120];
    std::snprintf(detail, sizeof detail, "%d/50 pure-noise recordings presentable", presentable);
    report_line(8, ok, detail);
    CHECK(ok);
}

TEST_CASE("criterion 9: determinism across runs and thread counts") {
    SynthSpec spec = corpus_base();
    spec.hr_profile = {{0.0, 95.0}};
    spec.snr_db = 6.0;
    spec.seed = 424242;
    const AudioBuffer buf = synth_recording(spec).audio;
    const std::string r1 = report_to_json(analyze(buf, Variant::Primary));
    const std::string r2 = report_to_json(analyze(buf, Variant::Primary));
    const std::string r3 = report_to_json(analyze(buf, Variant::Primary));
    bool ok = r1 == r2 && r2 == r3;

    // CLI level: --jobs 1 vs --jobs 8 must write identical report bytes
    const fs::path root = fs::temp_directory_path() / "pcg_acceptance_c9";
    fs::remove_all(root);
    const fs::path src = root / "src", o1 = root / "jobs1", o8 = root / "jobs8";
    fs::create_directories(src);
    std::string inputs;
    for (int i = 0; i < 8; ++i) {
        const std::string id = "fix" + std::to_string(i);
        ok &= run_cli("synth --hr " + std::to_string(60 + 18 * i) + " --duration 60 --snr 6 --seed " +
                      std::to_string(100 + i) + " --id " + id + " --out " + src.string()) == 0;
        inputs += " " + (src / (id + ".wav")).string();
    }
    ok &= run_cli("analyze" + inputs + " --jobs 1 --out " + o1.string()) == 0;
    ok &= run_cli("analyze" + inputs + " --jobs 8 --out " + o8.string()) == 0;
    for (int i = 0; i < 8 && ok; ++i) {
        const std::string name = "fix" + std::to_string(i) + ".json";
        ok &= slurp(o1 / name) == slurp(o8 / name) && !slurp(o1 / name).empty();
    }
    report_line(9, ok, "byte-identical reports across 3 runs and across --jobs 1 vs 8");
    CHECK(ok);
}

TEST_CASE("criterion 10: quantile oracle") {
    Rng rng(1010);
    bool ok = true;
    for (int trial = 0; trial < 1000 && ok; ++trial) {
        const size_t n = 1 + rng.next_u64() % 200;
        std::vector<double> errors;
        errors.reserve(n);
        for (size_t i = 0; i < n; ++i) errors.push_back(rng.uniform(0.0, 100.0));
        const double p = rng.uniform(0.5, 99.5);

        // brute-force sorted-rank linear interpolation
        std::vector<double> sorted = errors;
        std::sort(sorted.begin(), sorted.end());
        double expect;
        if (sorted.size() == 1) {
            expect = sorted[0];
        } else {
            const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
            const auto lo = static_cast<size_t>(pos);
            const double frac = pos - static_cast<double>(lo);
            expect = lo + 1 < sorted.size() ? sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
                                            : sorted.back();
        }
        ok &= std::abs(percentile_accuracy(errors, p) - (100.0 - expect)) <= 1e-9;
    }
    report_line(10, ok, "percentile_accuracy matches brute-force interpolation to 1e-9 on 1000 lists");
    CHECK(ok);
}
