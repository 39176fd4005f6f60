#include "pcg/eval.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "pcg/rng.hpp"

namespace pcg {

double ground_truth_hr(const AnnotationSet& ann) {
    double first = 0.0, last = 0.0;
    size_t count = 0;
    for (const Event& ev : ann.events) {
        if (ev.label != EventLabel::S1) continue;
        if (count == 0) first = ev.time_s;
        last = ev.time_s;
        ++count;
    }
    if (count < 2) fail(Errc::InsufficientS1Events, "need at least 2 S1 events");
    const double span = last - first;
    if (span <= 0.0) fail(Errc::InsufficientS1Events, "S1 events span no time");
    return 60.0 * static_cast<double>(count - 1) / span;
}

double hr_error_pct(double est_bpm, double gt_bpm) {
    if (!(gt_bpm > 0.0)) fail(Errc::InvalidGroundTruth, "ground truth HR must be positive");
    return 100.0 * std::abs(est_bpm - gt_bpm) / gt_bpm;
}

double accuracy(double error_pct) { return 100.0 - error_pct; }

namespace {

// Inclusive convention: sorted ranks 1..n map linearly onto quantiles 0..100.
double quantile_inclusive(std::vector<double> v, double p) {
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * p / 100.0;
    const auto i = static_cast<size_t>(std::floor(h));
    if (i + 1 >= v.size()) return v.back();
    return v[i] + (h - static_cast<double>(i)) * (v[i + 1] - v[i]);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double median_sorted(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

double percentile_accuracy(const std::vector<double>& errors, double p) {
    if (errors.empty()) fail(Errc::EmptyList, "no errors to rank");
    if (!(p > 0.0 && p < 100.0)) fail(Errc::InvalidArgument, "percentile must lie in (0, 100)");
    return 100.0 - quantile_inclusive(errors, p);
}

EvalSummary summarize(const std::vector<RecordingResult>& results, double qs_threshold) {
    if (results.empty()) fail(Errc::EmptyList, "no results to summarize");

    EvalSummary s;
    s.n_total = results.size();
    s.qs_threshold = qs_threshold;

    std::vector<double> errors_all, errors_gated;
    for (const RecordingResult& r : results) {
        if (r.quality_score >= qs_threshold) ++s.n_gated;
        if (!r.hr_est || !r.error_pct) {
            ++s.no_result;
            continue;
        }
        errors_all.push_back(*r.error_pct);
        if (r.quality_score >= qs_threshold) errors_gated.push_back(*r.error_pct);
    }

    if (!errors_all.empty()) {
        s.mean_acc = accuracy(mean_of(errors_all));
        s.median_acc = accuracy(median_sorted(errors_all));
        s.p80_acc = percentile_accuracy(errors_all, 80.0);
        s.p90_acc = percentile_accuracy(errors_all, 90.0);
    }
    if (!errors_gated.empty()) {
        s.gated_mean_acc = accuracy(mean_of(errors_gated));
        s.gated_median_acc = accuracy(median_sorted(errors_gated));
        s.gated_p80_acc = percentile_accuracy(errors_gated, 80.0);
        s.gated_p90_acc = percentile_accuracy(errors_gated, 90.0);
    }
    return s;
}

std::vector<Segment> subsample(const AudioBuffer& buf, const AnnotationSet& ann, int n,
                               double len_lo_s, double len_hi_s, std::uint64_t seed) {
    if (n < 1) fail(Errc::InvalidArgument, "segment count must be at least 1");
    if (!(len_lo_s > 0.0 && len_lo_s <= len_hi_s)) fail(Errc::InvalidArgument, "bad length range");
    const double dur = buf.duration_s();
    if (dur < len_lo_s) fail(Errc::RecordingTooShort, "recording shorter than the minimum segment");

    // Sources shorter than the upper bound still subsample; lengths clip to
    // the recording.
    const double hi = std::min(len_hi_s, dur);

    Rng rng(seed);
    std::vector<Segment> out;
    out.reserve(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double len = rng.uniform(len_lo_s, hi);
        const double start = rng.uniform(0.0, dur - len);

        Segment seg;
        seg.start_s = start;
        seg.length_s = len;
        const auto a = static_cast<size_t>(std::llround(start * buf.sample_rate));
        const auto cnt = static_cast<size_t>(std::llround(len * buf.sample_rate));
        const size_t b = std::min(a + cnt, buf.samples.size());
        seg.audio.sample_rate = buf.sample_rate;
        seg.audio.samples.assign(buf.samples.begin() + static_cast<std::ptrdiff_t>(a),
                                 buf.samples.begin() + static_cast<std::ptrdiff_t>(b));
        seg.annotations = crop_annotations(ann, start, len);
        out.push_back(std::move(seg));
    }
    return out;
}

namespace {

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

std::string results_to_csv(const std::vector<RecordingResult>& results) {
    std::string csv = "id,hr_est_bpm,hr_gt_bpm,error_pct,accuracy_pct,quality_score,stage_reached,variant\n";
    for (const RecordingResult& r : results) {
        csv += r.id;
        csv += ',';
        csv += r.hr_est ? fmt("%.4f", *r.hr_est) : "";
        csv += ',';
        csv += fmt("%.4f", r.hr_gt);
        csv += ',';
        csv += r.error_pct ? fmt("%.4f", *r.error_pct) : "";
        csv += ',';
        csv += r.error_pct ? fmt("%.2f", accuracy(*r.error_pct)) : "";
        csv += ',';
        csv += std::to_string(r.quality_score);
        csv += ',';
        csv += r.stage_reached == 0 ? "FAILED" : std::to_string(r.stage_reached);
        csv += ',';
        csv += r.variant;
        csv += '\n';
    }
    return csv;
}

std::string summary_to_json(const EvalSummary& s) {
    nlohmann::ordered_json j;
    j["n_total"] = s.n_total;
    j["n_gated"] = s.n_gated;
    j["no_result"] = s.no_result;
    j["qs_threshold"] = s.qs_threshold;
    j["quantile_method"] = "inclusive linear interpolation (ranks 1..n)";
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) j[key] = round2(*v);
        else j[key] = nullptr;
    };
    put("mean_acc", s.mean_acc);
    put("median_acc", s.median_acc);
    put("p80_acc", s.p80_acc);
    put("p90_acc", s.p90_acc);
    put("gated_mean_acc", s.gated_mean_acc);
    put("gated_median_acc", s.gated_median_acc);
    put("gated_p80_acc", s.gated_p80_acc);
    put("gated_p90_acc", s.gated_p90_acc);
    return j.dump(2) + "\n";
}

std::string summary_to_csv(const EvalSummary& s) {
    std::string csv =
        "n_total,n_gated,no_result,mean_acc,median_acc,p80_acc,p90_acc,"
        "gated_mean_acc,gated_median_acc,gated_p80_acc,gated_p90_acc\n";
    csv += std::to_string(s.n_total);
    csv += ',';
    csv += std::to_string(s.n_gated);
    csv += ',';
    csv += std::to_string(s.no_result);
    for (const auto& v : {s.mean_acc, s.median_acc, s.p80_acc, s.p90_acc, s.gated_mean_acc,
                          s.gated_median_acc, s.gated_p80_acc, s.gated_p90_acc}) {
        csv += ',';
        csv += v ? fmt("%.2f", *v) : "";
    }
    csv += '\n';
    return csv;
}

}  // namespace pcg
