#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pcg/audio.hpp"

namespace pcg {

struct RecordingResult {
    std::string id;
    std::optional<double> hr_est;  // absent when the pipeline produced no HR
    double hr_gt = 0.0;
    std::optional<double> error_pct;  // present iff hr_est is
    int quality_score = 0;
    int stage_reached = 0;  // 0 = FAILED
    std::string variant = "PRIMARY";
};

// Accuracy statistics over produced estimates, with and without QS gating.
// Recordings with no estimate count in n_total (and no_result) but never in
// the accuracy statistics.
struct EvalSummary {
    size_t n_total = 0;
    size_t n_gated = 0;    // quality_score >= threshold
    size_t no_result = 0;  // no HR estimate
    double qs_threshold = 70.0;
    std::optional<double> mean_acc, median_acc, p80_acc, p90_acc;
    std::optional<double> gated_mean_acc, gated_median_acc, gated_p80_acc, gated_p90_acc;
};

// HR over the annotated S1 span: 60 * (count-1) / (last - first). Other
// labels are ignored.
double ground_truth_hr(const AnnotationSet& ann);

double hr_error_pct(double est_bpm, double gt_bpm);

// User-facing convention: accuracy = 100 - error%.
double accuracy(double error_pct);

// 100 - Q_p(errors) with the inclusive linear-interpolation quantile
// (endpoints at ranks 1 and n).
double percentile_accuracy(const std::vector<double>& errors, double p);

EvalSummary summarize(const std::vector<RecordingResult>& results, double qs_threshold);

struct Segment {
    AudioBuffer audio;
    AnnotationSet annotations;
    double start_s = 0.0;
    double length_s = 0.0;
};

// n segments with length ~ U[min(len), min(max(len), duration)] and start ~
// U[0, duration - length]; overlaps allowed; annotations re-based to segment
// time. Deterministic for a fixed seed (length then start, per segment).
std::vector<Segment> subsample(const AudioBuffer& buf, const AnnotationSet& ann, int n,
                               double len_lo_s, double len_hi_s, std::uint64_t seed);

// Stable-schema artifacts.
std::string results_to_csv(const std::vector<RecordingResult>& results);
std::string summary_to_json(const EvalSummary& summary);
std::string summary_to_csv(const EvalSummary& summary);

}  // namespace pcg
