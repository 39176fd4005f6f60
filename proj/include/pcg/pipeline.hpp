#pragma once

#include <array>
#include <optional>
#include <string>

#include "pcg/detector.hpp"

namespace pcg {

enum class Variant { Primary, Fast };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // throws InvalidArgument

// Thresholds for one fallback pass. Later stages relax every knob.
struct StageConfig {
    int stage_index = 1;  // 1..3
    double window_s = 10.0;
    double hop_s = 5.0;
    double prominence_min = 0.5;
    double consistency_tol = 0.08;
    double min_valid_fraction = 0.7;
};

struct QsWeights {
    double stage_weight = 0.30;
    double confidence_weight = 0.35;
    double consistency_weight = 0.35;
    std::array<double, 3> stage_factor = {1.0, 0.75, 0.50};
};

// stage_reached value meaning detection never succeeded.
inline constexpr int kStageFailed = 0;

struct PipelineConfig {
    std::array<StageConfig, 3> primary_stages;
    std::array<StageConfig, 3> fast_stages;
    QsWeights qs;
    double gate_threshold = 70.0;
    HrBounds bounds;

    PipelineConfig();
    void validate() const;  // throws InvalidConfig on broken relaxation order

    const std::array<StageConfig, 3>& stages(Variant v) const {
        return v == Variant::Primary ? primary_stages : fast_stages;
    }
};

// Fixed three-stage schedule for a variant (default configuration).
std::array<StageConfig, 3> stage_schedule(Variant v);

// `key = value` overrides, '#' comments. Keys:
//   <variant>.stage<k>.<field>   field in {window_s, hop_s, prominence_min,
//                                consistency_tol, min_valid_fraction}
//   <variant>.window_s | <variant>.hop_s      (applies to all three stages)
//   qs.weight_stage | qs.weight_confidence | qs.weight_consistency
//   qs.stage_factor_1..3 | qs.gate_threshold
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config_text(const std::string& text);

struct AnalysisReport {
    std::optional<double> hr_bpm;
    int stage_reached = kStageFailed;  // 1..3, or kStageFailed
    int quality_score = 0;
    bool presentable = false;
    double consistency = 0.0;
    double mean_confidence = 0.0;
    std::vector<WindowEstimate> window_estimates;  // from the accepted (or last) stage
    std::optional<TrendSeries> hrv_trend;
    NoiseProfile noise;
    Variant variant = Variant::Primary;
    std::vector<std::string> warnings;
};

// Composite reliability score: stage depth, confidence and window
// consistency, weighted 0.30/0.35/0.35 with stage factors 1.0/0.75/0.50.
// A failed run scores 0.
int quality_score(int stage_reached, double mean_confidence, double consistency,
                  const QsWeights& weights = QsWeights{});

bool gate(const AnalysisReport& report, double threshold = 70.0);

// Full pipeline: condition once, then up to three detection passes with
// progressively relaxed thresholds, stopping at the first accepted stage.
AnalysisReport analyze(const AudioBuffer& buf, Variant variant,
                       const PipelineConfig& config = PipelineConfig{});

// Stable-schema JSON document for a report (field order fixed).
std::string report_to_json(const AnalysisReport& report);

}  // namespace pcg
