#pragma once

#include <optional>
#include <vector>

#include "pcg/dsp.hpp"

namespace pcg {

// Physiological search range; defaults cover canine resting bradycardia
// through small-breed tachycardia.
struct HrBounds {
    double min_bpm = 40.0;
    double max_bpm = 220.0;

    void validate() const {
        if (!(min_bpm > 0.0 && min_bpm < max_bpm))
            fail(Errc::InvalidArgument, "need 0 < min_bpm < max_bpm");
    }
};

struct WindowEstimate {
    double start_s = 0.0;
    std::optional<double> hr_bpm;  // present iff valid
    double confidence = 0.0;       // autocorrelation peak height, [0,1]
    bool valid = false;
};

struct TrendPoint {
    double time_s = 0.0;
    double value_ms = 0.0;
};

// Smoothed inter-beat-interval trend.
struct TrendSeries {
    std::vector<TrendPoint> points;
};

struct AggregateResult {
    std::optional<double> hr_bpm;  // median over valid windows
    double consistency = 0.0;      // agreeing windows / all windows
    bool accepted = false;
    double valid_fraction = 0.0;
    double mean_confidence = 0.0;  // over valid windows
};

// Periodicity detection on one window's envelope. The normalized
// autocovariance is computed once at construction; estimate() is cheap and
// can be re-run with relaxed prominence floors, which keeps a window's HR
// stable as stages relax (only the validity cut moves).
class PeriodicityAnalyzer {
public:
    PeriodicityAnalyzer(const Window& w, const HrBounds& bounds);

    WindowEstimate estimate(double prominence_min) const;

    // normalized autocovariance at integer lags (test hook)
    const std::vector<double>& autocorr() const { return r_; }

private:
    double start_s_;
    int rate_;
    HrBounds bounds_;
    std::vector<double> r_;
    int lag_lo_ = 0;  // search bounds, samples
    int lag_hi_ = 0;
    bool zero_signal_ = false;
};

// Single-shot form of the class above.
WindowEstimate window_periodicity(const Window& w, const HrBounds& bounds, double prominence_min);

// Peak picking over the full-recording envelope: minimum peak distance
// 0.6 * expected period, height floor median + 2*MAD. Returns S1 candidate
// times, strictly increasing.
std::vector<double> detect_beats(const Envelope& env, double expected_period_s);

// Median HR across valid windows plus the consistency fraction used by the
// stage acceptance test.
AggregateResult aggregate_hr(const std::vector<WindowEstimate>& estimates, double consistency_tol,
                             double min_valid_fraction);

// Inter-beat intervals smoothed by a moving median spanning smooth_k beats,
// each point stamped at the central beat. Intervals implying an HR outside
// bounds are dropped first.
TrendSeries hrv_trend(const std::vector<double>& beats, int smooth_k,
                      const HrBounds& bounds = HrBounds{});

}  // namespace pcg
