#include "pcg/detector.hpp"

#include <algorithm>
#include <cmath>

namespace pcg {

namespace {

// A multiple-of-true-period peak is rejected when a sub-multiple lag carries
// a peak at least this fraction of its height.
constexpr double kComparableFraction = 0.9;
// Search slack around each sub-multiple lag (fraction of the lag).
constexpr double kSubLagTolerance = 0.05;
// Sub-multiples are never probed below this lag; shorter lags are dominated
// by the envelope smoothing itself.
constexpr double kSubLagFloorS = 0.1;

double median_of(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

PeriodicityAnalyzer::PeriodicityAnalyzer(const Window& w, const HrBounds& bounds)
    : start_s_(w.start_s), rate_(w.rate), bounds_(bounds) {
    bounds_.validate();
    if (rate_ <= 0) fail(Errc::InvalidArgument, "window rate must be positive");

    const double len_s = static_cast<double>(w.values.size()) / rate_;
    const double min_len = 3.0 * 60.0 / bounds.min_bpm;
    if (len_s < min_len) fail(Errc::WindowTooShort, "window shorter than 3 cycles at min_bpm");

    lag_lo_ = static_cast<int>(std::ceil(60.0 / bounds.max_bpm * rate_));
    lag_hi_ = static_cast<int>(std::floor(60.0 / bounds.min_bpm * rate_));
    lag_lo_ = std::max(lag_lo_, 2);

    const size_t n = w.values.size();
    double mean = 0.0;
    for (double v : w.values) mean += v;
    mean /= static_cast<double>(n);

    const size_t keep = static_cast<size_t>(lag_hi_) + 3;
    const size_t m = next_pow2(n + keep);
    std::vector<std::complex<double>> spec(m, {0.0, 0.0});
    for (size_t i = 0; i < n; ++i) spec[i] = w.values[i] - mean;
    fft_inplace(spec, false);
    for (auto& c : spec) c = std::norm(c);
    fft_inplace(spec, true);

    const double d0 = spec[0].real();
    r_.assign(keep + 1, 0.0);
    if (d0 <= 1e-30) {
        zero_signal_ = true;
        return;
    }
    for (size_t k = 0; k <= keep && k < m; ++k) r_[k] = spec[k].real() / d0;
}

WindowEstimate PeriodicityAnalyzer::estimate(double prominence_min) const {
    WindowEstimate est;
    est.start_s = start_s_;
    if (zero_signal_) return est;  // invalid, confidence 0

    // local maxima over the physiological lag range
    struct Peak {
        int lag;
        double height;
    };
    std::vector<Peak> peaks;
    double best_any = 0.0;
    for (int i = lag_lo_; i <= lag_hi_; ++i) {
        const double h = r_[static_cast<size_t>(i)];
        best_any = std::max(best_any, h);
        if (h > r_[static_cast<size_t>(i) - 1] && h >= r_[static_cast<size_t>(i) + 1])
            peaks.push_back({i, h});
    }
    if (peaks.empty()) {
        est.confidence = std::max(0.0, best_any);
        return est;
    }

    // height of the strongest local ridge near the given lag
    auto height_near = [&](int lag) {
        const int slack = std::max(2, static_cast<int>(std::llround(lag * kSubLagTolerance)));
        const int a = std::max(1, lag - slack);
        const int b = std::min(static_cast<int>(r_.size()) - 2, lag + slack);
        double h = -1.0;
        int at = a;
        for (int i = a; i <= b; ++i) {
            if (r_[static_cast<size_t>(i)] > h) {
                h = r_[static_cast<size_t>(i)];
                at = i;
            }
        }
        return std::pair<double, int>{h, at};
    };

    double h_max = 0.0;
    for (const Peak& p : peaks) h_max = std::max(h_max, p.height);

    // Longest-plausible-lag preference: among peaks comparable to the best
    // one, start from the longest lag; the S1->S2 sub-interval never beats
    // the full period this way.
    int lag = 0;
    double height = 0.0;
    for (const Peak& p : peaks) {
        if (p.height >= kComparableFraction * h_max && p.lag > lag) {
            lag = p.lag;
            height = p.height;
        }
    }

    // Multiple-period rejection: walk down to the shortest sub-multiple that
    // still carries a comparably strong peak. Checking every k (not just 2)
    // also unwinds odd multiples of the true period.
    const int floor_lag = std::max(lag_lo_ / 2, static_cast<int>(std::llround(kSubLagFloorS * rate_)));
    for (;;) {
        bool moved = false;
        for (int k = 2; lag / k >= floor_lag; ++k) {
            const int sub = static_cast<int>(std::llround(static_cast<double>(lag) / k));
            auto [h, at] = height_near(sub);
            if (h >= prominence_min && h >= kComparableFraction * height) {
                lag = at;
                height = h;
                moved = true;
                break;
            }
        }
        if (!moved) break;
    }

    // hill-climb to the exact local maximum, then refine sub-sample
    while (lag + 2 < static_cast<int>(r_.size()) && r_[static_cast<size_t>(lag) + 1] > r_[static_cast<size_t>(lag)]) ++lag;
    while (lag > 1 && r_[static_cast<size_t>(lag) - 1] > r_[static_cast<size_t>(lag)]) --lag;
    height = r_[static_cast<size_t>(lag)];

    est.confidence = std::clamp(height, 0.0, 1.0);
    if (height < prominence_min) return est;  // best sub-threshold height reported

    const double rm = r_[static_cast<size_t>(lag) - 1];
    const double rp = r_[static_cast<size_t>(lag) + 1];
    const double denom = rm - 2.0 * height + rp;
    double delta = denom != 0.0 ? 0.5 * (rm - rp) / denom : 0.0;
    delta = std::clamp(delta, -0.5, 0.5);
    const double lag_s = (static_cast<double>(lag) + delta) / rate_;

    double hr = 60.0 / lag_s;
    // keep the estimate strictly inside the physiological bounds
    const double eps = 1e-9;
    hr = std::clamp(hr, bounds_.min_bpm * (1.0 + eps), bounds_.max_bpm * (1.0 - eps));

    est.hr_bpm = hr;
    est.valid = true;
    return est;
}

WindowEstimate window_periodicity(const Window& w, const HrBounds& bounds, double prominence_min) {
    return PeriodicityAnalyzer(w, bounds).estimate(prominence_min);
}

std::vector<double> detect_beats(const Envelope& env, double expected_period_s) {
    if (!(expected_period_s > 0.0) || !std::isfinite(expected_period_s))
        fail(Errc::NoPeriodEstimate, "expected period must come from an accepted estimate");
    if (env.values.empty() || env.rate <= 0) fail(Errc::EmptyInput, "empty envelope");

    const std::vector<double>& v = env.values;
    const double med = median_of(v);
    std::vector<double> dev(v.size());
    for (size_t i = 0; i < v.size(); ++i) dev[i] = std::abs(v[i] - med);
    const double mad = median_of(dev);
    const double threshold = med + 2.0 * mad;

    struct Peak {
        size_t idx;
        double height;
    };
    std::vector<Peak> candidates;
    for (size_t i = 1; i + 1 < v.size(); ++i) {
        if (v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > threshold) candidates.push_back({i, v[i]});
    }

    // strongest-first with a refractory distance of 0.6 periods
    std::sort(candidates.begin(), candidates.end(), [](const Peak& a, const Peak& b) {
        if (a.height != b.height) return a.height > b.height;
        return a.idx < b.idx;
    });
    const double min_dist = 0.6 * expected_period_s * env.rate;
    std::vector<size_t> accepted;
    for (const Peak& c : candidates) {
        bool blocked = false;
        for (size_t a : accepted) {
            if (std::abs(static_cast<double>(a) - static_cast<double>(c.idx)) < min_dist) {
                blocked = true;
                break;
            }
        }
        if (!blocked) accepted.push_back(c.idx);
    }
    std::sort(accepted.begin(), accepted.end());

    std::vector<double> times;
    times.reserve(accepted.size());
    for (size_t idx : accepted) times.push_back(static_cast<double>(idx) / env.rate);
    return times;
}

AggregateResult aggregate_hr(const std::vector<WindowEstimate>& estimates, double consistency_tol,
                             double min_valid_fraction) {
    if (estimates.empty()) fail(Errc::InvalidArgument, "need at least one window estimate");

    std::vector<double> valid_hrs;
    double conf_sum = 0.0;
    for (const WindowEstimate& e : estimates) {
        if (e.valid && e.hr_bpm) {
            valid_hrs.push_back(*e.hr_bpm);
            conf_sum += e.confidence;
        }
    }

    AggregateResult out;
    const double n_all = static_cast<double>(estimates.size());
    out.valid_fraction = static_cast<double>(valid_hrs.size()) / n_all;
    if (valid_hrs.empty()) return out;

    const double med = median_of(valid_hrs);
    size_t close = 0;
    for (double hr : valid_hrs)
        if (std::abs(hr - med) <= consistency_tol * med) ++close;

    out.hr_bpm = med;
    // fraction agreeing among valid, down-weighted by the valid fraction
    out.consistency = static_cast<double>(close) / n_all;
    out.mean_confidence = conf_sum / static_cast<double>(valid_hrs.size());
    out.accepted = out.valid_fraction >= min_valid_fraction && out.consistency >= min_valid_fraction;
    return out;
}

TrendSeries hrv_trend(const std::vector<double>& beats, int smooth_k, const HrBounds& bounds) {
    bounds.validate();
    if (smooth_k < 3) fail(Errc::InvalidArgument, "smooth_k must be at least 3");
    if (beats.size() < static_cast<size_t>(smooth_k) + 1)
        fail(Errc::TooFewBeats, "need at least smooth_k + 1 beats");

    const double lo_ms = 60000.0 / bounds.max_bpm;
    const double hi_ms = 60000.0 / bounds.min_bpm;

    struct Interval {
        double ms;
        double end_s;
    };
    std::vector<Interval> intervals;
    intervals.reserve(beats.size() - 1);
    for (size_t i = 1; i < beats.size(); ++i) {
        const double ms = (beats[i] - beats[i - 1]) * 1000.0;
        if (ms < lo_ms || ms > hi_ms) continue;  // artefact, outside physiology
        intervals.push_back({ms, beats[i]});
    }

    TrendSeries trend;
    const size_t span = static_cast<size_t>(smooth_k) - 1;  // intervals per window
    if (intervals.size() < span) return trend;

    std::vector<double> window(span);
    const size_t center = (static_cast<size_t>(smooth_k) - 2) / 2;
    for (size_t j = 0; j + span <= intervals.size(); ++j) {
        for (size_t t = 0; t < span; ++t) window[t] = intervals[j + t].ms;
        trend.points.push_back({intervals[j + center].end_s, median_of(window)});
    }
    return trend;
}

}  // namespace pcg
