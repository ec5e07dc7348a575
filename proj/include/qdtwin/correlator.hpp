#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qdtwin/emitter.hpp"
#include "qdtwin/measured.hpp"
#include "qdtwin/timetag.hpp"

namespace qdtwin {

/// Coincidence counts of b - a over [tau_min, tau_max) in bins of bin_width.
struct CorrelationHistogram {
    std::int64_t bin_width = 1;
    std::int64_t tau_min = 0;
    std::int64_t tau_max = 0;
    std::vector<std::uint64_t> counts;
    std::uint64_t n_a = 0;
    std::uint64_t n_b = 0;
    std::int64_t duration_ps = 0;

    std::size_t bin_count() const { return counts.size(); }
    std::int64_t bin_lower(std::size_t i) const { return tau_min + static_cast<std::int64_t>(i) * bin_width; }
    double bin_center(std::size_t i) const
    {
        return static_cast<double>(bin_lower(i)) + 0.5 * static_cast<double>(bin_width);
    }
    std::uint64_t total() const;

    /// Merges `factor` adjacent bins; the total is preserved.
    CorrelationHistogram rebinned(std::size_t factor) const;

    friend bool operator==(const CorrelationHistogram&, const CorrelationHistogram&) = default;
};

/// Histogram layout shared by the kernels; validates divisibility.
CorrelationHistogram make_empty_histogram(std::int64_t bin_width, std::int64_t tau_min, std::int64_t tau_max);

/// Reference single-threaded two-pointer sweep, O(N_a * m + N_b).
CorrelationHistogram cross_correlate_serial(const TimeTagStream& a, const TimeTagStream& b,
                                            std::int64_t bin_width, std::int64_t tau_min,
                                            std::int64_t tau_max);

/// OpenMP sweep over contiguous chunks of `a`; bit-identical to the serial sweep.
/// `threads <= 0` uses the OpenMP default.
CorrelationHistogram cross_correlate_parallel(const TimeTagStream& a, const TimeTagStream& b,
                                              std::int64_t bin_width, std::int64_t tau_min,
                                              std::int64_t tau_max, int threads = 0);

/// Dispatches to the serial sweep for threads == 1, the parallel one otherwise.
CorrelationHistogram cross_correlate(const TimeTagStream& a, const TimeTagStream& b, std::int64_t bin_width,
                                     std::int64_t tau_min, std::int64_t tau_max, int threads = 1);

/// Start-of-period referenced arrival histogram (TCSPC decay trace):
/// counts of (tag - t_k) over [0, span_ps), t_k the latest clock pulse at or
/// before the tag.
struct FoldedHistogram {
    std::int64_t bin_width = 1;
    std::vector<std::uint64_t> counts;

    friend bool operator==(const FoldedHistogram&, const FoldedHistogram&) = default;
};

FoldedHistogram fold_serial(std::span<const std::int64_t> tags, const PulseClock& clock, std::int64_t bin_width,
                            std::int64_t span_ps);
FoldedHistogram fold_parallel(std::span<const std::int64_t> tags, const PulseClock& clock,
                              std::int64_t bin_width, std::int64_t span_ps, int threads = 0);

struct G2Result {
    double g2_zero = 0.0;
    double stat_error = 0.0;
    std::int64_t window_ps = 0;
    double center_counts = 0.0;
    double side_mean = 0.0;
    int side_peaks_used = 0;
};

/// Sum of the bins whose centres lie in [center - window/2, center + window/2).
double integrate_window(const CorrelationHistogram& hist, double center, std::int64_t window);

/// g2(0) = C_0 / mean(C_k) over k = +-min_side_peak .. +-n_side_peaks.
G2Result g2_zero(const CorrelationHistogram& hist, double rep_period_ps, std::int64_t window,
                 int n_side_peaks = 10, int min_side_peak = 1);

struct VisibilityResult {
    Measured v;
    double area_co = 0.0;
    double area_cross = 0.0;
    double norm_co = 0.0;
    double norm_cross = 0.0;
};

/// V = 1 - A_co(0)/A_cross(0), each area normalised by the mean of the
/// side peaks with |k| in [min_side_peak, n_side_peaks].
VisibilityResult hom_visibility(const CorrelationHistogram& co, const CorrelationHistogram& cross,
                                double rep_period_ps, std::int64_t window, int n_side_peaks = 10,
                                int min_side_peak = 2);

struct CorrectedVisibility {
    double value = 0.0;
    bool clamped = false;
};

/// (1 + 2 g2(0)) V, clamped to at most 1.
CorrectedVisibility correct_visibility(double v, double g2z);

}  // namespace qdtwin
