#include "qdtwin/correlator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "correlator_kernel.hpp"
#include "qdtwin/error.hpp"

namespace qdtwin {

std::uint64_t CorrelationHistogram::total() const
{
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

CorrelationHistogram CorrelationHistogram::rebinned(std::size_t factor) const
{
    if (factor == 0 || counts.size() % factor != 0) {
        throw DomainError("rebinned: factor must divide the bin count");
    }
    CorrelationHistogram out = *this;
    out.bin_width = bin_width * static_cast<std::int64_t>(factor);
    out.counts.assign(counts.size() / factor, 0);
    for (std::size_t i = 0; i < counts.size(); ++i) {
        out.counts[i / factor] += counts[i];
    }
    return out;
}

CorrelationHistogram make_empty_histogram(std::int64_t bin_width, std::int64_t tau_min, std::int64_t tau_max)
{
    if (bin_width <= 0) {
        throw DomainError("cross_correlate: bin_width must be > 0");
    }
    if (tau_max <= tau_min) {
        throw DomainError("cross_correlate: tau_max must exceed tau_min");
    }
    if ((tau_max - tau_min) % bin_width != 0) {
        throw DomainError("cross_correlate: bin_width must divide tau_max - tau_min");
    }
    CorrelationHistogram h;
    h.bin_width = bin_width;
    h.tau_min = tau_min;
    h.tau_max = tau_max;
    h.counts.assign(static_cast<std::size_t>((tau_max - tau_min) / bin_width), 0);
    return h;
}

namespace {

void require_sorted(const TimeTagStream& s, const char* name)
{
    if (!s.is_sorted()) {
        throw DataError(std::string("cross_correlate: stream ") + name + " is not sorted");
    }
}

}  // namespace

CorrelationHistogram cross_correlate_serial(const TimeTagStream& a, const TimeTagStream& b,
                                            std::int64_t bin_width, std::int64_t tau_min,
                                            std::int64_t tau_max)
{
    require_sorted(a, "a");
    require_sorted(b, "b");
    CorrelationHistogram h = make_empty_histogram(bin_width, tau_min, tau_max);
    detail::sweep_chunk(a.tags, 0, a.tags.size(), b.tags, bin_width, tau_min, tau_max, h.counts.data());
    h.n_a = a.tags.size();
    h.n_b = b.tags.size();
    h.duration_ps = std::max(a.duration_ps, b.duration_ps);
    return h;
}

CorrelationHistogram cross_correlate(const TimeTagStream& a, const TimeTagStream& b, std::int64_t bin_width,
                                     std::int64_t tau_min, std::int64_t tau_max, int threads)
{
    if (threads == 1) {
        return cross_correlate_serial(a, b, bin_width, tau_min, tau_max);
    }
    return cross_correlate_parallel(a, b, bin_width, tau_min, tau_max, threads);
}

FoldedHistogram fold_serial(std::span<const std::int64_t> tags, const PulseClock& clock, std::int64_t bin_width,
                            std::int64_t span_ps)
{
    if (bin_width <= 0 || span_ps <= 0 || span_ps % bin_width != 0) {
        throw DomainError("fold: bin_width must be > 0 and divide span_ps");
    }
    FoldedHistogram h;
    h.bin_width = bin_width;
    h.counts.assign(static_cast<std::size_t>(span_ps / bin_width), 0);
    detail::fold_chunk(tags, 0, tags.size(), clock, bin_width, span_ps, h.counts.data());
    return h;
}

double integrate_window(const CorrelationHistogram& hist, double center, std::int64_t window)
{
    const double lo = center - 0.5 * static_cast<double>(window);
    const double hi = center + 0.5 * static_cast<double>(window);
    if (lo < static_cast<double>(hist.tau_min) || hi > static_cast<double>(hist.tau_max)) {
        throw DataError("integrate_window: window around tau=" + std::to_string(center) +
                        " ps is not covered by the histogram");
    }
    const double bw = static_cast<double>(hist.bin_width);
    const auto first = static_cast<std::int64_t>(std::floor((lo - static_cast<double>(hist.tau_min)) / bw)) - 1;
    const auto last = static_cast<std::int64_t>(std::ceil((hi - static_cast<double>(hist.tau_min)) / bw)) + 1;
    double sum = 0.0;
    for (std::int64_t i = std::max<std::int64_t>(first, 0);
         i < std::min<std::int64_t>(last, static_cast<std::int64_t>(hist.counts.size())); ++i) {
        const double c = hist.bin_center(static_cast<std::size_t>(i));
        if (c >= lo && c < hi) {
            sum += static_cast<double>(hist.counts[static_cast<std::size_t>(i)]);
        }
    }
    return sum;
}

namespace {

void check_peak_spec(double rep_period_ps, std::int64_t window, int n_side_peaks, int min_side_peak)
{
    if (!(rep_period_ps > 0.0)) {
        throw DomainError("rep_period must be > 0");
    }
    if (window <= 0 || static_cast<double>(window) > rep_period_ps + 0.5) {
        throw DomainError("window must lie in (0, rep_period]");
    }
    if (min_side_peak < 1 || n_side_peaks < min_side_peak) {
        throw DomainError("side peaks: need 1 <= min_side_peak <= n_side_peaks");
    }
}

struct SidePeaks {
    double sum = 0.0;
    int used = 0;
    double mean() const { return sum / used; }
};

SidePeaks side_peaks(const CorrelationHistogram& hist, double rep_period_ps, std::int64_t window,
                     int n_side_peaks, int min_side_peak)
{
    SidePeaks s;
    for (int k = min_side_peak; k <= n_side_peaks; ++k) {
        s.sum += integrate_window(hist, k * rep_period_ps, window);
        s.sum += integrate_window(hist, -k * rep_period_ps, window);
        s.used += 2;
    }
    return s;
}

}  // namespace

G2Result g2_zero(const CorrelationHistogram& hist, double rep_period_ps, std::int64_t window, int n_side_peaks,
                 int min_side_peak)
{
    check_peak_spec(rep_period_ps, window, n_side_peaks, min_side_peak);
    const SidePeaks side = side_peaks(hist, rep_period_ps, window, n_side_peaks, min_side_peak);
    if (side.sum <= 0.0) {
        throw EmptySidePeaksError("g2_zero: side peaks contain no coincidences");
    }
    G2Result r;
    r.window_ps = window;
    r.center_counts = integrate_window(hist, 0.0, window);
    r.side_mean = side.mean();
    r.side_peaks_used = side.used;
    r.g2_zero = r.center_counts / r.side_mean;
    // An empty centre still carries the one-count Poisson upper uncertainty.
    r.stat_error = r.center_counts > 0.0
                       ? r.g2_zero * std::sqrt(1.0 / r.center_counts + 1.0 / side.sum)
                       : 1.0 / r.side_mean;
    return r;
}

VisibilityResult hom_visibility(const CorrelationHistogram& co, const CorrelationHistogram& cross,
                                double rep_period_ps, std::int64_t window, int n_side_peaks, int min_side_peak)
{
    check_peak_spec(rep_period_ps, window, n_side_peaks, min_side_peak);
    if (co.bin_width != cross.bin_width) {
        throw DataError("hom_visibility: co and cross histograms use different bin widths");
    }
    const SidePeaks side_co = side_peaks(co, rep_period_ps, window, n_side_peaks, min_side_peak);
    const SidePeaks side_cross = side_peaks(cross, rep_period_ps, window, n_side_peaks, min_side_peak);
    if (side_co.sum <= 0.0 || side_cross.sum <= 0.0) {
        throw EmptySidePeaksError("hom_visibility: side peaks contain no coincidences");
    }
    VisibilityResult r;
    r.area_co = integrate_window(co, 0.0, window);
    r.area_cross = integrate_window(cross, 0.0, window);
    if (r.area_cross <= 0.0) {
        throw NumericalError("hom_visibility: cross-polarised area at tau=0 is zero; V undefined");
    }
    r.norm_co = side_co.mean();
    r.norm_cross = side_cross.mean();
    const double ratio = (r.area_co / r.norm_co) / (r.area_cross / r.norm_cross);
    const double a_co = std::max(r.area_co, 1.0);
    const double rel = std::sqrt(1.0 / a_co + 1.0 / r.area_cross + 1.0 / side_co.sum + 1.0 / side_cross.sum);
    r.v.value = 1.0 - ratio;
    r.v.err = (r.area_co > 0.0 ? ratio : 1.0 / r.norm_co / (r.area_cross / r.norm_cross)) * rel;
    return r;
}

CorrectedVisibility correct_visibility(double v, double g2z)
{
    if (!(v >= -1.0 && v <= 1.0)) {
        throw DomainError("correct_visibility: v must lie in [-1, 1]");
    }
    if (!(g2z >= 0.0)) {
        throw DomainError("correct_visibility: g2(0) must be >= 0");
    }
    const double corrected = (1.0 + 2.0 * g2z) * v;
    if (corrected > 1.0) {
        return {1.0, true};
    }
    return {corrected, false};
}

}  // namespace qdtwin
