#include <omp.h>

#include <algorithm>
#include <string>
#include <vector>

#include "correlator_kernel.hpp"
#include "qdtwin/correlator.hpp"
#include "qdtwin/error.hpp"

namespace qdtwin {

namespace {

// Below this many tags per thread the fork/reduce overhead dominates; only
// applied when the caller leaves the thread count to OpenMP.
constexpr std::size_t kMinChunk = 1 << 14;

int chunk_count(std::size_t n, int threads)
{
    if (threads > 0) {
        return static_cast<int>(std::clamp<std::size_t>(n, 1, static_cast<std::size_t>(threads)));
    }
    return static_cast<int>(
        std::clamp<std::size_t>(n / kMinChunk, 1, static_cast<std::size_t>(omp_get_max_threads())));
}

}  // namespace

CorrelationHistogram cross_correlate_parallel(const TimeTagStream& a, const TimeTagStream& b,
                                              std::int64_t bin_width, std::int64_t tau_min,
                                              std::int64_t tau_max, int threads)
{
    if (!a.is_sorted() || !b.is_sorted()) {
        throw DataError("cross_correlate: input streams must be sorted");
    }
    CorrelationHistogram h = make_empty_histogram(bin_width, tau_min, tau_max);
    h.n_a = a.tags.size();
    h.n_b = b.tags.size();
    h.duration_ps = std::max(a.duration_ps, b.duration_ps);

    const std::size_t n = a.tags.size();
    const int nt = chunk_count(n, threads);
    const std::size_t nbins = h.counts.size();

    // One private histogram per chunk; integer sums make the reduction
    // order-independent, so the result matches the serial sweep exactly.
    std::vector<std::vector<std::uint64_t>> partial(static_cast<std::size_t>(nt));
#pragma omp parallel for num_threads(nt) schedule(static)
    for (int c = 0; c < nt; ++c) {
        auto& local = partial[static_cast<std::size_t>(c)];
        local.assign(nbins, 0);
        const std::size_t begin = n * static_cast<std::size_t>(c) / static_cast<std::size_t>(nt);
        const std::size_t end = n * static_cast<std::size_t>(c + 1) / static_cast<std::size_t>(nt);
        detail::sweep_chunk(a.tags, begin, end, b.tags, bin_width, tau_min, tau_max, local.data());
    }
    for (const auto& local : partial) {
        for (std::size_t i = 0; i < nbins; ++i) {
            h.counts[i] += local[i];
        }
    }
    return h;
}

FoldedHistogram fold_parallel(std::span<const std::int64_t> tags, const PulseClock& clock,
                              std::int64_t bin_width, std::int64_t span_ps, int threads)
{
    if (bin_width <= 0 || span_ps <= 0 || span_ps % bin_width != 0) {
        throw DomainError("fold: bin_width must be > 0 and divide span_ps");
    }
    FoldedHistogram h;
    h.bin_width = bin_width;
    const std::size_t nbins = static_cast<std::size_t>(span_ps / bin_width);
    h.counts.assign(nbins, 0);

    const std::size_t n = tags.size();
    const int nt = chunk_count(n, threads);
    std::vector<std::vector<std::uint64_t>> partial(static_cast<std::size_t>(nt));
#pragma omp parallel for num_threads(nt) schedule(static)
    for (int c = 0; c < nt; ++c) {
        auto& local = partial[static_cast<std::size_t>(c)];
        local.assign(nbins, 0);
        const std::size_t begin = n * static_cast<std::size_t>(c) / static_cast<std::size_t>(nt);
        const std::size_t end = n * static_cast<std::size_t>(c + 1) / static_cast<std::size_t>(nt);
        detail::fold_chunk(tags, begin, end, clock, bin_width, span_ps, local.data());
    }
    for (const auto& local : partial) {
        for (std::size_t i = 0; i < nbins; ++i) {
            h.counts[i] += local[i];
        }
    }
    return h;
}

}  // namespace qdtwin
