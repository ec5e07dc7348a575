#pragma once

// Inner loops shared by the serial and OpenMP correlator entry points.

#include <algorithm>
#include <cstdint>
#include <span>

namespace qdtwin::detail {

/// Accumulates b - a[i] for i in [begin, end) into `counts`.
inline void sweep_chunk(std::span<const std::int64_t> a, std::size_t begin, std::size_t end,
                        std::span<const std::int64_t> b, std::int64_t bin_width, std::int64_t tau_min,
                        std::int64_t tau_max, std::uint64_t* counts)
{
    if (begin >= end) {
        return;
    }
    const std::size_t nb = b.size();
    std::size_t lo = static_cast<std::size_t>(
        std::lower_bound(b.begin(), b.end(), a[begin] + tau_min) - b.begin());
    for (std::size_t i = begin; i < end; ++i) {
        const std::int64_t ai = a[i];
        const std::int64_t lower = ai + tau_min;
        while (lo < nb && b[lo] < lower) {
            ++lo;
        }
        for (std::size_t j = lo; j < nb; ++j) {
            const std::int64_t d = b[j] - ai;
            if (d >= tau_max) {
                break;
            }
            ++counts[(d - tau_min) / bin_width];
        }
    }
}

template <class Clock>
inline void fold_chunk(std::span<const std::int64_t> tags, std::size_t begin, std::size_t end,
                       const Clock& clock, std::int64_t bin_width, std::int64_t span, std::uint64_t* counts)
{
    for (std::size_t i = begin; i < end; ++i) {
        const std::int64_t t = tags[i];
        if (t < 0) {
            continue;
        }
        const std::int64_t d = t - clock.time_of(clock.latest_pulse_at_or_before(t));
        if (d < span) {
            ++counts[d / bin_width];
        }
    }
}

}  // namespace qdtwin::detail
