#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

namespace qdtwin {

/// Detector clicks of one channel, in integer ps.
struct TimeTagStream {
    int channel = 0;
    std::vector<std::int64_t> tags;
    std::int64_t duration_ps = 0;

    bool is_sorted() const { return std::is_sorted(tags.begin(), tags.end()); }

    friend bool operator==(const TimeTagStream&, const TimeTagStream&) = default;
};

}  // namespace qdtwin
