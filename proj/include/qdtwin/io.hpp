#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "qdtwin/budget.hpp"
#include "qdtwin/correlator.hpp"
#include "qdtwin/emitter.hpp"
#include "qdtwin/fitting.hpp"
#include "qdtwin/timetag.hpp"

namespace qdtwin::io {

// Binary layouts, all little-endian and packed:
//
//   QLT1 emission file:  "QLT1" | u64 count | count x {u64 time_ps, u32 pulse_index, f64 detuning, u8 flags}
//   QTT1 time-tag file:  "QTT1" | u64 manifest_hash | u64 duration_ps | u64 count | count x {u8 channel, u64 time_ps}
//
// QLT1 flags bit 0 marks the second photon of a double-emission pulse.

inline constexpr char kEmissionMagic[4] = {'Q', 'L', 'T', '1'};
inline constexpr char kTagMagic[4] = {'Q', 'T', 'T', '1'};
inline constexpr std::size_t kEmissionRecordBytes = 21;
inline constexpr std::size_t kTagRecordBytes = 9;

enum class Format { binary, csv };

Format parse_format(const std::string& s);

void write_emission_binary(const std::filesystem::path& path, const EmissionStream& events);
void write_emission_csv(const std::filesystem::path& path, const EmissionStream& events);
EmissionStream read_emission(const std::filesystem::path& path);

struct TagFile {
    Format format = Format::binary;
    std::uint64_t manifest_hash = 0;
    std::int64_t duration_ps = 0;
    std::vector<TimeTagStream> channels;

    /// The stream of `channel`; DataError when absent.
    const TimeTagStream& channel(int id) const;
};

void write_tags(const std::filesystem::path& path, const std::vector<const TimeTagStream*>& streams,
                std::uint64_t manifest_hash, Format format);
/// Detects binary vs CSV from the leading bytes.
TagFile read_tags(const std::filesystem::path& path);

void write_histogram_csv(const std::filesystem::path& path, const CorrelationHistogram& hist,
                         std::uint64_t manifest_hash);
/// Bin i is written at time t0_ps + i * bin_width.
void write_folded_csv(const std::filesystem::path& path, const FoldedHistogram& hist, std::uint64_t manifest_hash,
                      std::int64_t t0_ps = 0);

/// Two numeric columns (time or tau in ps, counts) on a uniform grid.
DecayHistogram read_decay_histogram_csv(const std::filesystem::path& path);
Spectrum read_spectrum_csv(const std::filesystem::path& path);
/// Columns: label, rate_cps, rate_uncertainty, rep_rate_hz.
std::vector<CountrateObservation> read_observations_csv(const std::filesystem::path& path);

std::string hash_hex(std::uint64_t h);

}  // namespace qdtwin::io
