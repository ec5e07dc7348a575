#include "qdtwin/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "qdtwin/error.hpp"

namespace qdtwin::io {

namespace fs = std::filesystem;

namespace {

template <class T>
void put_le(std::string& buf, T value)
{
    static_assert(std::is_trivially_copyable_v<T>);
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    buf.append(bytes.data(), bytes.size());
}

template <class T>
T get_le(const char* p)
{
    std::array<char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), p, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) {
        std::reverse(bytes.begin(), bytes.end());
    }
    T value;
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
}

std::string slurp(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open " + path.string());
    }
    std::ostringstream os;
    os << in.rdbuf();
    if (os.str().empty()) {
        throw DataError(path.string() + ": empty file");
    }
    return os.str();
}

void dump(const fs::path& path, const std::string& bytes)
{
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw DataError("cannot write " + path.string());
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

bool has_magic(const std::string& bytes, const char (&magic)[4])
{
    return bytes.size() >= 4 && std::memcmp(bytes.data(), magic, 4) == 0;
}

std::vector<std::string> split(const std::string& line, char sep)
{
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, sep)) {
        const auto b = field.find_first_not_of(" \t\r");
        const auto e = field.find_last_not_of(" \t\r");
        out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    }
    return out;
}

double to_double(const std::string& s, const fs::path& path, std::size_t line)
{
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) {
            throw std::invalid_argument(s);
        }
        return v;
    } catch (const std::exception&) {
        throw DataError(path.string() + ":" + std::to_string(line) + ": not a number: '" + s + "'");
    }
}

// Data rows of a CSV file: comments (#) and a non-numeric header line skipped.
std::vector<std::pair<std::size_t, std::vector<std::string>>> csv_rows(const std::string& text)
{
    std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    bool first_data = true;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#' || line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        auto fields = split(line, ',');
        if (first_data) {
            first_data = false;
            const std::string& f = fields.back();
            if (!f.empty() && !(std::isdigit(static_cast<unsigned char>(f[0])) || f[0] == '-' || f[0] == '+' ||
                                f[0] == '.')) {
                continue;
            }
        }
        rows.emplace_back(lineno, std::move(fields));
    }
    return rows;
}

// "# key=value, key=value" comment metadata.
std::map<std::string, std::string> csv_meta(const std::string& text)
{
    std::map<std::string, std::string> meta;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] != '#') {
            continue;
        }
        for (const auto& kv : split(line.substr(1), ',')) {
            const auto eq = kv.find('=');
            if (eq != std::string::npos) {
                meta[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
        }
    }
    return meta;
}

}  // namespace

std::string hash_hex(std::uint64_t h)
{
    std::ostringstream os;
    os << "0x" << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

Format parse_format(const std::string& s)
{
    if (s == "binary" || s == "bin") {
        return Format::binary;
    }
    if (s == "csv") {
        return Format::csv;
    }
    throw ConfigError("format: expected binary or csv, got '" + s + "'");
}

void write_emission_binary(const fs::path& path, const EmissionStream& events)
{
    std::string buf(kEmissionMagic, 4);
    buf.reserve(12 + events.size() * kEmissionRecordBytes);
    put_le<std::uint64_t>(buf, events.size());
    for (const auto& e : events) {
        if (e.time_ps < 0 || e.pulse_index > 0xffffffffULL) {
            throw RangeError("emission record does not fit the QLT1 layout");
        }
        put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(e.time_ps));
        put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(e.pulse_index));
        put_le<double>(buf, e.detuning);
        put_le<std::uint8_t>(buf, e.is_multi_partner ? 1 : 0);
    }
    dump(path, buf);
}

void write_emission_csv(const fs::path& path, const EmissionStream& events)
{
    std::ostringstream os;
    os << "time_ps,pulse_index,detuning,flags\n" << std::setprecision(17);
    for (const auto& e : events) {
        os << e.time_ps << ',' << e.pulse_index << ',' << e.detuning << ',' << (e.is_multi_partner ? 1 : 0) << '\n';
    }
    dump(path, os.str());
}

EmissionStream read_emission(const fs::path& path)
{
    const std::string bytes = slurp(path);
    EmissionStream events;
    if (has_magic(bytes, kEmissionMagic)) {
        if (bytes.size() < 12) {
            throw DataError(path.string() + ": truncated QLT1 header");
        }
        const auto n = get_le<std::uint64_t>(bytes.data() + 4);
        if (bytes.size() != 12 + n * kEmissionRecordBytes) {
            throw DataError(path.string() + ": QLT1 size does not match its record count");
        }
        events.reserve(n);
        const char* p = bytes.data() + 12;
        for (std::uint64_t i = 0; i < n; ++i, p += kEmissionRecordBytes) {
            EmissionEvent e;
            e.time_ps = static_cast<std::int64_t>(get_le<std::uint64_t>(p));
            e.pulse_index = get_le<std::uint32_t>(p + 8);
            e.detuning = get_le<double>(p + 12);
            e.is_multi_partner = (get_le<std::uint8_t>(p + 20) & 1) != 0;
            events.push_back(e);
        }
        return events;
    }
    if (has_magic(bytes, kTagMagic)) {
        throw DataError(path.string() + ": is a QTT1 time-tag file, expected emission events");
    }
    for (const auto& [line, f] : csv_rows(bytes)) {
        if (f.size() != 4) {
            throw DataError(path.string() + ":" + std::to_string(line) + ": expected 4 columns");
        }
        EmissionEvent e;
        e.time_ps = static_cast<std::int64_t>(to_double(f[0], path, line));
        e.pulse_index = static_cast<std::uint64_t>(to_double(f[1], path, line));
        e.detuning = to_double(f[2], path, line);
        e.is_multi_partner = to_double(f[3], path, line) != 0.0;
        events.push_back(e);
    }
    return events;
}

const TimeTagStream& TagFile::channel(int id) const
{
    for (const auto& s : channels) {
        if (s.channel == id) {
            return s;
        }
    }
    throw DataError("tag file has no channel " + std::to_string(id));
}

void write_tags(const fs::path& path, const std::vector<const TimeTagStream*>& streams, std::uint64_t manifest_hash,
                Format format)
{
    std::int64_t duration = 0;
    std::size_t total = 0;
    for (const auto* s : streams) {
        duration = std::max(duration, s->duration_ps);
        total += s->tags.size();
    }
    if (format == Format::binary) {
        std::string buf(kTagMagic, 4);
        buf.reserve(28 + total * kTagRecordBytes);
        put_le<std::uint64_t>(buf, manifest_hash);
        put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(duration));
        put_le<std::uint64_t>(buf, total);
        for (const auto* s : streams) {
            if (s->channel < 0 || s->channel > 255) {
                throw RangeError("channel id does not fit the QTT1 u8 field");
            }
            for (std::int64_t t : s->tags) {
                put_le<std::uint8_t>(buf, static_cast<std::uint8_t>(s->channel));
                put_le<std::uint64_t>(buf, static_cast<std::uint64_t>(t));
            }
        }
        dump(path, buf);
        return;
    }
    std::ostringstream os;
    os << "# manifest_hash=" << hash_hex(manifest_hash) << ",duration_ps=" << duration << '\n';
    os << "channel,time_ps\n";
    for (const auto* s : streams) {
        for (std::int64_t t : s->tags) {
            os << s->channel << ',' << t << '\n';
        }
    }
    dump(path, os.str());
}

TagFile read_tags(const fs::path& path)
{
    const std::string bytes = slurp(path);
    TagFile file;
    std::map<int, TimeTagStream> by_channel;
    auto add = [&](int ch, std::int64_t t) {
        auto& s = by_channel[ch];
        s.channel = ch;
        s.tags.push_back(t);
    };

    if (has_magic(bytes, kTagMagic)) {
        file.format = Format::binary;
        if (bytes.size() < 28) {
            throw DataError(path.string() + ": truncated QTT1 header");
        }
        file.manifest_hash = get_le<std::uint64_t>(bytes.data() + 4);
        file.duration_ps = static_cast<std::int64_t>(get_le<std::uint64_t>(bytes.data() + 12));
        const auto n = get_le<std::uint64_t>(bytes.data() + 20);
        if (bytes.size() != 28 + n * kTagRecordBytes) {
            throw DataError(path.string() + ": QTT1 size does not match its record count");
        }
        const char* p = bytes.data() + 28;
        for (std::uint64_t i = 0; i < n; ++i, p += kTagRecordBytes) {
            add(get_le<std::uint8_t>(p), static_cast<std::int64_t>(get_le<std::uint64_t>(p + 1)));
        }
    } else if (has_magic(bytes, kEmissionMagic)) {
        throw DataError(path.string() + ": is a QLT1 emission file, expected time tags");
    } else {
        file.format = Format::csv;
        const auto meta = csv_meta(bytes);
        if (auto it = meta.find("manifest_hash"); it != meta.end()) {
            file.manifest_hash = std::stoull(it->second, nullptr, 16);
        }
        if (auto it = meta.find("duration_ps"); it != meta.end()) {
            file.duration_ps = std::stoll(it->second);
        }
        for (const auto& [line, f] : csv_rows(bytes)) {
            if (f.size() != 2) {
                throw DataError(path.string() + ":" + std::to_string(line) + ": expected channel,time_ps");
            }
            add(static_cast<int>(to_double(f[0], path, line)), static_cast<std::int64_t>(to_double(f[1], path, line)));
        }
    }
    for (auto& [ch, s] : by_channel) {
        s.duration_ps = file.duration_ps;
        if (!s.is_sorted()) {
            std::sort(s.tags.begin(), s.tags.end());
        }
        file.channels.push_back(std::move(s));
    }
    return file;
}

void write_histogram_csv(const fs::path& path, const CorrelationHistogram& hist, std::uint64_t manifest_hash)
{
    std::ostringstream os;
    os << "# manifest_hash=" << hash_hex(manifest_hash) << ",bin_width_ps=" << hist.bin_width << ",n_a=" << hist.n_a
       << ",n_b=" << hist.n_b << '\n';
    os << "tau_ps,counts\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        os << hist.bin_lower(i) << ',' << hist.counts[i] << '\n';
    }
    dump(path, os.str());
}

void write_folded_csv(const fs::path& path, const FoldedHistogram& hist, std::uint64_t manifest_hash,
                      std::int64_t t0_ps)
{
    std::ostringstream os;
    os << "# manifest_hash=" << hash_hex(manifest_hash) << ",bin_width_ps=" << hist.bin_width << '\n';
    os << "time_ps,counts\n";
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        os << t0_ps + static_cast<std::int64_t>(i) * hist.bin_width << ',' << hist.counts[i] << '\n';
    }
    dump(path, os.str());
}

DecayHistogram read_decay_histogram_csv(const fs::path& path)
{
    const std::string text = slurp(path);
    std::vector<double> t;
    DecayHistogram h;
    for (const auto& [line, f] : csv_rows(text)) {
        if (f.size() != 2) {
            throw DataError(path.string() + ":" + std::to_string(line) + ": expected time_ps,counts");
        }
        t.push_back(to_double(f[0], path, line));
        h.counts.push_back(to_double(f[1], path, line));
    }
    if (t.size() < 2) {
        throw DataError(path.string() + ": histogram needs at least two bins");
    }
    const double w = t[1] - t[0];
    if (!(w > 0.0) || w != std::floor(w)) {
        throw DataError(path.string() + ": bin width must be a positive integer number of ps");
    }
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (t[i] - t[i - 1] != w) {
            throw DataError(path.string() + ": bins are not uniformly spaced");
        }
    }
    h.t0_ps = static_cast<std::int64_t>(t[0]);
    h.bin_width_ps = static_cast<std::int64_t>(w);
    return h;
}

Spectrum read_spectrum_csv(const fs::path& path)
{
    const std::string text = slurp(path);
    Spectrum s;
    for (const auto& [line, f] : csv_rows(text)) {
        if (f.size() != 2) {
            throw DataError(path.string() + ":" + std::to_string(line) + ": expected wavelength_nm,intensity");
        }
        s.wavelength_nm.push_back(to_double(f[0], path, line));
        s.intensity.push_back(to_double(f[1], path, line));
    }
    s.validate();
    return s;
}

std::vector<CountrateObservation> read_observations_csv(const fs::path& path)
{
    const std::string text = slurp(path);
    std::vector<CountrateObservation> out;
    for (const auto& [line, f] : csv_rows(text)) {
        if (f.size() != 4) {
            throw DataError(path.string() + ":" + std::to_string(line) +
                            ": expected label,rate_cps,rate_uncertainty,rep_rate_hz");
        }
        out.push_back({f[0], to_double(f[1], path, line), to_double(f[2], path, line), to_double(f[3], path, line)});
    }
    return out;
}

}  // namespace qdtwin::io
