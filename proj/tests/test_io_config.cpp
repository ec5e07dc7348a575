#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "qdtwin/config.hpp"
#include "qdtwin/error.hpp"
#include "qdtwin/io.hpp"
#include "support.hpp"

using namespace qdtwin;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir()
    {
        std::random_device rd;
        path = fs::temp_directory_path() / ("qdtwin_io_" + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

std::string error_of(const std::string& text)
{
    try {
        config_from_json(nlohmann::json::parse(text));
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

EmissionStream sample_emission()
{
    EmitterParams p;
    p.p_multi = 0.2;
    p.sd_sigma = 0.01;
    ExcitationConfig c;
    c.n_pulses = 2000;
    c.power_ratio = 1.0;
    c.seed = 71;
    return generate_stream(p, c);
}

}  // namespace

TEST_CASE("QLT1 emission files round trip with the documented size")
{
    TempDir tmp;
    const auto events = sample_emission();
    REQUIRE(!events.empty());
    const auto bin = tmp.path / "e.qlt";
    io::write_emission_binary(bin, events);
    CHECK(fs::file_size(bin) == 4 + 8 + events.size() * io::kEmissionRecordBytes);
    CHECK(io::read_emission(bin) == events);

    std::ifstream in(bin, std::ios::binary);
    char magic[4];
    in.read(magic, 4);
    CHECK(std::string(magic, 4) == "QLT1");
    unsigned char count[8];
    in.read(reinterpret_cast<char*>(count), 8);
    std::uint64_t n = 0;
    for (int i = 7; i >= 0; --i) {
        n = (n << 8) | count[i];
    }
    CHECK(n == events.size());

    const auto csv = tmp.path / "e.csv";
    io::write_emission_csv(csv, events);
    CHECK(io::read_emission(csv) == events);
}

TEST_CASE("QTT1 tag files round trip with the documented size")
{
    TempDir tmp;
    std::mt19937_64 rng(72);
    auto a = testsupport::random_stream(rng, 3000, 1'000'000'000, 0);
    auto b = testsupport::random_stream(rng, 2000, 1'000'000'000, 1);
    a.duration_ps = b.duration_ps = 1'000'000'001;
    const auto path = tmp.path / "t.qtt";
    io::write_tags(path, {&b, &a}, 0xfeedbeefULL, io::Format::binary);
    CHECK(fs::file_size(path) == 4 + 3 * 8 + 5000 * io::kTagRecordBytes);
    const auto f = io::read_tags(path);
    CHECK(f.format == io::Format::binary);
    CHECK(f.manifest_hash == 0xfeedbeefULL);
    CHECK(f.duration_ps == 1'000'000'001);
    REQUIRE(f.channels.size() == 2);
    CHECK(f.channel(0) == a);
    CHECK(f.channel(1) == b);
    CHECK_THROWS_AS(f.channel(5), DataError);

    const auto csv = tmp.path / "t.csv";
    io::write_tags(csv, {&a, &b}, 0xfeedbeefULL, io::Format::csv);
    const auto g = io::read_tags(csv);
    CHECK(g.format == io::Format::csv);
    CHECK(g.manifest_hash == 0xfeedbeefULL);
    CHECK(g.channel(0) == a);
    CHECK(g.channel(1) == b);
}

TEST_CASE("malformed files are data errors")
{
    TempDir tmp;
    const auto empty = tmp.path / "empty.qtt";
    write_text(empty, "");
    CHECK_THROWS_AS(io::read_tags(empty), DataError);
    CHECK_THROWS_AS(io::read_emission(empty), DataError);

    const auto truncated = tmp.path / "trunc.qtt";
    TimeTagStream s;
    s.tags = {1, 2, 3};
    s.duration_ps = 10;
    io::write_tags(truncated, {&s}, 1, io::Format::binary);
    fs::resize_file(truncated, fs::file_size(truncated) - 4);
    CHECK_THROWS_AS(io::read_tags(truncated), DataError);

    // A tag file is not an emission file.
    const auto tags = tmp.path / "tags.qtt";
    io::write_tags(tags, {&s}, 1, io::Format::binary);
    CHECK_THROWS_AS(io::read_emission(tags), DataError);

    const auto garbage = tmp.path / "g.csv";
    write_text(garbage, "channel,time_ps\n0,abc\n");
    CHECK_THROWS_AS(io::read_tags(garbage), DataError);

    CHECK_THROWS_AS(io::read_tags(tmp.path / "missing.qtt"), DataError);
    CHECK(io::parse_format("csv") == io::Format::csv);
    CHECK(io::parse_format("binary") == io::Format::binary);
    CHECK_THROWS_AS(io::parse_format("xml"), ConfigError);
}

TEST_CASE("histogram and table CSV readers")
{
    TempDir tmp;
    FoldedHistogram h;
    h.bin_width = 4;
    h.counts = {5, 100, 60, 30, 10};
    const auto p = tmp.path / "decay.csv";
    io::write_folded_csv(p, h, 7, -8);
    const auto d = io::read_decay_histogram_csv(p);
    CHECK(d.t0_ps == -8);
    CHECK(d.bin_width_ps == 4);
    CHECK(d.counts == std::vector<double>{5, 100, 60, 30, 10});

    const auto uneven = tmp.path / "uneven.csv";
    write_text(uneven, "time_ps,counts\n0,1\n4,2\n9,3\n");
    CHECK_THROWS_AS(io::read_decay_histogram_csv(uneven), DataError);

    const auto spec = tmp.path / "spec.csv";
    write_text(spec, "# white light\nwavelength_nm,intensity\n930,1\n931,0.5\n932,1\n");
    const auto s = io::read_spectrum_csv(spec);
    CHECK(s.wavelength_nm == std::vector<double>{930, 931, 932});
    CHECK(s.intensity[1] == 0.5);

    const auto obs = tmp.path / "obs.csv";
    write_text(obs, "label,rate_cps,rate_uncertainty,rep_rate_hz\nX-,1.2e6,0.1e6,80e6\nX+,0.30e6,0.01e6,80e6\n");
    const auto rows = io::read_observations_csv(obs);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].label == "X-");
    CHECK(rows[1].rate_cps == 0.30e6);

    const auto shipped = io::read_observations_csv(fs::path(QDTWIN_SOURCE_DIR) / "data" / "table1_countrates.csv");
    CHECK(shipped.size() == 2);
}

TEST_CASE("shipped preset files equal the built-in presets")
{
    const auto names = preset_names();
    CHECK(names == std::vector<std::string>{"paper-80mhz", "paper-ghz", "paper-hom-2ns", "paper-hom-12ns"});
    for (const auto& name : names) {
        const auto file = fs::path(QDTWIN_SOURCE_DIR) / "presets" / (name + ".json");
        CAPTURE(name);
        CHECK(to_json(load_config(file)) == to_json(preset(name)));
        CHECK(to_json(resolve_config(name)) == to_json(preset(name)));
        CHECK(to_json(config_from_json(to_json(preset(name)))) == to_json(preset(name)));
    }
    CHECK(preset("paper-ghz").excitation.rep_rate_hz == 1.28e9);
    CHECK(preset("paper-hom-2ns").bench.hom.delay_ps == 2000);
    CHECK(preset("paper-hom-12ns").bench.hom.delay_ps == 12500);
    CHECK_THROWS_AS(preset("paper-1thz"), ConfigError);
}

TEST_CASE("config errors name the offending field")
{
    CHECK(error_of(R"({"emitter": {"t1_fast": 77}})").find("emitter.t1_fast") != std::string::npos);
    CHECK(error_of(R"({"emitter": {"t1_fast_ps": "fast"}})").find("emitter.t1_fast_ps") != std::string::npos);
    CHECK(error_of(R"({"detectors": {"b": {"efficiency": 2}}})").find("detectors.b.efficiency") !=
          std::string::npos);
    CHECK(error_of(R"({"bench": {"type": "mzi"}})").find("bench.type") != std::string::npos);
    CHECK(error_of(R"({"analysis": {"window_ps": 20000}})").find("analysis.window_ps") != std::string::npos);
    CHECK(error_of(R"({"excitation": {"doublet": true, "doublet_spacing_ps": 13000}})")
              .find("excitation.doublet_spacing_ps") != std::string::npos);
    CHECK(error_of(R"({"excitation": {"rep_rate_hz": 1.28e9}, "analysis": {"window_ps": 782}})")
              .find("analysis.window_ps") != std::string::npos);
    CHECK(error_of(R"({"excitation": {"rep_rate_hz": 1.28e9}, "analysis": {"window_ps": 781}})").empty());
    CHECK(error_of("{}").empty());
}

TEST_CASE("config files may carry comments")
{
    TempDir tmp;
    const auto p = tmp.path / "c.json";
    write_text(p, "// my run\n{\"name\": \"x\", /* short */ \"excitation\": {\"n_pulses\": 1000}}\n");
    const auto cfg = load_config(p);
    CHECK(cfg.name == "x");
    CHECK(cfg.excitation.n_pulses == 1000);
    write_text(p, "{\"name\": ");
    CHECK_THROWS_AS(load_config(p), ConfigError);
    CHECK_THROWS_AS(load_config(tmp.path / "none.json"), ConfigError);
}
