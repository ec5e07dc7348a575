#include <doctest.h>

#include <cmath>
#include <random>

#include "qdtwin/correlator.hpp"
#include "qdtwin/error.hpp"
#include "support.hpp"

using namespace qdtwin;

namespace {

TimeTagStream stream(std::vector<std::int64_t> t, int channel = 0)
{
    TimeTagStream s;
    s.channel = channel;
    s.tags = std::move(t);
    s.duration_ps = s.tags.empty() ? 0 : s.tags.back() + 1;
    return s;
}

CorrelationHistogram peaks(double center, double side, double period, std::int64_t bw, int n_peaks)
{
    const auto half = static_cast<std::int64_t>(std::ceil((n_peaks + 0.5) * period / bw)) * bw;
    auto h = make_empty_histogram(bw, -half, half);
    for (int k = -n_peaks; k <= n_peaks; ++k) {
        const auto i = static_cast<std::size_t>((static_cast<std::int64_t>(std::llround(k * period)) + half) / bw);
        h.counts[i] = static_cast<std::uint64_t>(k == 0 ? center : side);
    }
    return h;
}

}  // namespace

TEST_CASE("single pair lands in the expected bin")
{
    const auto h = cross_correlate(stream({1000}), stream({1013}), 4, -100, 100);
    CHECK(h.total() == 1);
    CHECK(h.counts[(13 + 100) / 4] == 1);
    CHECK(h.bin_lower((13 + 100) / 4) == 12);
    const auto neg = cross_correlate(stream({1013}), stream({1000}), 4, -100, 100);
    CHECK(neg.counts[(-13 + 100) / 4] == 1);
}

TEST_CASE("serial and parallel sweeps match the all-pairs oracle")
{
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 5; ++trial) {
        auto a = testsupport::random_stream(rng, 1500 + 300 * trial, 2'000'000, 0);
        auto b = testsupport::random_stream(rng, 1200 + 500 * trial, 2'000'000, 1);
        // Repeated timestamps must be counted once per pair.
        a.tags.insert(a.tags.begin() + 10, a.tags[10]);
        b.tags.insert(b.tags.begin() + 20, b.tags[20]);
        const std::int64_t bw = trial % 2 == 0 ? 4 : 1;
        const std::int64_t lo = -20000 - 8 * trial;
        const std::int64_t hi = 36000;
        const auto oracle = testsupport::brute_force_correlation(a.tags, b.tags, bw, lo, hi);
        const auto serial = cross_correlate_serial(a, b, bw, lo, hi);
        CHECK(serial.counts == oracle);
        CHECK(serial.n_a == a.tags.size());
        CHECK(serial.n_b == b.tags.size());
        for (int threads = 1; threads <= 4; ++threads) {
            CHECK(cross_correlate_parallel(a, b, bw, lo, hi, threads) == serial);
            CHECK(cross_correlate(a, b, bw, lo, hi, threads) == serial);
        }
    }
}

TEST_CASE("parallel sweep with more threads than tags")
{
    const auto a = stream({5, 9});
    const auto b = stream({7});
    CHECK(cross_correlate_parallel(a, b, 1, -10, 10, 8) == cross_correlate_serial(a, b, 1, -10, 10));
    const auto e = stream({});
    CHECK(cross_correlate_parallel(e, b, 1, -10, 10, 4).total() == 0);
    CHECK(cross_correlate_serial(a, e, 1, -10, 10).total() == 0);
}

TEST_CASE("input validation")
{
    const auto sorted = stream({1, 2, 3});
    const auto unsorted = stream({3, 1, 2});
    CHECK_THROWS_AS(cross_correlate(unsorted, sorted, 1, -5, 5), DataError);
    CHECK_THROWS_AS(cross_correlate(sorted, unsorted, 1, -5, 5, 2), DataError);
    CHECK_THROWS_AS(cross_correlate(sorted, sorted, 3, -5, 5), DomainError);
    CHECK_THROWS_AS(cross_correlate(sorted, sorted, 0, -5, 5), DomainError);
    CHECK_THROWS_AS(cross_correlate(sorted, sorted, 1, 5, 5), DomainError);
}

TEST_CASE("swapping channels mirrors the histogram")
{
    std::mt19937_64 rng(43);
    const auto a = testsupport::random_stream(rng, 3000, 1'000'000, 0);
    const auto b = testsupport::random_stream(rng, 3000, 1'000'000, 1);
    const std::int64_t m = 5000;
    const auto ab = cross_correlate(a, b, 1, -m, m + 1);
    const auto ba = cross_correlate(b, a, 1, -m, m + 1);
    const std::size_t n = ab.bin_count();
    for (std::size_t i = 0; i < n; ++i) {
        CHECK(ab.counts[i] == ba.counts[n - 1 - i]);
    }
}

TEST_CASE("coarse bins equal rebinned fine bins")
{
    std::mt19937_64 rng(44);
    const auto a = testsupport::random_stream(rng, 4000, 1'000'000, 0);
    const auto b = testsupport::random_stream(rng, 4000, 1'000'000, 1);
    const auto fine = cross_correlate(a, b, 1, -8000, 8000);
    const auto coarse = cross_correlate(a, b, 16, -8000, 8000);
    CHECK(fine.rebinned(16) == coarse);
    CHECK(fine.rebinned(4).rebinned(4) == coarse);
    CHECK(fine.rebinned(16).total() == fine.total());
    CHECK_THROWS_AS(fine.rebinned(7), DomainError);
}

TEST_CASE("window integration uses bin centres in a half-open interval")
{
    auto h = make_empty_histogram(4, -1000, 1000);
    for (auto& c : h.counts) {
        c = 1;
    }
    // Bin centres sit at 2 mod 4: -502 is included, 502 excluded.
    CHECK(integrate_window(h, 0.0, 1004) == doctest::Approx(251));
    CHECK(integrate_window(h, 0.0, 1000) == doctest::Approx(250));
    CHECK(integrate_window(h, 1.0, 8) == doctest::Approx(2));
    CHECK_THROWS_AS(integrate_window(h, 900.0, 400), DataError);
}

TEST_CASE("g2 from a synthetic peak train")
{
    const auto h = peaks(50, 1000, 12500.0, 4, 10);
    const G2Result r = g2_zero(h, 12500.0, 2000);
    CHECK(r.g2_zero == doctest::Approx(0.05));
    CHECK(r.stat_error == doctest::Approx(0.05 * std::sqrt(1.0 / 50 + 1.0 / 20000)));
    CHECK(r.side_peaks_used == 20);
    CHECK(r.center_counts == doctest::Approx(50));
    CHECK(r.side_mean == doctest::Approx(1000));

    const auto empty_centre = peaks(0, 400, 12500.0, 4, 10);
    const G2Result z = g2_zero(empty_centre, 12500.0, 2000);
    CHECK(z.g2_zero == 0.0);
    CHECK(z.stat_error == doctest::Approx(1.0 / 400));

    // Non-integer period in ps.
    const auto ghz = peaks(36, 1000, 781.25, 1, 10);
    CHECK(g2_zero(ghz, 781.25, 781).g2_zero == doctest::Approx(0.036));
}

TEST_CASE("g2 error paths")
{
    const auto h = peaks(50, 1000, 12500.0, 4, 10);
    CHECK_THROWS_AS(g2_zero(h, 12500.0, 13000), DomainError);
    CHECK_THROWS_AS(g2_zero(h, 12500.0, 0), DomainError);
    CHECK_THROWS_AS(g2_zero(h, 12500.0, 2000, 11), DataError);
    CHECK_THROWS_AS(g2_zero(h, 12500.0, 2000, 3, 4), DomainError);
    const auto none = peaks(50, 0, 12500.0, 4, 10);
    CHECK_THROWS_AS(g2_zero(none, 12500.0, 2000), EmptySidePeaksError);
}

TEST_CASE("uncorrelated Poisson clicks give g2 of one")
{
    std::mt19937_64 rng(45);
    const std::int64_t span = 2'500'000'000;
    const auto a = testsupport::random_stream(rng, 200000, span, 0);
    const auto b = testsupport::random_stream(rng, 200000, span, 1);
    const auto h = cross_correlate(a, b, 4, -137500, 137500, 2);
    const G2Result r = g2_zero(h, 12500.0, 12500);
    CHECK(std::abs(r.g2_zero - 1.0) < 4.0 * r.stat_error);
}

TEST_CASE("HOM visibility")
{
    const auto cross = peaks(500, 1000, 12500.0, 4, 10);
    CHECK(hom_visibility(cross, cross, 12500.0, 2000).v.value == doctest::Approx(0.0));

    const auto perfect = peaks(0, 1000, 12500.0, 4, 10);
    const auto r = hom_visibility(perfect, cross, 12500.0, 2000);
    CHECK(r.v.value == doctest::Approx(1.0));
    CHECK(r.v.err > 0.0);

    const auto co = peaks(110, 1000, 12500.0, 4, 10);
    const auto v = hom_visibility(co, cross, 12500.0, 2000);
    CHECK(v.v.value == doctest::Approx(0.78));
    const double rel = std::sqrt(1.0 / 110 + 1.0 / 500 + 1.0 / 18000 + 1.0 / 18000);
    CHECK(v.v.err == doctest::Approx(0.22 * rel));
    CHECK(v.area_co == doctest::Approx(110));
    CHECK(v.norm_cross == doctest::Approx(1000));

    // Different side normalisations cancel.
    const auto co_scaled = peaks(220, 2000, 12500.0, 4, 10);
    CHECK(hom_visibility(co_scaled, cross, 12500.0, 2000).v.value == doctest::Approx(0.78));

    const auto no_cross = peaks(0, 1000, 12500.0, 4, 10);
    CHECK_THROWS_AS(hom_visibility(co, no_cross, 12500.0, 2000), NumericalError);
    const auto coarse = co.rebinned(2);
    CHECK_THROWS_AS(hom_visibility(coarse, cross, 12500.0, 2000), DataError);
}

TEST_CASE("multi-photon correction of the visibility")
{
    const auto c = correct_visibility(0.78, 0.028);
    CHECK(c.value == doctest::Approx(1.056 * 0.78));
    CHECK(!c.clamped);
    const auto clamped = correct_visibility(0.95, 0.1);
    CHECK(clamped.value == 1.0);
    CHECK(clamped.clamped);
    CHECK(correct_visibility(0.5, 0.0).value == doctest::Approx(0.5));
    CHECK_THROWS_AS(correct_visibility(1.2, 0.0), DomainError);
    CHECK_THROWS_AS(correct_visibility(0.5, -0.1), DomainError);
}

TEST_CASE("folding matches a linear pulse search")
{
    std::mt19937_64 rng(46);
    for (double rate : {80e6, 1.28e9}) {
        const PulseClock clock(rate);
        const auto s = testsupport::random_stream(rng, 5000, 2'000'000, 0);
        const std::int64_t bw = 1;
        const auto span = static_cast<std::int64_t>(std::floor(clock.period_ps()));
        std::vector<std::uint64_t> oracle(static_cast<std::size_t>(span), 0);
        std::uint64_t k = 0;
        for (auto t : s.tags) {
            while (clock.time_of(k + 1) <= t) {
                ++k;
            }
            const std::int64_t d = t - clock.time_of(k);
            if (d < span) {
                ++oracle[static_cast<std::size_t>(d)];
            }
        }
        const auto serial = fold_serial(s.tags, clock, bw, span);
        CHECK(serial.counts == oracle);
        for (int threads = 1; threads <= 4; ++threads) {
            CHECK(fold_parallel(s.tags, clock, bw, span, threads) == serial);
        }
    }
    CHECK_THROWS_AS(fold_serial(std::vector<std::int64_t>{1}, PulseClock(80e6), 3, 100), DomainError);
}
