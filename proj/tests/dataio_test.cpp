#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "swinvid/array.hpp"
#include "swinvid/dataio.hpp"
#include "swinvid/errors.hpp"
#include "testutil.hpp"

using namespace swinvid;
using testutil::random_array;

namespace {

std::string temp_path(const char* stem, const char* ext = "jsonl") {
    return std::string("/tmp/swinvid_dataio_") + stem + "." + ext;
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    out << text;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

SynthSpec quiet_spec() {
    SynthSpec spec;
    spec.num_clips = 8;
    spec.duration_frames = 20;
    spec.noise_sigma = 0.0;
    spec.seed = 3;
    return spec;
}

ClipAnnotation pnr_ann(const std::string& id, size_t duration, size_t pnr) {
    ClipAnnotation a;
    a.clip_id = id;
    a.duration_frames = duration;
    a.state_change = true;
    a.pnr_frame = pnr;
    return a;
}

}  // namespace

TEST_CASE("annotation validation names the offending clip") {
    ClipAnnotation a = pnr_ann("clip-x", 100, 45);
    a.validate();

    a.pnr_frame = 100;
    CHECK_THROWS_WITH_AS(a.validate(), doctest::Contains("clip-x"), validation_error);

    a.pnr_frame = 45;
    a.state_change = false;
    CHECK_THROWS_WITH_AS(a.validate(), doctest::Contains("without a state change"),
                         validation_error);

    a.state_change = true;
    a.pnr_frame.reset();
    CHECK_THROWS_WITH_AS(a.validate(), doctest::Contains("without a pnr_frame"),
                         validation_error);

    a.pnr_frame = 45;
    a.duration_frames = 0;
    CHECK_THROWS_AS(a.validate(), validation_error);
}

TEST_CASE("clip generation is a pure function of spec and index") {
    SynthSpec spec;
    spec.num_clips = 4;
    spec.duration_frames = 24;
    spec.seed = 11;
    for (size_t i = 0; i < spec.num_clips; ++i) {
        auto [v1, a1] = generate_clip(spec, i);
        auto [v2, a2] = generate_clip(spec, i);
        CHECK(a1.clip_id == a2.clip_id);
        CHECK(a1.state_change == a2.state_change);
        CHECK(a1.pnr_frame == a2.pnr_frame);
        REQUIRE(v1.shape() == v2.shape());
        CHECK(std::memcmp(v1.data(), v2.data(), v1.numel() * sizeof(double)) == 0);
    }
}

TEST_CASE("annotation-only generation matches the clip generator") {
    SynthSpec spec;
    spec.num_clips = 16;
    spec.duration_frames = 30;
    spec.pnr_distribution = PnrDistribution::triangular;
    spec.seed = 5;
    for (size_t i = 0; i < spec.num_clips; ++i) {
        ClipAnnotation lone = generate_annotation(spec, i);
        ClipAnnotation full = generate_clip(spec, i).second;
        CHECK(lone.clip_id == full.clip_id);
        CHECK(lone.state_change == full.state_change);
        CHECK(lone.pnr_frame == full.pnr_frame);
        CHECK(lone.duration_frames == full.duration_frames);
        CHECK(lone.fps == full.fps);
    }
}

TEST_CASE("clip ids are zero padded and indexed") {
    SynthSpec spec = quiet_spec();
    CHECK(generate_annotation(spec, 0).clip_id == "clip-000000");
    CHECK(generate_annotation(spec, 7).clip_id == "clip-000007");
    CHECK_THROWS_AS(generate_annotation(spec, 8), contract_error);
}

TEST_CASE("noiseless positives flip patterns exactly at the pnr frame") {
    SynthSpec spec = quiet_spec();
    auto anns = generate_annotations(spec);
    size_t positives = 0;
    for (size_t i = 0; i < spec.num_clips; ++i) {
        if (!anns[i].state_change) continue;
        ++positives;
        auto [video, ann] = generate_clip(spec, i);
        const size_t pnr = *ann.pnr_frame;
        REQUIRE(pnr >= 1);
        REQUIRE(pnr < spec.duration_frames);
        const size_t frame = spec.height * spec.width;
        const double* d = video.data();
        // all pre-change frames identical, all post-change frames identical,
        // and the two regimes differ
        for (size_t t = 1; t < pnr; ++t) {
            CHECK(std::memcmp(d, d + t * frame, frame * sizeof(double)) == 0);
        }
        for (size_t t = pnr + 1; t < spec.duration_frames; ++t) {
            CHECK(std::memcmp(d + pnr * frame, d + t * frame, frame * sizeof(double)) == 0);
        }
        CHECK(std::memcmp(d + (pnr - 1) * frame, d + pnr * frame,
                          frame * sizeof(double)) != 0);
    }
    CHECK(positives == 4);
}

TEST_CASE("noiseless negatives are static clips") {
    SynthSpec spec = quiet_spec();
    for (size_t i = 0; i < spec.num_clips; ++i) {
        auto [video, ann] = generate_clip(spec, i);
        if (ann.state_change) continue;
        const size_t frame = spec.height * spec.width;
        for (size_t t = 1; t < spec.duration_frames; ++t) {
            CHECK(std::memcmp(video.data(), video.data() + t * frame,
                              frame * sizeof(double)) == 0);
        }
    }
}

TEST_CASE("the planted patterns sit in opposite quadrants") {
    SynthSpec spec = quiet_spec();  // 16x16
    size_t pos = 0;
    while (!generate_annotation(spec, pos).state_change) ++pos;
    auto [video, ann] = generate_clip(spec, pos);
    const double* first = video.data();
    const double* last = video.data() + (spec.duration_frames - 1) * 256;
    for (size_t h = 0; h < 16; ++h) {
        for (size_t w = 0; w < 16; ++w) {
            const double a = (h >= 2 && h < 8 && w >= 2 && w < 8) ? 1.0 : 0.0;
            const double b = (h >= 8 && h < 14 && w >= 8 && w < 14) ? -1.0 : 0.0;
            CHECK(first[h * 16 + w] == a);
            CHECK(last[h * 16 + w] == b);
        }
    }
}

TEST_CASE("positive labels interleave to the exact ratio") {
    SynthSpec spec;
    spec.num_clips = 512;
    size_t count = 0;
    auto anns = generate_annotations(spec);
    for (const auto& a : anns) count += a.state_change ? 1 : 0;
    CHECK(count == 256);
    CHECK(!anns[0].state_change);
    CHECK(anns[1].state_change);
    // any contiguous half still carries both classes in equal measure
    size_t first_half = 0;
    for (size_t i = 0; i < 256; ++i) first_half += anns[i].state_change ? 1 : 0;
    CHECK(first_half == 128);

    spec.positive_ratio = 0.0;
    for (const auto& a : generate_annotations(spec)) CHECK(!a.state_change);
    spec.positive_ratio = 1.0;
    for (const auto& a : generate_annotations(spec)) CHECK(a.state_change);
}

TEST_CASE("the fixed distribution plants the pnr at the exact fraction") {
    SynthSpec spec;
    spec.num_clips = 10;
    spec.duration_frames = 240;
    spec.pnr_distribution = PnrDistribution::fixed;
    spec.pnr_param = 0.45;
    for (const auto& a : generate_annotations(spec)) {
        if (a.state_change) CHECK(*a.pnr_frame == 108);
    }
}

TEST_CASE("pnr frames stay strictly inside the clip") {
    SynthSpec spec;
    spec.num_clips = 200;
    spec.duration_frames = 4;
    spec.seed = 9;
    for (const auto& a : generate_annotations(spec)) {
        if (!a.state_change) continue;
        CHECK(*a.pnr_frame >= 1);
        CHECK(*a.pnr_frame <= 3);
    }
}

TEST_CASE("triangular draws concentrate around the mode") {
    SynthSpec spec;
    spec.num_clips = 4000;
    spec.duration_frames = 1000;
    spec.pnr_distribution = PnrDistribution::triangular;
    spec.pnr_param = 0.45;
    spec.seed = 21;
    double sum = 0.0;
    size_t n = 0;
    for (const auto& a : generate_annotations(spec)) {
        if (!a.state_change) continue;
        sum += static_cast<double>(*a.pnr_frame) / 1000.0;
        ++n;
    }
    // triangular(0, 0.45, 1) has mean (0 + 0.45 + 1) / 3
    CHECK(sum / static_cast<double>(n) == doctest::Approx(1.45 / 3.0).epsilon(0.02));
}

TEST_CASE("spec validation rejects bad parameters") {
    SynthSpec spec;
    spec.num_clips = 0;
    CHECK_THROWS_AS(spec.validate(), contract_error);
    spec = SynthSpec{};
    spec.positive_ratio = 1.5;
    CHECK_THROWS_AS(spec.validate(), contract_error);
    spec = SynthSpec{};
    spec.noise_sigma = -0.1;
    CHECK_THROWS_AS(spec.validate(), contract_error);
    spec = SynthSpec{};
    spec.pnr_distribution = PnrDistribution::fixed;
    spec.pnr_param = 1.0;
    CHECK_THROWS_AS(spec.validate(), contract_error);
}

TEST_CASE("annotation files round trip") {
    const std::string path = temp_path("roundtrip");
    std::vector<ClipAnnotation> list;
    list.push_back(pnr_ann("clip-a", 240, 108));
    ClipAnnotation neg;
    neg.clip_id = "clip-b";
    neg.duration_frames = 100;
    neg.fps = 24.0;
    list.push_back(neg);

    write_annotations(path, list);
    auto got = read_annotations(path);
    REQUIRE(got.size() == 2);
    CHECK(got[0].clip_id == "clip-a");
    CHECK(got[0].duration_frames == 240);
    CHECK(got[0].state_change);
    CHECK(*got[0].pnr_frame == 108);
    CHECK(got[1].clip_id == "clip-b");
    CHECK(!got[1].state_change);
    CHECK(!got[1].pnr_frame.has_value());
    CHECK(got[1].fps == 24.0);

    // serialization is canonical: writing what was read reproduces the bytes
    const std::string again = temp_path("roundtrip2");
    write_annotations(again, got);
    CHECK(slurp(path) == slurp(again));
}

TEST_CASE("unknown annotation fields are ignored") {
    const std::string path = temp_path("extra");
    spit(path,
         R"({"clip_id":"clip-a","duration_frames":50,"fps":30.0,"state_change":false,)"
         R"("reviewer":"someone","split":"train"})"
         "\n");
    auto got = read_annotations(path);
    REQUIRE(got.size() == 1);
    CHECK(got[0].clip_id == "clip-a");
}

TEST_CASE("blank lines are skipped") {
    const std::string path = temp_path("blank");
    spit(path, "\n{\"clip_id\":\"c\",\"duration_frames\":5,\"fps\":30.0,"
               "\"state_change\":false}\n\n");
    CHECK(read_annotations(path).size() == 1);
}

TEST_CASE("parse failures carry the line number") {
    const std::string path = temp_path("badline");
    spit(path,
         "{\"clip_id\":\"c1\",\"duration_frames\":5,\"fps\":30.0,\"state_change\":false}\n"
         "this is not json\n");
    CHECK_THROWS_WITH_AS(read_annotations(path), doctest::Contains(":2"), format_error);
}

TEST_CASE("missing required fields are format errors") {
    const std::string path = temp_path("nofield");
    spit(path, "{\"clip_id\":\"c1\",\"fps\":30.0,\"state_change\":false}\n");
    CHECK_THROWS_AS(read_annotations(path), format_error);
}

TEST_CASE("inconsistent records are validation errors naming the clip") {
    const std::string path = temp_path("badrec");
    spit(path,
         "{\"clip_id\":\"c9\",\"duration_frames\":5,\"fps\":30.0,"
         "\"state_change\":false,\"pnr_frame\":2}\n");
    CHECK_THROWS_WITH_AS(read_annotations(path), doctest::Contains("c9"), validation_error);
}

TEST_CASE("missing annotation file is an io error") {
    CHECK_THROWS_AS(read_annotations("/tmp/swinvid_dataio_no_such.jsonl"), io_error);
}

TEST_CASE("clip tensors round trip through the binary format") {
    const std::string path = temp_path("clip", "bin");
    Array video = random_array({6, 4, 4, 1}, 17, -3.0, 3.0);
    write_clip_binary(path, video);

    Array got = read_clip_binary(path);
    REQUIRE(got.shape() == video.shape());
    for (size_t i = 0; i < video.numel(); ++i) {
        // storage is 32-bit; the round trip reproduces the narrowed value
        CHECK(got.data()[i] == static_cast<double>(static_cast<float>(video.data()[i])));
    }

    std::ifstream in(path, std::ios::binary | std::ios::ate);
    CHECK(static_cast<size_t>(in.tellg()) == 4 + 4 + 4 * 4 + 4 * video.numel());
}

TEST_CASE("clip files reject bad magic and truncation") {
    const std::string path = temp_path("clipbad", "bin");
    spit(path, "SWV1aaaaaaaa");
    CHECK_THROWS_WITH_AS(read_clip_binary(path), doctest::Contains("bad magic"),
                         format_error);

    Array video = random_array({2, 2, 2, 1}, 18);
    write_clip_binary(path, video);
    std::string full = slurp(path);
    spit(path, full.substr(0, full.size() - 3));
    CHECK_THROWS_WITH_AS(read_clip_binary(path), doctest::Contains("truncated"),
                         format_error);
    CHECK_THROWS_AS(read_clip_binary("/tmp/swinvid_dataio_no_such.bin"), io_error);
}

TEST_CASE("frequency analysis bins normalized pnr positions") {
    std::vector<ClipAnnotation> anns;
    anns.push_back(pnr_ann("a", 100, 45));
    anns.push_back(pnr_ann("b", 100, 46));
    anns.push_back(pnr_ann("c", 100, 90));
    ClipAnnotation neg;
    neg.clip_id = "d";
    neg.duration_frames = 100;
    anns.push_back(neg);  // no pnr: excluded

    Histogram h = frequency_analysis(anns);
    REQUIRE(h.counts.size() == 20);
    REQUIRE(h.bin_edges.size() == 21);
    CHECK(h.bin_edges.front() == 0.0);
    CHECK(h.bin_edges.back() == 1.0);
    CHECK(h.counts[9] == 2);   // 0.45 and 0.46 fall in [0.45, 0.50)
    CHECK(h.counts[18] == 1);  // 0.90
    size_t total = 0;
    for (size_t c : h.counts) total += c;
    CHECK(total == 3);
    CHECK(h.mode_midpoint == doctest::Approx(0.475));
    // the mode bin brackets 0.45 from the left edge
    CHECK(h.bin_edges[9] <= 0.45);
    CHECK(0.45 < h.bin_edges[10]);
}

TEST_CASE("frequency analysis mode ties resolve to the lowest bin") {
    std::vector<ClipAnnotation> anns;
    anns.push_back(pnr_ann("a", 100, 10));
    anns.push_back(pnr_ann("b", 100, 80));
    Histogram h = frequency_analysis(anns);
    CHECK(h.mode_midpoint == doctest::Approx(0.125));
}

TEST_CASE("frequency analysis needs at least one pnr annotation") {
    std::vector<ClipAnnotation> anns;
    ClipAnnotation neg;
    neg.clip_id = "a";
    neg.duration_frames = 10;
    anns.push_back(neg);
    CHECK_THROWS_AS(frequency_analysis(anns), contract_error);
    CHECK_THROWS_AS(frequency_analysis({}), contract_error);
    CHECK_THROWS_AS(frequency_analysis({pnr_ann("a", 10, 5)}, 0.0), contract_error);
}

TEST_CASE("a fixed-fraction corpus lands in a single histogram bin") {
    SynthSpec spec;
    spec.num_clips = 50;
    spec.duration_frames = 240;
    spec.pnr_distribution = PnrDistribution::fixed;
    spec.pnr_param = 0.45;
    Histogram h = frequency_analysis(generate_annotations(spec));
    CHECK(h.counts[9] == 25);
    for (size_t i = 0; i < 20; ++i) {
        if (i != 9) CHECK(h.counts[i] == 0);
    }
}

TEST_CASE("error distribution bins per-clip errors") {
    EvalReport r;
    r.task = "pnr";
    r.per_clip = {{"a", 1, 2, 0.1}, {"b", 3, 4, 0.1}, {"c", 5, 6, 0.6}};
    r.mean_abs_error_seconds = (0.1 + 0.1 + 0.6) / 3.0;

    Histogram h = error_distribution(r, 0.5);
    REQUIRE(h.counts.size() == 2);
    CHECK(h.counts[0] == 2);
    CHECK(h.counts[1] == 1);
    CHECK(h.bin_edges == std::vector<double>{0.0, 0.5, 1.0});
    CHECK(h.mode_midpoint == doctest::Approx(0.25));
}

TEST_CASE("a perfect pnr run collapses to one error bin") {
    EvalReport r;
    r.task = "pnr";
    r.per_clip = {{"a", 2, 2, 0.0}, {"b", 4, 4, 0.0}};
    r.mean_abs_error_seconds = 0.0;
    Histogram h = error_distribution(r, 0.5);
    REQUIRE(h.counts.size() == 1);
    CHECK(h.counts[0] == 2);
}

TEST_CASE("error distribution rejects non-pnr and empty reports") {
    EvalReport oscc;
    oscc.task = "oscc";
    oscc.per_clip = {{"a", 1, 1, 0.0}};
    oscc.accuracy = 1.0;
    CHECK_THROWS_AS(error_distribution(oscc, 0.5), contract_error);

    EvalReport empty;
    empty.task = "pnr";
    CHECK_THROWS_AS(error_distribution(empty, 0.5), contract_error);
}

TEST_CASE("report aggregates must match the per-clip records") {
    EvalReport r;
    r.task = "oscc";
    r.per_clip = {{"a", 1, 1, 0.0}, {"b", 0, 1, 1.0}};
    r.accuracy = 0.5;
    r.check();
    r.accuracy = 0.75;
    CHECK_THROWS_WITH_AS(r.check(), doctest::Contains("accuracy"), contract_error);
    r.accuracy.reset();
    CHECK_THROWS_AS(r.check(), contract_error);

    EvalReport p;
    p.task = "pnr";
    p.per_clip = {{"a", 10, 40, 1.0}, {"b", 5, 5, 0.0}};
    p.mean_abs_error_seconds = 0.5;
    p.check();
    p.mean_abs_error_seconds = 0.4;
    CHECK_THROWS_AS(p.check(), contract_error);

    EvalReport bad;
    bad.task = "segmentation";
    CHECK_THROWS_AS(bad.check(), contract_error);
}

TEST_CASE("reports round trip through json") {
    EvalReport r;
    r.task = "pnr";
    r.per_clip = {{"clip-000001", 112.0, 108.0, 4.0 / 30.0}, {"clip-000003", 52.0, 52.0, 0.0}};
    r.mean_abs_error_seconds = (4.0 / 30.0) / 2.0;
    r.skipped = 3;

    const std::string path = temp_path("report", "json");
    write_report(path, r);
    EvalReport got = read_report(path);
    CHECK(got.task == "pnr");
    CHECK(got.skipped == 3);
    REQUIRE(got.per_clip.size() == 2);
    CHECK(got.per_clip[0].clip_id == "clip-000001");
    CHECK(got.per_clip[0].prediction == 112.0);
    CHECK(*got.mean_abs_error_seconds == *r.mean_abs_error_seconds);

    // byte-determinism: rewriting the same report reproduces the file
    const std::string again = temp_path("report2", "json");
    write_report(again, got);
    CHECK(slurp(path) == slurp(again));
}

TEST_CASE("an inconsistent report refuses to serialize") {
    EvalReport r;
    r.task = "oscc";
    r.per_clip = {{"a", 1, 1, 0.0}};
    r.accuracy = 0.0;
    CHECK_THROWS_AS(write_report(temp_path("badreport", "json"), r), contract_error);
}

TEST_CASE("histogram files are two plain columns") {
    Histogram h;
    h.bin_edges = {0.0, 0.5, 1.0};
    h.counts = {2, 1};
    const std::string path = temp_path("hist", "txt");
    write_histogram(path, h);
    CHECK(slurp(path) == "0 2\n0.5 1\n");

    Histogram freq = frequency_analysis({pnr_ann("a", 100, 45)});
    write_histogram(path, freq);
    CHECK(slurp(path).find("0.45 1\n") != std::string::npos);

    Histogram broken;
    broken.bin_edges = {0.0};
    broken.counts = {1};
    CHECK_THROWS_AS(write_histogram(path, broken), contract_error);
}

TEST_CASE("challenge annotation exports map onto clip records") {
    const std::string path = temp_path("challenge", "json");
    spit(path, R"([
      {"clip_uid": "u-1", "clip_start_frame": 100, "clip_end_frame": 340,
       "state_change": true, "parent_pnr_frame": 208, "video_uid": "v-1"},
      {"clip_uid": "u-2", "clip_start_frame": 0, "clip_end_frame": 90,
       "state_change": false, "parent_pnr_frame": null, "fps": 24.0}
    ])");
    auto got = import_challenge_annotations(path);
    REQUIRE(got.size() == 2);
    CHECK(got[0].clip_id == "u-1");
    CHECK(got[0].duration_frames == 240);
    CHECK(got[0].fps == 30.0);
    REQUIRE(got[0].pnr_frame.has_value());
    CHECK(*got[0].pnr_frame == 108);
    CHECK(got[1].clip_id == "u-2");
    CHECK(got[1].duration_frames == 90);
    CHECK(got[1].fps == 24.0);
    CHECK(!got[1].pnr_frame.has_value());
}

TEST_CASE("challenge imports reject out-of-span pnr frames") {
    const std::string path = temp_path("challenge_bad", "json");
    spit(path, R"([{"clip_uid": "u-3", "clip_start_frame": 100, "clip_end_frame": 200,
                    "state_change": true, "parent_pnr_frame": 205}])");
    CHECK_THROWS_WITH_AS(import_challenge_annotations(path), doctest::Contains("u-3"),
                         validation_error);

    spit(path, R"({"not": "an array"})");
    CHECK_THROWS_AS(import_challenge_annotations(path), format_error);
}
