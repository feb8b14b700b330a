#include "doctest.h"

#include <filesystem>
#include <set>

#include "headway/rng.hpp"
#include "headway/window.hpp"

using namespace headway;
using namespace headway::window;

namespace {

grid::HeadwayGrid random_grid(int nt, int nd, std::uint64_t seed)
{
    grid::GridSpec s;
    s.t_start = 0.0;
    s.t_end = 60.0 * nt;
    s.n_distance_bins = nd;
    grid::HeadwayGrid g(s);
    Rng rng(seed);
    for (auto& v : g.values) v = rng.uniform();
    for (auto& m : g.observed) m = 1;
    g.normalized = true;
    return g;
}

std::vector<Sample> samples_for(int n_reps, int nt)
{
    std::vector<Sample> all;
    const WindowSpec w{3, 2, 0, 0};
    for (int r = 0; r < n_reps; ++r) {
        auto got = extract_samples(random_grid(nt, 4, static_cast<std::uint64_t>(r)), w, r);
        for (auto& s : got.samples) all.push_back(std::move(s));
    }
    return all;
}

}  // namespace

TEST_SUITE("window") {

TEST_CASE("sample counts follow the anchor range")
{
    const WindowSpec w{30, 15, 0, 0};
    CHECK(extract_samples(random_grid(45, 8, 1), w, 0).samples.size() == 1);
    CHECK(extract_samples(random_grid(150, 8, 1), w, 0).samples.size() == 106);
    const auto short_grid = extract_samples(random_grid(44, 8, 1), w, 0);
    CHECK(short_grid.samples.empty());
    CHECK(short_grid.warnings.size() == 1);
}

TEST_CASE("sample shapes and terminal identity")
{
    const WindowSpec w{30, 15, 0, 5};
    const auto g = random_grid(60, 8, 2);
    const auto got = extract_samples(g, w, 3);
    for (const auto& s : got.samples) {
        CHECK(s.x.shape == std::vector<std::size_t>{30, 8, 2, 1});
        CHECK(s.t_future.shape == std::vector<std::size_t>{15, 2, 1});
        CHECK(s.y.shape == std::vector<std::size_t>{15, 8, 2, 1});
        CHECK(s.replication_id == 3);
        for (std::size_t f = 0; f < 15; ++f) {
            CHECK(s.t_future.data[f * 2 + 0] == s.y.data[(f * 8 + 0) * 2 + 0]);
            CHECK(s.t_future.data[f * 2 + 1] == s.y.data[(f * 8 + 5) * 2 + 1]);
        }
        CHECK(s.x.data.back() == static_cast<float>(g.at(s.anchor_time_bin - 1, 7, 1)));
        CHECK(s.y.data.front() == static_cast<float>(g.at(s.anchor_time_bin, 0, 0)));
    }
}

TEST_CASE("targets of stride-F anchors tile the grid")
{
    const WindowSpec w{4, 3, 0, 0};
    const auto g = random_grid(25, 5, 9);
    const auto got = extract_samples(g, w, 0);
    std::vector<float> rebuilt;
    for (const auto& s : got.samples)
        if ((s.anchor_time_bin - w.lookback) % w.horizon == 0) rebuilt.insert(rebuilt.end(), s.y.data.begin(), s.y.data.end());
    const std::size_t frame = 5 * 2;
    const std::size_t covered = rebuilt.size() / frame;
    REQUIRE(covered == 21);
    for (std::size_t i = 0; i < rebuilt.size(); ++i) CHECK(rebuilt[i] == static_cast<float>(g.values[4 * frame + i]));
}

TEST_CASE("fifty replications hold out ten")
{
    std::vector<int> ids;
    for (int r = 0; r < 50; ++r) ids.push_back(r);
    CHECK(validation_replications(ids, 0.2, 1).size() == 10);
}

TEST_CASE("split by replication is disjoint, even and deterministic")
{
    auto [train, val] = split_by_replication(samples_for(2, 10), 0.5, 4);
    std::set<int> tr;
    std::set<int> va;
    for (const auto& s : train.samples) tr.insert(s.replication_id);
    for (const auto& s : val.samples) va.insert(s.replication_id);
    CHECK(tr.size() == 1);
    CHECK(va.size() == 1);
    CHECK(*tr.begin() != *va.begin());
    CHECK(train.role == Role::train);
    CHECK(val.role == Role::validation);

    auto a = split_by_replication(samples_for(7, 8), 0.3, 11);
    auto b = split_by_replication(samples_for(7, 8), 0.3, 11);
    REQUIRE(a.second.samples.size() == b.second.samples.size());
    for (std::size_t i = 0; i < a.second.samples.size(); ++i)
        CHECK(a.second.samples[i].replication_id == b.second.samples[i].replication_id);
    std::set<int> ta;
    for (const auto& s : a.first.samples) ta.insert(s.replication_id);
    for (const auto& s : a.second.samples) CHECK(ta.count(s.replication_id) == 0);
}

TEST_CASE("a single replication cannot be split")
{
    CHECK_THROWS_AS(split_by_replication(samples_for(1, 10), 0.2, 1), InvariantError);
    CHECK_THROWS_AS(split_by_replication(samples_for(3, 10), 1.0, 1), InvariantError);
}

TEST_CASE("sample files round-trip")
{
    const auto dir = std::filesystem::temp_directory_path() / "headway_window_test";
    std::filesystem::create_directories(dir);
    const auto samples = samples_for(2, 8);
    write_samples(dir / "samples.jsonl", dir / "samples.f32", samples);
    const auto back = read_samples(dir / "samples.jsonl", dir / "samples.f32");
    REQUIRE(back.size() == samples.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].x == samples[i].x);
        CHECK(back[i].t_future == samples[i].t_future);
        CHECK(back[i].y == samples[i].y);
        CHECK(back[i].anchor_time_bin == samples[i].anchor_time_bin);
    }
    std::filesystem::resize_file(dir / "samples.f32", 12);
    CHECK_THROWS_AS(read_samples(dir / "samples.jsonl", dir / "samples.f32"), CorruptFileError);
    std::filesystem::remove_all(dir);
}

}
