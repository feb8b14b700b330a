#include "headway/window.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include "json.hpp"

#include "headway/binary.hpp"
#include "headway/rng.hpp"

namespace headway::window {

void WindowSpec::validate(int n_distance_bins) const
{
    if (lookback < 1) throw InvariantError("window: lookback must be at least 1");
    if (horizon < 1) throw InvariantError("window: horizon must be at least 1");
    for (int b : {terminal_bin_nb, terminal_bin_sb})
        if (b < 0 || b >= n_distance_bins)
            throw InvariantError(fmt::format("window: terminal bin {} outside [0, {})", b, n_distance_bins));
}

Tensor<float> slice_frames(const grid::HeadwayGrid& g, int begin, int count)
{
    const auto nd = static_cast<std::size_t>(g.spec.n_distance_bins);
    const auto ndir = static_cast<std::size_t>(g.spec.n_directions);
    if (begin < 0 || count < 0 || begin + count > g.spec.n_time_bins())
        throw std::out_of_range(fmt::format("time bins [{}, {}) outside grid", begin, begin + count));
    Tensor<float> out({static_cast<std::size_t>(count), nd, ndir, 1});
    const auto first = g.offset(begin, 0, 0);
    std::copy_n(g.values.begin() + static_cast<std::ptrdiff_t>(first), out.size(), out.data.begin());
    return out;
}

Tensor<float> slice_terminal(const grid::HeadwayGrid& g, const WindowSpec& spec, int begin, int count)
{
    const auto ndir = static_cast<std::size_t>(g.spec.n_directions);
    if (begin < 0 || count < 0 || begin + count > g.spec.n_time_bins())
        throw std::out_of_range(fmt::format("time bins [{}, {}) outside grid", begin, begin + count));
    Tensor<float> out({static_cast<std::size_t>(count), ndir, 1});
    for (int f = 0; f < count; ++f)
        for (int k = 0; k < static_cast<int>(ndir); ++k)
            out.data[static_cast<std::size_t>(f) * ndir + static_cast<std::size_t>(k)] =
                static_cast<float>(g.at(begin + f, spec.terminal_bin(k), k));
    return out;
}

ExtractResult extract_samples(const grid::HeadwayGrid& g, const WindowSpec& spec, int replication_id)
{
    spec.validate(g.spec.n_distance_bins);
    ExtractResult result;
    if (!g.normalized) result.warnings.push_back("grid is not normalized");
    const int nt = g.spec.n_time_bins();
    if (nt < spec.lookback + spec.horizon) {
        result.warnings.push_back(fmt::format("replication {}: {} time bins is shorter than lookback + horizon = {}",
                                              replication_id, nt, spec.lookback + spec.horizon));
        return result;
    }
    for (int t = spec.lookback; t <= nt - spec.horizon; ++t) {
        Sample s;
        s.x = slice_frames(g, t - spec.lookback, spec.lookback);
        s.y = slice_frames(g, t, spec.horizon);
        s.t_future = slice_terminal(g, spec, t, spec.horizon);
        s.replication_id = replication_id;
        s.anchor_time_bin = t;
        result.samples.push_back(std::move(s));
    }
    return result;
}

std::vector<int> validation_replications(std::vector<int> ids, double fraction, std::uint64_t seed)
{
    if (!(fraction > 0.0 && fraction < 1.0)) throw InvariantError("validation_fraction must be in (0, 1)");
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    if (ids.size() < 2) throw InvariantError("need at least two replications to hold one out");
    Rng rng(seed);
    rng.shuffle(std::span<int>(ids));
    auto n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(ids.size()) - 1e-9));
    n_val = std::clamp<std::size_t>(n_val, 1, ids.size() - 1);
    std::vector<int> held(ids.end() - static_cast<std::ptrdiff_t>(n_val), ids.end());
    std::sort(held.begin(), held.end());
    return held;
}

std::pair<SampleSet, SampleSet> split_by_replication(std::vector<Sample> samples, double fraction,
                                                     std::uint64_t seed)
{
    std::vector<int> ids;
    for (const auto& s : samples) ids.push_back(s.replication_id);
    const auto held = validation_replications(std::move(ids), fraction, seed);
    const std::set<int> held_set(held.begin(), held.end());
    SampleSet train{{}, Role::train};
    SampleSet val{{}, Role::validation};
    for (auto& s : samples) (held_set.count(s.replication_id) ? val : train).samples.push_back(std::move(s));
    return {std::move(train), std::move(val)};
}

void write_samples(const std::filesystem::path& manifest, const std::filesystem::path& payload,
                   std::span<const Sample> samples)
{
    std::ofstream m(manifest, std::ios::binary);
    std::ofstream p(payload, std::ios::binary);
    if (!m || !p) throw std::runtime_error("cannot open sample files for writing: " + manifest.string());
    std::uint64_t offset = 0;
    for (const auto& s : samples) {
        nlohmann::json rec;
        rec["replication_id"] = s.replication_id;
        rec["anchor_time_bin"] = s.anchor_time_bin;
        auto block = [&](const char* name, const Tensor<float>& t) {
            rec[name] = {{"offset", offset}, {"shape", t.shape}};
            binary::write_f32(p, t.span());
            offset += t.size() * sizeof(float);
        };
        block("x", s.x);
        block("t_future", s.t_future);
        block("y", s.y);
        m << rec.dump() << '\n';
    }
    if (!m || !p) throw std::runtime_error("failed writing sample files: " + manifest.string());
}

std::vector<Sample> read_samples(const std::filesystem::path& manifest, const std::filesystem::path& payload)
{
    std::ifstream m(manifest);
    std::ifstream p(payload, std::ios::binary);
    if (!m || !p) throw std::runtime_error("cannot open sample files: " + manifest.string());
    std::vector<Sample> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(m, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto rec = nlohmann::json::parse(line);
            Sample s;
            s.replication_id = rec.at("replication_id").get<int>();
            s.anchor_time_bin = rec.at("anchor_time_bin").get<int>();
            auto block = [&](const char* name, Tensor<float>& t) {
                const auto& b = rec.at(name);
                t = Tensor<float>(b.at("shape").get<std::vector<std::size_t>>());
                p.seekg(static_cast<std::streamoff>(b.at("offset").get<std::uint64_t>()));
                if (!binary::read_f32(p, t.span()))
                    throw CorruptFileError(fmt::format("{}: payload truncated for '{}'", payload.string(), name));
            };
            block("x", s.x);
            block("t_future", s.t_future);
            block("y", s.y);
            out.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw CorruptFileError(fmt::format("{}:{}: {}", manifest.string(), line_no, e.what()));
        }
    }
    return out;
}

}  // namespace headway::window
