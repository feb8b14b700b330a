#include "headway/pipeline.hpp"

#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "headway/config.hpp"
#include "headway/io.hpp"

namespace headway::pipeline {

using nlohmann::json;

Dataset build_dataset(std::span<const sim::TrajectoryLog> logs, const grid::GridSpec& spec,
                      double validation_fraction, std::uint64_t split_seed)
{
    Dataset d;
    d.spec = spec;
    auto built = grid::build_grids(logs, spec);
    std::vector<int> ids;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const int id = logs[i].replication_id;
        if (d.grids.count(id)) throw InvariantError(fmt::format("duplicate replication id {}", id));
        ids.push_back(id);
        if (!built[i].imputation.filled_with_grid_mean.empty())
            spdlog::warn("replication {}: {} empty columns filled with the grid mean", id,
                         built[i].imputation.filled_with_grid_mean.size());
        d.imputation[id] = built[i].imputation;
        d.grids.emplace(id, std::move(built[i].grid));
    }
    d.validation_ids = window::validation_replications(ids, validation_fraction, split_seed);
    for (int id : ids)
        if (!std::binary_search(d.validation_ids.begin(), d.validation_ids.end(), id)) d.train_ids.push_back(id);
    std::sort(d.train_ids.begin(), d.train_ids.end());
    std::vector<grid::HeadwayGrid> train_grids;
    for (int id : d.train_ids) train_grids.push_back(d.grids.at(id));
    d.scaler = grid::fit_scaler(train_grids);
    return d;
}

window::SampleSet sample_set(const Dataset& data, std::span<const int> ids, const window::WindowSpec& spec,
                             window::Role role)
{
    window::SampleSet set{{}, role};
    for (int id : ids) {
        const auto g = grid::normalize(data.grids.at(id), data.scaler);
        auto r = window::extract_samples(g, spec, id);
        for (const auto& w : r.warnings) spdlog::warn("{}", w);
        for (auto& s : r.samples) set.samples.push_back(std::move(s));
    }
    return set;
}

std::vector<predict::EvalGrid> eval_grids(const Dataset& data, std::span<const int> ids)
{
    std::vector<predict::EvalGrid> out;
    for (int id : ids) out.push_back({id, &data.grids.at(id)});
    return out;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& data)
{
    for (const auto& [id, g] : data.grids) io::write_grid_files(dir, {id, g, data.imputation.at(id), data.scaler});
    const json split{{"train", data.train_ids},
                     {"validation", data.validation_ids},
                     {"scaler", data.scaler},
                     {"grid_spec", data.spec}};
    io::write_text_atomic(dir / "split.json", split.dump(2) + "\n");
}

Dataset read_dataset(const std::filesystem::path& dir)
{
    const auto path = dir / "split.json";
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string() + " (run preprocess first)");
    Dataset d;
    try {
        const json split = json::parse(in);
        d.train_ids = split.at("train").get<std::vector<int>>();
        d.validation_ids = split.at("validation").get<std::vector<int>>();
        d.scaler = split.at("scaler").get<grid::Scaler>();
        d.spec = split.at("grid_spec").get<grid::GridSpec>();
    } catch (const std::exception& e) {
        throw CorruptFileError(fmt::format("{}: {}", path.string(), e.what()));
    }
    for (const auto* ids : {&d.train_ids, &d.validation_ids})
        for (int id : *ids) {
            auto file = io::read_grid_files(dir, id);
            if (!(file.grid.spec == d.spec))
                throw CorruptFileError(fmt::format("replication {}: grid spec differs from split.json", id));
            d.imputation[id] = file.imputation;
            d.grids.emplace(id, std::move(file.grid));
        }
    return d;
}

}  // namespace headway::pipeline
