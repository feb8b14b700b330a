#include "headway/io.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>

#include <fmt/format.h>

#include "headway/config.hpp"
#include "headway/version.hpp"

namespace headway::io {

using nlohmann::json;

namespace {

std::vector<std::string_view> split(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

class CsvReader {
public:
    CsvReader(const fs::path& path, std::string_view header) : path_(path), in_(path)
    {
        if (!in_) throw std::runtime_error("cannot open " + path.string());
        std::string first;
        if (!std::getline(in_, first) || trim(first) != header)
            throw CorruptFileError(fmt::format("{}: expected header '{}'", path.string(), header));
    }

    bool next(std::vector<std::string_view>& fields)
    {
        while (std::getline(in_, line_)) {
            ++line_no_;
            line_ = trim(line_);
            if (line_.empty()) continue;
            fields = split(line_);
            return true;
        }
        return false;
    }

    template <class T>
    T number(std::string_view field, const char* name) const
    {
        T v{};
        const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
        if (ec != std::errc() || ptr != field.data() + field.size())
            throw CorruptFileError(fmt::format("{}:{}: bad {} '{}'", path_.string(), line_no_ + 1, name, field));
        return v;
    }

    [[noreturn]] void fail(const std::string& why) const
    {
        throw CorruptFileError(fmt::format("{}:{}: {}", path_.string(), line_no_ + 1, why));
    }

private:
    static std::string trim(std::string s)
    {
        while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
        return s;
    }

    fs::path path_;
    std::ifstream in_;
    std::string line_;
    std::size_t line_no_ = 0;
};

std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

}  // namespace

void write_text_atomic(const fs::path& path, const std::string& text)
{
    const fs::path tmp = path.string() + ".tmp";
    {
        auto out = open_out(tmp);
        out << text;
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    fs::rename(tmp, path);
}

fs::path trajectory_file(const fs::path& dir, int replication_id)
{
    return dir / fmt::format("trajectories_r{:03}.csv", replication_id);
}

void write_trajectory_csv(const fs::path& path, std::span<const sim::TrajectoryLog> logs)
{
    auto out = open_out(path);
    out << "replication_id,train_id,direction,block_id,distance_ft,timestamp_s,headway_s\n";
    fmt::memory_buffer buf;
    for (const auto& log : logs)
        for (const auto& e : log.events) {
            buf.clear();
            fmt::format_to(std::back_inserter(buf), "{},{},{},{},{},{},", e.replication_id, e.train_id,
                           to_string(e.direction), e.block_id, e.distance, e.timestamp);
            if (e.headway) fmt::format_to(std::back_inserter(buf), "{}", *e.headway);
            buf.push_back('\n');
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
        }
}

std::vector<sim::TrajectoryLog> read_trajectory_csv(const fs::path& path)
{
    CsvReader csv(path, "replication_id,train_id,direction,block_id,distance_ft,timestamp_s,headway_s");
    std::map<int, sim::TrajectoryLog> by_rep;
    std::vector<std::string_view> f;
    while (csv.next(f)) {
        if (f.size() != 7) csv.fail(fmt::format("expected 7 fields, found {}", f.size()));
        sim::TrajectoryEvent e;
        e.replication_id = csv.number<int>(f[0], "replication_id");
        e.train_id = csv.number<int>(f[1], "train_id");
        try {
            e.direction = parse_direction(f[2]);
        } catch (const std::invalid_argument& ex) {
            csv.fail(ex.what());
        }
        e.block_id = csv.number<int>(f[3], "block_id");
        e.distance = csv.number<double>(f[4], "distance_ft");
        e.timestamp = csv.number<double>(f[5], "timestamp_s");
        if (!f[6].empty()) e.headway = csv.number<double>(f[6], "headway_s");
        auto& log = by_rep[e.replication_id];
        log.replication_id = e.replication_id;
        log.events.push_back(e);
    }
    std::vector<sim::TrajectoryLog> out;
    for (auto& [id, log] : by_rep) out.push_back(std::move(log));
    return out;
}

fs::path grid_csv(const fs::path& dir, int replication_id, Direction d)
{
    return dir / fmt::format("grid_r{:03}_{}.csv", replication_id, to_string(d));
}

fs::path grid_sidecar(const fs::path& dir, int replication_id)
{
    return dir / fmt::format("grid_r{:03}.json", replication_id);
}

void write_grid_files(const fs::path& dir, const GridFile& file)
{
    const auto& g = file.grid;
    if (g.normalized) throw InvariantError("grid files hold seconds; denormalize first");
    fs::create_directories(dir);
    const int nt = g.spec.n_time_bins();
    for (int k = 0; k < g.spec.n_directions; ++k) {
        auto out = open_out(grid_csv(dir, file.replication_id, static_cast<Direction>(k)));
        out << "time_bin,distance_bin,headway_s,observed\n";
        fmt::memory_buffer buf;
        for (int t = 0; t < nt; ++t)
            for (int j = 0; j < g.spec.n_distance_bins; ++j) {
                buf.clear();
                fmt::format_to(std::back_inserter(buf), "{},{},{},{}\n", t, j, g.at(t, j, k),
                               g.is_observed(t, j, k) ? 1 : 0);
                out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            }
    }
    json filled = json::array();
    for (const auto& [j, k] : file.imputation.filled_with_grid_mean)
        filled.push_back({{"distance_bin", j}, {"direction", to_string(static_cast<Direction>(k))}});
    const json side{{"replication_id", file.replication_id},
                    {"grid_spec", g.spec},
                    {"scaler", file.scaler},
                    {"imputation", {{"grid_mean_s", file.imputation.grid_mean}, {"filled_with_grid_mean", filled}}}};
    write_text_atomic(grid_sidecar(dir, file.replication_id), side.dump(2) + "\n");
}

GridFile read_grid_files(const fs::path& dir, int replication_id)
{
    GridFile file;
    file.replication_id = replication_id;
    const auto side_path = grid_sidecar(dir, replication_id);
    std::ifstream side_in(side_path);
    if (!side_in) throw std::runtime_error("cannot open " + side_path.string());
    grid::GridSpec spec;
    try {
        const json side = json::parse(side_in);
        spec = side.at("grid_spec").get<grid::GridSpec>();
        file.scaler = side.at("scaler").get<grid::Scaler>();
        const auto& imp = side.at("imputation");
        file.imputation.grid_mean = imp.at("grid_mean_s").get<double>();
        for (const auto& c : imp.at("filled_with_grid_mean"))
            file.imputation.filled_with_grid_mean.emplace_back(
                c.at("distance_bin").get<int>(),
                static_cast<int>(index(parse_direction(c.at("direction").get<std::string>()))));
        spec.validate();
    } catch (const std::exception& e) {
        throw CorruptFileError(fmt::format("{}: {}", side_path.string(), e.what()));
    }
    file.grid = grid::HeadwayGrid(spec);
    const int nt = spec.n_time_bins();
    for (int k = 0; k < spec.n_directions; ++k) {
        const auto path = grid_csv(dir, replication_id, static_cast<Direction>(k));
        CsvReader csv(path, "time_bin,distance_bin,headway_s,observed");
        std::vector<std::string_view> f;
        std::size_t rows = 0;
        while (csv.next(f)) {
            if (f.size() != 4) csv.fail(fmt::format("expected 4 fields, found {}", f.size()));
            const int t = csv.number<int>(f[0], "time_bin");
            const int j = csv.number<int>(f[1], "distance_bin");
            if (t < 0 || t >= nt || j < 0 || j >= spec.n_distance_bins) csv.fail("cell outside the grid spec");
            file.grid.at(t, j, k) = csv.number<double>(f[2], "headway_s");
            file.grid.observed[file.grid.offset(t, j, k)] = csv.number<int>(f[3], "observed") != 0;
            ++rows;
        }
        if (rows != static_cast<std::size_t>(nt) * static_cast<std::size_t>(spec.n_distance_bins))
            throw CorruptFileError(fmt::format("{}: {} rows, expected {}", path.string(), rows,
                                               nt * spec.n_distance_bins));
    }
    return file;
}

std::vector<int> list_grid_replications(const fs::path& dir)
{
    static const std::regex pattern(R"(grid_r(\d+)\.json)");
    std::vector<int> ids;
    if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch m;
        const auto name = entry.path().filename().string();
        if (std::regex_match(name, m, pattern)) ids.push_back(std::stoi(m[1]));
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

void write_metrics_csv(const fs::path& path, const predict::MetricsReport& report)
{
    auto out = open_out(path);
    out << "direction,horizon_min,rmse_s,r2,n\n";
    for (const auto& r : report.rows)
        out << fmt::format("{},{},{},{},{}\n", to_string(r.direction), r.horizon_minutes, r.rmse, r.r_squared, r.n);
}

void write_scatter_csv(const fs::path& path, const predict::ScatterResult& scatter)
{
    auto out = open_out(path);
    out << "direction,horizon_min,actual_s,predicted_s\n";
    for (const auto& p : scatter.points)
        out << fmt::format("{},{},{},{}\n", to_string(p.direction), p.horizon_minutes, p.actual, p.predicted);
}

void write_heatmap_csv(const fs::path& path, Direction d, std::span<const HeatmapSection> sections)
{
    auto out = open_out(path);
    out << "time_bin,distance_bin,headway_s,observed,source\n";
    const auto k = index(d);
    for (const auto& s : sections) {
        if (s.values.shape.size() != 4) throw ShapeError("heatmap section must be [n, N_d, N_dir, 1]");
        const std::size_t nd = s.values.shape[1];
        const std::size_t ndir = s.values.shape[2];
        for (std::size_t t = 0; t < s.values.shape[0]; ++t)
            for (std::size_t j = 0; j < nd; ++j) {
                const std::size_t o = (t * nd + j) * ndir + k;
                const int obs = s.observed.empty() ? 0 : s.observed[o];
                out << fmt::format("{},{},{},{},{}\n", s.first_time_bin + static_cast<int>(t), j, s.values.data[o], obs,
                                   s.source);
            }
    }
}

json plan_to_json(const whatif::TerminalPlan& plan)
{
    return json{{"direction", to_string(plan.direction)}, {"label", plan.label}, {"headways_s", plan.headways}};
}

whatif::TerminalPlan plan_from_json(const json& j)
{
    if (!j.is_object()) throw InvariantError("plan must be a JSON object");
    whatif::TerminalPlan p;
    for (const auto& item : j.items())
        if (item.key() != "direction" && item.key() != "label" && item.key() != "headways_s")
            throw InvariantError(fmt::format("plan: unknown field '{}'", item.key()));
    try {
        p.direction = parse_direction(j.value("direction", std::string("NB")));
        p.label = j.value("label", std::string("plan"));
        if (!j.contains("headways_s")) throw InvariantError("plan: missing field 'headways_s'");
        p.headways = j.at("headways_s").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw InvariantError(fmt::format("plan: {}", e.what()));
    }
    return p;
}

whatif::TerminalPlan read_plan(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open plan file " + path.string());
    try {
        return plan_from_json(json::parse(in));
    } catch (const std::exception& e) {
        throw InvariantError(fmt::format("{}: {}", path.string(), e.what()));
    }
}

json grid_to_json(const Tensor<float>& t)
{
    if (t.shape.size() != 4) throw ShapeError("expected a [n, N_d, N_dir, 1] tensor");
    json out = json::array();
    const std::size_t nd = t.shape[1];
    const std::size_t ndir = t.shape[2];
    for (std::size_t f = 0; f < t.shape[0]; ++f) {
        json frame = json::array();
        for (std::size_t j = 0; j < nd; ++j) {
            json cell = json::array();
            for (std::size_t k = 0; k < ndir; ++k) cell.push_back(t.data[(f * nd + j) * ndir + k]);
            frame.push_back(std::move(cell));
        }
        out.push_back(std::move(frame));
    }
    return out;
}

json report_to_json(const whatif::ComparisonReport& report, const std::vector<std::vector<std::string>>& heatmap_files)
{
    auto table = [&](const std::vector<double>& v) {
        // [N_d][N_dir]
        json rows = json::array();
        for (int j = 0; j < report.n_distance; ++j)
            rows.push_back({v[static_cast<std::size_t>(j) * 2], v[static_cast<std::size_t>(j) * 2 + 1]});
        return rows;
    };
    json plans = json::array();
    for (std::size_t i = 0; i < report.plans.size(); ++i) {
        const auto& o = report.plans[i];
        json p{{"label", o.label},
               {"direction", to_string(o.direction)},
               {"cv", table(o.cv)},
               {"mean_s", table(o.mean)},
               {"delta_cv", table(o.delta_cv)},
               {"delta_mean_s", table(o.delta_mean)}};
        if (i < heatmap_files.size()) p["heatmap_files"] = heatmap_files[i];
        plans.push_back(std::move(p));
    }
    return json{{"baseline_index", report.baseline_index},
                {"horizon_bins", report.horizon_bins},
                {"n_distance", report.n_distance},
                {"plans", plans}};
}

fs::path write_manifest(const fs::path& dir, const RunManifest& m)
{
    fs::create_directories(dir);
    const json j{{"command", m.command},   {"config", m.config},           {"inputs", m.inputs},
                 {"outputs", m.outputs},   {"seed", m.seed},               {"tool_version", m.tool_version},
                 {"duration_s", m.duration_s}};
    const auto path = dir / fmt::format("manifest_{}.json", m.command);
    write_text_atomic(path, j.dump(2) + "\n");
    return path;
}

}  // namespace headway::io
