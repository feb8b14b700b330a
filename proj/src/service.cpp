#include "headway/service.hpp"

#include <regex>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "httplib.h"
#include "json.hpp"

#include "headway/checkpoint.hpp"
#include "headway/config.hpp"
#include "headway/io.hpp"
#include "headway/version.hpp"

namespace headway::service {

using nlohmann::json;

namespace {

struct HttpError : std::runtime_error {
    HttpError(int s, const std::string& m) : std::runtime_error(m), status(s) {}
    int status;
};

Response reply(int status, const json& body) { return {status, body.dump()}; }

Response error(int status, const std::string& message)
{
    return reply(status, json{{"error", message}, {"status", status}});
}

const grid::HeadwayGrid& find_grid(const SessionState& s, int id)
{
    const auto it = s.grids.find(id);
    if (it == s.grids.end()) throw HttpError(404, fmt::format("unknown replication {}", id));
    return it->second;
}

int parse_int(const std::string& text, const char* what)
{
    try {
        std::size_t used = 0;
        const int v = std::stoi(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    throw HttpError(400, fmt::format("{} must be an integer, got '{}'", what, text));
}

void check_anchor(const SessionState& s, const grid::HeadwayGrid& g, int anchor)
{
    const int L = s.model.dims().lookback;
    if (anchor < L || anchor > g.spec.n_time_bins())
        throw HttpError(422, fmt::format("anchor {} outside [{}, {}]", anchor, L, g.spec.n_time_bins()));
}

// [n][N_d][N_dir] seconds from a grid region.
json grid_slice_json(const grid::HeadwayGrid& g, int begin, int count)
{
    return io::grid_to_json(window::slice_frames(g, begin, count));
}

std::vector<double> terminal_series(const SessionState& s, const grid::HeadwayGrid& g, Direction d, int begin,
                                    int count)
{
    std::vector<double> out;
    for (int t = begin; t < begin + count && t < g.spec.n_time_bins(); ++t)
        out.push_back(g.at(t, s.model.window_spec.terminal_bin(static_cast<int>(index(d))), static_cast<int>(index(d))));
    return out;
}

// Normalized [L, N_d, N_dir, 1] window from a seconds array [L][N_d][N_dir].
Tensor<float> window_from_json(const SessionState& s, const json& w)
{
    const auto& d = s.model.dims();
    const auto L = static_cast<std::size_t>(d.lookback);
    const auto nd = static_cast<std::size_t>(d.n_distance);
    Tensor<float> x({L, nd, 2, 1});
    auto bad = [&] {
        return HttpError(400, fmt::format("window must be a [{}][{}][2] array of seconds", L, nd));
    };
    if (!w.is_array() || w.size() != L) throw bad();
    for (std::size_t t = 0; t < L; ++t) {
        if (!w[t].is_array() || w[t].size() != nd) throw bad();
        for (std::size_t j = 0; j < nd; ++j) {
            const auto& cell = w[t][j];
            if (!cell.is_array() || cell.size() != 2) throw bad();
            for (std::size_t k = 0; k < 2; ++k) {
                if (!cell[k].is_number()) throw bad();
                const double v = cell[k].get<double>();
                if (!std::isfinite(v) || v < 0.0) throw HttpError(422, "window values must be finite and non-negative");
                x.data[(t * nd + j) * 2 + k] = static_cast<float>(s.model.scaler.normalize(v));
            }
        }
    }
    return x;
}

struct Source {
    Tensor<float> x;  // normalized
    std::array<std::vector<double>, 2> terminal_future;  // seconds, may be short
    std::array<double, 2> last_terminal{};               // seconds
    int anchor = -1;
    std::optional<int> replication;
};

Source resolve_source(const SessionState& s, const json& body)
{
    const int L = s.model.dims().lookback;
    const int F = s.model.dims().horizon;
    Source src;
    if (body.contains("window")) {
        src.x = window_from_json(s, body.at("window"));
        for (int k = 0; k < 2; ++k) {
            const auto last = static_cast<std::size_t>(((L - 1) * s.model.dims().n_distance +
                                                        s.model.window_spec.terminal_bin(k)) * 2 + k);
            src.last_terminal[static_cast<std::size_t>(k)] = s.model.scaler.denormalize(src.x.data[last]);
        }
        return src;
    }
    if (!body.contains("replication") || !body.contains("anchor"))
        throw HttpError(400, "request needs either 'window' or 'replication' and 'anchor'");
    if (!body.at("replication").is_number_integer() || !body.at("anchor").is_number_integer())
        throw HttpError(400, "'replication' and 'anchor' must be integers");
    const int id = body.at("replication").get<int>();
    const auto& g = find_grid(s, id);
    const int anchor = body.at("anchor").get<int>();
    check_anchor(s, g, anchor);
    src.replication = id;
    src.anchor = anchor;
    src.x = window::slice_frames(g, anchor - L, L);
    for (auto& v : src.x.data) v = static_cast<float>(s.model.scaler.normalize(v));
    for (int k = 0; k < 2; ++k) {
        const auto d = static_cast<Direction>(k);
        src.terminal_future[static_cast<std::size_t>(k)] = terminal_series(s, g, d, anchor, 8 * F);
        src.last_terminal[static_cast<std::size_t>(k)] = terminal_series(s, g, d, anchor - 1, 1).at(0);
    }
    return src;
}

// Terminal headways for `bins` future bins: explicit, else ground truth, else the last observed value.
std::vector<double> default_terminal(const Source& src, int k, std::size_t bins)
{
    const auto& fut = src.terminal_future[static_cast<std::size_t>(k)];
    std::vector<double> out(bins, src.last_terminal[static_cast<std::size_t>(k)]);
    for (std::size_t i = 0; i < bins && i < fut.size(); ++i) out[i] = fut[i];
    return out;
}

json model_json(const SessionState& s)
{
    return json{{"dims", s.model.dims()},
                {"scaler", s.model.scaler},
                {"grid_spec", s.model.grid_spec},
                {"window_spec", s.model.window_spec},
                {"training_digest", s.params_digest},
                {"best_epoch", s.best_epoch},
                {"min_safe_headway_s", s.min_safe_headway},
                {"minutes_per_bin", s.model.minutes_per_bin()}};
}

Response get_window(const SessionState& s, int id, const std::multimap<std::string, std::string>& query)
{
    const auto& g = find_grid(s, id);
    const auto it = query.find("anchor");
    if (it == query.end()) throw HttpError(400, "missing query parameter 'anchor'");
    const int anchor = parse_int(it->second, "anchor");
    check_anchor(s, g, anchor);
    const int L = s.model.dims().lookback;
    const int F = s.model.dims().horizon;
    const int ahead = std::min(4 * F, g.spec.n_time_bins() - anchor);
    return reply(200, json{{"replication", id},
                           {"anchor", anchor},
                           {"first_time_bin", anchor - L},
                           {"window_s", grid_slice_json(g, anchor - L, L)},
                           {"actual_future_s", ahead > 0 ? grid_slice_json(g, anchor, ahead) : json::array()},
                           {"terminal_future_s",
                            {{"NB", terminal_series(s, g, Direction::NB, anchor, ahead)},
                             {"SB", terminal_series(s, g, Direction::SB, anchor, ahead)}}}});
}

std::vector<double> number_list(const json& j, const char* what)
{
    if (!j.is_array()) throw HttpError(400, fmt::format("{} must be an array of numbers", what));
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw HttpError(400, fmt::format("{} must be an array of numbers", what));
        out.push_back(v.get<double>());
    }
    return out;
}

Response post_predict(const SessionState& s, const json& body)
{
    const auto src = resolve_source(s, body);
    const int F = s.model.dims().horizon;
    int rounds = 1;
    if (body.contains("rounds")) {
        if (!body.at("rounds").is_number_integer()) throw HttpError(400, "'rounds' must be an integer");
        rounds = body.at("rounds").get<int>();
    }
    if (rounds < 1 || rounds > 8) throw HttpError(422, "rounds must be between 1 and 8");
    const auto bins = static_cast<std::size_t>(rounds * F);
    std::array<std::vector<double>, 2> plans{default_terminal(src, 0, bins), default_terminal(src, 1, bins)};
    if (body.contains("terminal_plans")) {
        const auto& tp = body.at("terminal_plans");
        if (!tp.is_object()) throw HttpError(400, "'terminal_plans' must map NB/SB to headway lists");
        for (const auto& item : tp.items()) {
            Direction d;
            try {
                d = parse_direction(item.key());
            } catch (const std::invalid_argument& e) {
                throw HttpError(400, e.what());
            }
            auto list = number_list(item.value(), "terminal plan");
            if (list.size() != bins)
                throw HttpError(422, fmt::format("{} plan has {} entries, {} rounds need {}", item.key(), list.size(),
                                                 rounds, bins));
            whatif::validate_plan({d, list, std::string(item.key())}, s.min_safe_headway);
            plans[index(d)] = std::move(list);
        }
    }
    const auto plan = predict::plan_tensor(plans[0], plans[1], s.model.scaler);
    const auto r = predict::predict_recursive(s.model, s.model.scaler, src.x, plan, rounds);
    json out{{"y_hat_s", io::grid_to_json(r.y_hat)},
             {"horizon_minutes", r.horizon_minutes},
             {"anchor_time_bin", src.anchor},
             {"terminal_plans_s", {{"NB", plans[0]}, {"SB", plans[1]}}}};
    if (src.replication) out["replication"] = *src.replication;
    return reply(200, out);
}

Response post_whatif(const SessionState& s, const json& body)
{
    const auto src = resolve_source(s, body);
    if (!body.contains("plans") || !body.at("plans").is_array() || body.at("plans").empty())
        throw HttpError(400, "'plans' must be a non-empty array");
    std::vector<whatif::TerminalPlan> plans;
    for (const auto& p : body.at("plans")) {
        try {
            plans.push_back(io::plan_from_json(p));
        } catch (const InvariantError& e) {
            throw HttpError(400, e.what());
        }
    }
    std::size_t baseline = 0;
    if (body.contains("baseline_index")) {
        if (!body.at("baseline_index").is_number_unsigned()) throw HttpError(400, "'baseline_index' must be >= 0");
        baseline = body.at("baseline_index").get<std::size_t>();
    }
    whatif::PlanContext ctx;
    ctx.x_window = src.x;
    ctx.anchor_time_bin = src.anchor;
    const std::size_t len = plans.front().headways.size();
    for (int k = 0; k < 2; ++k) ctx.baseline_terminal[static_cast<std::size_t>(k)] = default_terminal(src, k, len);
    const auto report = whatif::compare_plans(s.model, s.model.scaler, ctx, plans, baseline, s.min_safe_headway);
    json out = io::report_to_json(report);
    for (std::size_t i = 0; i < report.plans.size(); ++i)
        out["plans"][i]["predicted_s"] = io::grid_to_json(report.plans[i].predicted);
    out["anchor_time_bin"] = src.anchor;
    if (src.replication) out["replication"] = *src.replication;
    return reply(200, out);
}

Response route(const SessionState& s, const std::string& method, const std::string& path,
               const std::multimap<std::string, std::string>& query, const std::string& body)
{
    static const std::regex window_path(R"(/replications/([^/]+)/window)");
    auto parse_body = [&] {
        try {
            auto j = json::parse(body);
            if (!j.is_object()) throw HttpError(400, "request body must be a JSON object");
            return j;
        } catch (const json::parse_error& e) {
            throw HttpError(400, fmt::format("invalid JSON: {}", e.what()));
        }
    };
    std::smatch m;
    if (method == "GET") {
        if (path == "/health") return reply(200, json{{"status", "ok"}, {"version", s.version}});
        if (path == "/model") return reply(200, model_json(s));
        if (path == "/replications") {
            json reps = json::array();
            const int L = s.model.dims().lookback;
            for (const auto& [id, g] : s.grids)
                reps.push_back({{"id", id},
                                {"n_time_bins", g.spec.n_time_bins()},
                                {"anchor_min", L},
                                {"anchor_max", g.spec.n_time_bins()}});
            return reply(200, json{{"replications", reps}});
        }
        if (std::regex_match(path, m, window_path)) return get_window(s, parse_int(m[1], "replication id"), query);
    } else if (method == "POST") {
        if (path == "/predict") return post_predict(s, parse_body());
        if (path == "/whatif") return post_whatif(s, parse_body());
    }
    return error(404, fmt::format("no route for {} {}", method, path));
}

}  // namespace

std::shared_ptr<const SessionState> load_session(const std::filesystem::path& checkpoint,
                                                 const std::filesystem::path& data_dir, double min_safe_headway)
{
    auto state = std::make_shared<SessionState>();
    const auto ck = load_checkpoint(checkpoint);
    state->model = predict::TrainedModel::from_checkpoint(ck);
    state->params_digest = params_digest(ck.params);
    state->best_epoch = ck.history.best_epoch;
    state->min_safe_headway = min_safe_headway;
    state->version = kVersion;
    for (int id : io::list_grid_replications(data_dir)) {
        auto file = io::read_grid_files(data_dir, id);
        if (!(file.grid.spec == ck.grid_spec))
            throw InvariantError(fmt::format("grid for replication {} does not match the checkpoint's grid spec", id));
        state->grids.emplace(id, std::move(file.grid));
    }
    if (state->grids.empty()) throw InvariantError("no grid files found in " + data_dir.string());
    return state;
}

Response handle(const SessionState& state, const std::string& method, const std::string& path,
                const std::multimap<std::string, std::string>& query, const std::string& body)
{
    try {
        return route(state, method, path, query, body);
    } catch (const HttpError& e) {
        return error(e.status, e.what());
    } catch (const whatif::PlanError& e) {
        auto r = json{{"error", e.what()}, {"status", 422}, {"indices", e.indices}};
        return reply(422, r);
    } catch (const ShapeError& e) {
        return error(400, e.what());
    } catch (const InvariantError& e) {
        return error(422, e.what());
    } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", method, path, e.what());
        return error(500, e.what());
    }
}

Server::Server(std::shared_ptr<const SessionState> state) : state_(std::move(state)), http_(new httplib::Server)
{
    http_->set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
        const auto snap = snapshot();
        const auto r = handle(*snap, req.method, req.path, req.params, req.body);
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    http_->Get(R"(/.*)", dispatch);
    http_->Post(R"(/.*)", dispatch);
    http_->Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
}

Server::~Server() { stop(); }

bool Server::listen(const std::string& host, int port) { return http_->listen(host, port); }
int Server::bind_any_port(const std::string& host) { return http_->bind_to_any_port(host); }
bool Server::listen_after_bind() { return http_->listen_after_bind(); }
void Server::stop()
{
    if (http_) http_->stop();
}
bool Server::is_running() const { return http_->is_running(); }
void Server::wait_until_ready() const { http_->wait_until_ready(); }

void Server::swap(std::shared_ptr<const SessionState> next)
{
    std::lock_guard lock(mutex_);
    state_ = std::move(next);
}

std::shared_ptr<const SessionState> Server::snapshot() const
{
    std::lock_guard lock(mutex_);
    return state_;
}

}  // namespace headway::service
