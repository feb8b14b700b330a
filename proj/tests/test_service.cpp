#include "doctest.h"

#include <future>
#include <thread>

#include "fixtures.hpp"
#include "headway/checkpoint.hpp"
#include "headway/io.hpp"
#include "headway/service.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace headway;
using namespace headway::service;
using nlohmann::json;

namespace {

std::shared_ptr<const SessionState> small_session()
{
    auto s = std::make_shared<SessionState>();
    const auto spec = fixtures::small_spec(30);
    s->model = fixtures::tiny_model(spec);
    s->params_digest = params_digest(s->model.params);
    s->grids.emplace(0, fixtures::random_grid(spec, 1));
    s->grids.emplace(4, fixtures::random_grid(spec, 2));
    s->version = "test";
    return s;
}

Response get(const SessionState& s, const std::string& path, std::multimap<std::string, std::string> q = {})
{
    return handle(s, "GET", path, q, "");
}

Response post(const SessionState& s, const std::string& path, const json& body)
{
    return handle(s, "POST", path, {}, body.dump());
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("read-only endpoints")
{
    const auto s = small_session();
    const auto health = get(*s, "/health");
    CHECK(health.status == 200);
    CHECK(json::parse(health.body).at("version") == "test");

    const auto model = json::parse(get(*s, "/model").body);
    CHECK(model.at("dims").at("horizon") == 3);
    CHECK(model.at("min_safe_headway_s") == 120.0);
    CHECK(model.at("training_digest") == s->params_digest);

    const auto reps = json::parse(get(*s, "/replications").body).at("replications");
    REQUIRE(reps.size() == 2);
    CHECK(reps[1].at("id") == 4);

    const auto w = get(*s, "/replications/4/window", {{"anchor", "10"}});
    REQUIRE(w.status == 200);
    const auto wj = json::parse(w.body);
    CHECK(wj.at("window_s").size() == 5);
    CHECK(wj.at("window_s")[0].size() == 8);
    CHECK(wj.at("window_s")[0][0].size() == 2);
    CHECK(wj.at("window_s")[4][2][1].get<double>() == static_cast<float>(s->grids.at(4).at(9, 2, 1)));
    CHECK(wj.at("terminal_future_s").at("NB").size() == 12);

    CHECK(get(*s, "/replications/9/window", {{"anchor", "10"}}).status == 404);
    CHECK(get(*s, "/replications/4/window").status == 400);
    CHECK(get(*s, "/replications/4/window", {{"anchor", "x"}}).status == 400);
    CHECK(get(*s, "/replications/4/window", {{"anchor", "2"}}).status == 422);
    CHECK(get(*s, "/nope").status == 404);
}

TEST_CASE("predict from a replication or an explicit window")
{
    const auto s = small_session();
    const auto r = post(*s, "/predict", {{"replication", 0}, {"anchor", 12}});
    REQUIRE(r.status == 200);
    const auto j = json::parse(r.body);
    CHECK(j.at("y_hat_s").size() == 3);
    CHECK(j.at("y_hat_s")[0].size() == 8);
    CHECK(j.at("horizon_minutes") == 3);
    CHECK(post(*s, "/predict", {{"replication", 0}, {"anchor", 12}}).body == r.body);

    // The same window sent explicitly, with the ground-truth plans, gives the same answer.
    const auto w = json::parse(get(*s, "/replications/0/window", {{"anchor", "12"}}).body);
    json body{{"window", w.at("window_s")}, {"terminal_plans", j.at("terminal_plans_s")}};
    const auto explicit_r = json::parse(post(*s, "/predict", body).body);
    const auto& a = j.at("y_hat_s");
    const auto& b = explicit_r.at("y_hat_s");
    double worst = 0.0;
    for (std::size_t f = 0; f < 3; ++f)
        for (std::size_t d = 0; d < 8; ++d)
            for (std::size_t k = 0; k < 2; ++k)
                worst = std::max(worst, std::abs(a[f][d][k].get<double>() - b[f][d][k].get<double>()));
    CHECK(worst < 1e-3);

    const auto four = json::parse(post(*s, "/predict", {{"replication", 0}, {"anchor", 12}, {"rounds", 4}}).body);
    CHECK(four.at("y_hat_s").size() == 12);
}

TEST_CASE("predict error statuses")
{
    const auto s = small_session();
    CHECK(handle(*s, "POST", "/predict", {}, "{not json").status == 400);
    CHECK(post(*s, "/predict", json::object()).status == 400);
    CHECK(post(*s, "/predict", {{"replication", 7}, {"anchor", 12}}).status == 404);
    CHECK(post(*s, "/predict", {{"replication", 0}, {"anchor", 1}}).status == 422);
    CHECK(post(*s, "/predict", {{"window", {{1, 2}}}}).status == 400);
    CHECK(post(*s, "/predict", {{"replication", 0}, {"anchor", 12}, {"rounds", "two"}}).status == 400);
    const auto bad_plan = post(*s, "/predict",
                               {{"replication", 0}, {"anchor", 12}, {"terminal_plans", {{"NB", {300, 30, 300}}}}});
    CHECK(bad_plan.status == 422);
    CHECK(json::parse(bad_plan.body).at("indices") == json::array({1}));
    CHECK(post(*s, "/predict", {{"replication", 0}, {"anchor", 12}, {"terminal_plans", {{"NB", {300}}}}}).status ==
          422);
}

TEST_CASE("what-if comparison")
{
    const auto s = small_session();
    const json plans = json::array({{{"direction", "NB"}, {"label", "base"}, {"headways_s", {300, 300, 300}}},
                                    {{"direction", "NB"}, {"label", "hold"}, {"headways_s", {420, 420, 420}}}});
    const auto r = post(*s, "/whatif", {{"replication", 4}, {"anchor", 10}, {"plans", plans}, {"baseline_index", 0}});
    REQUIRE(r.status == 200);
    const auto j = json::parse(r.body);
    REQUIRE(j.at("plans").size() == 2);
    for (const auto& row : j.at("plans")[0].at("delta_cv"))
        for (const auto& v : row) CHECK(v.get<double>() == 0.0);
    CHECK(j.at("plans")[1].at("predicted_s").size() == 3);
    CHECK(post(*s, "/whatif", {{"replication", 4}, {"anchor", 10}, {"plans", plans}}).body == r.body);

    json unsafe = plans;
    unsafe[1]["headways_s"] = {300, 100, 300};
    CHECK(post(*s, "/whatif", {{"replication", 4}, {"anchor", 10}, {"plans", unsafe}}).status == 422);
    CHECK(post(*s, "/whatif", {{"replication", 4}, {"anchor", 10}, {"plans", json::array()}}).status == 400);
    CHECK(post(*s, "/whatif", {{"replication", 4}, {"anchor", 10}, {"plans", plans}, {"baseline_index", 5}}).status ==
          422);
}

TEST_CASE("production-size window gives a 15 x 64 x 2 prediction")
{
    auto s = std::make_shared<SessionState>();
    const grid::GridSpec spec;
    s->model.params = nn::init_params<float>(nn::ModelDims{}, 2);
    s->model.scaler = {60.0, 900.0};
    s->model.grid_spec = spec;
    s->grids.emplace(0, fixtures::random_grid(spec, 3));
    const auto w = json::parse(get(*s, "/replications/0/window", {{"anchor", "30"}}).body).at("window_s");
    CHECK(w.size() == 30);
    const auto r = post(*s, "/predict", {{"window", w}});
    REQUIRE(r.status == 200);
    const auto y = json::parse(r.body).at("y_hat_s");
    CHECK(y.size() == 15);
    CHECK(y[0].size() == 64);
    CHECK(y[0][0].size() == 2);
}

TEST_CASE("HTTP server with CORS and concurrent clients")
{
    Server server(small_session());
    const int port = server.bind_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread loop([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    const auto health = client.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");
    const auto options = client.Options("/predict");
    REQUIRE(options);
    CHECK(options->status == 204);

    const std::string body = json{{"replication", 0}, {"anchor", 15}, {"rounds", 2}}.dump();
    const auto first = client.Post("/predict", body, "application/json");
    REQUIRE(first);
    CHECK(first->status == 200);
    std::vector<std::future<std::string>> futures;
    for (int i = 0; i < 6; ++i)
        futures.push_back(std::async(std::launch::async, [&, i] {
            httplib::Client c("127.0.0.1", port);
            const auto r = i % 2 ? c.Post("/predict", body, "application/json") : c.Get("/model");
            return r ? r->body : std::string();
        }));
    const auto model_body = client.Get("/model")->body;
    for (int i = 0; i < 6; ++i) CHECK(futures[static_cast<std::size_t>(i)].get() == (i % 2 ? first->body : model_body));

    // Swapping the snapshot changes later answers only.
    auto next = std::make_shared<SessionState>(*small_session());
    next->version = "next";
    server.swap(next);
    CHECK(json::parse(client.Get("/health")->body).at("version") == "next");

    server.stop();
    loop.join();
}

TEST_CASE("session loads a checkpoint and grid files")
{
    const auto dir = fixtures::temp_dir("session");
    const auto spec = fixtures::small_spec(30);
    const auto m = fixtures::tiny_model(spec);
    Checkpoint ck{m.params, m.scaler, spec, m.window_spec, {}, 1, 0};
    save_checkpoint(ck, dir / "m.ckpt");
    io::write_grid_files(dir / "data", {2, fixtures::random_grid(spec, 5), {}, m.scaler});
    const auto s = load_session(dir / "m.ckpt", dir / "data");
    CHECK(s->grids.size() == 1);
    CHECK(s->grids.count(2) == 1);
    CHECK(s->params_digest == params_digest(m.params));

    io::write_grid_files(dir / "other", {2, fixtures::random_grid(fixtures::small_spec(31), 5), {}, m.scaler});
    CHECK_THROWS_AS(load_session(dir / "m.ckpt", dir / "other"), InvariantError);
    std::filesystem::create_directories(dir / "empty");
    CHECK_THROWS_AS(load_session(dir / "m.ckpt", dir / "empty"), InvariantError);
}

}
