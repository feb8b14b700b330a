#include "doctest.h"

#include <cmath>

#include "fixtures.hpp"
#include "headway/predictor.hpp"

using namespace headway;
using namespace headway::predict;

namespace {

// Independent two-pass oracle in long double.
std::pair<double, double> oracle_rmse_r2(const std::vector<double>& y, const std::vector<double>& p)
{
    long double mean = 0;
    for (double v : y) mean += v;
    mean /= static_cast<long double>(y.size());
    long double res = 0;
    long double tot = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        res += (static_cast<long double>(y[i]) - p[i]) * (static_cast<long double>(y[i]) - p[i]);
        tot += (y[i] - mean) * (y[i] - mean);
    }
    return {static_cast<double>(std::sqrt(res / static_cast<long double>(y.size()))),
            static_cast<double>(1 - res / tot)};
}

Tensor<float> plan_const(std::size_t bins, float v = 0.4f) { return Tensor<float>({bins, 2, 1}, v); }

}  // namespace

TEST_SUITE("predictor") {

TEST_CASE("metric toy values")
{
    const std::vector<double> y{2, 4, 6, 8};
    const std::vector<double> p{3, 3, 7, 7};
    const auto m = rmse_r2(y, p);
    CHECK(std::abs(m.rmse - 1.0) < 1e-9);
    CHECK(std::abs(m.r_squared - 0.8) < 1e-9);
    CHECK(m.n == 4);

    const auto perfect = rmse_r2(y, y);
    CHECK(perfect.rmse == 0.0);
    CHECK(perfect.r_squared == 1.0);
    const std::vector<double> mean(4, 5.0);
    CHECK(std::abs(rmse_r2(y, mean).r_squared) < 1e-12);
    CHECK(std::isnan(rmse_r2(mean, y).r_squared));
    CHECK_THROWS_AS(rmse_r2(std::vector<double>{}, std::vector<double>{}), InvariantError);
    CHECK_THROWS_AS(rmse_r2(y, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("metrics match an independent oracle on random arrays")
{
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto n = 1 + static_cast<std::size_t>(rng.below(500));
        std::vector<double> y(n + 1);
        std::vector<double> p(n + 1);
        for (std::size_t i = 0; i <= n; ++i) {
            y[i] = rng.uniform(30, 900);
            p[i] = y[i] + rng.normal(0, 50);
        }
        const auto m = rmse_r2(y, p);
        const auto [rmse, r2] = oracle_rmse_r2(y, p);
        CHECK(std::abs(m.rmse - rmse) < 1e-9);
        CHECK(std::abs(m.r_squared - r2) < 1e-9);
        CHECK(m.r_squared <= 1.0);
    }
}

TEST_CASE("single-shot prediction at production size")
{
    const grid::GridSpec spec;
    nn::ModelDims d;
    TrainedModel m;
    m.params = nn::init_params<float>(d, 4);
    m.scaler = {60.0, 900.0};
    m.grid_spec = spec;
    const auto g = fixtures::random_grid(spec, 2);
    const auto x = fixtures::normalized_slice(g, m.scaler, 0, 30);
    const auto r = predict_single(m, m.scaler, x, plan_const(15));
    CHECK(r.y_hat.shape == std::vector<std::size_t>{15, 64, 2, 1});
    CHECK(r.horizon_minutes == 15);
    for (float v : r.y_hat.data) {
        CHECK(std::isfinite(v));
        CHECK(v >= 60.0f);
    }
    CHECK(predict_single(m, m.scaler, x, plan_const(15)).y_hat.data == r.y_hat.data);
}

TEST_CASE("scaler and shape checks")
{
    const auto spec = fixtures::small_spec();
    const auto m = fixtures::tiny_model(spec);
    const auto g = fixtures::random_grid(spec, 1);
    const auto x = fixtures::normalized_slice(g, m.scaler, 0, 5);
    CHECK_THROWS_AS(predict_single(m, grid::Scaler{0.0, 500.0}, x, plan_const(3)), InvariantError);
    CHECK_THROWS_AS(predict_single(m, m.scaler, x, plan_const(4)), ShapeError);
    CHECK_THROWS_AS(predict_single(m, m.scaler, fixtures::normalized_slice(g, m.scaler, 0, 6), plan_const(3)),
                    ShapeError);
}

TEST_CASE("recursive prediction")
{
    const auto spec = fixtures::small_spec();
    const auto m = fixtures::tiny_model(spec);
    const auto g = fixtures::random_grid(spec, 5);
    const auto x = fixtures::normalized_slice(g, m.scaler, 3, 5);
    Rng rng(8);
    Tensor<float> plan({12, 2, 1});
    for (auto& v : plan.data) v = static_cast<float>(rng.uniform(0.2, 0.6));

    SUBCASE("one round equals single-shot bit for bit")
    {
        Tensor<float> first({3, 2, 1});
        std::copy_n(plan.data.begin(), first.size(), first.data.begin());
        const auto single = predict_single(m, m.scaler, x, first);
        const auto rec = predict_recursive(m, m.scaler, x, plan, 1);
        CHECK(rec.y_hat.data == single.y_hat.data);
        CHECK(rec.y_hat_normalized.data == single.y_hat_normalized.data);
    }
    SUBCASE("four rounds cover four horizons")
    {
        const auto r = predict_recursive(m, m.scaler, x, plan, 4);
        CHECK(r.y_hat.shape == std::vector<std::size_t>{12, 8, 2, 1});
        CHECK(r.horizon_minutes == 12);
    }
    SUBCASE("each round slides the window over the previous output")
    {
        std::vector<Tensor<float>> windows;
        std::vector<Tensor<float>> plans;
        const auto r = predict_recursive(m, m.scaler, x, plan, 3, [&](int, const Tensor<float>& w, const Tensor<float>& p) {
            windows.push_back(w);
            plans.push_back(p);
        });
        REQUIRE(windows.size() == 3);
        CHECK(windows[0].data == x.data);
        const std::size_t frame = 16;
        // Round 2 window: x[F:] followed by round-1 predictions.
        std::vector<float> expect(x.data.begin() + 3 * frame, x.data.end());
        expect.insert(expect.end(), r.y_hat_normalized.data.begin(), r.y_hat_normalized.data.begin() + 3 * frame);
        CHECK(windows[1].data == expect);
        // Round 3 (F + F > L): the newest L frames of [x ; out1 ; out2].
        std::vector<float> all(x.data);
        all.insert(all.end(), r.y_hat_normalized.data.begin(), r.y_hat_normalized.data.begin() + 6 * frame);
        CHECK(windows[2].data == std::vector<float>(all.end() - 5 * frame, all.end()));
        CHECK(plans[2].data == std::vector<float>(plan.data.begin() + 12, plan.data.begin() + 18));
    }
    SUBCASE("plan must cover every round")
    {
        CHECK_THROWS_WITH_AS(predict_recursive(m, m.scaler, x, plan, 5), doctest::Contains("need 15"), InvariantError);
        CHECK_THROWS_AS(predict_recursive(m, m.scaler, x, plan, 0), InvariantError);
    }
}

TEST_CASE("evaluate matches predictions scored by hand")
{
    const auto spec = fixtures::small_spec(30);
    const auto m = fixtures::tiny_model(spec);
    const auto g1 = fixtures::random_grid(spec, 11);
    const auto g2 = fixtures::random_grid(spec, 12);
    const std::vector<EvalGrid> grids{{1, &g1}, {2, &g2}};
    const std::vector<int> horizons{3, 6};
    EvalOptions opt;
    opt.per_bin = true;
    const auto report = evaluate(m, m.scaler, grids, horizons, opt);
    REQUIRE(report.rows.size() == 4);
    // Anchors 5..24 inclusive support two rounds of three bins in a 30-bin grid.
    CHECK(report.anchors == 2 * 20);

    std::vector<double> act[2][2];
    std::vector<double> prd[2][2];
    for (const auto* g : {&g1, &g2})
        for (int t = 5; t + 6 <= 30; ++t) {
            const auto x = fixtures::normalized_slice(*g, m.scaler, t - 5, 5);
            auto plan = window::slice_terminal(*g, m.window_spec, t, 6);
            for (auto& v : plan.data) v = static_cast<float>(m.scaler.normalize(v));
            const auto y = predict_recursive(m, m.scaler, x, plan, 2).y_hat;
            for (int f = 0; f < 6; ++f)
                for (int j = 0; j < 8; ++j)
                    for (int k = 0; k < 2; ++k) {
                        act[k][f / 3].push_back(g->at(t + f, j, k));
                        prd[k][f / 3].push_back(y.data[static_cast<std::size_t>((f * 8 + j) * 2 + k)]);
                    }
        }
    for (int k = 0; k < 2; ++k)
        for (int h = 0; h < 2; ++h) {
            const auto& row = report.at(static_cast<Direction>(k), 3 * (h + 1));
            const auto [rmse, r2] = oracle_rmse_r2(act[k][h], prd[k][h]);
            CHECK(row.n == act[k][h].size());
            CHECK(std::abs(row.rmse - rmse) < 1e-9);
            CHECK(std::abs(row.r_squared - r2) < 1e-9);
        }
    CHECK(report.per_bin.size() == 2 * 2 * 8);
}

TEST_CASE("evaluate input checks")
{
    const auto spec = fixtures::small_spec(30);
    const auto m = fixtures::tiny_model(spec);
    const auto g = fixtures::random_grid(spec, 1);
    const std::vector<EvalGrid> grids{{0, &g}};
    CHECK_THROWS_AS(evaluate(m, m.scaler, grids, std::vector<int>{4}), InvariantError);
    CHECK_THROWS_AS(evaluate(m, m.scaler, std::vector<EvalGrid>{}, std::vector<int>{3}), InvariantError);
    CHECK_THROWS_AS(evaluate(m, m.scaler, grids, std::vector<int>{60}), InvariantError);
    auto normalized = grid::normalize(g, m.scaler);
    CHECK_THROWS_AS(evaluate(m, m.scaler, std::vector<EvalGrid>{{0, &normalized}}, std::vector<int>{3}),
                    InvariantError);
}

TEST_CASE("persistence baseline")
{
    const auto spec = fixtures::small_spec(30);
    const auto m = fixtures::tiny_model(spec);
    grid::HeadwayGrid flat(spec);
    Rng rng(2);
    for (int j = 0; j < 8; ++j)
        for (int k = 0; k < 2; ++k) {
            const double v = std::round(rng.uniform(200, 400));
            for (int t = 0; t < 30; ++t) flat.at(t, j, k) = v;
        }
    const std::vector<EvalGrid> grids{{0, &flat}};
    const auto r = evaluate_persistence(m, grids, std::vector<int>{3, 6});
    for (const auto& row : r.rows) CHECK(row.rmse == 0.0);

    // A unit step every bin: persistence misses by f + 1 at lead f.
    grid::HeadwayGrid ramp(spec);
    for (int t = 0; t < 30; ++t)
        for (int j = 0; j < 8; ++j)
            for (int k = 0; k < 2; ++k) ramp.at(t, j, k) = 100.0 + t;
    const auto rr = evaluate_persistence(m, std::vector<EvalGrid>{{0, &ramp}}, std::vector<int>{3});
    CHECK(std::abs(rr.at(Direction::NB, 3).rmse - std::sqrt((1.0 + 4.0 + 9.0) / 3.0)) < 1e-12);
}

TEST_CASE("station scatter agrees with a bin-filtered evaluation")
{
    const auto spec = fixtures::small_spec(30);
    const auto m = fixtures::tiny_model(spec);
    const auto g = fixtures::random_grid(spec, 3);
    const std::vector<EvalGrid> grids{{0, &g}};
    const std::vector<int> horizons{3, 6};
    const auto s = station_scatter(m, m.scaler, grids, 4, horizons);
    EvalOptions opt;
    opt.distance_bin = 4;
    const auto e = evaluate(m, m.scaler, grids, horizons, opt);
    REQUIRE(s.summary.size() == e.rows.size());
    for (std::size_t i = 0; i < e.rows.size(); ++i) {
        CHECK(s.summary[i].rmse == e.rows[i].rmse);
        CHECK(s.summary[i].n == 20u * 3u);
    }
    // anchors x horizon bins per (direction, horizon), two of each.
    CHECK(s.points.size() == 20u * 3u * 2u * 2u);
    CHECK_THROWS_AS(station_scatter(m, m.scaler, grids, 8, horizons), std::out_of_range);
}

}
