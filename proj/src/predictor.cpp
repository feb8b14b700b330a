#include "headway/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "headway/nn/convlstm.hpp"

namespace headway::predict {

TrainedModel TrainedModel::from_checkpoint(const Checkpoint& ck)
{
    return TrainedModel{ck.params, ck.scaler, ck.grid_spec, ck.window_spec};
}

const Metric& MetricsReport::at(Direction d, int horizon_minutes) const
{
    for (const auto& r : rows)
        if (r.direction == d && r.horizon_minutes == horizon_minutes) return r;
    throw std::out_of_range(fmt::format("no metric for {} at {} min", to_string(d), horizon_minutes));
}

namespace {

void check_scaler(const TrainedModel& model, const grid::Scaler& scaler)
{
    if (scaler.digest() != model.scaler.digest())
        throw InvariantError(fmt::format("scaler {} does not match the model's scaler {}", scaler.digest(),
                                         model.scaler.digest()));
}

Tensor<float> denormalized(const Tensor<float>& t, const grid::Scaler& s)
{
    Tensor<float> out = t;
    for (auto& v : out.data) v = static_cast<float>(s.denormalize(v));
    return out;
}

int minutes(const TrainedModel& m, int bins)
{
    return static_cast<int>(std::lround(bins * m.minutes_per_bin()));
}

}  // namespace

Tensor<float> plan_tensor(const std::vector<double>& nb_s, const std::vector<double>& sb_s, const grid::Scaler& s)
{
    if (nb_s.size() != sb_s.size())
        throw ShapeError(fmt::format("terminal plans differ in length ({} NB vs {} SB)", nb_s.size(), sb_s.size()));
    Tensor<float> out({nb_s.size(), kNumDirections, 1});
    for (std::size_t f = 0; f < nb_s.size(); ++f) {
        out.data[f * 2] = static_cast<float>(s.normalize(nb_s[f]));
        out.data[f * 2 + 1] = static_cast<float>(s.normalize(sb_s[f]));
    }
    return out;
}

PredictionResult predict_single(const TrainedModel& model, const grid::Scaler& scaler, const Tensor<float>& x_window,
                                const Tensor<float>& plan)
{
    check_scaler(model, scaler);
    const auto& d = model.dims();
    plan.check({static_cast<std::size_t>(d.horizon), static_cast<std::size_t>(d.n_directions), 1}, "terminal plan");
    PredictionResult r;
    r.y_hat_normalized = nn::model_forward(x_window, plan, model.params);
    r.y_hat = denormalized(r.y_hat_normalized, scaler);
    r.horizon_minutes = minutes(model, d.horizon);
    return r;
}

PredictionResult predict_recursive(const TrainedModel& model, const grid::Scaler& scaler,
                                   const Tensor<float>& x_window, const Tensor<float>& plan, int n_rounds,
                                   const RoundHook& hook)
{
    check_scaler(model, scaler);
    const auto& d = model.dims();
    if (n_rounds < 1) throw InvariantError("n_rounds must be at least 1");
    const auto L = static_cast<std::size_t>(d.lookback);
    const auto F = static_cast<std::size_t>(d.horizon);
    const auto frame = static_cast<std::size_t>(d.n_distance * d.n_directions);
    const auto tstep = static_cast<std::size_t>(d.n_directions);
    const std::size_t need = F * static_cast<std::size_t>(n_rounds);
    if (plan.shape.size() != 3 || plan.shape[1] != tstep || plan.shape[2] != 1)
        throw ShapeError(fmt::format("terminal plan shape [{}] is not [n, {}, 1]", fmt::join(plan.shape, ", "), tstep));
    if (plan.shape[0] < need)
        throw InvariantError(fmt::format("terminal plan covers {} bins but {} rounds of {} need {}", plan.shape[0],
                                         n_rounds, F, need));
    x_window.check({L, static_cast<std::size_t>(d.n_distance), tstep, 1}, "input window");

    PredictionResult r;
    r.y_hat_normalized = Tensor<float>({need, static_cast<std::size_t>(d.n_distance), tstep, 1});
    Tensor<float> window = x_window;
    Tensor<float> slice({F, tstep, 1});
    for (int round = 0; round < n_rounds; ++round) {
        const auto r0 = static_cast<std::size_t>(round) * F;
        std::copy_n(plan.data.begin() + static_cast<std::ptrdiff_t>(r0 * tstep), F * tstep, slice.data.begin());
        if (hook) hook(round, window, slice);
        const auto out = nn::model_forward(window, slice, model.params);
        std::copy(out.data.begin(), out.data.end(),
                  r.y_hat_normalized.data.begin() + static_cast<std::ptrdiff_t>(r0 * frame));
        if (round + 1 == n_rounds) break;
        // Slide: keep the newest L frames of [window ; out].
        std::vector<float> joined(window.data);
        joined.insert(joined.end(), out.data.begin(), out.data.end());
        std::copy(joined.end() - static_cast<std::ptrdiff_t>(L * frame), joined.end(), window.data.begin());
    }
    r.y_hat = denormalized(r.y_hat_normalized, scaler);
    r.horizon_minutes = minutes(model, static_cast<int>(need));
    return r;
}

Metric rmse_r2(std::span<const double> actual, std::span<const double> predicted)
{
    if (actual.size() != predicted.size()) throw ShapeError("actual and predicted lengths differ");
    if (actual.empty()) throw InvariantError("no cells to score");
    Metric m;
    m.n = actual.size();
    double mean = 0.0;
    for (double y : actual) mean += y;
    mean /= static_cast<double>(m.n);
    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < m.n; ++i) {
        ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
        ss_tot += (actual[i] - mean) * (actual[i] - mean);
    }
    m.rmse = std::sqrt(ss_res / static_cast<double>(m.n));
    m.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : std::numeric_limits<double>::quiet_NaN();
    return m;
}

namespace {

struct Plan {
    int rounds = 0;
    std::vector<int> horizons;  // sorted, unique
    std::vector<int> round_of;  // per horizon
};

Plan horizon_plan(const TrainedModel& model, std::span<const int> horizons)
{
    if (horizons.empty()) throw InvariantError("no horizons requested");
    const int step = minutes(model, model.dims().horizon);
    Plan p;
    p.horizons.assign(horizons.begin(), horizons.end());
    std::sort(p.horizons.begin(), p.horizons.end());
    p.horizons.erase(std::unique(p.horizons.begin(), p.horizons.end()), p.horizons.end());
    for (int h : p.horizons) {
        if (h <= 0 || h % step != 0)
            throw InvariantError(fmt::format("horizon {} min is not a positive multiple of {} min", h, step));
        p.round_of.push_back(h / step);
    }
    p.rounds = p.round_of.back();
    return p;
}

struct Anchor {
    std::size_t grid = 0;
    int t = 0;
};

// Predicted and actual seconds for the first `rounds * F` bins after one anchor.
using Predictor = std::function<Tensor<float>(const grid::HeadwayGrid& g, int t, int rounds)>;

MetricsReport score(const TrainedModel& model, std::span<const EvalGrid> grids, std::span<const int> horizons,
                    const EvalOptions& options, const Predictor& predictor,
                    std::vector<ScatterPoint>* scatter = nullptr)
{
    if (grids.empty()) throw InvariantError("empty evaluation set");
    const auto& d = model.dims();
    const Plan plan = horizon_plan(model, horizons);
    const int F = d.horizon;
    const int L = d.lookback;
    const int nd = d.n_distance;
    if (options.distance_bin && (*options.distance_bin < 0 || *options.distance_bin >= nd))
        throw std::out_of_range(fmt::format("distance bin {} outside [0, {})", *options.distance_bin, nd));
    if (options.anchor_stride < 1) throw InvariantError("anchor_stride must be positive");

    std::vector<Anchor> anchors;
    for (std::size_t gi = 0; gi < grids.size(); ++gi) {
        const auto& g = *grids[gi].grid;
        if (g.normalized) throw InvariantError("evaluation grids must be in seconds");
        if (!(g.spec == model.grid_spec)) throw InvariantError("evaluation grid spec differs from the model's");
        for (int t = L; t + plan.rounds * F <= g.spec.n_time_bins(); t += options.anchor_stride)
            anchors.push_back({gi, t});
    }
    if (anchors.empty()) throw InvariantError("no anchor supports the longest horizon");

    const std::size_t per_anchor = static_cast<std::size_t>(plan.rounds * F * nd * 2);
    std::vector<float> preds(anchors.size() * per_anchor);
    const auto na = static_cast<std::ptrdiff_t>(anchors.size());
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t a = 0; a < na; ++a) {
        try {
            const auto& an = anchors[static_cast<std::size_t>(a)];
            const auto y = predictor(*grids[an.grid].grid, an.t, plan.rounds);
            std::copy(y.data.begin(), y.data.end(), preds.begin() + a * static_cast<std::ptrdiff_t>(per_anchor));
        } catch (...) {
#pragma omp critical
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    // Cells grouped per (direction, horizon[, bin]) in anchor order.
    const std::size_t nh = plan.horizons.size();
    auto key = [&](int k, std::size_t h, int j) {
        return (static_cast<std::size_t>(k) * nh + h) * static_cast<std::size_t>(nd) + static_cast<std::size_t>(j);
    };
    std::vector<std::vector<double>> act(2 * nh * static_cast<std::size_t>(nd));
    std::vector<std::vector<double>> prd(act.size());
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        const auto& an = anchors[a];
        const auto& g = *grids[an.grid].grid;
        for (std::size_t h = 0; h < nh; ++h) {
            const int r = plan.round_of[h];
            for (int f = (r - 1) * F; f < r * F; ++f)
                for (int j = 0; j < nd; ++j) {
                    if (options.distance_bin && j != *options.distance_bin) continue;
                    for (int k = 0; k < 2; ++k) {
                        const double y = g.at(an.t + f, j, k);
                        const double p = preds[a * per_anchor + static_cast<std::size_t>((f * nd + j) * 2 + k)];
                        act[key(k, h, j)].push_back(y);
                        prd[key(k, h, j)].push_back(p);
                        if (scatter)
                            scatter->push_back({static_cast<Direction>(k), plan.horizons[h], y, p});
                    }
                }
        }
    }

    MetricsReport report;
    report.anchors = anchors.size();
    for (int k = 0; k < 2; ++k)
        for (std::size_t h = 0; h < nh; ++h) {
            std::vector<double> a;
            std::vector<double> p;
            for (int j = 0; j < nd; ++j) {
                const auto& va = act[key(k, h, j)];
                const auto& vp = prd[key(k, h, j)];
                a.insert(a.end(), va.begin(), va.end());
                p.insert(p.end(), vp.begin(), vp.end());
                if (options.per_bin && !va.empty()) {
                    auto m = rmse_r2(va, vp);
                    m.direction = static_cast<Direction>(k);
                    m.horizon_minutes = plan.horizons[h];
                    report.per_bin.push_back({m, j});
                }
            }
            auto m = rmse_r2(a, p);
            m.direction = static_cast<Direction>(k);
            m.horizon_minutes = plan.horizons[h];
            report.rows.push_back(m);
        }
    return report;
}

Tensor<float> normalized_frames(const grid::HeadwayGrid& g, const grid::Scaler& s, int begin, int count)
{
    auto t = window::slice_frames(g, begin, count);
    for (auto& v : t.data) v = static_cast<float>(s.normalize(v));
    return t;
}

Tensor<float> normalized_terminal(const grid::HeadwayGrid& g, const window::WindowSpec& w, const grid::Scaler& s,
                                  int begin, int count)
{
    auto t = window::slice_terminal(g, w, begin, count);
    for (auto& v : t.data) v = static_cast<float>(s.normalize(v));
    return t;
}

}  // namespace

MetricsReport evaluate(const TrainedModel& model, const grid::Scaler& scaler, std::span<const EvalGrid> grids,
                       std::span<const int> horizons, const EvalOptions& options)
{
    check_scaler(model, scaler);
    const int L = model.dims().lookback;
    const int F = model.dims().horizon;
    return score(model, grids, horizons, options, [&](const grid::HeadwayGrid& g, int t, int rounds) {
        const auto x = normalized_frames(g, scaler, t - L, L);
        const auto plan = normalized_terminal(g, model.window_spec, scaler, t, rounds * F);
        return predict_recursive(model, scaler, x, plan, rounds).y_hat;
    });
}

MetricsReport evaluate_persistence(const TrainedModel& model, std::span<const EvalGrid> grids,
                                   std::span<const int> horizons, const EvalOptions& options)
{
    const int F = model.dims().horizon;
    return score(model, grids, horizons, options, [&](const grid::HeadwayGrid& g, int t, int rounds) {
        const auto last = window::slice_frames(g, t - 1, 1);
        Tensor<float> y({static_cast<std::size_t>(rounds * F), last.shape[1], last.shape[2], 1});
        for (std::size_t f = 0; f < y.shape[0]; ++f)
            std::copy(last.data.begin(), last.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(f * last.size()));
        return y;
    });
}

ScatterResult station_scatter(const TrainedModel& model, const grid::Scaler& scaler, std::span<const EvalGrid> grids,
                              int distance_bin, std::span<const int> horizons)
{
    check_scaler(model, scaler);
    const int L = model.dims().lookback;
    const int F = model.dims().horizon;
    ScatterResult out;
    out.distance_bin = distance_bin;
    EvalOptions options;
    options.distance_bin = distance_bin;
    const auto report = score(
        model, grids, horizons, options,
        [&](const grid::HeadwayGrid& g, int t, int rounds) {
            const auto x = normalized_frames(g, scaler, t - L, L);
            const auto plan = normalized_terminal(g, model.window_spec, scaler, t, rounds * F);
            return predict_recursive(model, scaler, x, plan, rounds).y_hat;
        },
        &out.points);
    out.summary = report.rows;
    return out;
}

}  // namespace headway::predict
