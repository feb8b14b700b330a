#include "headway/trainer.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "headway/nn/adam.hpp"
#include "headway/rng.hpp"

namespace headway::train {

void TrainConfig::validate() const
{
    auto fail = [](const std::string& what) { throw InvariantError("train config: " + what); };
    if (epochs < 1) fail("epochs must be positive");
    if (batch_size < 1) fail("batch_size must be positive");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be positive");
    if (patience < 1) fail("patience must be positive");
    if (min_improvement < 0.0) fail("min_improvement must be non-negative");
}

bool TrainHistory::operator==(const TrainHistory& o) const
{
    if (best_epoch != o.best_epoch || stopped_early != o.stopped_early || epochs.size() != o.epochs.size())
        return false;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        const auto& a = epochs[i];
        const auto& b = o.epochs[i];
        if (a.epoch != b.epoch || a.train_loss != b.train_loss || a.val_loss != b.val_loss) return false;
    }
    return true;
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch)
{
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(derive_seed(seed, 1000 + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span<std::size_t>(order));
    return order;
}

nn::ModelDims dims_from_sample(const window::Sample& s, int filters, int kernel)
{
    if (s.x.shape.size() != 4 || s.y.shape.size() != 4)
        throw ShapeError("sample tensors must be rank 4");
    nn::ModelDims d;
    d.lookback = static_cast<int>(s.x.shape[0]);
    d.n_distance = static_cast<int>(s.x.shape[1]);
    d.n_directions = static_cast<int>(s.x.shape[2]);
    d.horizon = static_cast<int>(s.y.shape[0]);
    d.filters = filters;
    d.kernel = kernel;
    d.validate();
    return d;
}

namespace {

void check_set(const window::SampleSet& set, const nn::ModelDims& d, const char* name)
{
    if (set.samples.empty()) throw InvariantError(fmt::format("{} set is empty", name));
    const auto nd = static_cast<std::size_t>(d.n_distance);
    const auto dir = static_cast<std::size_t>(d.n_directions);
    const std::vector<std::size_t> xs{static_cast<std::size_t>(d.lookback), nd, dir, 1};
    const std::vector<std::size_t> ts{static_cast<std::size_t>(d.horizon), dir, 1};
    const std::vector<std::size_t> ys{static_cast<std::size_t>(d.horizon), nd, dir, 1};
    for (const auto& s : set.samples) {
        s.x.check(xs, fmt::format("{} sample x", name));
        s.t_future.check(ts, fmt::format("{} sample t_future", name));
        s.y.check(ys, fmt::format("{} sample y", name));
    }
}

}  // namespace

TrainResult train(const window::SampleSet& train_set, const window::SampleSet& val_set, const nn::ModelDims& dims,
                  const TrainConfig& config, std::uint64_t init_seed, const ProgressFn& progress)
{
    config.validate();
    dims.validate();
    check_set(train_set, dims, "train");
    check_set(val_set, dims, "validation");

    TrainResult result;
    auto params = nn::init_params<float>(dims, init_seed);
    result.params = params;
    nn::AdamState<float> adam(params);
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    const std::size_t n = train_set.samples.size();
    const auto bs = static_cast<std::size_t>(config.batch_size);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto order = epoch_order(n, config.seed, epoch);
        double loss_sum = 0.0;
        std::vector<const window::Sample*> batch;
        try {
            for (std::size_t start = 0; start < n; start += bs) {
                batch.clear();
                for (std::size_t i = start; i < std::min(n, start + bs); ++i)
                    batch.push_back(&train_set.samples[order[i]]);
                auto g = nn::batch_gradient(params, batch, config.execution);
                if (!std::isfinite(g.loss))
                    throw std::runtime_error(fmt::format("non-finite training loss in epoch {}", epoch));
                nn::adam_step(params, g.grads, adam, config.learning_rate);
                loss_sum += g.loss * static_cast<double>(batch.size());
            }
        } catch (const std::runtime_error& e) {
            result.diverged = true;
            result.diagnostic = e.what();
            spdlog::error("training diverged: {}", e.what());
            break;
        }

        EpochRecord rec{epoch, loss_sum / static_cast<double>(n),
                        nn::dataset_loss(params, val_set.samples, config.execution)};
        if (!std::isfinite(rec.val_loss)) {
            result.diverged = true;
            result.diagnostic = fmt::format("non-finite validation loss in epoch {}", epoch);
            spdlog::error("training diverged: {}", result.diagnostic);
            break;
        }
        result.history.epochs.push_back(rec);
        spdlog::info("epoch {:4d} train {:.6g} val {:.6g}", epoch, rec.train_loss, rec.val_loss);
        if (progress) progress(rec);

        if (rec.val_loss < best_val - config.min_improvement) {
            best_val = rec.val_loss;
            result.history.best_epoch = epoch;
            result.params = params;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            result.history.stopped_early = epoch < config.epochs;
            break;
        }
        if (config.target_val_loss && best_val < *config.target_val_loss) {
            result.history.stopped_early = epoch < config.epochs;
            break;
        }
    }
    return result;
}

void write_history_csv(const std::filesystem::path& path, const TrainHistory& history)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "epoch,train_loss,val_loss\n";
    for (const auto& e : history.epochs) out << fmt::format("{},{},{}\n", e.epoch, e.train_loss, e.val_loss);
}

}  // namespace headway::train
