#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gapnet/data.hpp"
#include "gapnet/model.hpp"

namespace gapnet {

/// mean((pred - target)^2) + alpha * sum_ij relu(-(pred_i - pred_j)(target_i - target_j)).
Tensor ranking_loss(const Tensor& pred, const Tensor& target, double alpha);

/// Linear warmup over the first 30% of steps from max/25 to max, then cosine
/// decay to max/1e4. `step` counts from 0 to total - 1.
double one_cycle_lr(std::size_t step, std::size_t total, double max_lr);

class Adam {
public:
    explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    /// Updates every entry of `params` that has a gradient in `grads`.
    void step(ParameterMap& params, const ParameterMap& grads, double lr);
    std::size_t steps() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

struct TrainConfig {
    double alpha = 1.0;
    std::size_t epochs = 50;
    double max_lr = 1e-4;
    std::size_t patience = 10;  // 0 disables early stopping
    std::size_t bptt_window = 1;
    std::size_t lookback = 16;
    std::uint64_t seed = 0;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double valid_loss = 0.0;
    double lr = 0.0;
    double seconds = 0.0;
};

struct TrainResult {
    ModelParams best;
    std::size_t best_epoch = 0;  // 1-based; 0 if no epoch finished
    double best_valid = 0.0;
    std::vector<EpochRecord> log;
    bool aborted = false;
    std::string diagnostic;
};

/// Everything a run needs besides parameters.
struct RunContext {
    const PricePanel* panel = nullptr;
    ModelConfig model;
    TplState init;                              // TPL memory at the first usable day
    std::optional<RealizedGraph> prior;         // required by two-step graph backbones
};

TrainResult train_model(const RunContext& ctx, const TrainConfig& config, ModelParams start,
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

struct Predictions {
    std::vector<std::size_t> days;  // target day index per row
    Tensor scores;                  // days x N
    Tensor targets;                 // days x N realized return ratios
    double mean_loss = 0.0;
};

/// Deterministic forward pass. TPL state is threaded from `ctx.init` over every
/// day with a full lookback before the segment, then through the segment.
Predictions evaluate_model(const RunContext& ctx, const ModelParams& params, const Segment& segment,
                           std::size_t lookback, double alpha,
                           const std::function<void(std::size_t day, const DayOutput&)>& on_day = {});

}  // namespace gapnet
