#include "gapnet/train.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>

#include "gapnet/errors.hpp"
#include "gapnet/ops.hpp"
#include "gapnet/params.hpp"

namespace gapnet {
namespace {

ModelParams track_trainable(Tape& tape, const ModelConfig& config, const ModelParams& params) {
    ModelParams tracked = params;
    ModelParams::visit(tracked, [&](const std::string& name, Tensor& t) {
        if (is_trainable(config, name)) t = tape.parameter(name, t);
    });
    return tracked;
}

}  // namespace

Tensor ranking_loss(const Tensor& pred, const Tensor& target, double alpha) {
    if (pred.rank() != 1 || pred.shape() != target.shape()) {
        throw ShapeError("ranking_loss: prediction " + shape_str(pred.shape()) + " and target " +
                         shape_str(target.shape()) + " must be equal-length vectors");
    }
    const std::size_t n = pred.size();
    if (n == 0) throw ShapeError("ranking_loss: empty input");
    const Tensor dp = sub(reshape(pred, {n, 1}), reshape(pred, {1, n}));
    const Tensor dt = sub(reshape(target, {n, 1}), reshape(target, {1, n}));
    return add(mse(pred, target), scale(sum(relu(neg(mul(dp, dt)))), alpha));
}

double one_cycle_lr(std::size_t step, std::size_t total, double max_lr) {
    if (total == 0) return max_lr;
    const double start = max_lr / 25.0, end = max_lr / 1e4;
    const double warm = 0.3 * static_cast<double>(total);
    const double s = static_cast<double>(step);
    if (s < warm) return start + (max_lr - start) * s / warm;
    const double span = static_cast<double>(total) - warm;
    const double progress = span > 0.0 ? std::min(1.0, (s - warm) / span) : 1.0;
    return end + (max_lr - end) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void Adam::step(ParameterMap& params, const ParameterMap& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& [name, tensor] : params) {
        const auto g = grads.find(name);
        if (g == grads.end()) continue;
        auto& m = m_[name];
        auto& v = v_[name];
        if (m.empty()) {
            m.assign(tensor.size(), 0.0);
            v.assign(tensor.size(), 0.0);
        }
        auto w = tensor.mutable_data();
        const auto gv = g->second.data();
        for (std::size_t k = 0; k < w.size(); ++k) {
            m[k] = beta1_ * m[k] + (1.0 - beta1_) * gv[k];
            v[k] = beta2_ * v[k] + (1.0 - beta2_) * gv[k] * gv[k];
            w[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
        }
    }
}

TrainResult train_model(const RunContext& ctx, const TrainConfig& tc, ModelParams start,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
    if (!ctx.panel) throw std::invalid_argument("train_model: no panel");
    if (tc.alpha <= 0.0) throw ConfigError("train.alpha must be positive");
    if (tc.bptt_window == 0) throw ConfigError("tpl.bptt_window must be at least 1");
    const PricePanel& panel = *ctx.panel;
    const ModelConfig& mc = ctx.model;
    const auto days = target_days(panel, panel.split.train, tc.lookback);
    if (days.empty()) throw DataError("training segment has no day with a full lookback window");
    if (target_days(panel, panel.split.valid, tc.lookback).empty()) {
        throw DataError("validation segment has no day with a full lookback window");
    }
    const RealizedGraph* prior = ctx.prior ? &*ctx.prior : nullptr;

    const std::size_t chunks = (days.size() + tc.bptt_window - 1) / tc.bptt_window;
    const std::size_t total_steps = chunks * tc.epochs;
    std::mt19937_64 dropout_rng = module_rng(tc.seed, "dropout");
    Adam adam;
    ModelParams params = std::move(start);
    ParameterMap flat = to_map(params);

    TrainResult result;
    result.best = params;
    result.best_valid = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0, step = 0;

    for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        TplState state = ctx.init;
        double loss_sum = 0.0, lr = 0.0;
        for (std::size_t c = 0; c < chunks; ++c) {
            Tape tape;
            const ModelParams tracked = track_trainable(tape, mc, params);
            state = state.detached();
            std::vector<Tensor> losses;
            const std::size_t first = c * tc.bptt_window, last = std::min(days.size(), first + tc.bptt_window);
            for (std::size_t d = first; d < last; ++d) {
                const LookbackWindow w = lookback_window(panel, days[d], tc.lookback);
                const DayOutput out = forward_day(mc, tracked, w.x, state, prior, &dropout_rng);
                losses.push_back(ranking_loss(out.scores, w.target, tc.alpha));
            }
            Tensor chunk_loss = losses.front();
            for (std::size_t k = 1; k < losses.size(); ++k) chunk_loss = add(chunk_loss, losses[k]);
            const double value = chunk_loss.item();
            if (!std::isfinite(value)) {
                result.aborted = true;
                result.diagnostic = "non-finite training loss at epoch " + std::to_string(epoch) + ", day " +
                                    panel.calendar[days[first]];
                return result;
            }
            loss_sum += value;
            lr = one_cycle_lr(step++, total_steps, tc.max_lr);
            if (tape.registry().empty()) continue;
            const ParameterMap grads = backward(tape, chunk_loss);
            adam.step(flat, grads, lr);
            assign_from(params, flat);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(days.size());
        rec.valid_loss = evaluate_model(ctx, params, panel.split.valid, tc.lookback, tc.alpha).mean_loss;
        rec.lr = lr;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.log.push_back(rec);
        if (on_epoch) on_epoch(rec);
        if (!std::isfinite(rec.valid_loss)) {
            result.aborted = true;
            result.diagnostic = "non-finite validation loss at epoch " + std::to_string(epoch);
            return result;
        }
        if (rec.valid_loss < result.best_valid) {
            result.best_valid = rec.valid_loss;
            result.best = params;
            result.best_epoch = epoch;
            since_best = 0;
        } else if (tc.patience > 0 && ++since_best >= tc.patience) {
            break;
        }
    }
    return result;
}

Predictions evaluate_model(const RunContext& ctx, const ModelParams& params, const Segment& segment,
                           std::size_t lookback, double alpha,
                           const std::function<void(std::size_t, const DayOutput&)>& on_day) {
    const PricePanel& panel = *ctx.panel;
    const std::size_t n = panel.n_stocks();
    if (ctx.model.n_stocks != n) {
        throw DataError("model expects " + std::to_string(ctx.model.n_stocks) + " stocks, panel has " +
                        std::to_string(n));
    }
    const RealizedGraph* prior = ctx.prior ? &*ctx.prior : nullptr;
    const auto days = target_days(panel, {0, segment.end}, lookback);
    Predictions preds;
    std::vector<double> scores, targets;
    double loss_sum = 0.0;
    TplState state = ctx.init;
    for (std::size_t day : days) {
        const LookbackWindow w = lookback_window(panel, day, lookback);
        const DayOutput out = forward_day(ctx.model, params, w.x, state, prior);
        if (!segment.contains(day)) continue;
        preds.days.push_back(day);
        scores.insert(scores.end(), out.scores.data().begin(), out.scores.data().end());
        targets.insert(targets.end(), w.target.data().begin(), w.target.data().end());
        loss_sum += ranking_loss(out.scores, w.target, alpha).item();
        if (on_day) on_day(day, out);
    }
    preds.scores = Tensor({preds.days.size(), n}, std::move(scores));
    preds.targets = Tensor({preds.days.size(), n}, std::move(targets));
    preds.mean_loss = preds.days.empty() ? std::numeric_limits<double>::quiet_NaN()
                                         : loss_sum / static_cast<double>(preds.days.size());
    return preds;
}

}  // namespace gapnet
