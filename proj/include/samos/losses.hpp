#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "samos/common.hpp"

namespace samos {

struct LossConfig {
    double alpha = 0.1;  // contrastive margin
    double beta = 1.0;   // clipped-loss weight
    double gamma = 0.5;  // contrastive weight
    double tau = 0.25;   // clipping threshold

    void validate() const {
        if (alpha <= 0.0) throw ConfigError("loss.alpha must be > 0");
        if (tau < 0.0) throw ConfigError("loss.tau must be >= 0");
        if (beta < 0.0 || gamma < 0.0) throw ConfigError("loss.beta/gamma must be >= 0");
    }
};

// L = max(0, |d - d_hat| - alpha), d the labeled score difference between
// two sentences and d_hat the predicted difference.
inline double contrastive_loss(double d, double d_hat, double alpha) {
    return std::max(0.0, std::abs(d - d_hat) - alpha);
}

// dL/dd_hat; subgradient 0 at the kinks.
inline double contrastive_loss_grad(double d, double d_hat, double alpha) {
    double diff = d - d_hat;
    if (std::abs(diff) - alpha <= 0.0) return 0.0;
    return diff > 0.0 ? -1.0 : 1.0;
}

// L = I(|y - y_hat| > tau) (y - y_hat)^2; indicator is strict.
inline double clipped_loss(double y, double y_hat, double tau) {
    double e = y - y_hat;
    return std::abs(e) > tau ? e * e : 0.0;
}

inline double clipped_loss_grad(double y, double y_hat, double tau) {
    double e = y - y_hat;
    return std::abs(e) > tau ? -2.0 * e : 0.0;
}

// Combined regression loss over a minibatch: beta * mean clipped loss +
// gamma * mean contrastive loss over all unordered within-batch pairs
// (zero when the batch has a single sample).
inline double regression_batch_loss(const std::vector<std::pair<double, double>>& batch,
                                    const LossConfig& cfg) {
    if (batch.empty()) throw InputError("regression_batch_loss: empty batch");
    size_t n = batch.size();
    double clip = 0.0;
    for (const auto& [y, yh] : batch) clip += clipped_loss(y, yh, cfg.tau);
    clip /= double(n);
    double con = 0.0;
    if (n > 1) {
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j) {
                double d = batch[i].first - batch[j].first;
                double dh = batch[i].second - batch[j].second;
                con += contrastive_loss(d, dh, cfg.alpha);
            }
        con /= double(n * (n - 1) / 2);
    }
    return cfg.beta * clip + cfg.gamma * con;
}

// Gradient of regression_batch_loss with respect to each prediction.
inline std::vector<double> regression_batch_loss_grad(
    const std::vector<std::pair<double, double>>& batch, const LossConfig& cfg) {
    if (batch.empty()) throw InputError("regression_batch_loss: empty batch");
    size_t n = batch.size();
    std::vector<double> g(n, 0.0);
    for (size_t i = 0; i < n; ++i)
        g[i] = cfg.beta * clipped_loss_grad(batch[i].first, batch[i].second, cfg.tau) / double(n);
    if (n > 1) {
        double pairs = double(n * (n - 1) / 2);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j) {
                double d = batch[i].first - batch[j].first;
                double dh = batch[i].second - batch[j].second;
                // d_hat = yh_i - yh_j, so dL/dyh_i = gc and dL/dyh_j = -gc.
                double gc = contrastive_loss_grad(d, dh, cfg.alpha);
                g[i] += cfg.gamma * gc / pairs;
                g[j] -= cfg.gamma * gc / pairs;
            }
    }
    return g;
}

inline constexpr double kXentEps = 1e-12;

inline void check_distribution(const std::array<double, 5>& v, const char* what) {
    double sum = 0.0;
    for (double x : v) {
        if (!(x >= 0.0))
            throw ValidationError(std::string(what) + ": negative or NaN probability");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw ValidationError(std::string(what) + ": probabilities sum to " + std::to_string(sum));
}

// Cross entropy -sum target_i log(p_i + eps); supports soft targets.
inline double classification_loss(const std::array<double, 5>& p,
                                  const std::array<double, 5>& target) {
    check_distribution(p, "classification_loss p");
    check_distribution(target, "classification_loss target");
    double l = 0.0;
    for (int i = 0; i < 5; ++i) l -= target[size_t(i)] * std::log(p[size_t(i)] + kXentEps);
    return l;
}

// dL/dp_i.
inline std::array<double, 5> classification_loss_grad(const std::array<double, 5>& p,
                                                      const std::array<double, 5>& target) {
    std::array<double, 5> g{};
    for (int i = 0; i < 5; ++i) g[size_t(i)] = -target[size_t(i)] / (p[size_t(i)] + kXentEps);
    return g;
}

inline double aggregation_loss(double s, double label) { return (s - label) * (s - label); }
inline double aggregation_loss_grad(double s, double label) { return 2.0 * (s - label); }

inline double aggregation_batch_loss(const std::vector<std::pair<double, double>>& batch) {
    if (batch.empty()) throw InputError("aggregation_batch_loss: empty batch");
    double l = 0.0;
    for (const auto& [label, s] : batch) l += aggregation_loss(s, label);
    return l / double(batch.size());
}

}  // namespace samos
