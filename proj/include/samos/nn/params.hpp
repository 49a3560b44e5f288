#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "samos/common.hpp"

namespace samos::nn {

// A named trainable (or permanently frozen) tensor. `group` is the unit of
// freezing in the stage schedule.
struct Parameter {
    std::string name;
    std::string group;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;

    void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class ParameterStore {
  public:
    Parameter& create(const std::string& name, const std::string& group, int rows, int cols) {
        if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
        auto p = std::make_unique<Parameter>();
        p->name = name;
        p->group = group;
        p->value.setZero(rows, cols);
        p->grad.setZero(rows, cols);
        index_[name] = params_.size();
        params_.push_back(std::move(p));
        return *params_.back();
    }

    Parameter& at(const std::string& name) {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
        return *params_[it->second];
    }
    const Parameter& at(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
        return *params_[it->second];
    }

    bool has(const std::string& name) const { return index_.count(name) != 0; }

    std::vector<Parameter*> all() {
        std::vector<Parameter*> out;
        for (auto& p : params_) out.push_back(p.get());
        return out;
    }
    std::vector<const Parameter*> all() const {
        std::vector<const Parameter*> out;
        for (auto& p : params_) out.push_back(p.get());
        return out;
    }

    void zero_grads() {
        for (auto& p : params_) p->zero_grad();
    }

    // Plain SGD on every parameter whose group is not frozen.
    void sgd_step(double lr, const std::set<std::string>& frozen_groups) {
        for (auto& p : params_)
            if (!frozen_groups.count(p->group)) p->value -= lr * p->grad;
    }

  private:
    std::vector<std::unique_ptr<Parameter>> params_;
    std::map<std::string, size_t> index_;
};

// Uniform(-a, a) with a = 1/sqrt(fan_in); deterministic given the rng state.
inline void init_uniform(Parameter& p, std::mt19937_64& rng, int fan_in) {
    double a = 1.0 / std::sqrt(double(fan_in > 0 ? fan_in : 1));
    std::uniform_real_distribution<double> dist(-a, a);
    for (int i = 0; i < p.value.rows(); ++i)
        for (int j = 0; j < p.value.cols(); ++j) p.value(i, j) = dist(rng);
}

inline void init_gaussian(Eigen::MatrixXd& m, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) m(i, j) = dist(rng);
}

}  // namespace samos::nn
