#include "pim/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace pim {

namespace {

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

bool all_grads_finite(const NamedParams& params) {
  for (const auto& [name, p] : params) {
    if (!p.has_grad()) throw std::logic_error("parameter '" + name + "' has no gradient");
    for (double g : p.grad()) {
      if (!std::isfinite(g)) return false;
    }
  }
  return true;
}

void save_buffers(ArrayStore& store, const std::string& prefix, const NamedParams& params,
                  const std::vector<std::vector<double>>& buffers) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    store.put(prefix + params[i].first, params[i].second.shape(), buffers[i]);
  }
}

void load_buffers(const ArrayStore& store, const std::string& prefix, const NamedParams& params,
                  std::vector<std::vector<double>>& buffers) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    buffers[i] = store.data(prefix + params[i].first);
    if (buffers[i].size() != params[i].second.size()) {
      throw std::runtime_error("optimizer state '" + prefix + params[i].first + "' has wrong size");
    }
  }
}

} // namespace

void LionConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("lion alpha must be in (0,1)");
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("lion beta must be in (0,1)");
  if (!(gamma >= 0.0)) throw std::invalid_argument("lion gamma must be >= 0");
  if (!(delta > 0.0)) throw std::invalid_argument("lion delta must be > 0");
}

Lion::Lion(const NamedParams& params, LionConfig config) : config_(config), params_(params) {
  config_.validate();
  momentum_.reserve(params_.size());
  for (const auto& [name, p] : params_) momentum_.emplace_back(p.size(), 0.0);
}

bool Lion::step() {
  if (!all_grads_finite(params_)) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& w = params_[i].second.mutable_data();
    const auto& g = params_[i].second.grad();
    auto& mu = momentum_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double c = config_.alpha * mu[j] + (1.0 - config_.alpha) * g[j];
      w[j] -= config_.delta * (sign_of(c) + config_.gamma * w[j]);
      mu[j] = config_.beta * mu[j] + (1.0 - config_.beta) * g[j];
    }
  }
  return true;
}

void Lion::save(ArrayStore& store, const std::string& prefix) const {
  save_buffers(store, prefix, params_, momentum_);
}

void Lion::load(const ArrayStore& store, const std::string& prefix) {
  load_buffers(store, prefix, params_, momentum_);
}

void SgdConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("sgd lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("sgd momentum must be in [0,1)");
}

Sgd::Sgd(const NamedParams& params, SgdConfig config) : config_(config), params_(params) {
  config_.validate();
  velocity_.reserve(params_.size());
  for (const auto& [name, p] : params_) velocity_.emplace_back(p.size(), 0.0);
}

bool Sgd::step() {
  if (!all_grads_finite(params_)) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& w = params_[i].second.mutable_data();
    const auto& g = params_[i].second.grad();
    auto& v = velocity_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = config_.momentum * v[j] + g[j];
      w[j] -= config_.lr * v[j];
    }
  }
  return true;
}

void Sgd::save(ArrayStore& store, const std::string& prefix) const {
  save_buffers(store, prefix, params_, velocity_);
}

void Sgd::load(const ArrayStore& store, const std::string& prefix) {
  load_buffers(store, prefix, params_, velocity_);
}

void AdamWConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("adamw lr must be > 0");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw std::invalid_argument("adamw beta1 must be in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw std::invalid_argument("adamw beta2 must be in (0,1)");
  if (!(eps > 0.0)) throw std::invalid_argument("adamw eps must be > 0");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("adamw weight decay must be >= 0");
}

AdamW::AdamW(const NamedParams& params, AdamWConfig config) : config_(config), params_(params) {
  config_.validate();
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const auto& [name, p] : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

bool AdamW::step() {
  if (!all_grads_finite(params_)) return false;
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& w = params_[i].second.mutable_data();
    const auto& g = params_[i].second.grad();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m_[i][j] = config_.beta1 * m_[i][j] + (1.0 - config_.beta1) * g[j];
      v_[i][j] = config_.beta2 * v_[i][j] + (1.0 - config_.beta2) * g[j] * g[j];
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      w[j] -= config_.lr * (mhat / (std::sqrt(vhat) + config_.eps) + config_.weight_decay * w[j]);
    }
  }
  return true;
}

void AdamW::save(ArrayStore& store, const std::string& prefix) const {
  save_buffers(store, prefix + "m.", params_, m_);
  save_buffers(store, prefix + "v.", params_, v_);
  store.put(prefix + "t", {1}, {static_cast<double>(t_)});
}

void AdamW::load(const ArrayStore& store, const std::string& prefix) {
  load_buffers(store, prefix + "m.", params_, m_);
  load_buffers(store, prefix + "v.", params_, v_);
  t_ = static_cast<std::size_t>(store.data(prefix + "t")[0]);
}

} // namespace pim
