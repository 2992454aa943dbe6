#ifndef PIM_OPTIM_HPP
#define PIM_OPTIM_HPP

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "pim/checkpoint.hpp"
#include "pim/tensor.hpp"

namespace pim {

using NamedParams = std::vector<std::pair<std::string, Tensor>>;

// Sign-momentum optimizer. Per step, with pre-update momentum mu and
// parameters w:
//   c  = alpha * mu + (1 - alpha) * g
//   w <- w - delta * (sign(c) + gamma * w)
//   mu <- beta * mu + (1 - beta) * g
// exactly in that order. One momentum buffer per parameter, zero-initialized.
struct LionConfig {
  double alpha = 0.9;  // update interpolation, in (0,1)
  double beta = 0.99;  // momentum retention, in (0,1)
  double gamma = 0.0;  // decoupled weight decay, >= 0
  double delta = 5e-6; // learning rate, > 0

  void validate() const;
};

class Lion {
public:
  Lion() = default;
  Lion(const NamedParams& params, LionConfig config);

  // Applies one update using each parameter's populated gradient. Any
  // non-finite gradient rejects the whole step; parameters and momentum are
  // left untouched and false is returned.
  bool step();

  const LionConfig& config() const { return config_; }
  const std::vector<std::vector<double>>& momentum() const { return momentum_; }

  void save(ArrayStore& store, const std::string& prefix) const;
  void load(const ArrayStore& store, const std::string& prefix);

private:
  LionConfig config_;
  NamedParams params_;
  std::vector<std::vector<double>> momentum_; // exactly one buffer per parameter
};

struct SgdConfig {
  double lr = 5e-4;
  double momentum = 0.0; // heavy-ball: v <- m*v + g, w <- w - lr*v

  void validate() const;
};

class Sgd {
public:
  Sgd() = default;
  Sgd(const NamedParams& params, SgdConfig config);
  bool step();

  void save(ArrayStore& store, const std::string& prefix) const;
  void load(const ArrayStore& store, const std::string& prefix);

private:
  SgdConfig config_;
  NamedParams params_;
  std::vector<std::vector<double>> velocity_;
};

struct AdamWConfig {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0; // decoupled: w <- w - lr*wd*w

  void validate() const;
};

class AdamW {
public:
  AdamW() = default;
  AdamW(const NamedParams& params, AdamWConfig config);
  bool step();

  void save(ArrayStore& store, const std::string& prefix) const;
  void load(const ArrayStore& store, const std::string& prefix);

private:
  AdamWConfig config_;
  NamedParams params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

} // namespace pim

#endif
