#ifndef PIM_TESTS_FD_CHECK_HPP
#define PIM_TESTS_FD_CHECK_HPP

// Central finite-difference gradient oracle. Independent of the tape: the
// numeric side re-evaluates the forward closure on perturbed copies with no
// tape active, so it cannot share a code path with reverse-mode backward.

#include <cmath>
#include <cstddef>
#include <vector>

#include "pim/tensor.hpp"

namespace fd {

struct Report {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_small = 0; // |analytic| below floor
};

// forward: (const std::vector<pim::Tensor>&) -> pim::Tensor (scalar)
template <typename Fn>
Report check_gradients(const std::vector<pim::Tensor>& leaf_templates, Fn forward,
                       double step = 1e-5, double abs_floor = 1e-6) {
  // Analytic pass: fresh leaves marked requires_grad, one tape, one backward.
  std::vector<pim::Tensor> leaves;
  leaves.reserve(leaf_templates.size());
  for (const auto& t : leaf_templates) {
    leaves.push_back(pim::Tensor::from_data(t.shape(), t.data(), true));
  }
  std::vector<std::vector<double>> analytic(leaves.size());
  {
    pim::Tape tape;
    pim::Tensor loss = forward(leaves);
    tape.backward(loss);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      analytic[i] = leaves[i].has_grad() ? leaves[i].grad()
                                         : std::vector<double>(leaves[i].size(), 0.0);
    }
  }

  auto eval = [&](const std::vector<pim::Tensor>& xs) {
    return forward(xs).item();
  };

  Report report;
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    for (std::size_t j = 0; j < leaf_templates[i].size(); ++j) {
      std::vector<pim::Tensor> probe;
      probe.reserve(leaves.size());
      for (const auto& t : leaf_templates) {
        probe.push_back(pim::Tensor::from_data(t.shape(), t.data(), false));
      }
      probe[i].mutable_data()[j] += step;
      const double fp = eval(probe);
      probe[i].mutable_data()[j] -= 2.0 * step;
      const double fm = eval(probe);
      const double numeric = (fp - fm) / (2.0 * step);
      const double a = analytic[i][j];
      if (std::fabs(a) <= abs_floor) {
        ++report.skipped_small;
        continue;
      }
      const double rel = std::fabs(numeric - a) / std::fabs(a);
      if (rel > report.max_rel_err) report.max_rel_err = rel;
      ++report.checked;
    }
  }
  return report;
}

} // namespace fd

#endif
