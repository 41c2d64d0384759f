#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "l2g/tensor.hpp"

namespace l2g {

// A differentiable function of some inputs. The checker differentiates
// sum(fn(inputs) * R) for a fixed random R of the output's shape.
struct GradCase {
  std::string name;
  std::vector<Tensor> inputs;  // every input is checked
  std::function<Tensor(const std::vector<Tensor>&)> fn;
};

struct GradCheckEntry {
  std::string name;
  // max |analytic - numeric| / max(|analytic|, |numeric|) over all input
  // elements, the denominator taken as a max over the whole case.
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  bool passed = false;
  std::string note;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double step = 1e-5;
  double tolerance = 1e-4;
  bool passed() const;
};

// Every registered op and loss, one case each, built from `seed`.
std::vector<GradCase> grad_cases(std::uint64_t seed = 7);

// Central differences with step h. `corrupt` scales the analytic gradient
// by 1.01 before comparing (negative control).
GradCheckEntry check_case(const GradCase& c, double h, double tolerance, bool corrupt = false);

// The transfer loss must leave every local-network parameter without
// gradient (or with an exactly zero one).
GradCheckEntry check_transfer_isolation(std::uint64_t seed = 7);

GradCheckReport run_grad_check(double h = 1e-5, double tolerance = 1e-4);

std::string format_report(const GradCheckReport& report);

}  // namespace l2g
