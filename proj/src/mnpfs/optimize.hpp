/*
 * Copyright 2026 The mnpfs Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MNPFS_OPTIMIZE_HPP_
#define MNPFS_OPTIMIZE_HPP_

#include <functional>
#include <span>
#include <vector>

namespace mnpfs {

struct NelderMeadOptions {
  int max_evaluations = 2000;
  double f_tolerance = 1e-10;  // spread of simplex values
  double x_tolerance = 1e-7;   // largest vertex distance from the best vertex
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int evaluations = 0;
  bool converged = false;
};

// Derivative-free simplex minimization (Nelder-Mead with the standard
// reflection/expansion/contraction/shrink coefficients). The initial
// simplex is x0 plus one step along each axis.
NelderMeadResult NelderMead(const std::function<double(std::span<const double>)>& f,
                            std::vector<double> x0, std::span<const double> step,
                            const NelderMeadOptions& options = {});

}  // namespace mnpfs

#endif  // MNPFS_OPTIMIZE_HPP_
