// Copyright 2026 The recapture Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recapture/em.hpp"
#include "recapture/population.hpp"

namespace recap {

/// Frequencies f_j of subjects captured exactly j times (f[0] is f_1).
struct CountSummary {
  std::vector<long long> f;

  long long n() const;  // observed subjects
  long long K() const;  // total captures
  static CountSummary from_dataset(const Dataset& data);
};

struct ChaoEstimate {
  double N_hat = 0.0;
  double se = 0.0;
  std::string formula;  // which estimator/variance pair was used
};

/// Lower bound n + f1^2 / (2 f2); bias-corrected n + f1 (f1 - 1) / 2 when f2 = 0.
ChaoEstimate chao_lower_bound(const CountSummary& counts);

struct M0Estimate {
  double N_hat = 0.0;
  double mu_hat = 0.0;  // Omega(tau) under a homogeneous Poisson capture process
};

/// Zero-truncated Poisson MLE: (1 - e^{-mu}) / mu = n / K, N_hat = K / mu.
M0Estimate m0_closed_form(const CountSummary& counts);

/// Fits one member of the h/o/t/b lattice.
FitResult fit_submodel(const Dataset& data, std::string_view model_name,
                       const BehaviorSpec& window, const EmConfig& cfg);

struct GridRow {
  BehaviorSpec window;
  bool identifiable = false;
  std::string diagnostic;
  bool fitted = false;
  double loglik = 0.0;
  double delta_loglik = 0.0;  // loglik - loglik(first fitted row)
  double N_hat = 0.0;
  bool converged = false;
  std::string error;
};

struct GridResult {
  std::string model;
  std::vector<GridRow> rows;
  std::optional<std::size_t> best;  // max loglik among converged rows
};

/// Fits `base` for every (c1, c2, delta_b) with c1 < c2. Cells failing the
/// identifiability check are recorded but not fitted. Cells run on up to
/// cfg.threads workers; each fit itself is single-threaded.
GridResult grid_search(const Dataset& data, const ModelSpec& base, std::span<const int> c1_set,
                       std::span<const int> c2_set, std::span<const double> delta_set,
                       const EmConfig& cfg);

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// 2 (loglik_full - loglik_nested) against chi-square(df). Small negative
/// differences (|.| <= 1e-6 |loglik|) are treated as 0; larger ones throw.
TestResult lrt(double loglik_full, double loglik_nested, int df);
TestResult lrt(const FitResult& full, const FitResult& nested, int df);

/// (estimate - null) / se with a two-sided normal p-value.
TestResult wald_test(double estimate, double se, double null_value = 0.0);
/// Coordinate j of a fit; phi is tested against 1, everything else against 0.
TestResult wald_test(const FitResult& fit, std::size_t coordinate);

/// Number of free parameters (coordinates plus alpha when the frailty is on,
/// plus the baseline jumps beyond the first when the baseline is free).
int parameter_count(const FitResult& fit, std::size_t events);

}  // namespace recap
