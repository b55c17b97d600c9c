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

#include "mnpfs/prior.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include <boost/math/tools/roots.hpp>

#include "mnpfs/csv.hpp"
#include "mnpfs/error.hpp"
#include "mnpfs/normal.hpp"
#include "mnpfs/parallel.hpp"
#include "mnpfs/stats.hpp"

namespace mnpfs {

namespace {

constexpr std::size_t kDrawChunk = 4096;
constexpr double kBoundaryNudge = 1e-12;
constexpr const char* kPriorFileMagic = "mnpfs-prior";
constexpr int kPriorFileVersion = 1;

double SampleInverseGammaScale(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> gamma(shape, 1.0);
  return std::sqrt(rate / gamma(rng));
}

void CheckTheta(const Hyperparameters& theta) {
  Require(theta.nu > 1.0, "Inverse-Gamma shape nu must exceed 1");
  Require(theta.sigma_gamma > 0.0, "sigma_gamma must be positive");
}

}  // namespace

Vector SampleUnrestrictedPsi(const Hyperparameters& theta, std::size_t J, Rng& rng) {
  CheckTheta(theta);
  const std::size_t n = NumFreeParams(J, theta.q);
  Vector psi(static_cast<Eigen::Index>(n));
  const auto Ji = static_cast<Eigen::Index>(J);
  for (Eigen::Index j = 0; j < Ji; ++j) psi(j) = SampleInverseGammaScale(theta.nu, theta.rate(), rng);
  for (Eigen::Index l = Ji; l < psi.size(); ++l) {
    psi(l) = theta.mu_gamma + theta.sigma_gamma * StandardNormal(rng);
  }
  return psi;
}

PsiVector ProjectToSphere(const Vector& psi_ddot, double J) {
  const double norm = psi_ddot.norm();
  if (!(norm > 0.0)) Fail(ErrorCode::kDegenerate, "cannot project a zero vector onto the sphere");
  return PsiVector{psi_ddot * (std::sqrt(J) / norm)};
}

void CalibratedPrior::Validate() const {
  Require(margins.size() + 1 == NumFreeParams(J, q), "prior has the wrong number of margins for (J, q)");
  for (std::size_t l = 0; l < margins.size(); ++l) {
    const auto& m = margins[l];
    Require(m.tau > 0.0 && std::isfinite(m.mu) && std::isfinite(m.eta), "margin parameters must be finite with tau > 0");
    Require(m.upper_bound == AngleUpperBound(l, margins.size()), "margin bound must be pi, or 2 pi for the last angle");
  }
}

Matrix DrawPriorAngles(const Hyperparameters& theta, std::size_t J, std::size_t M, std::uint64_t seed,
                       std::size_t threads) {
  CheckTheta(theta);
  const std::size_t n = NumFreeParams(J, theta.q);
  Matrix draws(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(n - 1));
  const std::size_t chunks = (M + kDrawChunk - 1) / kDrawChunk;
  ParallelFor(chunks, threads, [&](std::size_t c) {
    Rng rng = MakeRng(seed, c);
    const std::size_t end = std::min(M, (c + 1) * kDrawChunk);
    for (std::size_t m = c * kDrawChunk; m < end; ++m) {
      const PsiVector psi = ProjectToSphere(SampleUnrestrictedPsi(theta, J, rng), static_cast<double>(J));
      draws.row(static_cast<Eigen::Index>(m)) = AnglesFromPsi(psi).values.transpose();
    }
  });
  return draws;
}

namespace {

struct MarginObjective {
  std::span<const double> warped;  // G(kappa) per draw

  // Negative average log density without the lambda-free log G' term.
  double operator()(std::span<const double> p) const {
    const double mu = p[0];
    const double log_tau = p[1];
    if (std::fabs(log_tau) > 30.0) return std::numeric_limits<double>::infinity();
    const double eta = std::clamp(p[2], 0.0, 2.0);
    const FlexibleMargin m{mu, std::exp(log_tau), eta, 1.0};
    double sum = 0.0;
    for (double g : warped) sum += FlexibleLogPdfWarped(g, m);
    return -sum / static_cast<double>(warped.size());
  }
};

}  // namespace

MarginFit FitMargin(std::span<const double> draws, double upper_bound, const CalibrationOptions& options,
                    Rng& rng) {
  Require(draws.size() >= 2, "need at least two draws to fit a margin");
  std::vector<double> warped(draws.size());
  double log_jacobian = 0.0;
  const double lo = kBoundaryNudge;
  const double hi = upper_bound - kBoundaryNudge;
  for (std::size_t m = 0; m < draws.size(); ++m) {
    const double k = std::clamp(draws[m], lo, hi);
    warped[m] = AngleWarp(k, upper_bound);
    log_jacobian += -std::log(upper_bound) - NormalLogPdf(warped[m]);
  }
  log_jacobian /= static_cast<double>(draws.size());

  const double g_mean = Mean(warped);
  const double g_sd = std::sqrt(std::max(SampleVariance(warped), 1e-12));
  const std::vector<double> init{g_mean, std::log(g_sd), 1.0};
  const std::vector<double> step{0.5 * g_sd, 0.3, 0.5};

  std::span<const double> sub(warped);
  std::vector<double> subsample;
  if (warped.size() > options.restart_subsample && options.restart_subsample > 0) {
    // Evenly strided subsample; draws are iid so any fixed subset works.
    const std::size_t stride = warped.size() / options.restart_subsample;
    for (std::size_t m = 0; m < options.restart_subsample; ++m) subsample.push_back(warped[m * stride]);
    sub = subsample;
  }

  const MarginObjective coarse{sub};
  NelderMeadResult best = NelderMead(coarse, init, step, options.optimizer);
  std::normal_distribution<double> jitter;
  std::uniform_real_distribution<double> eta_start(0.0, 2.0);
  for (int r = 0; r < options.restarts; ++r) {
    std::vector<double> x0{g_mean + 0.5 * g_sd * jitter(rng), std::log(g_sd) + 0.3 * jitter(rng), eta_start(rng)};
    NelderMeadResult trial = NelderMead(coarse, x0, step, options.optimizer);
    if (trial.value < best.value || (!best.converged && trial.converged)) best = trial;
  }

  const MarginObjective full{warped};
  NelderMeadResult polished = best;
  if (sub.size() != warped.size()) {
    const std::vector<double> small_step{0.05 * g_sd, 0.05, 0.05};
    polished = NelderMead(full, best.x, small_step, options.optimizer);
  }

  MarginFit fit;
  fit.margin = FlexibleMargin{polished.x[0], std::exp(polished.x[1]), std::clamp(polished.x[2], 0.0, 2.0),
                              upper_bound};
  fit.avg_loglik = -polished.value + log_jacobian;
  fit.converged = polished.converged && std::isfinite(polished.value);
  return fit;
}

CalibratedPrior CalibratePrior(const Hyperparameters& theta, std::size_t J, const CalibrationOptions& options) {
  Require(options.M >= 2, "calibration needs at least two draws");
  const Matrix draws = DrawPriorAngles(theta, J, options.M, options.seed, options.threads);
  const std::size_t count = static_cast<std::size_t>(draws.cols());

  CalibratedPrior prior;
  prior.J = J;
  prior.q = theta.q;
  prior.theta = theta;
  prior.M = options.M;
  prior.seed = options.seed;
  prior.margins.resize(count);
  prior.avg_loglik.resize(count);
  prior.ks_distance.resize(count);
  std::vector<char> converged(count, 0);

  ParallelFor(count, options.threads, [&](std::size_t l) {
    // Stream ids above the draw chunks keep the fits independent of them.
    Rng rng = MakeRng(options.seed, (std::uint64_t{1} << 40) + l);
    const auto column = draws.col(static_cast<Eigen::Index>(l));
    const std::span<const double> kappa(column.data(), static_cast<std::size_t>(column.size()));
    const MarginFit fit = FitMargin(kappa, AngleUpperBound(l, count), options, rng);
    prior.margins[l] = fit.margin;
    prior.avg_loglik[l] = fit.avg_loglik;
    converged[l] = fit.converged ? 1 : 0;

    const std::size_t refit = std::min(options.ks_draws, options.M);
    std::vector<double> regenerated(refit);
    for (double& v : regenerated) v = SampleFlexible(fit.margin, rng);
    prior.ks_distance[l] = KsDistance(std::move(regenerated), std::vector<double>(kappa.begin(), kappa.end()));
  });

  for (std::size_t l = 0; l < count; ++l) {
    if (!converged[l]) {
      Fail(ErrorCode::kConvergence, "prior calibration did not converge for margin " + std::to_string(l + 1));
    }
  }
  return prior;
}

CalibratedPrior UniformAnglePrior(std::size_t J, std::size_t q) {
  CalibratedPrior prior;
  prior.J = J;
  prior.q = q;
  prior.theta.q = q;
  const std::size_t count = NumFreeParams(J, q) - 1;
  for (std::size_t l = 0; l < count; ++l) prior.margins.push_back({0.0, 1.0, 1.0, AngleUpperBound(l, count)});
  return prior;
}

AngleVector SampleCalibratedAngles(const CalibratedPrior& prior, Rng& rng) {
  AngleVector kappa{Vector(static_cast<Eigen::Index>(prior.num_angles()))};
  for (std::size_t l = 0; l < prior.num_angles(); ++l) {
    kappa.values(static_cast<Eigen::Index>(l)) = SampleFlexible(prior.margins[l], rng);
  }
  return kappa;
}

double LogPriorKappa(const AngleVector& kappa, const CalibratedPrior& prior) {
  if (kappa.size() != prior.num_angles()) {
    Fail(ErrorCode::kInvalidArgument, "angle vector has " + std::to_string(kappa.size()) + " entries, prior has " +
                                          std::to_string(prior.num_angles()) + " margins");
  }
  double total = 0.0;
  for (std::size_t l = 0; l < prior.num_angles(); ++l) {
    const double k = kappa.values(static_cast<Eigen::Index>(l));
    if (!(k >= 0.0 && k < prior.margins[l].upper_bound)) {
      Fail(ErrorCode::kInvalidArgument, "angle " + std::to_string(l + 1) + " outside its domain");
    }
    total += FlexibleLogPdf(k, prior.margins[l]);
  }
  return total;
}

namespace {

// Common random numbers for the correlation between rows q and q+1
// (1-based), the first two rows carrying all q loadings.
struct CorrelationDraws {
  Matrix z;       // draws x 2q standard normals
  Matrix d2;      // draws x 2 squared idiosyncratic scales

  double MeanCorrelation(double mu, double sigma) const {
    const Eigen::Index q = z.cols() / 2;
    double sum = 0.0;
    for (Eigen::Index m = 0; m < z.rows(); ++m) {
      double cross = 0.0, a = d2(m, 0), b = d2(m, 1);
      for (Eigen::Index k = 0; k < q; ++k) {
        const double gi = mu + sigma * z(m, k);
        const double gj = mu + sigma * z(m, q + k);
        cross += gi * gj;
        a += gi * gi;
        b += gj * gj;
      }
      sum += cross / std::sqrt(a * b);
    }
    return sum / static_cast<double>(z.rows());
  }
};

CorrelationDraws MakeCorrelationDraws(double nu, std::size_t q, std::size_t draws, std::uint64_t seed) {
  Require(nu > 1.0, "Inverse-Gamma shape nu must exceed 1");
  Require(q >= 1 && draws >= 1, "need q >= 1 and at least one draw");
  Rng rng = MakeRng(seed, 0xc0ffee);
  CorrelationDraws out{Matrix(static_cast<Eigen::Index>(draws), static_cast<Eigen::Index>(2 * q)),
                       Matrix(static_cast<Eigen::Index>(draws), 2)};
  for (Eigen::Index m = 0; m < out.z.rows(); ++m) {
    for (Eigen::Index k = 0; k < out.z.cols(); ++k) out.z(m, k) = StandardNormal(rng);
    for (Eigen::Index k = 0; k < 2; ++k) {
      const double d = SampleInverseGammaScale(nu, nu - 1.0, rng);
      out.d2(m, k) = d * d;
    }
  }
  return out;
}

}  // namespace

double MeanPriorCorrelation(double mu_gamma, double sigma_gamma, double nu, std::size_t q, std::size_t draws,
                            std::uint64_t seed) {
  return MakeCorrelationDraws(nu, q, draws, seed).MeanCorrelation(mu_gamma, sigma_gamma);
}

double SolveEquicorrelatedMu(double sigma_gamma, double nu, std::size_t q, std::size_t draws, std::uint64_t seed) {
  Require(sigma_gamma > 0.0, "sigma_gamma must be positive");
  const CorrelationDraws crn = MakeCorrelationDraws(nu, q, draws, seed);
  auto f = [&](double mu) { return crn.MeanCorrelation(mu, sigma_gamma) - 0.5; };
  double lo = 0.0;
  double hi = 1.0;
  double f_lo = f(lo);
  double f_hi = f(hi);
  if (f_lo >= 0.0) return 0.0;
  while (f_hi < 0.0) {
    lo = hi;
    f_lo = f_hi;
    hi *= 2.0;
    if (hi > 1e4) Fail(ErrorCode::kConvergence, "could not bracket the equicorrelated mu_gamma");
    f_hi = f(hi);
  }
  std::uintmax_t iterations = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi,
                                                        boost::math::tools::eps_tolerance<double>(40), iterations);
  return 0.5 * (a + b);
}

void SavePrior(const CalibratedPrior& prior, const std::filesystem::path& path) {
  prior.Validate();
  std::ofstream out(path);
  if (!out) Fail(ErrorCode::kIo, "cannot write " + path.string());
  out << "# " << kPriorFileMagic << " " << kPriorFileVersion << '\n';
  out << "# J=" << prior.J << " q=" << prior.q << " mu_gamma=" << csv::FormatDouble(prior.theta.mu_gamma)
      << " sigma_gamma=" << csv::FormatDouble(prior.theta.sigma_gamma) << " nu=" << csv::FormatDouble(prior.theta.nu)
      << " M=" << prior.M << " seed=" << prior.seed << '\n';
  out << "l,mu,tau,eta,bound\n";
  for (std::size_t l = 0; l < prior.margins.size(); ++l) {
    const auto& m = prior.margins[l];
    out << (l + 1) << ',' << csv::FormatDouble(m.mu) << ',' << csv::FormatDouble(m.tau) << ','
        << csv::FormatDouble(m.eta) << ',' << csv::FormatDouble(m.upper_bound) << '\n';
  }
  if (!out) Fail(ErrorCode::kIo, "error writing " + path.string());
}

CalibratedPrior LoadPrior(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, "cannot open prior file " + path.string());
  std::string line;
  std::getline(in, line);
  {
    std::istringstream head(line);
    std::string hash, magic;
    int version = 0;
    head >> hash >> magic >> version;
    if (hash != "#" || magic != kPriorFileMagic) Fail(ErrorCode::kParse, path.string() + ": not a prior file");
    if (version != kPriorFileVersion) {
      Fail(ErrorCode::kParse, path.string() + ": unsupported prior file version " + std::to_string(version));
    }
  }
  CalibratedPrior prior;
  std::getline(in, line);
  {
    std::istringstream meta(line.size() > 1 ? line.substr(1) : std::string());
    std::string token;
    while (meta >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      if (key == "J") prior.J = static_cast<std::size_t>(csv::ParseInt(value, key));
      else if (key == "q") prior.theta.q = prior.q = static_cast<std::size_t>(csv::ParseInt(value, key));
      else if (key == "mu_gamma") prior.theta.mu_gamma = csv::ParseDouble(value, key);
      else if (key == "sigma_gamma") prior.theta.sigma_gamma = csv::ParseDouble(value, key);
      else if (key == "nu") prior.theta.nu = csv::ParseDouble(value, key);
      else if (key == "M") prior.M = static_cast<std::size_t>(csv::ParseInt(value, key));
      else if (key == "seed") prior.seed = static_cast<std::uint64_t>(std::stoull(value));
    }
  }
  std::getline(in, line);
  if (line.rfind("l,mu,tau,eta,bound", 0) != 0) Fail(ErrorCode::kParse, path.string() + ": missing margin header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = csv::SplitLine(line);
    if (f.size() != 5) Fail(ErrorCode::kParse, path.string() + ": margin line needs 5 fields");
    if (static_cast<std::size_t>(csv::ParseInt(f[0], "l")) != prior.margins.size() + 1) {
      Fail(ErrorCode::kParse, path.string() + ": margins out of order");
    }
    prior.margins.push_back({csv::ParseDouble(f[1], "mu"), csv::ParseDouble(f[2], "tau"),
                             csv::ParseDouble(f[3], "eta"), csv::ParseDouble(f[4], "bound")});
  }
  try {
    prior.Validate();
  } catch (const Error& e) {
    Fail(ErrorCode::kParse, path.string() + ": " + e.what());
  }
  return prior;
}

std::filesystem::path PriorCachePath(const std::filesystem::path& dir, const Hyperparameters& theta,
                                     std::size_t J, std::size_t M, std::uint64_t seed) {
  std::ostringstream name;
  name << "prior_J" << J << "_q" << theta.q << "_mu" << csv::FormatDouble(theta.mu_gamma) << "_sg"
       << csv::FormatDouble(theta.sigma_gamma) << "_nu" << csv::FormatDouble(theta.nu) << "_M" << M << "_s" << seed
       << ".txt";
  return dir / name.str();
}

CalibratedPrior LoadOrCalibratePrior(const std::filesystem::path& cache_dir, const Hyperparameters& theta,
                                     std::size_t J, const CalibrationOptions& options) {
  const auto path = PriorCachePath(cache_dir, theta, J, options.M, options.seed);
  if (std::filesystem::exists(path)) return LoadPrior(path);
  CalibratedPrior prior = CalibratePrior(theta, J, options);
  std::filesystem::create_directories(cache_dir);
  // Write then rename so concurrent runs never read a partial file.
  const auto tmp = path.string() + ".tmp" + std::to_string(options.seed);
  SavePrior(prior, tmp);
  std::filesystem::rename(tmp, path);
  return prior;
}

}  // namespace mnpfs
