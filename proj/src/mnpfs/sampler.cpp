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

#include "mnpfs/sampler.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "mnpfs/csv.hpp"
#include "mnpfs/error.hpp"
#include "mnpfs/normal.hpp"
#include "mnpfs/truncated_normal.hpp"

namespace mnpfs {

namespace {

constexpr double kTraceTolerance = 1e-10;
constexpr std::size_t kStreamFlushInterval = 1000;

}  // namespace

std::string VariantName(ModelVariant variant) {
  return variant == ModelVariant::kFactor ? "mnp-fs" : "mnp-i";
}

ModelVariant ParseVariant(const std::string& name) {
  if (name == "mnp-fs" || name == "MNP-FS") return ModelVariant::kFactor;
  if (name == "mnp-i" || name == "MNP-I") return ModelVariant::kIdentity;
  Fail(ErrorCode::kInvalidArgument, "unknown model variant '" + name + "'");
}

void SamplerConfig::Validate() const {
  Require(burn_in < total_iterations, "burn-in must be smaller than the total number of iterations");
  Require(thinning >= 1, "thinning must be at least 1");
  Require(block_size >= 1, "block size must be at least 1");
  Require(adaptation_batch >= 1, "adaptation batch must be at least 1");
  Require(beta_prior_variance > 0.0, "coefficient prior variance must be positive");
  Require(target_low < target_high, "acceptance band must be non-empty");
  Require(initial_proposal_sd > 0.0, "initial proposal scale must be positive");
}

// ---------------------------------------------------------------------------
// ChoiceModel

ChoiceModel::ChoiceModel(const ChoiceDataset& data) {
  data.Validate();
  n_ = data.N();
  j_ = data.J();
  k_ = data.K();
  k_a_ = data.k_a();
  m_ = (data.include_intercept ? 1 : 0) + data.k_d();
  choices_ = data.choices;
  const auto N = static_cast<Eigen::Index>(n_);
  const auto J = static_cast<Eigen::Index>(j_);
  const auto m = static_cast<Eigen::Index>(m_);
  const auto ka = static_cast<Eigen::Index>(k_a_);

  u_.resize(N, m);
  for (Eigen::Index i = 0; i < N; ++i) {
    Eigen::Index c = 0;
    if (data.include_intercept) u_(i, c++) = 1.0;
    for (Eigen::Index d = 0; d < static_cast<Eigen::Index>(data.k_d()); ++d) u_(i, c++) = data.indiv_covariates(i, d);
  }
  w_.resize(N * J, ka);
  for (Eigen::Index i = 0; i < N; ++i) {
    if (ka == 0) break;
    const auto block = data.AltBlock(static_cast<std::size_t>(i));
    for (Eigen::Index j = 0; j < J; ++j) w_.row(i * J + j) = block.row(j + 1) - block.row(0);
  }
  utu_ = u_.transpose() * u_;
  uw_ = Matrix::Zero(m * J, ka);
  ww_ = Matrix::Zero(ka * ka, J * J);
  for (Eigen::Index i = 0; i < N && ka > 0; ++i) {
    const auto Wi = w_.middleRows(i * J, J);
    for (Eigen::Index c = 0; c < m; ++c) uw_.middleRows(c * J, J) += u_(i, c) * Wi;
    for (Eigen::Index b = 0; b < J; ++b) {
      for (Eigen::Index a = 0; a < J; ++a) {
        for (Eigen::Index r = 0; r < ka; ++r) {
          for (Eigen::Index s = 0; s < ka; ++s) ww_(r + ka * s, a + J * b) += Wi(a, r) * Wi(b, s);
        }
      }
    }
  }
}

void ChoiceModel::SetChoices(std::vector<int> choices) {
  Require(choices.size() == n_, "choice vector has the wrong length");
  choices_ = std::move(choices);
}

Matrix ChoiceModel::CrossProduct(const Matrix& P) const {
  const auto J = static_cast<Eigen::Index>(j_);
  const auto m = static_cast<Eigen::Index>(m_);
  const auto ka = static_cast<Eigen::Index>(k_a_);
  Matrix G(static_cast<Eigen::Index>(k_), static_cast<Eigen::Index>(k_));
  for (Eigen::Index c = 0; c < m; ++c) {
    for (Eigen::Index d = 0; d < m; ++d) G.block(c * J, d * J, J, J) = utu_(c, d) * P;
  }
  if (ka > 0) {
    for (Eigen::Index c = 0; c < m; ++c) {
      const Matrix top = P * uw_.middleRows(c * J, J);
      G.block(c * J, m * J, J, ka) = top;
      G.block(m * J, c * J, ka, J) = top.transpose();
    }
    const Eigen::Map<const Vector> vecP(P.data(), J * J);
    const Vector br = ww_ * vecP;
    G.bottomRightCorner(ka, ka) = Eigen::Map<const Matrix>(br.data(), ka, ka);
  }
  return G;
}

Vector ChoiceModel::CrossProductWith(const Matrix& P, const RowMatrix& Z) const {
  const auto J = static_cast<Eigen::Index>(j_);
  const auto m = static_cast<Eigen::Index>(m_);
  const auto ka = static_cast<Eigen::Index>(k_a_);
  const RowMatrix Y = Z * P;
  Vector out(static_cast<Eigen::Index>(k_));
  const Matrix top = u_.transpose() * Y;  // m x J
  for (Eigen::Index c = 0; c < m; ++c) out.segment(c * J, J) = top.row(c).transpose();
  if (ka > 0) {
    const Eigen::Map<const Vector> y(Y.data(), Y.size());
    out.tail(ka) = w_.transpose() * y;
  }
  return out;
}

RowMatrix ChoiceModel::Means(const Vector& beta) const {
  const auto N = static_cast<Eigen::Index>(n_);
  const auto J = static_cast<Eigen::Index>(j_);
  const auto m = static_cast<Eigen::Index>(m_);
  const auto ka = static_cast<Eigen::Index>(k_a_);
  Require(beta.size() == static_cast<Eigen::Index>(k_), "coefficient vector does not match the design");
  const Eigen::Map<const Matrix> B(beta.data(), J, m);  // column c = coefficients of u_c
  RowMatrix means = u_ * B.transpose();
  if (ka > 0) {
    const Vector wb = w_ * beta.tail(ka);
    means += Eigen::Map<const RowMatrix>(wb.data(), N, J);
  }
  return means;
}

// ---------------------------------------------------------------------------
// Steps

Matrix PosteriorDraws::Sigma(std::size_t draw) const {
  if (variant == ModelVariant::kIdentity) return Matrix::Identity(static_cast<Eigen::Index>(J), static_cast<Eigen::Index>(J));
  return CovarianceFromAngles(AngleVector{kappa.row(static_cast<Eigen::Index>(draw)).transpose()}, J, q);
}

McmcState InitState(const ChoiceModel& model, const SamplerConfig& config, const CalibratedPrior* prior, Rng& rng) {
  const auto N = static_cast<Eigen::Index>(model.N());
  const auto J = static_cast<Eigen::Index>(model.J());
  McmcState state;
  state.beta = Vector::Zero(static_cast<Eigen::Index>(model.K()));
  if (config.variant == ModelVariant::kFactor) {
    if (prior == nullptr) Fail(ErrorCode::kInvalidArgument, "the factor model needs a calibrated prior");
    if (prior->J != model.J() || prior->q != config.q) {
      Fail(ErrorCode::kMismatch, "prior was calibrated for J=" + std::to_string(prior->J) + ", q=" +
                                     std::to_string(prior->q) + " but the model has J=" + std::to_string(model.J()) +
                                     ", q=" + std::to_string(config.q));
    }
    state.kappa = SampleCalibratedAngles(*prior, rng);
    state.sigma = CovarianceFromAngles(state.kappa, model.J(), config.q);
  } else {
    state.kappa = AngleVector{Vector(0)};
    state.sigma = Matrix::Identity(J, J);
  }
  const std::size_t angles = state.kappa.size();
  state.log_scales = Vector::Constant(static_cast<Eigen::Index>(angles), std::log(config.initial_proposal_sd));
  state.batch_accepted.assign(angles, 0);
  state.batch_proposed.assign(angles, 0);
  state.total_accepted.assign(angles, 0);
  state.total_proposed.assign(angles, 0);

  state.Z.resize(N, J);
  Vector z(J + 1);
  for (Eigen::Index i = 0; i < N; ++i) {
    for (Eigen::Index j = 0; j <= J; ++j) z(j) = StandardNormal(rng);
    z.array() -= z.mean();
    Eigen::Index top = 0;
    z.maxCoeff(&top);
    std::swap(z(top), z(model.choices()[static_cast<std::size_t>(i)]));
    for (Eigen::Index j = 0; j < J; ++j) state.Z(i, j) = z(j + 1) - z(0);
  }
  return state;
}

void GibbsBeta(McmcState& state, const ChoiceModel& model, const Matrix& sigma, const Matrix& prior_precision,
               Rng& rng) {
  const Eigen::LLT<Matrix> sigma_llt(sigma);
  if (sigma_llt.info() != Eigen::Success) Fail(ErrorCode::kNumerical, "Sigma is not positive definite");
  const Matrix P = sigma_llt.solve(Matrix::Identity(sigma.rows(), sigma.cols()));
  const Matrix post_precision = model.CrossProduct(P) + prior_precision;
  const Eigen::LLT<Matrix> llt(post_precision);
  if (llt.info() != Eigen::Success) Fail(ErrorCode::kNumerical, "posterior precision of beta is not positive definite");
  const Vector mean = llt.solve(model.CrossProductWith(P, state.Z));
  Vector e(mean.size());
  for (Eigen::Index k = 0; k < e.size(); ++k) e(k) = StandardNormal(rng);
  state.beta = mean + llt.matrixU().solve(e);
}

void GibbsLatentUtilities(McmcState& state, const ChoiceModel& model, const Matrix& sigma, Rng& rng) {
  const auto N = static_cast<Eigen::Index>(model.N());
  const auto J = static_cast<Eigen::Index>(model.J());
  const Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) Fail(ErrorCode::kNumerical, "Sigma is not positive definite");
  const Matrix P = llt.solve(Matrix::Identity(J, J));
  // Conditional of z_j given the rest: mean m_j + F_j (z - m), variance
  // 1 / P_jj, with F_jk = -P_jk / P_jj and F_jj = 0.
  RowMatrix F(J, J);
  Vector sd(J);
  for (Eigen::Index j = 0; j < J; ++j) {
    const double pjj = P(j, j);
    if (!(pjj > 0.0) || !std::isfinite(pjj)) {
      Fail(ErrorCode::kNumerical, "non-positive conditional variance for utility " + std::to_string(j + 1));
    }
    F.row(j) = -P.row(j) / pjj;
    F(j, j) = 0.0;
    sd(j) = std::sqrt(1.0 / pjj);
  }
  const RowMatrix means = model.Means(state.beta);
  const auto& y = model.choices();
  Vector r(J);
  for (Eigen::Index i = 0; i < N; ++i) {
    r = (state.Z.row(i) - means.row(i)).transpose();
    const int yi = y[static_cast<std::size_t>(i)];
    for (Eigen::Index j = 0; j < J; ++j) {
      const double cond_mean = means(i, j) + F.row(j).dot(r);
      double others = 0.0;  // max(Z_i^{(j)}, 0)
      for (Eigen::Index k = 0; k < J; ++k) {
        if (k != j) others = std::max(others, state.Z(i, k));
      }
      const double z = (yi == j + 1) ? SampleTruncatedBelow(cond_mean, sd(j), others, rng)
                                     : SampleTruncatedAbove(cond_mean, sd(j), others, rng);
      state.Z(i, j) = z;
      r(j) = z - means(i, j);
    }
  }
}

Matrix ResidualScatter(const McmcState& state, const ChoiceModel& model) {
  const RowMatrix e = state.Z - model.Means(state.beta);
  return e.transpose() * e;
}

double LatentLogLikelihood(const Matrix& scatter, std::size_t N, const Matrix& sigma) {
  const Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) return -std::numeric_limits<double>::infinity();
  const Matrix L = llt.matrixL();
  double log_det = 0.0;
  for (Eigen::Index j = 0; j < L.rows(); ++j) {
    if (!(L(j, j) > 0.0)) return -std::numeric_limits<double>::infinity();
    log_det += 2.0 * std::log(L(j, j));
  }
  const Matrix half = llt.matrixL().solve(scatter);  // L^{-1} S
  const Matrix quad = llt.matrixL().solve(half.transpose());  // L^{-1} S L^{-T}
  const double n = static_cast<double>(N);
  const double J = static_cast<double>(sigma.rows());
  return -0.5 * n * (J * 2.0 * kLogSqrtTwoPi + log_det) - 0.5 * quad.trace();
}

double LogAcceptanceRatio(const AngleVector& current, const AngleVector& proposal, std::span<const std::size_t> block,
                          const Vector& log_scales, const CalibratedPrior& prior, const Matrix& scatter,
                          std::size_t N, std::size_t J, std::size_t q) {
  double log_ratio = LatentLogLikelihood(scatter, N, CovarianceFromAngles(proposal, J, q)) -
                     LatentLogLikelihood(scatter, N, CovarianceFromAngles(current, J, q));
  const std::size_t count = current.size();
  for (std::size_t l : block) {
    const auto li = static_cast<Eigen::Index>(l);
    const double upper = AngleUpperBound(l, count);
    const double s = std::exp(log_scales(li));
    const double old_k = current.values(li);
    const double new_k = proposal.values(li);
    log_ratio += FlexibleLogPdf(new_k, prior.margins[l]) - FlexibleLogPdf(old_k, prior.margins[l]);
    // q(old|new) / q(new|old): the Gaussian kernels cancel, leaving the
    // truncation masses.
    log_ratio += LogIntervalMass(old_k, s, 0.0, upper) - LogIntervalMass(new_k, s, 0.0, upper);
  }
  return log_ratio;
}

void MhAnglesSweep(McmcState& state, const ChoiceModel& model, const CalibratedPrior& prior,
                   const SamplerConfig& config, Rng& rng) {
  const std::size_t count = state.kappa.size();
  if (count == 0) return;
  const Matrix scatter = ResidualScatter(state, model);
  const std::size_t J = model.J();
  const std::size_t q = config.q;

  double current_loglik = LatentLogLikelihood(scatter, model.N(), state.sigma);
  double current_logprior = LogPriorKappa(state.kappa, prior);
  if (!std::isfinite(current_loglik) || !std::isfinite(current_logprior)) {
    Fail(ErrorCode::kInvariant, "non-finite posterior density at the current angles");
  }

  std::vector<std::size_t> order(count);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);

  AngleVector proposal = state.kappa;
  for (std::size_t start = 0; start < count; start += config.block_size) {
    const std::size_t end = std::min(count, start + config.block_size);
    const std::span<const std::size_t> block(order.data() + start, end - start);
    double log_ratio = 0.0;
    for (std::size_t l : block) {
      const auto li = static_cast<Eigen::Index>(l);
      const double upper = AngleUpperBound(l, count);
      const double s = std::exp(state.log_scales(li));
      const double old_k = state.kappa.values(li);
      const double new_k = SampleTruncatedInterval(old_k, s, 0.0, upper, rng);
      proposal.values(li) = new_k;
      log_ratio += FlexibleLogPdf(new_k, prior.margins[l]) - FlexibleLogPdf(old_k, prior.margins[l]);
      log_ratio += LogIntervalMass(old_k, s, 0.0, upper) - LogIntervalMass(new_k, s, 0.0, upper);
    }
    const Matrix sigma_new = CovarianceFromAngles(proposal, J, q);
    const double new_loglik = LatentLogLikelihood(scatter, model.N(), sigma_new);
    log_ratio += new_loglik - current_loglik;

    const bool accept = std::isfinite(log_ratio) && std::log(UniformOpen(rng)) < log_ratio;
    for (std::size_t l : block) {
      ++state.batch_proposed[l];
      if (accept) ++state.batch_accepted[l];
    }
    if (accept) {
      state.kappa = proposal;
      state.sigma = sigma_new;
      current_loglik = new_loglik;
    } else {
      for (std::size_t l : block) proposal.values(static_cast<Eigen::Index>(l)) = state.kappa.values(static_cast<Eigen::Index>(l));
    }
  }
}

void AdaptProposals(McmcState& state, const SamplerConfig& config) {
  ++state.adaptation_batches;
  const double step = std::min(0.1, 1.0 / std::sqrt(static_cast<double>(state.adaptation_batches)));
  for (std::size_t l = 0; l < state.batch_proposed.size(); ++l) {
    if (state.batch_proposed[l] > 0) {
      const double rate = static_cast<double>(state.batch_accepted[l]) / static_cast<double>(state.batch_proposed[l]);
      const auto li = static_cast<Eigen::Index>(l);
      if (rate > config.target_high) {
        state.log_scales(li) += step;
      } else if (rate < config.target_low) {
        state.log_scales(li) -= step;
      }
    }
    state.batch_accepted[l] = 0;
    state.batch_proposed[l] = 0;
  }
}

void Transition(McmcState& state, const ChoiceModel& model, const CalibratedPrior* prior, const SamplerConfig& config,
                const Matrix& prior_precision, Rng& rng) {
  GibbsBeta(state, model, state.sigma, prior_precision, rng);
  GibbsLatentUtilities(state, model, state.sigma, rng);
  if (config.variant == ModelVariant::kFactor) MhAnglesSweep(state, model, *prior, config, rng);
}

namespace {

class DrawStream {
 public:
  DrawStream(const std::filesystem::path& dir, std::size_t K, std::size_t angles) {
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    beta_.open(dir / "beta.csv");
    kappa_.open(dir / "kappa.csv");
    if (!beta_ || !kappa_) Fail(ErrorCode::kIo, "cannot open draw files in " + dir.string());
    for (std::size_t k = 0; k < K; ++k) beta_ << (k ? "," : "") << "beta" << (k + 1);
    beta_ << '\n';
    for (std::size_t l = 0; l < angles; ++l) kappa_ << (l ? "," : "") << "kappa" << (l + 1);
    kappa_ << '\n';
    enabled_ = true;
  }

  void Append(const Vector& beta, const Vector& kappa) {
    if (!enabled_) return;
    for (Eigen::Index k = 0; k < beta.size(); ++k) beta_ << (k ? "," : "") << csv::FormatDouble(beta(k));
    beta_ << '\n';
    for (Eigen::Index l = 0; l < kappa.size(); ++l) kappa_ << (l ? "," : "") << csv::FormatDouble(kappa(l));
    kappa_ << '\n';
  }

  void Flush() {
    if (!enabled_) return;
    beta_.flush();
    kappa_.flush();
  }

 private:
  bool enabled_ = false;
  std::ofstream beta_, kappa_;
};

}  // namespace

PosteriorDraws RunChain(const ChoiceDataset& data, const SamplerConfig& config, const CalibratedPrior* prior) {
  config.Validate();
  Require(data.N() > 0, "dataset is empty");
  const ChoiceModel model(data);
  Rng rng = MakeRng(config.seed);
  McmcState state = InitState(model, config, prior, rng);
  const auto K = static_cast<Eigen::Index>(model.K());
  const Matrix prior_precision = Matrix::Identity(K, K) / config.beta_prior_variance;
  const double J = static_cast<double>(model.J());

  PosteriorDraws draws;
  draws.variant = config.variant;
  draws.J = model.J();
  draws.q = config.variant == ModelVariant::kFactor ? config.q : 0;
  draws.config = config;
  const std::size_t retained = config.RetainedDraws();
  draws.beta.resize(static_cast<Eigen::Index>(retained), K);
  draws.kappa.resize(static_cast<Eigen::Index>(retained), static_cast<Eigen::Index>(state.kappa.size()));
  DrawStream stream(config.stream_directory, model.K(), state.kappa.size());

  const auto start = std::chrono::steady_clock::now();
  std::size_t stored = 0;
  for (std::size_t t = 0; t < config.total_iterations; ++t) {
    try {
      Transition(state, model, prior, config, prior_precision, rng);
    } catch (const Error& e) {
      Fail(e.code(), "iteration " + std::to_string(t) + ": " + e.what());
    }
    for (std::size_t i = 0; i < model.N(); ++i) {
      const auto row = state.Z.row(static_cast<Eigen::Index>(i));
      if (ChoiceFromUtilities({row.data(), static_cast<std::size_t>(row.size())}) != model.choices()[i]) {
        Fail(ErrorCode::kInvariant, "iteration " + std::to_string(t) + ": latent utilities of observation " +
                                        std::to_string(i) + " disagree with its choice");
      }
    }
    const bool burning = t < config.burn_in;
    if (burning) {
      if ((t + 1) % config.adaptation_batch == 0) AdaptProposals(state, config);
    } else {
      for (std::size_t l = 0; l < state.kappa.size(); ++l) {
        state.total_accepted[l] += state.batch_accepted[l];
        state.total_proposed[l] += state.batch_proposed[l];
        state.batch_accepted[l] = state.batch_proposed[l] = 0;
      }
      if ((t - config.burn_in + 1) % config.thinning == 0 && stored < retained) {
        if (config.variant == ModelVariant::kFactor && std::fabs(state.sigma.trace() - J) > kTraceTolerance) {
          Fail(ErrorCode::kInvariant, "iteration " + std::to_string(t) + ": trace restriction violated");
        }
        draws.beta.row(static_cast<Eigen::Index>(stored)) = state.beta.transpose();
        draws.kappa.row(static_cast<Eigen::Index>(stored)) = state.kappa.values.transpose();
        stream.Append(state.beta, state.kappa.values);
        ++stored;
      }
    }
    if ((t + 1) % kStreamFlushInterval == 0) stream.Flush();
  }
  stream.Flush();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  draws.seconds_per_iteration = elapsed / static_cast<double>(config.total_iterations);
  draws.acceptance_rate.resize(static_cast<Eigen::Index>(state.kappa.size()));
  for (std::size_t l = 0; l < state.kappa.size(); ++l) {
    draws.acceptance_rate(static_cast<Eigen::Index>(l)) =
        state.total_proposed[l] ? static_cast<double>(state.total_accepted[l]) / static_cast<double>(state.total_proposed[l])
                                : 0.0;
  }
  return draws;
}

}  // namespace mnpfs
