#include "glm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stats.hpp"

namespace excomp {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454836;

void check_inputs(Family family, const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  const Eigen::VectorXd* weights, int n_categories) {
  const Eigen::Index n = design.rows();
  if (n < 1) throw InvalidInput("glm fit needs at least one row");
  if (response.size() != n) throw InvalidInput("response length does not match the design matrix");
  if (weights) {
    if (weights->size() != n) throw InvalidInput("case weight length does not match the design matrix");
    if ((weights->array() < 0.0).any()) throw InvalidInput("case weights must be nonnegative");
    if (weights->sum() <= 0.0) throw InvalidInput("case weights must not all be zero");
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!std::isfinite(response[i])) throw InvalidInput("response contains a non-finite value");
    switch (family) {
      case Family::bernoulli_logit:
        if (response[i] != 0.0 && response[i] != 1.0) {
          throw InvalidInput("bernoulli response must be coded 0/1");
        }
        break;
      case Family::multinomial_logit: {
        const double r = response[i];
        if (r != std::floor(r) || r < 0.0 || r >= static_cast<double>(n_categories)) {
          throw InvalidInput("multinomial response must be a category index in [0, categories)");
        }
        break;
      }
      case Family::gaussian_identity:
        break;
    }
  }
}

// Rank-checked symmetric solve with a one-shot ridge fallback.
Eigen::VectorXd solve_information(Eigen::MatrixXd info, const Eigen::VectorXd& grad,
                                  const FitOptions& options) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(info);
  if (qr.rank() == info.cols()) {
    Eigen::VectorXd step = qr.solve(grad);
    if (step.allFinite()) return step;
  }
  if (!options.allow_ridge) {
    throw SingularInformation("information matrix is rank deficient");
  }
  info.diagonal().array() += options.ridge;
  qr.compute(info);
  if (qr.rank() < info.cols()) {
    throw SingularInformation("information matrix is rank deficient even after the ridge fallback");
  }
  Eigen::VectorXd step = qr.solve(grad);
  if (!step.allFinite()) {
    throw SingularInformation("information solve produced non-finite values");
  }
  return step;
}

Eigen::VectorXd unit_weights(Eigen::Index n) { return Eigen::VectorXd::Ones(n); }

// Multinomial probabilities for one row given stacked coefficients; the
// reference category has a zero linear predictor.
void multinomial_probs_row(const Eigen::MatrixXd& coef, const Eigen::RowVectorXd& x,
                           Eigen::VectorXd& probs) {
  const Eigen::Index cm1 = coef.rows();
  double max_eta = 0.0;
  Eigen::VectorXd eta(cm1);
  for (Eigen::Index c = 0; c < cm1; ++c) {
    eta[c] = x.dot(coef.row(c));
    max_eta = std::max(max_eta, eta[c]);
  }
  double denom = std::exp(-max_eta);
  for (Eigen::Index c = 0; c < cm1; ++c) denom += std::exp(eta[c] - max_eta);
  probs[0] = std::exp(-max_eta) / denom;
  for (Eigen::Index c = 0; c < cm1; ++c) probs[c + 1] = std::exp(eta[c] - max_eta) / denom;
}

double loglik_bernoulli(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                        const Eigen::VectorXd& w, const Eigen::VectorXd& beta) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    if (w[i] == 0.0) continue;
    const double z = design.row(i).dot(beta);
    ll += w[i] * (y[i] * z - log1pexp(z));
  }
  return ll;
}

double loglik_multinomial(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& w, const Eigen::MatrixXd& coef) {
  const Eigen::Index cm1 = coef.rows();
  double ll = 0.0;
  Eigen::VectorXd eta(cm1);
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    if (w[i] == 0.0) continue;
    double max_eta = 0.0;
    for (Eigen::Index c = 0; c < cm1; ++c) {
      eta[c] = design.row(i).dot(coef.row(c));
      max_eta = std::max(max_eta, eta[c]);
    }
    double denom = std::exp(-max_eta);
    for (Eigen::Index c = 0; c < cm1; ++c) denom += std::exp(eta[c] - max_eta);
    const int r = static_cast<int>(y[i]);
    const double eta_r = (r == 0) ? 0.0 : eta[r - 1];
    ll += w[i] * (eta_r - max_eta - std::log(denom));
  }
  return ll;
}

double loglik_gaussian(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd resid = y - design * beta;
  return -0.5 * (w.array() * (resid.array().square() + kLogTwoPi)).sum();
}

FittedGlm fit_gaussian(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                       const Eigen::VectorXd& w, const FitOptions& options) {
  const Eigen::Index p = design.cols();
  Eigen::MatrixXd info(p, p);
  info.setZero();
  Eigen::VectorXd xwy = Eigen::VectorXd::Zero(p);
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    if (w[i] == 0.0) continue;
    info.noalias() += w[i] * design.row(i).transpose() * design.row(i);
    xwy.noalias() += w[i] * y[i] * design.row(i).transpose();
  }
  const Eigen::VectorXd beta = solve_information(info, xwy, options);
  FittedGlm fit;
  fit.family = Family::gaussian_identity;
  fit.coef = beta.transpose();
  fit.converged = true;
  fit.iterations = 1;
  const Eigen::VectorXd resid = y - design * beta;
  fit.max_abs_score = (design.transpose() * (w.array() * resid.array()).matrix()).cwiseAbs().maxCoeff();
  fit.log_likelihood = loglik_gaussian(design, y, w, beta);
  fit.loglik_trace = {fit.log_likelihood};
  return fit;
}

struct NewtonProblem {
  // score and information at the stacked coefficient vector
  std::function<double(const Eigen::VectorXd&)> loglik;
  std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&, Eigen::MatrixXd&)> score_info;
  Eigen::Index dim;
};

FittedGlm newton_fit(const NewtonProblem& problem, Family family, const FitOptions& options) {
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(problem.dim);
  Eigen::VectorXd grad(problem.dim);
  Eigen::MatrixXd info(problem.dim, problem.dim);

  FittedGlm fit;
  fit.family = family;
  double ll = problem.loglik(theta);
  fit.loglik_trace.push_back(ll);
  bool stalled = false;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    problem.score_info(theta, grad, info);
    if (grad.cwiseAbs().maxCoeff() <= options.score_tol) break;
    const Eigen::VectorXd direction = solve_information(info, grad, options);
    double step = 1.0;
    double ll_new = ll;
    Eigen::VectorXd theta_new = theta;
    bool accepted = false;
    for (int h = 0; h <= options.max_step_halvings; ++h) {
      theta_new = theta + step * direction;
      ll_new = problem.loglik(theta_new);
      if (std::isfinite(ll_new) && ll_new >= ll) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    theta = theta_new;
    fit.iterations = iter;
    fit.loglik_trace.push_back(ll_new);
    const double change = ll_new - ll;
    ll = ll_new;
    if (theta.cwiseAbs().maxCoeff() > options.separation_bound) {
      throw Separation("coefficient magnitude exceeded " + std::to_string(options.separation_bound) +
                       " on the logit scale; the likelihood has no interior maximum");
    }
    if (change <= options.loglik_rel_tol * (std::abs(ll) + options.loglik_rel_tol)) break;
  }

  problem.score_info(theta, grad, info);
  fit.max_abs_score = grad.cwiseAbs().maxCoeff();
  fit.log_likelihood = ll;
  fit.converged = fit.max_abs_score <= options.score_tol;
  if (!fit.converged) {
    throw NonConvergence("newton iteration " + std::string(stalled ? "stalled" : "hit the cap") +
                         " with score sup-norm " + std::to_string(fit.max_abs_score));
  }
  fit.coef = theta.transpose();  // reshaped by the caller for multinomial
  return fit;
}

}  // namespace

std::string family_name(Family f) {
  switch (f) {
    case Family::bernoulli_logit: return "bernoulli-logit";
    case Family::multinomial_logit: return "multinomial-logit";
    case Family::gaussian_identity: return "gaussian-identity";
  }
  return "unknown";
}

Family family_from_name(const std::string& name) {
  if (name == "bernoulli-logit" || name == "binomial" || name == "bernoulli") {
    return Family::bernoulli_logit;
  }
  if (name == "multinomial-logit" || name == "multinomial") return Family::multinomial_logit;
  if (name == "gaussian-identity" || name == "gaussian" || name == "linear") {
    return Family::gaussian_identity;
  }
  throw ConfigError("unknown model family '" + name + "'");
}

FittedGlm fit_glm(Family family, const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  const Eigen::VectorXd* case_weights, const FitOptions& options, int n_categories) {
  if (family == Family::multinomial_logit && n_categories == 0) {
    n_categories = static_cast<int>(response.maxCoeff()) + 1;
  }
  if (family == Family::multinomial_logit && n_categories < 2) {
    throw InvalidInput("multinomial fit needs at least two categories");
  }
  check_inputs(family, design, response, case_weights, n_categories);
  const Eigen::VectorXd w = case_weights ? *case_weights : unit_weights(design.rows());
  const Eigen::Index p = design.cols();

  if (family == Family::gaussian_identity) {
    return fit_gaussian(design, response, w, options);
  }

  if (family == Family::bernoulli_logit) {
    NewtonProblem problem;
    problem.dim = p;
    problem.loglik = [&](const Eigen::VectorXd& beta) {
      return loglik_bernoulli(design, response, w, beta);
    };
    problem.score_info = [&](const Eigen::VectorXd& beta, Eigen::VectorXd& grad,
                             Eigen::MatrixXd& info) {
      grad.setZero();
      info.setZero();
      for (Eigen::Index i = 0; i < design.rows(); ++i) {
        if (w[i] == 0.0) continue;
        const double mu = expit(design.row(i).dot(beta));
        grad.noalias() += w[i] * (response[i] - mu) * design.row(i).transpose();
        info.noalias() += w[i] * mu * (1.0 - mu) * design.row(i).transpose() * design.row(i);
      }
    };
    return newton_fit(problem, family, options);
  }

  // multinomial: stacked (categories-1) blocks of p coefficients
  const Eigen::Index cm1 = n_categories - 1;
  NewtonProblem problem;
  problem.dim = cm1 * p;
  auto reshape = [p, cm1](const Eigen::VectorXd& theta) {
    Eigen::MatrixXd coef(cm1, p);
    for (Eigen::Index c = 0; c < cm1; ++c) coef.row(c) = theta.segment(c * p, p).transpose();
    return coef;
  };
  problem.loglik = [&, reshape](const Eigen::VectorXd& theta) {
    return loglik_multinomial(design, response, w, reshape(theta));
  };
  problem.score_info = [&, reshape](const Eigen::VectorXd& theta, Eigen::VectorXd& grad,
                                    Eigen::MatrixXd& info) {
    const Eigen::MatrixXd coef = reshape(theta);
    grad.setZero();
    info.setZero();
    Eigen::VectorXd probs(n_categories);
    for (Eigen::Index i = 0; i < design.rows(); ++i) {
      if (w[i] == 0.0) continue;
      multinomial_probs_row(coef, design.row(i), probs);
      const int r = static_cast<int>(response[i]);
      for (Eigen::Index c = 0; c < cm1; ++c) {
        const double rc = (r == static_cast<int>(c) + 1) ? 1.0 : 0.0;
        grad.segment(c * p, p).noalias() +=
            w[i] * (rc - probs[c + 1]) * design.row(i).transpose();
        for (Eigen::Index d = 0; d <= c; ++d) {
          const double kron = (c == d) ? 1.0 : 0.0;
          const double scale = w[i] * probs[c + 1] * (kron - probs[d + 1]);
          info.block(c * p, d * p, p, p).noalias() +=
              scale * design.row(i).transpose() * design.row(i);
        }
      }
    }
    for (Eigen::Index c = 0; c < cm1; ++c) {
      for (Eigen::Index d = c + 1; d < cm1; ++d) {
        info.block(c * p, d * p, p, p) = info.block(d * p, c * p, p, p).transpose();
      }
    }
  };
  FittedGlm fit = newton_fit(problem, family, options);
  fit.coef = reshape(fit.coef.row(0).transpose());
  fit.categories.resize(static_cast<std::size_t>(n_categories));
  std::iota(fit.categories.begin(), fit.categories.end(), 0);
  return fit;
}

Eigen::VectorXd predict_mean(const FittedGlm& fit, const Eigen::MatrixXd& design) {
  if (fit.family == Family::multinomial_logit) {
    throw WrongFamily("predict_mean does not apply to multinomial fits; use predict_class_probs");
  }
  if (design.cols() != fit.coef.cols()) {
    throw InvalidInput("design matrix has " + std::to_string(design.cols()) +
                       " columns but the fit has " + std::to_string(fit.coef.cols()));
  }
  Eigen::VectorXd eta = design * fit.coef.row(0).transpose();
  if (fit.family == Family::gaussian_identity) return eta;
  for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = expit(eta[i]);
  return eta;
}

Eigen::MatrixXd predict_class_probs(const FittedGlm& fit, const Eigen::MatrixXd& design) {
  if (fit.family != Family::multinomial_logit) {
    throw WrongFamily("predict_class_probs requires a multinomial fit");
  }
  if (design.cols() != fit.coef.cols()) {
    throw InvalidInput("design matrix has " + std::to_string(design.cols()) +
                       " columns but the fit has " + std::to_string(fit.coef.cols()));
  }
  const Eigen::Index n_cat = fit.coef.rows() + 1;
  Eigen::MatrixXd probs(design.rows(), n_cat);
  Eigen::VectorXd row(n_cat);
  for (Eigen::Index i = 0; i < design.rows(); ++i) {
    multinomial_probs_row(fit.coef, design.row(i), row);
    probs.row(i) = row.transpose();
  }
  return probs;
}

double glm_log_likelihood(Family family, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& response, const Eigen::VectorXd* case_weights,
                          const Eigen::MatrixXd& coef) {
  const Eigen::VectorXd w = case_weights ? *case_weights : unit_weights(design.rows());
  switch (family) {
    case Family::bernoulli_logit:
      return loglik_bernoulli(design, response, w, coef.row(0).transpose());
    case Family::multinomial_logit:
      return loglik_multinomial(design, response, w, coef);
    case Family::gaussian_identity:
      return loglik_gaussian(design, response, w, coef.row(0).transpose());
  }
  throw InvalidInput("unknown family");
}

Eigen::MatrixXd glm_score(Family family, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& response, const Eigen::VectorXd* case_weights,
                          const Eigen::MatrixXd& coef) {
  const Eigen::VectorXd w = case_weights ? *case_weights : unit_weights(design.rows());
  Eigen::MatrixXd score = Eigen::MatrixXd::Zero(coef.rows(), coef.cols());
  switch (family) {
    case Family::bernoulli_logit: {
      const Eigen::VectorXd beta = coef.row(0).transpose();
      for (Eigen::Index i = 0; i < design.rows(); ++i) {
        const double mu = expit(design.row(i).dot(beta));
        score.row(0).noalias() += w[i] * (response[i] - mu) * design.row(i);
      }
      return score;
    }
    case Family::multinomial_logit: {
      const Eigen::Index n_cat = coef.rows() + 1;
      Eigen::VectorXd probs(n_cat);
      for (Eigen::Index i = 0; i < design.rows(); ++i) {
        multinomial_probs_row(coef, design.row(i), probs);
        const int r = static_cast<int>(response[i]);
        for (Eigen::Index c = 0; c + 1 < n_cat; ++c) {
          const double rc = (r == static_cast<int>(c) + 1) ? 1.0 : 0.0;
          score.row(c).noalias() += w[i] * (rc - probs[c + 1]) * design.row(i);
        }
      }
      return score;
    }
    case Family::gaussian_identity: {
      const Eigen::VectorXd beta = coef.row(0).transpose();
      const Eigen::VectorXd resid = response - design * beta;
      score.row(0) = (design.transpose() * (w.array() * resid.array()).matrix()).transpose();
      return score;
    }
  }
  throw InvalidInput("unknown family");
}

}  // namespace excomp
