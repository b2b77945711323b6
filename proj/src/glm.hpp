#ifndef EXCOMP_GLM_HPP
#define EXCOMP_GLM_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace excomp {

enum class Family { bernoulli_logit, multinomial_logit, gaussian_identity };

std::string family_name(Family f);
Family family_from_name(const std::string& name);

// Model description used by the nuisance fitters: family plus the covariate
// columns entering the linear predictor. An empty covariate list is an
// intercept-only model. The intercept is always included.
struct ModelSpec {
  Family family = Family::gaussian_identity;
  std::vector<std::string> covariates;
};

struct FitOptions {
  double score_tol = 1e-8;          // sup-norm of the score at the solution
  double loglik_rel_tol = 1e-12;    // relative log-likelihood change stopping rule
  int max_iterations = 100;
  int max_step_halvings = 20;
  double separation_bound = 15.0;   // |coefficient| limit on the logit scale
  bool allow_ridge = true;          // one-shot 1e-8 diagonal ridge on a singular solve
  double ridge = 1e-8;
};

struct FittedGlm {
  Family family = Family::gaussian_identity;
  // one row per non-reference category for multinomial, otherwise one row;
  // columns follow the design matrix (intercept first)
  Eigen::MatrixXd coef;
  // multinomial response codes, sorted ascending; codes[0] is the reference
  std::vector<int> categories;
  bool converged = false;
  int iterations = 0;
  double max_abs_score = 0.0;
  double log_likelihood = 0.0;
  std::vector<double> loglik_trace;  // accepted log-likelihoods, one per iteration
};

// Weighted maximum likelihood. The design matrix carries the intercept
// column. Responses: 0/1 for bernoulli, category index 0..C-1 for
// multinomial, any finite real for gaussian. Gaussian fits solve the normal
// equations directly; logit-scale families run Newton with step-halving.
FittedGlm fit_glm(Family family, const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                  const Eigen::VectorXd* case_weights = nullptr, const FitOptions& options = {},
                  int n_categories = 0);

// Fitted means: probabilities for bernoulli, the linear predictor for
// gaussian. Multinomial fits must use predict_class_probs.
Eigen::VectorXd predict_mean(const FittedGlm& fit, const Eigen::MatrixXd& design);

// Per-category probabilities (columns ordered as fit.categories); rows sum to 1.
Eigen::MatrixXd predict_class_probs(const FittedGlm& fit, const Eigen::MatrixXd& design);

// Log-likelihood and score at an arbitrary coefficient value, exposed for
// diagnostics. Gaussian values are computed at unit dispersion.
double glm_log_likelihood(Family family, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& response, const Eigen::VectorXd* case_weights,
                          const Eigen::MatrixXd& coef);
Eigen::MatrixXd glm_score(Family family, const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& response, const Eigen::VectorXd* case_weights,
                          const Eigen::MatrixXd& coef);

}  // namespace excomp

#endif  // EXCOMP_GLM_HPP
