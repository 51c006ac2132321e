#pragma once

#include <Eigen/Dense>
#include <vector>

#include "errors.hpp"

namespace cci {

enum class Family { linear, binomial, multinomial };
enum class Link { identity, logit, probit };

struct GlmOptions {
    double tol = 1e-8;              // relative deviance change
    double score_tol = 1e-6;        // max-norm of the score
    int max_iter = 100;
    double separation_bound = 30.0; // max |linear predictor| before declaring separation
    Eigen::Index block_rows = 1024; // streaming block size for grid-backed designs
    int threads = 1;
};

struct GlmFit {
    Family family = Family::linear;
    Link link = Link::identity;
    // p-vector for linear/binomial; (K-1) x p for multinomial (class 0 baseline).
    Eigen::MatrixXd coef;
    // Covariance of the stacked coefficient vector (inverse Fisher information;
    // sigma^2 (X'X)^-1 for linear).
    Eigen::MatrixXd coef_cov;
    bool converged = false;
    int iterations = 0;
    double deviance = 0.0;
    int n_classes = 2;
    // Degenerate-response shortcut: predictions are exactly constant_value.
    bool constant_response = false;
    double constant_value = 0.0;

    Eigen::Index n_cols() const { return coef.size() == 0 ? 0 : coef.cols() == 1 ? coef.rows() : coef.cols(); }
    Eigen::VectorXd coef_se() const;
};

// Row streaming for designs too large to materialize (the pairwise grid).
// fill() writes rows [r0, r0 + X.rows()) of the design and response.
class DesignSource {
public:
    virtual ~DesignSource() = default;
    virtual Eigen::Index rows() const = 0;
    virtual Eigen::Index cols() const = 0;
    virtual void fill(Eigen::Index r0, Eigen::Ref<Eigen::MatrixXd> X,
                      Eigen::Ref<Eigen::VectorXd> y) const = 0;
};

class MatrixSource final : public DesignSource {
public:
    MatrixSource(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) : X_(X), y_(y) {
        require(X.rows() == y.size(), ErrorCode::invalid_argument,
                "design and response row counts differ");
    }
    Eigen::Index rows() const override { return X_.rows(); }
    Eigen::Index cols() const override { return X_.cols(); }
    void fill(Eigen::Index r0, Eigen::Ref<Eigen::MatrixXd> X,
              Eigen::Ref<Eigen::VectorXd> y) const override {
        const Eigen::Index m = X.rows();
        X = X_.middleRows(r0, m);
        y = y_.segment(r0, m);
    }

private:
    const Eigen::MatrixXd& X_;
    const Eigen::VectorXd& y_;
};

// All ordered pairs (target t, reference r) over one exposure arm: design row
// (1, x_t, x_r), response 1(income_r <= income_t). Diagonal pairs respond 1.
class PairGridSource final : public DesignSource {
public:
    PairGridSource(const Eigen::MatrixXd& covs_no_intercept, const Eigen::VectorXd& incomes)
        : x_(covs_no_intercept), inc_(incomes) {
        require(x_.rows() == inc_.size(), ErrorCode::invalid_argument,
                "pair grid: covariate and income row counts differ");
    }
    Eigen::Index rows() const override { return x_.rows() * x_.rows(); }
    Eigen::Index cols() const override { return 1 + 2 * x_.cols(); }
    void fill(Eigen::Index r0, Eigen::Ref<Eigen::MatrixXd> X,
              Eigen::Ref<Eigen::VectorXd> y) const override;

private:
    const Eigen::MatrixXd& x_;
    const Eigen::VectorXd& inc_;
};

// Rank check on the Gram matrix: returns the index of the first linearly
// dependent column, or -1 if the design has full column rank.
Eigen::Index first_dependent_column(const Eigen::MatrixXd& gram);

GlmFit fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

GlmFit fit_binary_glm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Link link,
                      const GlmOptions& opts = {});
GlmFit fit_binary_glm(const DesignSource& src, Link link, const GlmOptions& opts = {});

GlmFit fit_multinomial(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                       int n_classes, const GlmOptions& opts = {});

// Inverse-link predictions: fitted means for linear/binomial fits.
Eigen::VectorXd predict(const GlmFit& fit, const Eigen::MatrixXd& X);
// Per-class probability rows (n x K) for multinomial fits.
Eigen::MatrixXd predict_multinomial(const GlmFit& fit, const Eigen::MatrixXd& X);

} // namespace cci
