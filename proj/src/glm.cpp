#include "glm.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

#include "mathutil.hpp"

namespace cci {

namespace {

constexpr double kProbClip = 1e-12;

// Neumaier-compensated accumulation, entrywise for matrices. Keeps the
// streamed Gram/score sums accurate enough that results agree across block
// sizes to well below the 1e-12 contract.
struct CompensatedMatrix {
    Eigen::MatrixXd sum, comp;
    CompensatedMatrix(Eigen::Index r, Eigen::Index c)
        : sum(Eigen::MatrixXd::Zero(r, c)), comp(Eigen::MatrixXd::Zero(r, c)) {}
    void add(const Eigen::MatrixXd& x) {
        for (Eigen::Index j = 0; j < sum.cols(); ++j)
            for (Eigen::Index i = 0; i < sum.rows(); ++i) {
                const double s = sum(i, j), v = x(i, j);
                const double t = s + v;
                comp(i, j) += std::fabs(s) >= std::fabs(v) ? (s - t) + v : (v - t) + s;
                sum(i, j) = t;
            }
    }
    Eigen::MatrixXd value() const { return sum + comp; }
};

struct CompensatedScalar {
    double sum = 0.0, comp = 0.0;
    void add(double v) {
        const double t = sum + v;
        comp += std::fabs(sum) >= std::fabs(v) ? (sum - t) + v : (v - t) + sum;
        sum = t;
    }
    double value() const { return sum + comp; }
};

double inverse_link(double eta, Link link) {
    switch (link) {
        case Link::logit:
            return 1.0 / (1.0 + std::exp(-eta));
        case Link::probit:
            return norm_cdf(eta);
        default:
            return eta;
    }
}

struct IrlsPartial {
    Eigen::MatrixXd H;
    Eigen::VectorXd g;
    double dev = 0.0;
    double max_abs_eta = 0.0;
    double ymin = 1.0, ymax = 0.0;
};

// One streamed evaluation pass at a fixed beta: Fisher information, score,
// deviance, and the largest |eta| seen.
IrlsPartial irls_pass(const DesignSource& src, const Eigen::VectorXd& beta, Link link,
                      const GlmOptions& opts) {
    const Eigen::Index p = src.cols();
    CompensatedMatrix H(p, p), g(p, 1);
    CompensatedScalar dev;
    double max_abs_eta = 0.0, ymin = 1.0, ymax = 0.0;

    auto compute = [&](Eigen::Index lo, Eigen::Index hi) {
        IrlsPartial part;
        const Eigen::Index m = hi - lo;
        Eigen::MatrixXd X(m, p);
        Eigen::VectorXd y(m);
        src.fill(lo, X, y);
        Eigen::VectorXd eta = X * beta;
        Eigen::VectorXd w(m), scorefac(m);
        double d = 0.0, me = 0.0, mn = 1.0, mx = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const double yi = y[i];
            require(yi == 0.0 || yi == 1.0, ErrorCode::invalid_argument,
                    "binary response must be 0/1");
            mn = std::min(mn, yi);
            mx = std::max(mx, yi);
            const double e = eta[i];
            me = std::max(me, std::fabs(e));
            double mu = inverse_link(e, link);
            mu = std::clamp(mu, kProbClip, 1.0 - kProbClip);
            if (link == Link::probit) {
                const double ph = norm_pdf(e);
                const double denom = mu * (1.0 - mu);
                w[i] = ph * ph / denom;
                scorefac[i] = (yi - mu) * ph / denom;
            } else {
                w[i] = mu * (1.0 - mu);
                scorefac[i] = yi - mu;
            }
            d += -2.0 * (yi * std::log(mu) + (1.0 - yi) * std::log(1.0 - mu));
        }
        part.H = X.transpose() * w.asDiagonal() * X;
        part.g = X.transpose() * scorefac;
        part.dev = d;
        part.max_abs_eta = me;
        part.ymin = mn;
        part.ymax = mx;
        return part;
    };
    auto merge = [&](IrlsPartial&& part) {
        H.add(part.H);
        g.add(part.g);
        dev.add(part.dev);
        max_abs_eta = std::max(max_abs_eta, part.max_abs_eta);
        ymin = std::min(ymin, part.ymin);
        ymax = std::max(ymax, part.ymax);
    };
    ordered_reduce_blocks<IrlsPartial>(src.rows(), opts.block_rows, opts.threads, compute, merge);

    IrlsPartial out;
    out.H = H.value();
    out.g = g.value();
    out.dev = dev.value();
    out.max_abs_eta = max_abs_eta;
    out.ymin = ymin;
    out.ymax = ymax;
    return out;
}

GlmFit constant_fit(Family family, Link link, Eigen::Index p, double value) {
    GlmFit fit;
    fit.family = family;
    fit.link = link;
    fit.coef = Eigen::MatrixXd::Zero(p, 1);
    fit.coef_cov = Eigen::MatrixXd::Zero(p, p);
    fit.converged = true;
    fit.iterations = 0;
    fit.deviance = 0.0;
    fit.constant_response = true;
    fit.constant_value = value;
    return fit;
}

} // namespace

void PairGridSource::fill(Eigen::Index r0, Eigen::Ref<Eigen::MatrixXd> X,
                          Eigen::Ref<Eigen::VectorXd> y) const {
    const Eigen::Index na = x_.rows();
    const Eigen::Index d = x_.cols();
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
        const Eigen::Index q = r0 + i;
        const Eigen::Index t = q / na;
        const Eigen::Index r = q % na;
        X(i, 0) = 1.0;
        X.block(i, 1, 1, d) = x_.row(t);
        X.block(i, 1 + d, 1, d) = x_.row(r);
        y[i] = inc_[r] <= inc_[t] ? 1.0 : 0.0;
    }
}

Eigen::Index first_dependent_column(const Eigen::MatrixXd& gram) {
    // Incremental Cholesky; a pivot collapsing to ~0 marks the first column
    // that is a linear combination of its predecessors.
    const Eigen::Index p = gram.rows();
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
        double d = gram(j, j);
        for (Eigen::Index k = 0; k < j; ++k) d -= L(j, k) * L(j, k);
        if (!(d > 1e-10 * std::max(gram(j, j), 1e-300))) return j;
        L(j, j) = std::sqrt(d);
        for (Eigen::Index i = j + 1; i < p; ++i) {
            double v = gram(i, j);
            for (Eigen::Index k = 0; k < j; ++k) v -= L(i, k) * L(j, k);
            L(i, j) = v / L(j, j);
        }
    }
    return -1;
}

Eigen::VectorXd GlmFit::coef_se() const {
    Eigen::VectorXd se(coef_cov.rows());
    for (Eigen::Index i = 0; i < se.size(); ++i)
        se[i] = std::sqrt(std::max(0.0, coef_cov(i, i)));
    return se;
}

GlmFit fit_linear(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    const Eigen::Index n = X.rows(), p = X.cols();
    require(n == y.size(), ErrorCode::invalid_argument, "fit_linear: row mismatch");
    require(n >= p, ErrorCode::invalid_argument, "fit_linear: need n >= p");
    require(X.allFinite() && y.allFinite(), ErrorCode::invalid_argument,
            "fit_linear: non-finite values");
    const Eigen::MatrixXd gram = X.transpose() * X;
    const Eigen::Index bad = first_dependent_column(gram);
    if (bad >= 0)
        fail(ErrorCode::rank_deficient,
             "fit_linear: design is rank deficient at column " + std::to_string(bad));
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    GlmFit fit;
    fit.family = Family::linear;
    fit.link = Link::identity;
    fit.coef = ldlt.solve(X.transpose() * y);
    const Eigen::VectorXd resid = y - X * fit.coef;
    fit.deviance = resid.squaredNorm();
    const double sigma2 = n > p ? fit.deviance / static_cast<double>(n - p) : 0.0;
    fit.coef_cov = sigma2 * ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    fit.converged = true;
    fit.iterations = 1;
    return fit;
}

GlmFit fit_binary_glm(const DesignSource& src, Link link, const GlmOptions& opts) {
    require(link == Link::logit || link == Link::probit, ErrorCode::invalid_argument,
            "fit_binary_glm: link must be logit or probit");
    require(opts.tol > 0.0, ErrorCode::invalid_argument, "fit_binary_glm: tol must be > 0");
    const Eigen::Index n = src.rows(), p = src.cols();
    require(n >= p, ErrorCode::invalid_argument, "fit_binary_glm: need n >= p");

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    IrlsPartial cur = irls_pass(src, beta, link, opts);
    if (cur.ymin == cur.ymax)
        return constant_fit(Family::binomial, link, p, cur.ymin);
    // At beta = 0 the IRLS weights are constant, so cur.H is proportional to
    // the unweighted Gram matrix; rank is checked here once.
    {
        const Eigen::Index bad = first_dependent_column(cur.H);
        if (bad >= 0)
            fail(ErrorCode::rank_deficient,
                 "fit_binary_glm: design is rank deficient at column " + std::to_string(bad));
    }

    GlmFit fit;
    fit.family = Family::binomial;
    fit.link = link;
    fit.converged = false;
    int iter = 0;
    Eigen::MatrixXd last_H = cur.H;
    while (iter < opts.max_iter) {
        const Eigen::VectorXd step = Eigen::LDLT<Eigen::MatrixXd>(cur.H).solve(cur.g);
        Eigen::VectorXd delta = step;
        IrlsPartial nxt;
        bool accepted = false;
        for (int halving = 0; halving < 30; ++halving) {
            const Eigen::VectorXd trial = beta + delta;
            nxt = irls_pass(src, trial, link, opts);
            if (nxt.dev <= cur.dev + 1e-10 * (std::fabs(cur.dev) + 1.0)) {
                beta = trial;
                accepted = true;
                break;
            }
            delta *= 0.5;
        }
        ++iter;
        if (!accepted) break;
        assert(nxt.dev <= cur.dev + 1e-10 * (std::fabs(cur.dev) + 1.0));
        // complete/quasi-complete separation: the predictor diverges AND the
        // classification becomes numerically perfect. Wide designs can push
        // |eta| past the bound with plenty of residual deviance; those fits
        // are legitimate.
        if (nxt.max_abs_eta > opts.separation_bound &&
            nxt.dev < 1e-8 * static_cast<double>(n))
            fail(ErrorCode::separation,
                 "fit_binary_glm: separation detected (|linear predictor| > " +
                     std::to_string(opts.separation_bound) + ")");
        const double rel_change = std::fabs(cur.dev - nxt.dev) / (std::fabs(nxt.dev) + 1.0);
        last_H = nxt.H;
        const double max_score = nxt.g.cwiseAbs().maxCoeff();
        cur = nxt;
        if (rel_change < opts.tol && max_score < opts.score_tol) {
            fit.converged = true;
            break;
        }
    }
    fit.coef = beta;
    fit.iterations = iter;
    fit.deviance = cur.dev;
    fit.coef_cov = Eigen::LDLT<Eigen::MatrixXd>(last_H).solve(Eigen::MatrixXd::Identity(p, p));
    return fit;
}

GlmFit fit_binary_glm(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, Link link,
                      const GlmOptions& opts) {
    MatrixSource src(X, y);
    return fit_binary_glm(src, link, opts);
}

GlmFit fit_multinomial(const Eigen::MatrixXd& X, const std::vector<int>& labels,
                       int n_classes, const GlmOptions& opts) {
    const Eigen::Index n = X.rows(), p = X.cols();
    require(n == static_cast<Eigen::Index>(labels.size()), ErrorCode::invalid_argument,
            "fit_multinomial: row mismatch");
    require(n_classes >= 2, ErrorCode::invalid_argument, "fit_multinomial: need K >= 2");
    std::vector<Eigen::Index> class_count(static_cast<size_t>(n_classes), 0);
    for (int lab : labels) {
        require(lab >= 0 && lab < n_classes, ErrorCode::invalid_argument,
                "fit_multinomial: label out of range");
        ++class_count[static_cast<size_t>(lab)];
    }
    for (int k = 0; k < n_classes; ++k)
        if (class_count[static_cast<size_t>(k)] == 0)
            fail(ErrorCode::empty_class,
                 "fit_multinomial: class " + std::to_string(k) + " has no observations");

    {
        const Eigen::MatrixXd gram = X.transpose() * X;
        const Eigen::Index bad = first_dependent_column(gram);
        if (bad >= 0)
            fail(ErrorCode::rank_deficient,
                 "fit_multinomial: design is rank deficient at column " + std::to_string(bad));
    }

    const int Km1 = n_classes - 1;
    const Eigen::Index q = static_cast<Eigen::Index>(Km1) * p;
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(Km1, p);

    auto eval = [&](const Eigen::MatrixXd& th, Eigen::MatrixXd& probs, double& dev,
                    double& max_eta) {
        Eigen::MatrixXd eta = X * th.transpose(); // n x (K-1)
        max_eta = eta.size() == 0 ? 0.0 : eta.cwiseAbs().maxCoeff();
        probs.resize(n, n_classes);
        dev = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double m = 0.0;
            for (int k = 0; k < Km1; ++k) m = std::max(m, eta(i, k));
            double denom = std::exp(-m);
            for (int k = 0; k < Km1; ++k) denom += std::exp(eta(i, k) - m);
            probs(i, 0) = std::exp(-m) / denom;
            for (int k = 0; k < Km1; ++k) probs(i, k + 1) = std::exp(eta(i, k) - m) / denom;
            const double pi_y = std::max(probs(i, labels[static_cast<size_t>(i)]), kProbClip);
            dev += -2.0 * std::log(pi_y);
        }
    };

    Eigen::MatrixXd probs;
    double dev = 0.0, max_eta = 0.0;
    eval(theta, probs, dev, max_eta);

    GlmFit fit;
    fit.family = Family::multinomial;
    fit.link = Link::logit;
    fit.n_classes = n_classes;
    fit.converged = false;
    Eigen::MatrixXd H(q, q);
    int iter = 0;
    while (iter < opts.max_iter) {
        Eigen::VectorXd g(q);
        for (int a = 0; a < Km1; ++a) {
            Eigen::VectorXd ya = Eigen::VectorXd::Zero(n);
            for (Eigen::Index i = 0; i < n; ++i)
                if (labels[static_cast<size_t>(i)] == a + 1) ya[i] = 1.0;
            g.segment(static_cast<Eigen::Index>(a) * p, p) =
                X.transpose() * (ya - probs.col(a + 1));
        }
        for (int a = 0; a < Km1; ++a)
            for (int b = 0; b < Km1; ++b) {
                Eigen::VectorXd w(n);
                for (Eigen::Index i = 0; i < n; ++i)
                    w[i] = probs(i, a + 1) * ((a == b ? 1.0 : 0.0) - probs(i, b + 1));
                H.block(static_cast<Eigen::Index>(a) * p, static_cast<Eigen::Index>(b) * p, p, p) =
                    X.transpose() * w.asDiagonal() * X;
            }

        const double max_score = g.cwiseAbs().maxCoeff();
        Eigen::VectorXd step = Eigen::LDLT<Eigen::MatrixXd>(H).solve(g);
        bool accepted = false;
        Eigen::MatrixXd trial_probs;
        double trial_dev = 0.0, trial_eta = 0.0;
        for (int halving = 0; halving < 30; ++halving) {
            Eigen::MatrixXd trial = theta;
            for (int a = 0; a < Km1; ++a)
                trial.row(a) += step.segment(static_cast<Eigen::Index>(a) * p, p).transpose() /
                                std::pow(2.0, halving);
            eval(trial, trial_probs, trial_dev, trial_eta);
            if (trial_dev <= dev + 1e-10 * (std::fabs(dev) + 1.0)) {
                theta = trial;
                accepted = true;
                break;
            }
        }
        ++iter;
        if (!accepted) break;
        assert(trial_dev <= dev + 1e-10 * (std::fabs(dev) + 1.0));
        if (trial_eta > opts.separation_bound && trial_dev < 1e-8 * static_cast<double>(n))
            fail(ErrorCode::separation, "fit_multinomial: separation detected");
        const double rel_change = std::fabs(dev - trial_dev) / (std::fabs(trial_dev) + 1.0);
        dev = trial_dev;
        probs = trial_probs;
        if (rel_change < opts.tol && max_score < opts.score_tol) {
            fit.converged = true;
            break;
        }
    }
    fit.coef = theta;
    fit.iterations = iter;
    fit.deviance = dev;
    fit.coef_cov = Eigen::LDLT<Eigen::MatrixXd>(H).solve(Eigen::MatrixXd::Identity(q, q));
    return fit;
}

Eigen::VectorXd predict(const GlmFit& fit, const Eigen::MatrixXd& X) {
    require(fit.family != Family::multinomial, ErrorCode::invalid_argument,
            "predict: use predict_multinomial for multinomial fits");
    if (fit.constant_response)
        return Eigen::VectorXd::Constant(X.rows(), fit.constant_value);
    require(X.cols() == fit.coef.rows(), ErrorCode::invalid_argument,
            "predict: column count does not match fit");
    Eigen::VectorXd eta = X * fit.coef.col(0);
    if (fit.family == Family::linear) return eta;
    for (Eigen::Index i = 0; i < eta.size(); ++i) eta[i] = inverse_link(eta[i], fit.link);
    return eta;
}

Eigen::MatrixXd predict_multinomial(const GlmFit& fit, const Eigen::MatrixXd& X) {
    require(fit.family == Family::multinomial, ErrorCode::invalid_argument,
            "predict_multinomial: not a multinomial fit");
    require(X.cols() == fit.coef.cols(), ErrorCode::invalid_argument,
            "predict_multinomial: column count does not match fit");
    const Eigen::Index n = X.rows();
    const int Km1 = fit.n_classes - 1;
    Eigen::MatrixXd eta = X * fit.coef.transpose(); // n x (K-1)
    Eigen::MatrixXd probs(n, fit.n_classes);
    for (Eigen::Index i = 0; i < n; ++i) {
        double m = 0.0;
        for (int k = 0; k < Km1; ++k) m = std::max(m, eta(i, k));
        double denom = std::exp(-m);
        for (int k = 0; k < Km1; ++k) denom += std::exp(eta(i, k) - m);
        probs(i, 0) = std::exp(-m) / denom;
        for (int k = 0; k < Km1; ++k) probs(i, k + 1) = std::exp(eta(i, k) - m) / denom;
    }
    return probs;
}

} // namespace cci
