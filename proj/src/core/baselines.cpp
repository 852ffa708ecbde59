#include "baselines.hpp"

#include "error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace fvbnn {

StackingModel fit_stacker(std::span<const double> bnn_means, std::span<const double> prior_means,
                          std::span<const double> labels, ConstantPriorFeature constant_prior) {
    const std::size_t n = labels.size();
    if (bnn_means.size() != n || prior_means.size() != n) {
        throw InputError("fit_stacker: inputs differ in length");
    }
    if (n < 3) throw DataError("fit_stacker: need at least 3 validation points");

    const bool prior_constant =
        std::all_of(prior_means.begin(), prior_means.end(), [&](double v) { return v == prior_means[0]; });
    const bool drop_prior = prior_constant && constant_prior == ConstantPriorFeature::Drop;

    Eigen::MatrixXd design(static_cast<Eigen::Index>(n), 3);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        design(r, 0) = bnn_means[i];
        design(r, 1) = drop_prior ? 0.0 : prior_means[i];
        design(r, 2) = 1.0;
        y[r] = labels[i];
    }
    Eigen::Vector3d coef = Eigen::Vector3d::Zero();
    if (drop_prior) {
        Eigen::MatrixXd reduced(design.rows(), 2);
        reduced << design.col(0), design.col(2);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(reduced);
        qr.setThreshold(1e-10);
        if (qr.rank() < 2) throw DataError("fit_stacker: BNN feature is constant");
        const Eigen::Vector2d c = qr.solve(y);
        coef << c[0], 0.0, c[1];
    } else {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        qr.setThreshold(1e-10);
        if (qr.rank() < 3) throw DataError("fit_stacker: stacking features are collinear");
        coef = qr.solve(y);
    }
    const Eigen::VectorXd residual = y - design * coef;

    StackingModel model{coef[0], coef[1], coef[2], residual.squaredNorm() / static_cast<double>(n)};
    if (!std::isfinite(model.residual_variance)) throw NumericalError("fit_stacker: non-finite fit");
    return model;
}

PosteriorPredictive predict_stacker(const StackingModel& model, double bnn_mean, double prior_mean) {
    return {model.w_bnn * bnn_mean + model.w_prior * prior_mean + model.intercept, 0.0,
            model.residual_variance};
}

}  // namespace fvbnn
