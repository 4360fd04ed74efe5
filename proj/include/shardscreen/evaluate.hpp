#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <string>
#include <vector>

namespace shardscreen {

struct OlsFit {
    double intercept = 0.0;
    Eigen::VectorXd coef;
    bool ridged = false;  // design was rank deficient
};

/// Least squares with an intercept, solved on centered data by a
/// column-pivoted QR; a rank-deficient design falls back to ridge 1e-8.
OlsFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// sqrt(mean((y - intercept - x coef)^2))
double rmse(const OlsFit& fit, const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

struct Evaluation {
    std::vector<std::string> features;
    std::size_t train_rows = 0;
    std::size_t test_rows = 0;
    double rmse = 0.0;
    bool ridged = false;
};

/// Fits on rows [0, train_rows) of the named columns and reports RMSE on the
/// remaining rows. Throws InvalidArgument when either part is empty.
Evaluation evaluate_split(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                          std::size_t train_rows, std::vector<std::string> names);

} // namespace shardscreen
