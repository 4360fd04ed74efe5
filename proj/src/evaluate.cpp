#include "shardscreen/evaluate.hpp"
#include "shardscreen/error.hpp"

#include <cmath>

namespace shardscreen {

namespace {
constexpr double kRidge = 1e-8;
}

OlsFit fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    if (x.rows() != y.size() || y.size() == 0) {
        throw Error(ErrorCode::InvalidArgument, "design and response rows disagree or are empty");
    }
    OlsFit fit;
    const double ymean = y.mean();
    if (x.cols() == 0) {
        fit.intercept = ymean;
        return fit;
    }
    const Eigen::RowVectorXd xmean = x.colwise().mean();
    const Eigen::MatrixXd xc = x.rowwise() - xmean;
    const Eigen::VectorXd yc = y.array() - ymean;

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(xc);
    if (qr.rank() == xc.cols()) {
        fit.coef = qr.solve(yc);
    } else {
        Eigen::MatrixXd gram = xc.transpose() * xc;
        gram.diagonal().array() += kRidge;
        fit.coef = gram.ldlt().solve(xc.transpose() * yc);
        fit.ridged = true;
    }
    fit.intercept = ymean - xmean.dot(fit.coef);
    return fit;
}

double rmse(const OlsFit& fit, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    Eigen::VectorXd resid = y.array() - fit.intercept;
    if (fit.coef.size() > 0) resid -= x * fit.coef;
    return std::sqrt(resid.squaredNorm() / static_cast<double>(y.size()));
}

Evaluation evaluate_split(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                          std::size_t train_rows, std::vector<std::string> names) {
    const auto n = static_cast<std::size_t>(response.size());
    if (train_rows == 0 || train_rows >= n) {
        throw Error(ErrorCode::InvalidArgument, "split must leave both training and test rows, got " +
                                                    std::to_string(train_rows) + " of " +
                                                    std::to_string(n));
    }
    const auto tr = static_cast<Eigen::Index>(train_rows);
    const auto te = static_cast<Eigen::Index>(n - train_rows);
    const OlsFit fit = fit_ols(design.topRows(tr), response.head(tr));

    Evaluation ev;
    ev.features = std::move(names);
    ev.train_rows = train_rows;
    ev.test_rows = n - train_rows;
    ev.rmse = rmse(fit, design.bottomRows(te), response.tail(te));
    ev.ridged = fit.ridged;
    return ev;
}

} // namespace shardscreen
