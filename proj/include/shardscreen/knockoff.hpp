#pragma once

#include "shardscreen/shard_engine.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace shardscreen {

struct KnockoffTolerances {
    /// Smallest eigenvalue of the Gram matrix treated as nonsingular.
    static constexpr double eig_floor = 1e-8;
    /// Ridge added to a near-singular Gram matrix before renormalizing.
    static constexpr double ridge = 1e-6;
    /// Allowed negative eigenvalue mass in PSD checks.
    static constexpr double psd_tol = 1e-9;
};

/// Column-centered block scaled to unit Euclidean column norms, with its
/// Gram matrix (unit diagonal up to rounding).
struct ScaledBlock {
    Eigen::MatrixXd scaled;
    Eigen::MatrixXd gram;
};

/// Throws InsufficientRows when rows < 2 * cols, ConstantColumn(j) for a
/// zero-variance column.
ScaledBlock scale_block(const Eigen::Ref<const Eigen::MatrixXd>& block);

double min_eigenvalue(const Eigen::MatrixXd& symmetric);

/// (gram + delta I) / (1 + delta): keeps the unit diagonal.
Eigen::MatrixXd ridge_gram(const Eigen::MatrixXd& gram, double delta = KnockoffTolerances::ridge);

/// Equicorrelated choice s_j = min(2 lambda_min, 1). Throws NearSingularGram
/// when lambda_min <= eig_floor.
Eigen::VectorXd knockoff_s_equi(const Eigen::MatrixXd& gram);

enum class SConstruction { Equicorrelated, Sdp };

struct SdpSolution {
    Eigen::VectorXd s;
    bool fell_back = false;  // equicorrelated s returned instead
    int sweeps = 0;
};

/// Approximately minimizes sum_j (1 - s_j) over 0 <= s_j <= 1 with
/// 2 Sigma - diag(s) PSD, by coordinate ascent started from the
/// equicorrelated point. Each coordinate moves to (nearly) its largest
/// feasible value, computed from the Schur complement of the current
/// slack matrix. Not a certified SDP optimum.
SdpSolution knockoff_s_sdp(const Eigen::MatrixXd& gram);

/// Fixed-design second-order knockoffs
///   knockoffs = X (I - Sigma^{-1} diag(s)) + U C
/// with U orthonormal, orthogonal to X and to the intercept, and
/// C^T C = 2 diag(s) - diag(s) Sigma^{-1} diag(s).
struct KnockoffModel {
    Eigen::MatrixXd gram;         // Sigma
    Eigen::VectorXd s;
    Eigen::MatrixXd knockoffs;    // rows x d
    Eigen::MatrixXd ortho_basis;  // U, rows x d
    Eigen::MatrixXd c_factor;     // upper-triangular C, d x d
};

/// `scaled` must come from scale_block; `gram` is its Gram matrix, possibly
/// ridged. U is drawn from `seed`. Throws InsufficientRows when
/// rows < 2d + 1 and NearSingularGram when gram is not positive definite.
KnockoffModel generate_knockoffs(const Eigen::MatrixXd& scaled, const Eigen::MatrixXd& gram,
                                 const Eigen::VectorXd& s, std::uint64_t seed);
KnockoffModel generate_knockoffs(const Eigen::MatrixXd& scaled, const Eigen::VectorXd& s,
                                 std::uint64_t seed);

/// Frobenius norms of the three Gram-identity residuals, each divided by
/// ||Sigma||_F, plus lambda_min(2 Sigma - diag(s)).
struct GramResiduals {
    double knock_knock = 0.0;  // X~'X~ - Sigma
    double real_knock = 0.0;   // X'X~ - (Sigma - diag s)
    double basis_real = 0.0;   // U'X
    double min_eig_slack = 0.0;
};
GramResiduals gram_residuals(const Eigen::MatrixXd& scaled, const KnockoffModel& model);

/// Second-stage data of one shard: the real selected columns and their
/// knockoffs, sharing response and conditional.
struct SecondStageShard {
    Eigen::VectorXd response;
    Eigen::VectorXd conditional;
    Eigen::MatrixXd real;
    Eigen::MatrixXd knock;
};

struct KnockoffStats {
    std::vector<double> psi;
    std::vector<double> omega_real;
    std::vector<double> omega_knock;
};

/// psi_j = omega(Y, X_j, Z) - omega(Y, X~_j, Z), both utilities computed
/// with the same distributed estimator over the same shards.
KnockoffStats knockoff_stats(std::span<const SecondStageShard> shards, Method method);

/// Pooled form: rows are split into `num_shards` contiguous blocks using the
/// shard_dataset remainder rule.
KnockoffStats knockoff_stats(const Eigen::VectorXd& response, const Eigen::VectorXd& conditional,
                             const Eigen::MatrixXd& real, const Eigen::MatrixXd& knock,
                             Method method, std::size_t num_shards);

/// #{psi <= -t} / #{psi >= t}; +inf when nothing reaches t.
double fdp_hat(std::span<const double> psi, double t);

struct FdrSelection {
    double alpha = 0.0;
    double threshold = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> selected;  // positions into psi, ascending
    double fdp_hat_at_threshold = std::numeric_limits<double>::infinity();
};

/// Smallest t among the nonzero |psi_j| with
/// (1 + #{psi <= -t}) / #{psi >= t} <= alpha; +inf and an empty selection
/// when no candidate qualifies.
FdrSelection select_threshold(std::span<const double> psi, double alpha);

} // namespace shardscreen
