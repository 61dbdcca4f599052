#pragma once

#include "lrd/conv_model.hpp"
#include "lrd/tensor.hpp"

#include <Eigen/Cholesky>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lrd {

enum class Regularization { L1, L2 };

/// Hyperparameters of a low-rank deconvolution fit.
struct SolverConfig {
    Regularization regularization = Regularization::L2;
    double lambda = 0.0;  ///< l1 weight (L1 path)
    double alpha = 1e-4;  ///< squared-l2 weight (L2 and masked paths)
    std::size_t rank = 3;

    double rho_init = 1.0;
    bool rho_adaptive = true;
    std::size_t admm_iters = 50;
    std::size_t outer_iters = 100;

    double tol_primal = 1e-4;
    double tol_dual = 1e-4;
    double tol_outer = 1e-6;

    double cg_tol = 1e-10;
    std::size_t cg_max_iters = 1000;

    std::uint64_t seed = 0;

    /// Throws std::invalid_argument on out-of-range values.
    void validate() const;
};

/// ADMM iterates for one mode: primary X, split copy Y and scaled dual U per filter.
struct AdmmState {
    std::vector<Eigen::MatrixXd> x;
    std::vector<Eigen::MatrixXd> y;
    std::vector<Eigen::MatrixXd> u;
    double rho = 1.0;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> primal_history;  ///< ||X - Y|| / max(||X||, ||Y||)
    std::vector<double> dual_history;    ///< ||Y - Y_prev|| / max(||Y||, ||U||)

    /// X = Y = `factors`, U = 0.
    static AdmmState warm_start(const std::vector<Eigen::MatrixXd>& factors, double rho);
};

struct SolveReport {
    std::vector<double> objective;         ///< total objective after each outer sweep
    std::vector<double> data_term;         ///< 1/2 ||model - S||^2 (observed entries only when masked)
    std::vector<double> regularizer_term;
    std::vector<double> mode_objectives;   ///< initial value, then one entry per mode solve
    std::vector<std::size_t> inner_iterations;  ///< ADMM or CG iterations per mode solve
    std::size_t outer_iterations = 0;
    std::size_t objective_increases = 0;   ///< mode solves that raised the objective
    bool converged = false;
    bool cg_warning = false;               ///< some CG solve stopped at cg_max_iters
    double wall_seconds = 0.0;
};

/// Observation pattern for completion; true marks an observed entry.
class CompletionMask {
public:
    CompletionMask(Shape shape, std::vector<std::uint8_t> observed);
    static CompletionMask all_observed(const Shape& shape);

    const Shape& shape() const { return shape_; }
    bool observed(std::size_t linear) const { return observed_[linear] != 0; }
    const std::vector<std::uint8_t>& values() const { return observed_; }
    std::size_t count_observed() const;

private:
    Shape shape_;
    std::vector<std::uint8_t> observed_;
};

/// sign(v) * max(0, |v| - gamma), elementwise.
Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& v, double gamma);

enum class SpectrumSymmetry {
    General,    ///< solve every frequency bin independently
    Hermitian,  ///< inputs are spectra of real data: solve bins 0..I_n/2 and mirror
};

/// Per-frequency factorization of [W^H W + rho I] x = W^H s + rho z.
///
/// The system is block diagonal over the mode-n frequency index, so it is
/// held as I_n dense MR x MR Hermitian blocks. Factorizations are cached for
/// the last rho.
class ModeSystem {
public:
    ModeSystem(const SpectralOperator& op, const Eigen::VectorXcd& s_hat,
               SpectrumSymmetry symmetry = SpectrumSymmetry::General);

    Eigen::VectorXcd solve(const Eigen::VectorXcd& z_hat, double rho);

    std::size_t rows() const { return rows_; }
    std::size_t block_size() const { return block_; }

private:
    std::size_t rows_;
    std::size_t rank_;
    std::size_t num_filters_;
    std::size_t block_;
    SpectrumSymmetry symmetry_;
    std::vector<Eigen::MatrixXcd> gram_;
    std::vector<Eigen::VectorXcd> rhs_;
    double cached_rho_ = -1.0;
    std::vector<Eigen::LLT<Eigen::MatrixXcd>> factorized_;
};

/// Exact minimizer of 1/2 ||W x - s||^2 + rho/2 ||x - z||^2.
Eigen::VectorXcd solve_mode_quadratic(const SpectralOperator& op, const Eigen::VectorXcd& s_hat,
                                      const Eigen::VectorXcd& z_hat, double rho,
                                      SpectrumSymmetry symmetry = SpectrumSymmetry::General);

/// Exact minimizer of 1/2 ||W x - s||^2 + alpha/2 ||x||^2.
Eigen::VectorXcd solve_mode_l2(const SpectralOperator& op, const Eigen::VectorXcd& s_hat, double alpha,
                               SpectrumSymmetry symmetry = SpectrumSymmetry::General);

struct AdmmResult {
    std::vector<Eigen::MatrixXd> factors;  ///< the sparse split variable Y
    AdmmState state;
};

/// ADMM for min 1/2 ||W x - s||^2 + lambda ||X||_1 over the mode-n factors of
/// every filter. `op` and `s_hat` must come from real data.
AdmmResult solve_mode_admm(const SpectralOperator& op, const Eigen::VectorXcd& s_hat, const SolverConfig& cfg,
                           AdmmState warm);

/// The masked per-mode operator T = P idft W and its adjoint. Outputs are
/// spatial, one block of the activation grid per channel in storage order.
class MaskedModeOperator {
public:
    MaskedModeOperator(const SpectralOperator& op, const CompletionMask& mask);

    Eigen::VectorXcd apply(const Eigen::VectorXcd& xhat) const;
    Eigen::VectorXcd adjoint(const Eigen::VectorXcd& y) const;
    /// T^H T x + alpha x
    Eigen::VectorXcd normal(const Eigen::VectorXcd& xhat, double alpha) const;

    const SpectralOperator& op() const { return op_; }

private:
    const SpectralOperator& op_;
    std::vector<double> weights_;
};

struct CgResult {
    Eigen::VectorXcd x;
    std::size_t iterations = 0;
    double relative_residual = 0.0;
    bool converged = false;
};

/// Conjugate gradient on [T^H T + alpha I] x = T^H s for real `observed` data.
/// Iterates are kept conjugate-symmetric along each factor column, since the
/// solution is the spectrum of a real factor. Returns the iterate with the
/// smallest residual when max_iters is hit.
CgResult solve_mode_masked(const MaskedModeOperator& t, const Eigen::VectorXcd& observed, double alpha,
                           const Eigen::VectorXcd& x0, double tol, std::size_t max_iters);

struct ObjectiveTerms {
    double data = 0.0;
    double regularizer = 0.0;
    double total = 0.0;
};

/// 1/2 ||sum_m D_m * K_m - S||^2 plus lambda sum ||X||_1 (L1) or
/// alpha/2 sum ||X||_F^2 (L2). With a mask only observed entries count.
ObjectiveTerms objective(const DenseTensor& signal, const Dictionary& dict, std::span<const KruskalTensor> activations,
                         const SolverConfig& cfg, const CompletionMask* mask = nullptr);

/// Seeded i.i.d. uniform [-0.5, 0.5] factors scaled by (||S||_F / (M R))^(1/N).
std::vector<KruskalTensor> initialize_activations(const DenseTensor& signal, const Dictionary& dict,
                                                  const SolverConfig& cfg);

/// Gradient of 1/2 ||sum_m D_m * K_m - S||^2 with respect to X_m^(mode), per m,
/// computed in the DFT domain.
std::vector<Eigen::MatrixXd> data_gradient(const DenseTensor& signal, const Dictionary& dict,
                                           std::span<const KruskalTensor> activations, std::size_t mode);

struct FitResult {
    std::vector<KruskalTensor> activations;
    SolveReport report;
};

/// Alternating per-mode minimization. Each sweep visits modes in ascending
/// order and solves the mode with ADMM (L1) or in closed form (L2).
FitResult lrd_fit(const DenseTensor& signal, const Dictionary& dict, const SolverConfig& cfg,
                  std::optional<std::vector<KruskalTensor>> init = std::nullopt);

struct MaskedFitResult {
    std::vector<KruskalTensor> activations;
    DenseTensor completed;
    SolveReport report;
};

/// Completion of the unobserved entries of `signal` with the L2 model; each
/// mode is solved by conjugate gradient on the masked normal equations.
MaskedFitResult lrd_fit_masked(const DenseTensor& signal, const CompletionMask& mask, const Dictionary& dict,
                               const SolverConfig& cfg,
                               std::optional<std::vector<KruskalTensor>> init = std::nullopt);

}  // namespace lrd
