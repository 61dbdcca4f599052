#include "lrd/solver.hpp"

#include "fit_internal.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lrd {

namespace {

// Residual balancing: rho moves by this factor when one residual exceeds
// the other by kBalanceRatio.
constexpr double kBalanceRatio = 10.0;
constexpr double kRhoScaling = 2.0;
// rho stays within [rho_init / kRhoRange, rho_init * kRhoRange].
constexpr double kRhoRange = 1e8;

double stacked_norm(const std::vector<Eigen::MatrixXd>& m)
{
    double s = 0.0;
    for (const auto& x : m)
        s += x.squaredNorm();
    return std::sqrt(s);
}

double ratio_or_zero(double num, double den)
{
    return den > 0.0 ? num / den : 0.0;
}

}  // namespace

AdmmResult solve_mode_admm(const SpectralOperator& op, const Eigen::VectorXcd& s_hat, const SolverConfig& cfg,
                           AdmmState state)
{
    cfg.validate();
    if (cfg.regularization != Regularization::L1)
        throw std::invalid_argument("solve_mode_admm needs the l1 regularization");
    const auto rows = static_cast<Eigen::Index>(op.rows());
    const auto rank = static_cast<Eigen::Index>(op.rank());
    const std::size_t filters = op.num_filters();
    if (state.y.empty()) {
        state = AdmmState::warm_start(
            std::vector<Eigen::MatrixXd>(filters, Eigen::MatrixXd::Zero(rows, rank)), cfg.rho_init);
    }
    if (state.y.size() != filters || state.u.size() != filters)
        throw ShapeError("ADMM state does not match the operator");
    for (std::size_t m = 0; m < filters; ++m)
        if (state.y[m].rows() != rows || state.y[m].cols() != rank || state.u[m].rows() != rows ||
            state.u[m].cols() != rank)
            throw ShapeError("ADMM state factor has wrong dimensions");
    if (!(state.rho > 0.0))
        state.rho = cfg.rho_init;

    ModeSystem system(op, s_hat, SpectrumSymmetry::Hermitian);
    const double rho_min = cfg.rho_init / kRhoRange;
    const double rho_max = cfg.rho_init * kRhoRange;

    state.iterations = 0;
    state.converged = false;
    state.primal_history.clear();
    state.dual_history.clear();
    std::vector<Eigen::MatrixXcd> z(filters);
    for (std::size_t k = 0; k < cfg.admm_iters; ++k) {
        for (std::size_t m = 0; m < filters; ++m)
            z[m] = dft_factor(state.y[m] - state.u[m], op.mode()).matrix;
        state.x = detail::spatial_factors(system.solve(pack_factors(z), state.rho), op);

        const std::vector<Eigen::MatrixXd> y_prev = state.y;
        const double gamma = cfg.lambda / state.rho;
        double primal2 = 0.0;
        double change2 = 0.0;
        for (std::size_t m = 0; m < filters; ++m) {
            state.y[m] = soft_threshold(state.x[m] + state.u[m], gamma);
            state.u[m] += state.x[m] - state.y[m];
            primal2 += (state.x[m] - state.y[m]).squaredNorm();
            change2 += (state.y[m] - y_prev[m]).squaredNorm();
        }
        const double primal = std::sqrt(primal2);
        const double change = std::sqrt(change2);
        const double norm_y = stacked_norm(state.y);
        const double rel_primal = ratio_or_zero(primal, std::max(stacked_norm(state.x), norm_y));
        const double rel_dual = ratio_or_zero(change, std::max(norm_y, stacked_norm(state.u)));
        state.primal_history.push_back(rel_primal);
        state.dual_history.push_back(rel_dual);
        ++state.iterations;
        if (rel_primal <= cfg.tol_primal && rel_dual <= cfg.tol_dual) {
            state.converged = true;
            break;
        }

        if (cfg.rho_adaptive) {
            const double dual = state.rho * change;
            double next = state.rho;
            if (primal > kBalanceRatio * dual)
                next = std::min(state.rho * kRhoScaling, rho_max);
            else if (dual > kBalanceRatio * primal)
                next = std::max(state.rho / kRhoScaling, rho_min);
            if (next != state.rho) {
                // U is the dual scaled by 1/rho.
                for (auto& u : state.u)
                    u *= state.rho / next;
                state.rho = next;
            }
        }
    }
    return {state.y, std::move(state)};
}

}  // namespace lrd
