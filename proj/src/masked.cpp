#include "lrd/solver.hpp"

#include "fit_internal.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace lrd {

MaskedModeOperator::MaskedModeOperator(const SpectralOperator& op, const CompletionMask& mask) : op_(op)
{
    const Shape& shape = op.shape();
    const bool match = op.num_channels() == 1
                           ? mask.shape() == shape
                           : mask.shape().order() == shape.order() + 1 && mask.shape().drop_last() == shape &&
                                 mask.shape().dim(shape.order()) == op.num_channels();
    if (!match)
        throw ShapeError("mask " + mask.shape().to_string() + " does not match the operator's signal shape");
    weights_.reserve(mask.values().size());
    for (auto v : mask.values())
        weights_.push_back(v ? 1.0 : 0.0);
}

Eigen::VectorXcd MaskedModeOperator::apply(const Eigen::VectorXcd& xhat) const
{
    const Eigen::VectorXcd spectral = apply_w(op_, xhat);
    const auto rows = static_cast<Eigen::Index>(op_.rows());
    const auto lambda = static_cast<Eigen::Index>(op_.lambda());
    const std::size_t block = op_.shape().total_elements();
    Eigen::VectorXcd out(static_cast<Eigen::Index>(block * op_.num_channels()));
    for (std::size_t c = 0; c < op_.num_channels(); ++c) {
        Matricization<Complex> m{
            Eigen::Map<const Eigen::MatrixXcd>(spectral.data() + static_cast<Eigen::Index>(c) * rows * lambda, rows,
                                               lambda),
            op_.mode(), op_.shape()};
        const SpectralTensor spatial = idft_nd_complex(fold(m));
        for (std::size_t l = 0; l < block; ++l)
            out(static_cast<Eigen::Index>(c * block + l)) = weights_[c * block + l] * spatial[l];
    }
    return out;
}

Eigen::VectorXcd MaskedModeOperator::adjoint(const Eigen::VectorXcd& y) const
{
    const std::size_t block = op_.shape().total_elements();
    if (static_cast<std::size_t>(y.size()) != block * op_.num_channels())
        throw ShapeError("masked adjoint: input length mismatch");
    std::vector<Eigen::MatrixXcd> unfolded;
    unfolded.reserve(op_.num_channels());
    for (std::size_t c = 0; c < op_.num_channels(); ++c) {
        SpectralTensor t(op_.shape());
        for (std::size_t l = 0; l < block; ++l)
            t[l] = weights_[c * block + l] * y(static_cast<Eigen::Index>(c * block + l));
        unfolded.push_back(unfold(dft_nd(t), op_.mode()).matrix);
    }
    return apply_w_adjoint(op_, pack_factors(unfolded));
}

Eigen::VectorXcd MaskedModeOperator::normal(const Eigen::VectorXcd& xhat, double alpha) const
{
    return adjoint(apply(xhat)) + alpha * xhat;
}

namespace {

// Spectra of real factors satisfy v(i) = conj(v(I - i)) per column. The normal
// operator preserves that subspace, so projecting onto it only strips roundoff.
void project_conjugate_symmetric(Eigen::VectorXcd& v, std::size_t rows)
{
    const auto n = static_cast<Eigen::Index>(rows);
    for (Eigen::Index base = 0; base < v.size(); base += n) {
        v(base) = v(base).real();
        for (Eigen::Index i = 1; 2 * i <= n; ++i) {
            const Complex mean = 0.5 * (v(base + i) + std::conj(v(base + n - i)));
            v(base + i) = mean;
            v(base + n - i) = std::conj(mean);
        }
    }
}

}  // namespace

CgResult solve_mode_masked(const MaskedModeOperator& t, const Eigen::VectorXcd& observed, double alpha,
                           const Eigen::VectorXcd& x0, double tol, std::size_t max_iters)
{
    if (static_cast<std::size_t>(x0.size()) != t.op().input_size())
        throw ShapeError("masked solve: initial guess has wrong length");
    const std::size_t rows = t.op().rows();
    Eigen::VectorXcd b = t.adjoint(observed);
    project_conjugate_symmetric(b, rows);
    const double b_norm = b.norm();
    CgResult result;
    if (b_norm == 0.0 && x0.norm() == 0.0) {
        result.x = x0;
        result.converged = true;
        return result;
    }
    const double scale = b_norm > 0.0 ? b_norm : 1.0;

    Eigen::VectorXcd x = x0;
    project_conjugate_symmetric(x, rows);
    Eigen::VectorXcd r = t.normal(x, alpha);
    project_conjugate_symmetric(r, rows);
    r = b - r;
    Eigen::VectorXcd p = r;
    double rs = r.squaredNorm();
    result.x = x;
    result.relative_residual = std::sqrt(rs) / scale;
    if (result.relative_residual <= tol) {
        result.converged = true;
        return result;
    }
    for (std::size_t k = 0; k < max_iters; ++k) {
        Eigen::VectorXcd ap = t.normal(p, alpha);
        project_conjugate_symmetric(ap, rows);
        const double curvature = p.dot(ap).real();
        if (!(curvature > 0.0))
            break;
        const double step = rs / curvature;
        x += step * p;
        r -= step * ap;
        const double rs_next = r.squaredNorm();
        result.iterations = k + 1;
        const double rel = std::sqrt(rs_next) / scale;
        if (rel < result.relative_residual) {
            result.relative_residual = rel;
            result.x = x;
        }
        if (rel <= tol) {
            result.converged = true;
            break;
        }
        p = r + (rs_next / rs) * p;
        rs = rs_next;
    }
    return result;
}

MaskedFitResult lrd_fit_masked(const DenseTensor& signal, const CompletionMask& mask, const Dictionary& dict,
                               const SolverConfig& cfg, std::optional<std::vector<KruskalTensor>> init)
{
    cfg.validate();
    if (cfg.regularization != Regularization::L2)
        throw std::invalid_argument("the masked path supports the l2 regularization only");
    if (!(cfg.alpha > 0.0))
        throw std::invalid_argument("the masked path needs alpha > 0");
    if (!(mask.shape() == signal.shape()))
        throw ShapeError("mask " + mask.shape().to_string() + " does not match signal " + signal.shape().to_string());
    const auto start = std::chrono::steady_clock::now();

    // Unobserved entries never enter the fit; zero them so they cannot leak.
    DenseTensor observed_signal(signal.shape());
    for (std::size_t l = 0; l < signal.size(); ++l)
        if (mask.observed(l))
            observed_signal[l] = signal[l];
    detail::check_finite(observed_signal);

    const detail::FitContext ctx = detail::make_context(observed_signal, dict);
    std::vector<KruskalTensor> activations =
        detail::prepare_activations(observed_signal, dict, cfg, std::move(init), ctx.activation_shape);
    auto factor_spectra = activation_spectra(activations);
    const std::size_t order = ctx.activation_shape.order();
    const Eigen::VectorXcd observed =
        Eigen::Map<const Eigen::VectorXd>(observed_signal.values().data(),
                                          static_cast<Eigen::Index>(observed_signal.size()))
            .cast<Complex>();

    SolveReport report;
    auto evaluate = [&] {
        return detail::objective_terms(detail::model_from_spectra(ctx, factor_spectra), observed_signal, activations,
                                       cfg, &mask);
    };
    double previous = evaluate().total;
    report.mode_objectives.push_back(previous);

    for (std::size_t sweep = 0; sweep < cfg.outer_iters; ++sweep) {
        double before_mode = previous;
        for (std::size_t n = 0; n < order; ++n) {
            const SpectralOperator op(ctx.spectra, factor_spectra, n);
            const MaskedModeOperator t(op, mask);
            std::vector<Eigen::MatrixXcd> warm;
            warm.reserve(factor_spectra.size());
            for (const auto& f : factor_spectra)
                warm.push_back(f[n]);
            const CgResult cg = solve_mode_masked(t, observed, cfg.alpha, pack_factors(warm), cfg.cg_tol,
                                                  cfg.cg_max_iters);
            report.cg_warning = report.cg_warning || !cg.converged;
            report.inner_iterations.push_back(cg.iterations);
            detail::update_mode(activations, factor_spectra, n, detail::spatial_factors(cg.x, op));
            const double after = evaluate().total;
            if (after > before_mode)
                ++report.objective_increases;
            report.mode_objectives.push_back(after);
            before_mode = after;
        }
        const ObjectiveTerms terms = evaluate();
        report.objective.push_back(terms.total);
        report.data_term.push_back(terms.data);
        report.regularizer_term.push_back(terms.regularizer);
        report.outer_iterations = sweep + 1;
        const bool done = detail::outer_converged(previous, terms.total, cfg.tol_outer);
        previous = terms.total;
        if (done) {
            report.converged = true;
            break;
        }
    }
    DenseTensor completed = detail::model_from_spectra(ctx, factor_spectra);
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(activations), std::move(completed), std::move(report)};
}

}  // namespace lrd
