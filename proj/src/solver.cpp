#include "lrd/solver.hpp"

#include "fit_internal.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

namespace lrd {

void SolverConfig::validate() const
{
    auto require = [](bool ok, const char* what) {
        if (!ok)
            throw std::invalid_argument(what);
    };
    require(lambda >= 0.0, "lambda must be non-negative");
    require(alpha >= 0.0, "alpha must be non-negative");
    require(rank >= 1, "rank must be at least 1");
    require(rho_init > 0.0, "rho must be positive");
    require(tol_primal > 0.0 && tol_dual > 0.0 && tol_outer > 0.0 && cg_tol > 0.0, "tolerances must be positive");
    require(admm_iters >= 1 && outer_iters >= 1 && cg_max_iters >= 1, "iteration budgets must be positive");
}

AdmmState AdmmState::warm_start(const std::vector<Eigen::MatrixXd>& factors, double rho)
{
    AdmmState s;
    s.x = factors;
    s.y = factors;
    s.u.reserve(factors.size());
    for (const auto& f : factors)
        s.u.push_back(Eigen::MatrixXd::Zero(f.rows(), f.cols()));
    s.rho = rho;
    return s;
}

CompletionMask::CompletionMask(Shape shape, std::vector<std::uint8_t> observed)
    : shape_(std::move(shape)), observed_(std::move(observed))
{
    if (observed_.size() != shape_.total_elements())
        throw ShapeError("mask length does not match shape " + shape_.to_string());
    if (count_observed() == 0)
        throw std::invalid_argument("mask has no observed entries");
}

CompletionMask CompletionMask::all_observed(const Shape& shape)
{
    return CompletionMask(shape, std::vector<std::uint8_t>(shape.total_elements(), 1));
}

std::size_t CompletionMask::count_observed() const
{
    std::size_t n = 0;
    for (auto v : observed_)
        n += v != 0;
    return n;
}

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& v, double gamma)
{
    if (gamma < 0.0)
        throw std::invalid_argument("soft_threshold: gamma must be non-negative");
    return v.unaryExpr([gamma](double x) {
        const double mag = std::abs(x) - gamma;
        return mag > 0.0 ? std::copysign(mag, x) : 0.0;
    });
}

ModeSystem::ModeSystem(const SpectralOperator& op, const Eigen::VectorXcd& s_hat, SpectrumSymmetry symmetry)
    : rows_(op.rows()),
      rank_(op.rank()),
      num_filters_(op.num_filters()),
      block_(op.num_filters() * op.rank()),
      symmetry_(symmetry)
{
    if (static_cast<std::size_t>(s_hat.size()) != op.output_size())
        throw ShapeError("mode system: signal spectrum length " + std::to_string(s_hat.size()) + ", expected " +
                         std::to_string(op.output_size()));
    const std::size_t bins = symmetry == SpectrumSymmetry::Hermitian ? rows_ / 2 + 1 : rows_;
    const std::size_t lambda = op.lambda();
    gram_.reserve(bins);
    rhs_.reserve(bins);
    Eigen::VectorXcd s_bin(static_cast<Eigen::Index>(op.num_channels() * lambda));
    for (std::size_t i = 0; i < bins; ++i) {
        const Eigen::MatrixXcd a = bin_operator(op, i);
        for (std::size_t c = 0; c < op.num_channels(); ++c)
            for (std::size_t l = 0; l < lambda; ++l)
                s_bin(static_cast<Eigen::Index>(c * lambda + l)) =
                    s_hat(static_cast<Eigen::Index>(c * rows_ * lambda + l * rows_ + i));
        gram_.push_back(a.adjoint() * a);
        rhs_.push_back(a.adjoint() * s_bin);
    }
}

Eigen::VectorXcd ModeSystem::solve(const Eigen::VectorXcd& z_hat, double rho)
{
    if (!(rho > 0.0))
        throw std::invalid_argument("mode solve needs a positive regularizer");
    if (static_cast<std::size_t>(z_hat.size()) != rows_ * block_)
        throw ShapeError("mode system: shortcut vector has wrong length");
    if (rho != cached_rho_) {
        factorized_.clear();
        factorized_.reserve(gram_.size());
        for (std::size_t i = 0; i < gram_.size(); ++i) {
            Eigen::MatrixXcd g = gram_[i];
            g.diagonal().array() += rho;
            factorized_.emplace_back(g);
            if (factorized_.back().info() != Eigen::Success)
                throw SingularBlock("normal block " + std::to_string(i) + " is not positive definite");
        }
        cached_rho_ = rho;
    }

    auto at = [this](std::size_t m, std::size_t r, std::size_t i) {
        return static_cast<Eigen::Index>(m * rank_ * rows_ + r * rows_ + i);
    };
    Eigen::VectorXcd x(z_hat.size());
    Eigen::VectorXcd b(static_cast<Eigen::Index>(block_));
    for (std::size_t i = 0; i < gram_.size(); ++i) {
        for (std::size_t m = 0; m < num_filters_; ++m)
            for (std::size_t r = 0; r < rank_; ++r)
                b(static_cast<Eigen::Index>(m * rank_ + r)) = rho * z_hat(at(m, r, i));
        b += rhs_[i];
        Eigen::VectorXcd sol = factorized_[i].solve(b);
        const std::size_t mirror = (rows_ - i) % rows_;
        if (symmetry_ == SpectrumSymmetry::Hermitian && mirror == i)
            sol = sol.real().cast<Complex>();
        for (std::size_t m = 0; m < num_filters_; ++m)
            for (std::size_t r = 0; r < rank_; ++r) {
                const Complex v = sol(static_cast<Eigen::Index>(m * rank_ + r));
                x(at(m, r, i)) = v;
                if (symmetry_ == SpectrumSymmetry::Hermitian && mirror != i)
                    x(at(m, r, mirror)) = std::conj(v);
            }
    }
    return x;
}

Eigen::VectorXcd solve_mode_quadratic(const SpectralOperator& op, const Eigen::VectorXcd& s_hat,
                                      const Eigen::VectorXcd& z_hat, double rho, SpectrumSymmetry symmetry)
{
    ModeSystem system(op, s_hat, symmetry);
    return system.solve(z_hat, rho);
}

Eigen::VectorXcd solve_mode_l2(const SpectralOperator& op, const Eigen::VectorXcd& s_hat, double alpha,
                               SpectrumSymmetry symmetry)
{
    return solve_mode_quadratic(op, s_hat, Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(op.input_size())), alpha,
                                symmetry);
}

namespace detail {

void check_finite(const DenseTensor& signal)
{
    for (double v : signal.values())
        if (!std::isfinite(v))
            throw std::invalid_argument("signal contains non-finite values");
}

FitContext make_context(const DenseTensor& signal, const Dictionary& dict)
{
    Shape activation_shape = dict.activation_shape(signal.shape());
    std::vector<DenseTensor> channels = split_channels(signal, dict.num_channels());
    std::vector<SpectralTensor> spectra;
    spectra.reserve(channels.size());
    for (const auto& c : channels)
        spectra.push_back(dft_nd(c));
    FilterSpectra transfer = filter_spectra(dict, activation_shape);
    return {std::move(activation_shape), std::move(channels), std::move(spectra), std::move(transfer)};
}

DenseTensor model_from_spectra(const FitContext& ctx, const FactorSpectra& factor_spectra)
{
    const Shape& shape = ctx.activation_shape;
    std::vector<SpectralTensor> k_hat;
    k_hat.reserve(factor_spectra.size());
    for (const auto& f : factor_spectra)
        k_hat.push_back(reconstruct_factors<Complex>(shape, f));
    std::vector<DenseTensor> out;
    for (std::size_t c = 0; c < ctx.spectra.num_channels; ++c) {
        SpectralTensor acc(shape);
        for (std::size_t m = 0; m < ctx.spectra.num_filters; ++m) {
            const auto& h = ctx.spectra.transfer[m * ctx.spectra.num_channels + c];
            for (std::size_t l = 0; l < acc.size(); ++l)
                acc[l] += h[l] * k_hat[m][l];
        }
        out.push_back(idft_nd(acc));
    }
    return out.size() == 1 ? std::move(out.front()) : merge_channels(out);
}

double regularizer(std::span<const KruskalTensor> activations, const SolverConfig& cfg)
{
    double sum = 0.0;
    for (const auto& k : activations)
        for (const auto& f : k.factors())
            sum += cfg.regularization == Regularization::L1 ? f.cwiseAbs().sum() : f.squaredNorm();
    return cfg.regularization == Regularization::L1 ? cfg.lambda * sum : 0.5 * cfg.alpha * sum;
}

ObjectiveTerms objective_terms(const DenseTensor& model, const DenseTensor& signal,
                               std::span<const KruskalTensor> activations, const SolverConfig& cfg,
                               const CompletionMask* mask)
{
    if (!(model.shape() == signal.shape()))
        throw ShapeError("model and signal shapes differ");
    if (mask && !(mask->shape() == signal.shape()))
        throw ShapeError("mask shape does not match signal");
    double data = 0.0;
    for (std::size_t l = 0; l < signal.size(); ++l) {
        if (mask && !mask->observed(l))
            continue;
        const double d = model[l] - signal[l];
        data += d * d;
    }
    ObjectiveTerms t;
    t.data = 0.5 * data;
    t.regularizer = regularizer(activations, cfg);
    t.total = t.data + t.regularizer;
    return t;
}

void update_mode(std::vector<KruskalTensor>& activations, FactorSpectra& factor_spectra, std::size_t mode,
                 const std::vector<Eigen::MatrixXd>& factors)
{
    for (std::size_t m = 0; m < activations.size(); ++m) {
        activations[m].set_factor(mode, factors[m]);
        factor_spectra[m][mode] = dft_factor(factors[m], mode).matrix;
    }
}

std::vector<Eigen::MatrixXd> spatial_factors(const Eigen::VectorXcd& packed, const SpectralOperator& op)
{
    const auto spectral = unpack_factors(packed, op.rows(), op.rank(), op.num_filters());
    std::vector<Eigen::MatrixXd> out;
    out.reserve(spectral.size());
    for (const auto& s : spectral)
        out.push_back(idft_factor({op.mode(), s}));
    return out;
}

std::vector<Eigen::MatrixXd> current_factors(const std::vector<KruskalTensor>& activations, std::size_t mode)
{
    std::vector<Eigen::MatrixXd> out;
    out.reserve(activations.size());
    for (const auto& k : activations)
        out.push_back(k.factor(mode));
    return out;
}

std::vector<KruskalTensor> prepare_activations(const DenseTensor& signal, const Dictionary& dict,
                                               const SolverConfig& cfg,
                                               std::optional<std::vector<KruskalTensor>> init,
                                               const Shape& activation_shape)
{
    if (!init)
        return initialize_activations(signal, dict, cfg);
    if (init->size() != dict.num_filters())
        throw ShapeError("initial activations: expected " + std::to_string(dict.num_filters()));
    for (const auto& k : *init)
        if (!(k.shape() == activation_shape) || k.rank() != cfg.rank)
            throw ShapeError("initial activations do not match the signal shape and rank");
    return std::move(*init);
}

bool outer_converged(double previous, double current, double tol)
{
    if (current == 0.0)
        return true;
    return std::abs(previous - current) <= tol * std::abs(previous);
}

}  // namespace detail

ObjectiveTerms objective(const DenseTensor& signal, const Dictionary& dict, std::span<const KruskalTensor> activations,
                         const SolverConfig& cfg, const CompletionMask* mask)
{
    return detail::objective_terms(forward_model(dict, activations), signal, activations, cfg, mask);
}

std::vector<KruskalTensor> initialize_activations(const DenseTensor& signal, const Dictionary& dict,
                                                  const SolverConfig& cfg)
{
    const Shape shape = dict.activation_shape(signal.shape());
    double norm2 = 0.0;
    for (double v : signal.values())
        norm2 += v * v;
    const double scale = std::pow(std::sqrt(norm2) / static_cast<double>(dict.num_filters() * cfg.rank),
                                  1.0 / static_cast<double>(shape.order()));
    std::mt19937_64 rng(cfg.seed);
    auto uniform = [&rng] { return static_cast<double>(rng() >> 11) * 0x1.0p-53 - 0.5; };
    std::vector<KruskalTensor> out;
    out.reserve(dict.num_filters());
    for (std::size_t m = 0; m < dict.num_filters(); ++m) {
        std::vector<Eigen::MatrixXd> factors;
        for (std::size_t n = 0; n < shape.order(); ++n) {
            Eigen::MatrixXd f(static_cast<Eigen::Index>(shape.dim(n)), static_cast<Eigen::Index>(cfg.rank));
            for (Eigen::Index l = 0; l < f.size(); ++l)
                f.data()[l] = scale * uniform();
            factors.push_back(std::move(f));
        }
        out.emplace_back(shape, std::move(factors));
    }
    return out;
}

std::vector<Eigen::MatrixXd> data_gradient(const DenseTensor& signal, const Dictionary& dict,
                                           std::span<const KruskalTensor> activations, std::size_t mode)
{
    const detail::FitContext ctx = detail::make_context(signal, dict);
    const auto factor_spectra = activation_spectra(activations);
    const SpectralOperator op(ctx.spectra, factor_spectra, mode);
    std::vector<Eigen::MatrixXcd> current;
    for (const auto& f : factor_spectra)
        current.push_back(f[mode]);
    const Eigen::VectorXcd residual =
        apply_w(op, pack_factors(current)) - unfold_signal_spectrum(ctx.channel_spectra, mode);
    return detail::spatial_factors(apply_w_adjoint(op, residual), op);
}

FitResult lrd_fit(const DenseTensor& signal, const Dictionary& dict, const SolverConfig& cfg,
                  std::optional<std::vector<KruskalTensor>> init)
{
    cfg.validate();
    detail::check_finite(signal);
    if (cfg.regularization == Regularization::L2 && !(cfg.alpha > 0.0))
        throw std::invalid_argument("the l2 path needs alpha > 0");
    const auto start = std::chrono::steady_clock::now();

    const detail::FitContext ctx = detail::make_context(signal, dict);
    std::vector<KruskalTensor> activations =
        detail::prepare_activations(signal, dict, cfg, std::move(init), ctx.activation_shape);
    auto factor_spectra = activation_spectra(activations);
    const std::size_t order = ctx.activation_shape.order();

    std::vector<std::optional<AdmmState>> admm(order);
    SolveReport report;
    auto evaluate = [&] {
        return detail::objective_terms(detail::model_from_spectra(ctx, factor_spectra), signal, activations, cfg,
                                       nullptr);
    };
    double previous = evaluate().total;
    report.mode_objectives.push_back(previous);

    for (std::size_t sweep = 0; sweep < cfg.outer_iters; ++sweep) {
        double before_mode = previous;
        for (std::size_t n = 0; n < order; ++n) {
            const SpectralOperator op(ctx.spectra, factor_spectra, n);
            const Eigen::VectorXcd s_hat = unfold_signal_spectrum(ctx.channel_spectra, n);
            std::vector<Eigen::MatrixXd> factors;
            if (cfg.regularization == Regularization::L2) {
                const Eigen::VectorXcd x = solve_mode_l2(op, s_hat, cfg.alpha, SpectrumSymmetry::Hermitian);
                factors = detail::spatial_factors(x, op);
                report.inner_iterations.push_back(1);
            } else {
                if (!admm[n])
                    admm[n] = AdmmState::warm_start(detail::current_factors(activations, n), cfg.rho_init);
                AdmmResult result = solve_mode_admm(op, s_hat, cfg, std::move(*admm[n]));
                report.inner_iterations.push_back(result.state.iterations);
                factors = std::move(result.factors);
                admm[n] = std::move(result.state);
            }
            detail::update_mode(activations, factor_spectra, n, factors);
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
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return {std::move(activations), std::move(report)};
}

}  // namespace lrd
