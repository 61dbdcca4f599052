#pragma once

#include "lrd/conv_model.hpp"
#include "lrd/solver.hpp"

#include <vector>

namespace lrd::detail {

/// Everything about a signal that stays fixed during a fit.
struct FitContext {
    Shape activation_shape;
    std::vector<DenseTensor> channels;
    std::vector<SpectralTensor> channel_spectra;
    FilterSpectra spectra;
};

FitContext make_context(const DenseTensor& signal, const Dictionary& dict);

void check_finite(const DenseTensor& signal);

using FactorSpectra = std::vector<std::vector<Eigen::MatrixXcd>>;

/// Forward model assembled from filter transfer functions and factor spectra.
DenseTensor model_from_spectra(const FitContext& ctx, const FactorSpectra& factor_spectra);

double regularizer(std::span<const KruskalTensor> activations, const SolverConfig& cfg);

ObjectiveTerms objective_terms(const DenseTensor& model, const DenseTensor& signal,
                               std::span<const KruskalTensor> activations, const SolverConfig& cfg,
                               const CompletionMask* mask);

/// Writes the new mode-`mode` factors into the activations and their spectra.
void update_mode(std::vector<KruskalTensor>& activations, FactorSpectra& factor_spectra, std::size_t mode,
                 const std::vector<Eigen::MatrixXd>& factors);

/// Real spatial factors from packed spectral factors.
std::vector<Eigen::MatrixXd> spatial_factors(const Eigen::VectorXcd& packed, const SpectralOperator& op);

std::vector<Eigen::MatrixXd> current_factors(const std::vector<KruskalTensor>& activations, std::size_t mode);

std::vector<KruskalTensor> prepare_activations(const DenseTensor& signal, const Dictionary& dict,
                                               const SolverConfig& cfg,
                                               std::optional<std::vector<KruskalTensor>> init,
                                               const Shape& activation_shape);

/// Relative objective change test shared by both drivers.
bool outer_converged(double previous, double current, double tol);

}  // namespace lrd::detail
