#pragma once

#include "lrd/tensor.hpp"
#include "lrd/transform.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace lrd {

/// M filters (times C channel variants) sharing one small support L_1 x ... x L_N.
///
/// With C > 1 the channel is not a tensor mode: signals carry it as an extra
/// trailing mode of extent C, and output channel c is sum_m D_{m,c} * K_m with
/// the activations K_m shared across channels.
class Dictionary {
public:
    /// `filters` is m-major, c-minor: index m * channels + c.
    Dictionary(Shape support, std::size_t channels, std::vector<DenseTensor> filters);

    const Shape& support() const { return support_; }
    std::size_t num_filters() const { return num_filters_; }
    std::size_t num_channels() const { return channels_; }
    const DenseTensor& filter(std::size_t m, std::size_t c = 0) const { return filters_.at(m * channels_ + c); }
    const std::vector<DenseTensor>& filters() const { return filters_; }

    /// Shape of the activation maps for a signal of `signal_shape`
    /// (drops the channel mode when C > 1). Throws ShapeError when the
    /// support does not fit inside the signal.
    Shape activation_shape(const Shape& signal_shape) const;
    /// Inverse of activation_shape.
    Shape signal_shape(const Shape& activation_shape) const;

private:
    Shape support_;
    std::size_t channels_;
    std::size_t num_filters_;
    std::vector<DenseTensor> filters_;
};

/// Gaussian random filters, each (m, c) variant scaled to unit Frobenius norm.
Dictionary random_dictionary(const Shape& support, std::size_t num_filters, std::size_t channels, std::uint64_t seed);

/// Deterministic bank of separable DCT-II basis filters, lowest total
/// frequency first (the first one is the constant filter). For C > 1,
/// filter m carries basis m / C on channel m % C and zeros elsewhere.
Dictionary fixed_filter_bank(const Shape& support, std::size_t num_filters, std::size_t channels = 1);

/// M rank-R Kruskal activations with standard normal factor entries.
std::vector<KruskalTensor> random_activations(const Shape& shape, std::size_t num_filters, std::size_t rank,
                                              std::uint64_t seed);

/// Zero-pads `filter` into `shape`, filter origin at the tensor origin.
DenseTensor pad_filter(const DenseTensor& filter, const Shape& shape);

/// Circular N-D convolution of a small filter with an activation of `signal_shape`.
DenseTensor circular_convolve(const Shape& signal_shape, const DenseTensor& filter, const DenseTensor& activation);

/// sum_m D_m * [[X_m^(1), ..., X_m^(N)]], one output channel per dictionary channel.
DenseTensor forward_model(const Dictionary& dict, std::span<const KruskalTensor> activations);

/// Per-(m, c) filter transfer functions on the activation grid: the
/// unnormalized DFT of the zero-padded filter, so that the unitary spectrum
/// of D * K is H .* (unitary spectrum of K).
struct FilterSpectra {
    Shape shape;
    std::size_t num_filters;
    std::size_t num_channels;
    std::vector<SpectralTensor> transfer;  ///< m-major, c-minor
};

FilterSpectra filter_spectra(const Dictionary& dict, const Shape& activation_shape);

/// The per-mode operator W = [W_1 ... W_M], W_m = diag(H_m) [Q_m (x) I].
///
/// Input vectors stack vec(Xhat_m) (I_n x R, column-major) for m = 0..M-1.
/// Output vectors stack vec of the mode-n unfolded spectrum (I_n x Lambda)
/// for c = 0..C-1.
class SpectralOperator {
public:
    /// `factor_spectra[m][k]` is the column-wise unitary DFT of factor k of
    /// activation m. Entry `mode` is not read.
    SpectralOperator(const FilterSpectra& spectra, const std::vector<std::vector<Eigen::MatrixXcd>>& factor_spectra,
                     std::size_t mode);

    std::size_t mode() const { return mode_; }
    std::size_t rows() const { return rows_; }
    std::size_t lambda() const { return lambda_; }
    std::size_t num_filters() const { return num_filters_; }
    std::size_t num_channels() const { return num_channels_; }
    std::size_t rank() const { return rank_; }
    std::size_t input_size() const { return num_filters_ * rank_ * rows_; }
    std::size_t output_size() const { return num_channels_ * lambda_ * rows_; }
    const Shape& shape() const { return shape_; }

    /// Mode-n unfolded transfer function of filter (m, c), I_n x Lambda.
    const Eigen::MatrixXcd& transfer(std::size_t m, std::size_t c) const { return transfer_[m * num_channels_ + c]; }
    /// Lambda x R spectral Khatri-Rao chain of activation m (ones for N = 1).
    const Eigen::MatrixXcd& q_hat(std::size_t m) const { return q_hat_[m]; }

private:
    Shape shape_;
    std::size_t mode_;
    std::size_t rows_;
    std::size_t lambda_;
    std::size_t num_filters_;
    std::size_t num_channels_;
    std::size_t rank_;
    std::vector<Eigen::MatrixXcd> transfer_;
    std::vector<Eigen::MatrixXcd> q_hat_;
};

/// Spectral factors of every activation, indexed [m][n].
std::vector<std::vector<Eigen::MatrixXcd>> activation_spectra(std::span<const KruskalTensor> activations);

SpectralOperator make_spectral_operator(const Dictionary& dict, std::span<const KruskalTensor> activations,
                                        std::size_t mode);

Eigen::VectorXcd apply_w(const SpectralOperator& op, const Eigen::VectorXcd& xhat);
Eigen::VectorXcd apply_w_adjoint(const SpectralOperator& op, const Eigen::VectorXcd& yhat);

/// Rows of W that touch mode-n frequency `bin`, as a (C Lambda) x (M R) matrix.
Eigen::MatrixXcd bin_operator(const SpectralOperator& op, std::size_t bin);

/// W^H W restricted to mode-n frequency bin i: an MR x MR block indexed by
/// (m, r) -> m * R + r. W^H W is block diagonal over i.
Eigen::MatrixXcd gram_block(const SpectralOperator& op, std::size_t bin);

/// The I_n Hermitian positive-definite blocks of W^H W + reg I.
std::vector<Eigen::MatrixXcd> normal_blocks(const SpectralOperator& op, double reg);

/// Stack per-activation I_n x R matrices into the operator's input layout.
Eigen::VectorXcd pack_factors(const std::vector<Eigen::MatrixXcd>& per_filter);
std::vector<Eigen::MatrixXcd> unpack_factors(const Eigen::VectorXcd& packed, std::size_t rows, std::size_t rank,
                                             std::size_t num_filters);

/// Unitary spectrum of each signal channel, unfolded along `mode` and stacked
/// in the operator's output layout.
Eigen::VectorXcd unfold_signal_spectrum(const std::vector<SpectralTensor>& channel_spectra, std::size_t mode);

/// Splits a signal into channels (trailing mode) when C > 1.
std::vector<DenseTensor> split_channels(const DenseTensor& signal, std::size_t channels);
DenseTensor merge_channels(const std::vector<DenseTensor>& channels);

}  // namespace lrd
