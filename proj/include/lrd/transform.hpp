#pragma once

#include "lrd/tensor.hpp"

namespace lrd {

/// Complex DFT-domain counterpart of a DenseTensor, same layout.
using SpectralTensor = BasicTensor<Complex>;

/// Column-wise unitary 1-D DFT of an I_n x R factor.
struct SpectralFactor {
    std::size_t mode;
    Eigen::MatrixXcd matrix;
};

/// Unitary forward DFT along every mode (scaled 1/sqrt(I_n) per mode).
SpectralTensor dft_nd(const DenseTensor& t);
SpectralTensor dft_nd(const SpectralTensor& t);

/// Unitary inverse DFT along every mode, keeping the complex result.
SpectralTensor idft_nd_complex(const SpectralTensor& s);

/// Unitary inverse DFT for spectra of real tensors. Throws
/// ImaginaryResidueTooLarge if max|imag| > 1e-9 max|real|.
DenseTensor idft_nd(const SpectralTensor& s);

SpectralFactor dft_factor(const Eigen::MatrixXd& x, std::size_t mode);
/// Inverse of dft_factor; residue-checked like idft_nd.
Eigen::MatrixXd idft_factor(const SpectralFactor& f);

/// Column-wise unitary 1-D transforms of complex matrices.
Eigen::MatrixXcd dft_columns(const Eigen::MatrixXcd& x);
Eigen::MatrixXcd idft_columns(const Eigen::MatrixXcd& x);

/// Real part of `values`, after checking the imaginary residue.
Eigen::MatrixXd real_part_checked(const Eigen::MatrixXcd& values, const char* context);

inline constexpr double kImaginaryResidueTolerance = 1e-9;

}  // namespace lrd
