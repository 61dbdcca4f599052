#pragma once

#include "lrd/solver.hpp"
#include "lrd/tensor.hpp"

#include <cstdint>
#include <limits>
#include <span>

namespace lrd {

inline constexpr double kDefaultNonzeroThreshold = 1e-6;

struct MetricReport {
    double psnr_db = std::numeric_limits<double>::infinity();  ///< +inf for identical inputs
    double mse = 0.0;
    double cr = std::numeric_limits<double>::infinity();  ///< +inf when nnz == 0
    std::size_t nnz = 0;
    double l1 = 0.0;  ///< sum of |x| over all factor entries
    double threshold_eps = kDefaultNonzeroThreshold;
};

/// Mean squared elementwise error.
double mse(const DenseTensor& reference, const DenseTensor& estimate);

/// 10 log10(peak^2 / MSE) in dB; +infinity when the inputs are identical.
double psnr(const DenseTensor& reference, const DenseTensor& estimate, double peak = 1.0);

struct CompressionStats {
    std::size_t nnz = 0;
    double l1 = 0.0;
    double cr = std::numeric_limits<double>::infinity();
};

/// Counts factor entries with |x| > eps_rel * max|x| over every activation
/// and mode; cr = total signal elements / nnz.
CompressionStats compression_ratio(std::span<const KruskalTensor> activations, const Shape& signal_shape,
                                   double eps_rel = kDefaultNonzeroThreshold);

MetricReport metric_report(const DenseTensor& reference, const DenseTensor& estimate, double peak,
                           std::span<const KruskalTensor> activations, double eps_rel = kDefaultNonzeroThreshold);

/// Marks exactly round(fraction * total) entries unobserved, picked by a
/// seeded Fisher-Yates shuffle of the linear indices.
CompletionMask generate_mask(const Shape& shape, double missing_fraction, std::uint64_t seed);

}  // namespace lrd
