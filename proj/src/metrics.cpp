#include "lrd/metrics.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace lrd {

double mse(const DenseTensor& reference, const DenseTensor& estimate)
{
    if (!(reference.shape() == estimate.shape()))
        throw ShapeError("metric inputs differ in shape: " + reference.shape().to_string() + " vs " +
                         estimate.shape().to_string());
    double sum = 0.0;
    for (std::size_t l = 0; l < reference.size(); ++l) {
        const double d = reference[l] - estimate[l];
        sum += d * d;
    }
    return sum / static_cast<double>(reference.size());
}

double psnr(const DenseTensor& reference, const DenseTensor& estimate, double peak)
{
    if (!(peak > 0.0))
        throw std::invalid_argument("psnr peak must be positive");
    const double err = mse(reference, estimate);
    if (err == 0.0)
        return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(peak * peak / err);
}

CompressionStats compression_ratio(std::span<const KruskalTensor> activations, const Shape& signal_shape,
                                   double eps_rel)
{
    if (eps_rel < 0.0)
        throw std::invalid_argument("nonzero threshold must be non-negative");
    double max_abs = 0.0;
    CompressionStats stats;
    for (const auto& k : activations)
        for (const auto& f : k.factors()) {
            if (f.size() > 0)
                max_abs = std::max(max_abs, f.cwiseAbs().maxCoeff());
            stats.l1 += f.cwiseAbs().sum();
        }
    const double threshold = eps_rel * max_abs;
    for (const auto& k : activations)
        for (const auto& f : k.factors())
            stats.nnz += static_cast<std::size_t>((f.array().abs() > threshold).count());
    if (stats.nnz > 0)
        stats.cr = static_cast<double>(signal_shape.total_elements()) / static_cast<double>(stats.nnz);
    return stats;
}

MetricReport metric_report(const DenseTensor& reference, const DenseTensor& estimate, double peak,
                           std::span<const KruskalTensor> activations, double eps_rel)
{
    MetricReport r;
    r.mse = mse(reference, estimate);
    r.psnr_db = psnr(reference, estimate, peak);
    const CompressionStats c = compression_ratio(activations, reference.shape(), eps_rel);
    r.nnz = c.nnz;
    r.l1 = c.l1;
    r.cr = c.cr;
    r.threshold_eps = eps_rel;
    return r;
}

CompletionMask generate_mask(const Shape& shape, double missing_fraction, std::uint64_t seed)
{
    if (!(missing_fraction >= 0.0 && missing_fraction < 1.0))
        throw std::invalid_argument("missing fraction must lie in [0, 1)");
    const std::size_t total = shape.total_elements();
    const auto missing = static_cast<std::size_t>(std::llround(missing_fraction * static_cast<double>(total)));
    if (missing >= total)
        throw std::invalid_argument("missing fraction leaves no observed entries");

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = total - 1; i > 0; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i);
        std::swap(order[i], order[pick(rng)]);
    }
    std::vector<std::uint8_t> observed(total, 1);
    for (std::size_t k = 0; k < missing; ++k)
        observed[order[k]] = 0;
    return CompletionMask(shape, std::move(observed));
}

}  // namespace lrd
