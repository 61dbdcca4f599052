#include "lrd/conv_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace lrd {

Dictionary::Dictionary(Shape support, std::size_t channels, std::vector<DenseTensor> filters)
    : support_(std::move(support)), channels_(channels), num_filters_(0), filters_(std::move(filters))
{
    if (channels_ == 0)
        throw ShapeError("dictionary needs at least one channel");
    if (filters_.empty() || filters_.size() % channels_ != 0)
        throw ShapeError("dictionary filter count must be a positive multiple of the channel count");
    for (const auto& f : filters_)
        if (!(f.shape() == support_))
            throw ShapeError("dictionary filters must share the support " + support_.to_string());
    num_filters_ = filters_.size() / channels_;
}

Shape Dictionary::activation_shape(const Shape& signal_shape) const
{
    const std::size_t order = support_.order();
    std::vector<std::size_t> dims;
    if (channels_ == 1) {
        if (signal_shape.order() != order)
            throw ShapeError("signal " + signal_shape.to_string() + " does not match filter order " +
                             std::to_string(order));
        dims = signal_shape.dims();
    } else {
        if (signal_shape.order() != order + 1 || signal_shape.dim(order) != channels_)
            throw ShapeError("signal " + signal_shape.to_string() + " must have " + std::to_string(order) +
                             " modes plus a trailing channel mode of extent " + std::to_string(channels_));
        dims.assign(signal_shape.dims().begin(), signal_shape.dims().end() - 1);
    }
    bool smaller = false;
    for (std::size_t n = 0; n < order; ++n) {
        if (support_.dim(n) > dims[n])
            throw ShapeError("filter support " + support_.to_string() + " exceeds signal " + signal_shape.to_string());
        smaller = smaller || support_.dim(n) < dims[n];
    }
    if (!smaller)
        throw ShapeError("filter support must be smaller than the signal in at least one mode");
    return Shape(std::move(dims));
}

Shape Dictionary::signal_shape(const Shape& activation_shape) const
{
    return channels_ == 1 ? activation_shape : activation_shape.append(channels_);
}

Dictionary random_dictionary(const Shape& support, std::size_t num_filters, std::size_t channels, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<DenseTensor> filters;
    filters.reserve(num_filters * channels);
    for (std::size_t k = 0; k < num_filters * channels; ++k) {
        DenseTensor f(support);
        double norm2 = 0.0;
        for (auto& v : f.data()) {
            v = normal(rng);
            norm2 += v * v;
        }
        const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
        for (auto& v : f.data())
            v *= inv;
        filters.push_back(std::move(f));
    }
    return Dictionary(support, channels, std::move(filters));
}

std::vector<KruskalTensor> random_activations(const Shape& shape, std::size_t num_filters, std::size_t rank,
                                              std::uint64_t seed)
{
    if (rank == 0)
        throw ShapeError("activation rank must be positive");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<KruskalTensor> out;
    out.reserve(num_filters);
    for (std::size_t m = 0; m < num_filters; ++m) {
        std::vector<Eigen::MatrixXd> factors;
        for (std::size_t n = 0; n < shape.order(); ++n) {
            Eigen::MatrixXd f(static_cast<Eigen::Index>(shape.dim(n)), static_cast<Eigen::Index>(rank));
            for (Eigen::Index j = 0; j < f.cols(); ++j)
                for (Eigen::Index i = 0; i < f.rows(); ++i)
                    f(i, j) = normal(rng);
            factors.push_back(std::move(f));
        }
        out.emplace_back(shape, std::move(factors));
    }
    return out;
}

Dictionary fixed_filter_bank(const Shape& support, std::size_t num_filters, std::size_t channels)
{
    const std::size_t total = support.total_elements();
    if (channels == 0 || num_filters == 0 || num_filters % channels != 0)
        throw ShapeError("fixed filter bank size must be a positive multiple of the channel count");
    const std::size_t bases = num_filters / channels;
    if (bases > total)
        throw ShapeError("a " + support.to_string() + " support has only " + std::to_string(total) + " DCT filters");

    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), 0);
    auto frequency = [&](std::size_t l) {
        const auto k = support.multi_index(l);
        return std::accumulate(k.begin(), k.end(), std::size_t{0});
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return frequency(a) < frequency(b); });

    std::vector<DenseTensor> filters;
    filters.reserve(num_filters * channels);
    for (std::size_t m = 0; m < num_filters; ++m) {
        const auto k = support.multi_index(order[m / channels]);
        DenseTensor basis(support);
        for (std::size_t l = 0; l < total; ++l) {
            const auto x = support.multi_index(l);
            double v = 1.0;
            for (std::size_t n = 0; n < support.order(); ++n) {
                const double len = static_cast<double>(support.dim(n));
                const double c = k[n] == 0 ? std::sqrt(1.0 / len) : std::sqrt(2.0 / len);
                v *= c * std::cos(std::numbers::pi * (2.0 * static_cast<double>(x[n]) + 1.0) *
                                  static_cast<double>(k[n]) / (2.0 * len));
            }
            basis[l] = v;
        }
        for (std::size_t c = 0; c < channels; ++c)
            filters.push_back(c == m % channels ? basis : DenseTensor(support));
    }
    return Dictionary(support, channels, std::move(filters));
}

DenseTensor pad_filter(const DenseTensor& filter, const Shape& shape)
{
    const Shape& support = filter.shape();
    if (support.order() != shape.order())
        throw ShapeError("filter order does not match signal order");
    for (std::size_t n = 0; n < shape.order(); ++n)
        if (support.dim(n) > shape.dim(n))
            throw ShapeError("filter support " + support.to_string() + " exceeds " + shape.to_string());
    DenseTensor padded(shape);
    for (std::size_t l = 0; l < filter.size(); ++l) {
        const auto idx = support.multi_index(l);
        padded[shape.linear_index(idx)] = filter[l];
    }
    return padded;
}

namespace {

SpectralTensor transfer_function(const DenseTensor& filter, const Shape& shape)
{
    SpectralTensor h = dft_nd(pad_filter(filter, shape));
    const double scale = std::sqrt(static_cast<double>(shape.total_elements()));
    for (auto& v : h.data())
        v *= scale;
    return h;
}

void check_activations(const Dictionary& dict, std::span<const KruskalTensor> activations)
{
    if (activations.size() != dict.num_filters())
        throw ShapeError("expected " + std::to_string(dict.num_filters()) + " activations, got " +
                         std::to_string(activations.size()));
    for (const auto& k : activations)
        if (!(k.shape() == activations.front().shape()) || k.rank() != activations.front().rank())
            throw ShapeError("activations must share shape and rank");
    dict.activation_shape(dict.signal_shape(activations.front().shape()));
}

}  // namespace

DenseTensor circular_convolve(const Shape& signal_shape, const DenseTensor& filter, const DenseTensor& activation)
{
    if (!(activation.shape() == signal_shape))
        throw ShapeError("activation shape does not match signal shape");
    const SpectralTensor h = transfer_function(filter, signal_shape);
    SpectralTensor k = dft_nd(activation);
    for (std::size_t l = 0; l < k.size(); ++l)
        k[l] *= h[l];
    return idft_nd(k);
}

DenseTensor forward_model(const Dictionary& dict, std::span<const KruskalTensor> activations)
{
    check_activations(dict, activations);
    const Shape& shape = activations.front().shape();
    const FilterSpectra spectra = filter_spectra(dict, shape);
    std::vector<SpectralTensor> k_hat;
    k_hat.reserve(activations.size());
    for (const auto& k : activations)
        k_hat.push_back(dft_nd(kruskal_reconstruct(k)));

    std::vector<DenseTensor> channels;
    for (std::size_t c = 0; c < dict.num_channels(); ++c) {
        SpectralTensor acc(shape);
        for (std::size_t m = 0; m < dict.num_filters(); ++m) {
            const auto& h = spectra.transfer[m * dict.num_channels() + c];
            for (std::size_t l = 0; l < acc.size(); ++l)
                acc[l] += h[l] * k_hat[m][l];
        }
        channels.push_back(idft_nd(acc));
    }
    return dict.num_channels() == 1 ? std::move(channels.front()) : merge_channels(channels);
}

FilterSpectra filter_spectra(const Dictionary& dict, const Shape& activation_shape)
{
    dict.activation_shape(dict.signal_shape(activation_shape));
    FilterSpectra out{activation_shape, dict.num_filters(), dict.num_channels(), {}};
    out.transfer.reserve(dict.filters().size());
    for (const auto& f : dict.filters())
        out.transfer.push_back(transfer_function(f, activation_shape));
    return out;
}

SpectralOperator::SpectralOperator(const FilterSpectra& spectra,
                                   const std::vector<std::vector<Eigen::MatrixXcd>>& factor_spectra,
                                   std::size_t mode)
    : shape_(spectra.shape),
      mode_(mode),
      rows_(0),
      lambda_(0),
      num_filters_(spectra.num_filters),
      num_channels_(spectra.num_channels),
      rank_(0)
{
    if (mode >= shape_.order())
        throw ShapeError("operator mode out of range");
    if (factor_spectra.size() != num_filters_)
        throw ShapeError("need spectral factors for every filter");
    rows_ = shape_.dim(mode);
    lambda_ = shape_.lambda(mode);
    rank_ = static_cast<std::size_t>(factor_spectra.front().at(mode).cols());

    transfer_.reserve(spectra.transfer.size());
    for (const auto& h : spectra.transfer)
        transfer_.push_back(unfold(h, mode).matrix);

    q_hat_.reserve(num_filters_);
    for (const auto& factors : factor_spectra) {
        if (factors.size() != shape_.order())
            throw ShapeError("spectral factor count does not match tensor order");
        for (std::size_t k = 0; k < factors.size(); ++k)
            if (static_cast<std::size_t>(factors[k].rows()) != shape_.dim(k) ||
                static_cast<std::size_t>(factors[k].cols()) != rank_)
                throw ShapeError("spectral factor " + std::to_string(k) + " has wrong dimensions");
        if (shape_.order() == 1)
            q_hat_.push_back(Eigen::MatrixXcd::Ones(1, static_cast<Eigen::Index>(rank_)));
        else
            q_hat_.push_back(build_q<Complex>(factors, mode));
    }
}

std::vector<std::vector<Eigen::MatrixXcd>> activation_spectra(std::span<const KruskalTensor> activations)
{
    std::vector<std::vector<Eigen::MatrixXcd>> out;
    out.reserve(activations.size());
    for (const auto& k : activations) {
        std::vector<Eigen::MatrixXcd> per_mode;
        per_mode.reserve(k.order());
        for (std::size_t n = 0; n < k.order(); ++n)
            per_mode.push_back(dft_factor(k.factor(n), n).matrix);
        out.push_back(std::move(per_mode));
    }
    return out;
}

SpectralOperator make_spectral_operator(const Dictionary& dict, std::span<const KruskalTensor> activations,
                                        std::size_t mode)
{
    check_activations(dict, activations);
    return SpectralOperator(filter_spectra(dict, activations.front().shape()), activation_spectra(activations), mode);
}

Eigen::VectorXcd apply_w(const SpectralOperator& op, const Eigen::VectorXcd& xhat)
{
    if (static_cast<std::size_t>(xhat.size()) != op.input_size())
        throw ShapeError("apply_w: input length " + std::to_string(xhat.size()) + ", expected " +
                         std::to_string(op.input_size()));
    const auto rows = static_cast<Eigen::Index>(op.rows());
    const auto lambda = static_cast<Eigen::Index>(op.lambda());
    const auto rank = static_cast<Eigen::Index>(op.rank());
    Eigen::VectorXcd out = Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(op.output_size()));
    for (std::size_t m = 0; m < op.num_filters(); ++m) {
        Eigen::Map<const Eigen::MatrixXcd> x(xhat.data() + static_cast<Eigen::Index>(m) * rows * rank, rows, rank);
        const Eigen::MatrixXcd activation = x * op.q_hat(m).transpose();
        for (std::size_t c = 0; c < op.num_channels(); ++c) {
            Eigen::Map<Eigen::MatrixXcd> y(out.data() + static_cast<Eigen::Index>(c) * rows * lambda, rows, lambda);
            y += op.transfer(m, c).cwiseProduct(activation);
        }
    }
    return out;
}

Eigen::VectorXcd apply_w_adjoint(const SpectralOperator& op, const Eigen::VectorXcd& yhat)
{
    if (static_cast<std::size_t>(yhat.size()) != op.output_size())
        throw ShapeError("apply_w_adjoint: input length " + std::to_string(yhat.size()) + ", expected " +
                         std::to_string(op.output_size()));
    const auto rows = static_cast<Eigen::Index>(op.rows());
    const auto lambda = static_cast<Eigen::Index>(op.lambda());
    const auto rank = static_cast<Eigen::Index>(op.rank());
    Eigen::VectorXcd out(static_cast<Eigen::Index>(op.input_size()));
    for (std::size_t m = 0; m < op.num_filters(); ++m) {
        Eigen::MatrixXcd weighted = Eigen::MatrixXcd::Zero(rows, lambda);
        for (std::size_t c = 0; c < op.num_channels(); ++c) {
            Eigen::Map<const Eigen::MatrixXcd> y(yhat.data() + static_cast<Eigen::Index>(c) * rows * lambda, rows,
                                                 lambda);
            weighted += op.transfer(m, c).conjugate().cwiseProduct(y);
        }
        Eigen::Map<Eigen::MatrixXcd> x(out.data() + static_cast<Eigen::Index>(m) * rows * rank, rows, rank);
        x = weighted * op.q_hat(m).conjugate();
    }
    return out;
}

Eigen::MatrixXcd bin_operator(const SpectralOperator& op, std::size_t bin)
{
    const auto lambda = static_cast<Eigen::Index>(op.lambda());
    const auto rank = static_cast<Eigen::Index>(op.rank());
    Eigen::MatrixXcd a(static_cast<Eigen::Index>(op.num_channels()) * lambda,
                       static_cast<Eigen::Index>(op.num_filters()) * rank);
    const auto i = static_cast<Eigen::Index>(bin);
    for (std::size_t m = 0; m < op.num_filters(); ++m)
        for (std::size_t c = 0; c < op.num_channels(); ++c)
            a.block(static_cast<Eigen::Index>(c) * lambda, static_cast<Eigen::Index>(m) * rank, lambda, rank) =
                op.transfer(m, c).row(i).transpose().asDiagonal() * op.q_hat(m);
    return a;
}

Eigen::MatrixXcd gram_block(const SpectralOperator& op, std::size_t bin)
{
    if (bin >= op.rows())
        throw ShapeError("gram_block: frequency bin out of range");
    const Eigen::MatrixXcd a = bin_operator(op, bin);
    return a.adjoint() * a;
}

std::vector<Eigen::MatrixXcd> normal_blocks(const SpectralOperator& op, double reg)
{
    std::vector<Eigen::MatrixXcd> blocks;
    blocks.reserve(op.rows());
    for (std::size_t i = 0; i < op.rows(); ++i) {
        Eigen::MatrixXcd g = gram_block(op, i);
        g.diagonal().array() += reg;
        blocks.push_back(std::move(g));
    }
    return blocks;
}

Eigen::VectorXcd pack_factors(const std::vector<Eigen::MatrixXcd>& per_filter)
{
    Eigen::Index total = 0;
    for (const auto& x : per_filter)
        total += x.size();
    Eigen::VectorXcd out(total);
    Eigen::Index offset = 0;
    for (const auto& x : per_filter) {
        out.segment(offset, x.size()) = Eigen::Map<const Eigen::VectorXcd>(x.data(), x.size());
        offset += x.size();
    }
    return out;
}

std::vector<Eigen::MatrixXcd> unpack_factors(const Eigen::VectorXcd& packed, std::size_t rows, std::size_t rank,
                                             std::size_t num_filters)
{
    const auto r = static_cast<Eigen::Index>(rows);
    const auto k = static_cast<Eigen::Index>(rank);
    if (static_cast<std::size_t>(packed.size()) != rows * rank * num_filters)
        throw ShapeError("unpack_factors: length mismatch");
    std::vector<Eigen::MatrixXcd> out;
    out.reserve(num_filters);
    for (std::size_t m = 0; m < num_filters; ++m)
        out.push_back(Eigen::Map<const Eigen::MatrixXcd>(packed.data() + static_cast<Eigen::Index>(m) * r * k, r, k));
    return out;
}

Eigen::VectorXcd unfold_signal_spectrum(const std::vector<SpectralTensor>& channel_spectra, std::size_t mode)
{
    std::vector<Eigen::MatrixXcd> unfolded;
    unfolded.reserve(channel_spectra.size());
    for (const auto& s : channel_spectra)
        unfolded.push_back(unfold(s, mode).matrix);
    return pack_factors(unfolded);
}

std::vector<DenseTensor> split_channels(const DenseTensor& signal, std::size_t channels)
{
    if (channels == 1)
        return {signal};
    const Shape& shape = signal.shape();
    if (shape.order() < 2 || shape.dim(shape.order() - 1) != channels)
        throw ShapeError("signal " + shape.to_string() + " lacks a trailing channel mode of extent " +
                         std::to_string(channels));
    const Shape inner = shape.drop_last();
    const std::size_t block = inner.total_elements();
    std::vector<DenseTensor> out;
    out.reserve(channels);
    for (std::size_t c = 0; c < channels; ++c)
        out.emplace_back(inner, std::vector<double>(signal.values().begin() + static_cast<std::ptrdiff_t>(c * block),
                                                    signal.values().begin() +
                                                        static_cast<std::ptrdiff_t>((c + 1) * block)));
    return out;
}

DenseTensor merge_channels(const std::vector<DenseTensor>& channels)
{
    if (channels.empty())
        throw ShapeError("merge_channels: no channels");
    const Shape& inner = channels.front().shape();
    std::vector<double> data;
    data.reserve(inner.total_elements() * channels.size());
    for (const auto& c : channels) {
        if (!(c.shape() == inner))
            throw ShapeError("merge_channels: channel shapes differ");
        data.insert(data.end(), c.values().begin(), c.values().end());
    }
    return DenseTensor(inner.append(channels.size()), std::move(data));
}

}  // namespace lrd
