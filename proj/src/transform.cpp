#include "lrd/transform.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace lrd {

namespace {

// FFTW planning is not thread-safe; executing a finished plan is. Plans are
// created with FFTW_ESTIMATE so the chosen algorithm, and hence every result
// bit, is the same from run to run.
class PlanCache {
public:
    static PlanCache& instance()
    {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(const std::vector<int>& extents, int howmany, int sign)
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto key = std::make_tuple(extents, howmany, sign);
        if (auto it = plans_.find(key); it != plans_.end())
            return it->second;
        int dist = 1;
        for (int e : extents)
            dist *= e;
        auto* scratch = fftw_alloc_complex(static_cast<std::size_t>(dist) * howmany);
        fftw_plan plan = fftw_plan_many_dft(static_cast<int>(extents.size()), extents.data(), howmany, scratch,
                                            nullptr, 1, dist, scratch, nullptr, 1, dist, sign,
                                            FFTW_ESTIMATE | FFTW_UNALIGNED);
        fftw_free(scratch);
        plans_.emplace(key, plan);
        return plan;
    }

private:
    std::mutex mutex_;
    std::map<std::tuple<std::vector<int>, int, int>, fftw_plan> plans_;
};

void transform_in_place(Complex* data, const std::vector<int>& extents, int howmany, int sign)
{
    fftw_plan plan = PlanCache::instance().get(extents, howmany, sign);
    auto* p = reinterpret_cast<fftw_complex*>(data);
    fftw_execute_dft(plan, p, p);
}

// FFTW is row-major, storage here is mode-0 fastest, so the extents go in reverse.
std::vector<int> fftw_extents(const Shape& shape)
{
    std::vector<int> extents(shape.dims().rbegin(), shape.dims().rend());
    return extents;
}

SpectralTensor transform_nd(SpectralTensor t, int sign)
{
    transform_in_place(t.data().data(), fftw_extents(t.shape()), 1, sign);
    const double scale = 1.0 / std::sqrt(static_cast<double>(t.size()));
    for (auto& v : t.data())
        v *= scale;
    return t;
}

Eigen::MatrixXcd transform_columns(Eigen::MatrixXcd x, int sign)
{
    if (x.size() == 0)
        return x;
    transform_in_place(x.data(), {static_cast<int>(x.rows())}, static_cast<int>(x.cols()), sign);
    x *= 1.0 / std::sqrt(static_cast<double>(x.rows()));
    return x;
}

SpectralTensor to_complex(const DenseTensor& t)
{
    std::vector<Complex> data(t.values().begin(), t.values().end());
    return SpectralTensor(t.shape(), std::move(data));
}

}  // namespace

SpectralTensor dft_nd(const DenseTensor& t)
{
    return transform_nd(to_complex(t), FFTW_FORWARD);
}

SpectralTensor dft_nd(const SpectralTensor& t)
{
    return transform_nd(t, FFTW_FORWARD);
}

SpectralTensor idft_nd_complex(const SpectralTensor& s)
{
    return transform_nd(s, FFTW_BACKWARD);
}

DenseTensor idft_nd(const SpectralTensor& s)
{
    SpectralTensor spatial = idft_nd_complex(s);
    Eigen::Map<const Eigen::MatrixXcd> view(spatial.data().data(), static_cast<Eigen::Index>(spatial.size()), 1);
    Eigen::MatrixXd re = real_part_checked(view, "idft_nd");
    return DenseTensor(s.shape(), std::vector<double>(re.data(), re.data() + re.size()));
}

SpectralFactor dft_factor(const Eigen::MatrixXd& x, std::size_t mode)
{
    return {mode, transform_columns(x.cast<Complex>(), FFTW_FORWARD)};
}

Eigen::MatrixXd idft_factor(const SpectralFactor& f)
{
    return real_part_checked(transform_columns(f.matrix, FFTW_BACKWARD), "idft_factor");
}

Eigen::MatrixXcd dft_columns(const Eigen::MatrixXcd& x)
{
    return transform_columns(x, FFTW_FORWARD);
}

Eigen::MatrixXcd idft_columns(const Eigen::MatrixXcd& x)
{
    return transform_columns(x, FFTW_BACKWARD);
}

Eigen::MatrixXd real_part_checked(const Eigen::MatrixXcd& values, const char* context)
{
    double real_max = 0.0;
    double imag_max = 0.0;
    for (Eigen::Index i = 0; i < values.size(); ++i) {
        real_max = std::max(real_max, std::abs(values.data()[i].real()));
        imag_max = std::max(imag_max, std::abs(values.data()[i].imag()));
    }
    if (!(imag_max <= kImaginaryResidueTolerance * real_max) && imag_max != 0.0)
        throw ImaginaryResidueTooLarge(std::string(context) + ": imaginary residue " + std::to_string(imag_max) +
                                       " against real magnitude " + std::to_string(real_max));
    return values.real();
}

}  // namespace lrd
