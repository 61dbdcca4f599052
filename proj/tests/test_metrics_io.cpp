#include "lrd/io.hpp"
#include "lrd/metrics.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cstring>
#include <filesystem>

using namespace lrd;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s)
{
    return std::vector<std::uint8_t>(s.begin(), s.end());
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::filesystem::path scratch(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / "lrd_metrics_io_test";
    std::filesystem::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST(Psnr, IdenticalIsInfinite)
{
    std::mt19937_64 rng(201);
    const DenseTensor a = oracle::random_tensor(Shape{4, 5}, rng);
    EXPECT_TRUE(std::isinf(psnr(a, a)));
    EXPECT_GT(psnr(a, a), 0.0);
}

TEST(Psnr, ConstantErrorAnalytic)
{
    std::mt19937_64 rng(202);
    const DenseTensor a = oracle::random_tensor(Shape{6, 7, 2}, rng);
    for (double c : {0.1, -0.1}) {
        DenseTensor b = a;
        for (auto& v : b.data())
            v += c;
        EXPECT_NEAR(mse(a, b), 0.01, 1e-15);
        EXPECT_NEAR(psnr(a, b, 1.0), 20.0, 1e-12);
    }
    DenseTensor b = a;
    for (auto& v : b.data())
        v += 0.5;
    EXPECT_NEAR(psnr(a, b, 2.0), 10.0 * std::log10(4.0 / 0.25), 1e-12);
}

TEST(Psnr, MatchesTwoPassOracle)
{
    std::mt19937_64 rng(203);
    const DenseTensor a = oracle::random_tensor(Shape{9, 8, 3}, rng);
    const DenseTensor b = oracle::random_tensor(Shape{9, 8, 3}, rng);
    std::vector<double> diff(a.size());
    for (std::size_t l = 0; l < a.size(); ++l)
        diff[l] = a[l] - b[l];
    double sum = 0.0;
    for (double d : diff)
        sum += d * d;
    const double expected_mse = sum / static_cast<double>(diff.size());
    EXPECT_NEAR(mse(a, b), expected_mse, 1e-12 * expected_mse);
    EXPECT_NEAR(psnr(a, b, 1.0), 10.0 * std::log10(1.0 / expected_mse), 1e-12);
}

TEST(Psnr, Errors)
{
    EXPECT_THROW(psnr(DenseTensor(Shape{2, 2}), DenseTensor(Shape{4})), ShapeError);
    EXPECT_THROW(psnr(DenseTensor(Shape{2}), DenseTensor(Shape{2}), 0.0), std::invalid_argument);
}

TEST(CompressionRatio, SurvivingEntries)
{
    const Shape signal{8, 8, 8};
    std::vector<Eigen::MatrixXd> f(3, Eigen::MatrixXd::Zero(8, 4));
    // 64 nonzero entries in total across the factors.
    f[0].leftCols(2).setOnes();
    f[1].leftCols(2).setConstant(-0.5);
    f[2].setConstant(0.25);
    const std::vector<KruskalTensor> acts{KruskalTensor(signal, f)};
    const CompressionStats c = compression_ratio(acts, signal);
    EXPECT_EQ(c.nnz, 64u);
    EXPECT_DOUBLE_EQ(c.cr, 8.0);
    EXPECT_DOUBLE_EQ(c.l1, 16.0 + 8.0 + 8.0);
}

TEST(CompressionRatio, DenseFactorsAllCount)
{
    std::mt19937_64 rng(204);
    const Shape s{5, 4, 3};
    const auto acts = oracle::random_activations(s, 3, 2, rng);
    const CompressionStats c = compression_ratio(acts, s, 0.0);
    EXPECT_EQ(c.nnz, 3u * (5 + 4 + 3) * 2);
}

TEST(CompressionRatio, AllZeroIsInfinite)
{
    const Shape s{4, 4};
    const std::vector<KruskalTensor> acts{KruskalTensor::zeros(s, 2)};
    const CompressionStats c = compression_ratio(acts, s);
    EXPECT_EQ(c.nnz, 0u);
    EXPECT_TRUE(std::isinf(c.cr));
}

TEST(CompressionRatio, ThresholdIsRelative)
{
    const Shape s{4};
    Eigen::MatrixXd f(4, 1);
    f << 1.0, 1e-7, 2e-6, -1e-5;
    const std::vector<KruskalTensor> acts{KruskalTensor(s, {f})};
    EXPECT_EQ(compression_ratio(acts, s).nnz, 3u);
    EXPECT_EQ(compression_ratio(acts, s, 1e-5).nnz, 1u);
    EXPECT_THROW(compression_ratio(acts, s, -1.0), std::invalid_argument);
}

TEST(CompressionRatio, PermutationInvariant)
{
    std::mt19937_64 rng(205);
    const Shape s{6, 5};
    auto acts = oracle::random_activations(s, 4, 2, rng);
    for (auto& k : acts)
        k.set_factor(0, soft_threshold(k.factor(0), 0.5));
    const CompressionStats a = compression_ratio(acts, s);
    std::reverse(acts.begin(), acts.end());
    const CompressionStats b = compression_ratio(acts, s);
    EXPECT_EQ(a.nnz, b.nnz);
    EXPECT_EQ(a.cr, b.cr);
}

TEST(MetricReport, Consistent)
{
    std::mt19937_64 rng(206);
    const Shape s{4, 4};
    const DenseTensor a = oracle::random_tensor(s, rng);
    const DenseTensor b = oracle::random_tensor(s, rng);
    const auto acts = oracle::random_activations(s, 2, 1, rng);
    const MetricReport r = metric_report(a, b, 2.0, acts);
    EXPECT_NEAR(r.psnr_db, 10.0 * std::log10(4.0 / r.mse), 1e-12);
    EXPECT_DOUBLE_EQ(r.cr, 16.0 / static_cast<double>(r.nnz));
}

TEST(Mask, FractionZeroKeepsEverything)
{
    EXPECT_EQ(generate_mask(Shape{7, 3}, 0.0, 1).count_observed(), 21u);
}

TEST(Mask, ExactCount)
{
    EXPECT_EQ(generate_mask(Shape{10, 10}, 0.5, 3).count_observed(), 50u);
    EXPECT_EQ(generate_mask(Shape{3, 3}, 0.3, 3).count_observed(), 6u);
}

TEST(Mask, Deterministic)
{
    const Shape s{16, 16};
    EXPECT_EQ(generate_mask(s, 0.5, 42).values(), generate_mask(s, 0.5, 42).values());
    EXPECT_NE(generate_mask(s, 0.5, 42).values(), generate_mask(s, 0.5, 43).values());
}

TEST(Mask, Errors)
{
    EXPECT_THROW(generate_mask(Shape{4}, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(generate_mask(Shape{4}, -0.1, 0), std::invalid_argument);
    EXPECT_THROW(generate_mask(Shape{4}, 0.9, 0), std::invalid_argument);
}

TEST(TensorFile, ByteLayout)
{
    DenseTensor t(Shape{2, 2});
    t.at({0, 0}) = 1;
    t.at({0, 1}) = 2;
    t.at({1, 0}) = 3;
    t.at({1, 1}) = 4;
    std::vector<std::uint8_t> expected = bytes_of("LRTENS01");
    expected.insert(expected.end(), {2, 0, 0, 0});
    put_u64(expected, 2);
    put_u64(expected, 2);
    for (double v : {1.0, 3.0, 2.0, 4.0}) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, 8);
        put_u64(expected, bits);
    }
    EXPECT_EQ(expected.size(), 8u + 4u + 16u + 32u);
    EXPECT_EQ(encode_tensor(t), expected);
}

TEST(TensorFile, RoundTripIsBitwise)
{
    std::mt19937_64 rng(207);
    DenseTensor t = oracle::random_tensor(Shape{3, 1, 4, 2}, rng);
    t[0] = -0.0;
    t[1] = std::numeric_limits<double>::denorm_min();
    t[2] = std::numeric_limits<double>::infinity();
    const auto path = scratch("round.lrt");
    write_tensor(path, t);
    const DenseTensor back = read_tensor(path);
    EXPECT_EQ(back.shape(), t.shape());
    EXPECT_EQ(std::memcmp(back.values().data(), t.values().data(), 8 * t.size()), 0);
    EXPECT_EQ(encode_tensor(back), read_file(path));
}

TEST(TensorFile, RejectsMalformed)
{
    const std::vector<std::uint8_t> good = encode_tensor(DenseTensor(Shape{2, 3}));
    std::vector<std::uint8_t> magic = good;
    magic[0] = 'X';
    EXPECT_THROW(decode_tensor(magic), FormatError);

    std::vector<std::uint8_t> empty = bytes_of("LRTENS01");
    empty.insert(empty.end(), {0, 0, 0, 0});
    EXPECT_THROW(decode_tensor(empty), FormatError);

    std::vector<std::uint8_t> zero_dim = bytes_of("LRTENS01");
    zero_dim.insert(zero_dim.end(), {1, 0, 0, 0});
    put_u64(zero_dim, 0);
    EXPECT_THROW(decode_tensor(zero_dim), FormatError);

    std::vector<std::uint8_t> huge = bytes_of("LRTENS01");
    huge.insert(huge.end(), {2, 0, 0, 0});
    put_u64(huge, std::uint64_t{1} << 40);
    put_u64(huge, std::uint64_t{1} << 40);
    EXPECT_THROW(decode_tensor(huge), FormatError);

    EXPECT_THROW(decode_tensor(std::span(good).first(good.size() - 1)), FormatError);
    EXPECT_THROW(decode_tensor(std::span(good).first(10)), FormatError);
    std::vector<std::uint8_t> trailing = good;
    trailing.push_back(0);
    EXPECT_THROW(decode_tensor(trailing), FormatError);
    EXPECT_THROW(read_tensor(scratch("does_not_exist.lrt")), std::runtime_error);
}

TEST(DictionaryFile, RoundTrip)
{
    const Dictionary d = random_dictionary(Shape{3, 2, 2}, 3, 2, 208);
    const auto path = scratch("dict.lrdict");
    write_dictionary(path, d);
    const Dictionary back = read_dictionary(path);
    EXPECT_EQ(back.support(), d.support());
    EXPECT_EQ(back.num_filters(), 3u);
    EXPECT_EQ(back.num_channels(), 2u);
    EXPECT_EQ(back.filters(), d.filters());
    EXPECT_EQ(encode_dictionary(back), read_file(path));
}

TEST(DictionaryFile, HeaderLayout)
{
    const Dictionary d = fixed_filter_bank(Shape{2, 3}, 4, 2);
    const auto bytes = encode_dictionary(d);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "LRDICT01");
    EXPECT_EQ(bytes[8], 4);   // M
    EXPECT_EQ(bytes[12], 2);  // C
    EXPECT_EQ(bytes[16], 2);  // N
    EXPECT_EQ(bytes[20], 2);
    EXPECT_EQ(bytes[28], 3);
    EXPECT_EQ(bytes.size(), 8u + 12u + 16u + 4u * 2u * 6u * 8u);
    auto truncated = bytes;
    truncated.pop_back();
    EXPECT_THROW(decode_dictionary(truncated), FormatError);
    EXPECT_THROW(decode_dictionary(encode_tensor(DenseTensor(Shape{2}))), FormatError);
}

TEST(MaskFile, RoundTrip)
{
    const CompletionMask m = generate_mask(Shape{5, 4}, 0.35, 9);
    const auto path = scratch("mask.lrt");
    write_mask(path, m);
    const CompletionMask back = read_mask(path);
    EXPECT_EQ(back.values(), m.values());
    DenseTensor bad(Shape{2});
    bad[0] = 1.0;
    bad[1] = 0.5;
    write_tensor(path, bad);
    EXPECT_THROW(read_mask(path), FormatError);
}

TEST(Image, SinglePixel)
{
    const DenseTensor t = decode_image(bytes_of("P5\n1 1\n255\n\xff"));
    EXPECT_EQ(t.shape(), (Shape{1, 1}));
    EXPECT_EQ(t[0], 1.0);
}

TEST(Image, RasterOrder)
{
    const DenseTensor t = decode_image(bytes_of(std::string("P5 2 2 7\n") + '\0' + '\7' + '\0' + '\7'));
    EXPECT_EQ(t.at({0, 0}), 0.0);
    EXPECT_EQ(t.at({0, 1}), 1.0);
    EXPECT_EQ(t.at({1, 0}), 0.0);
    EXPECT_EQ(t.at({1, 1}), 1.0);
    const DenseTensor w = decode_image(bytes_of(std::string("P5\n3 1\n255\n") + '\1' + '\2' + '\3'));
    EXPECT_EQ(w.shape(), (Shape{1, 3}));
    EXPECT_EQ(w.at({0, 2}), 3.0 / 255.0);
}

TEST(Image, CommentsAndSixteenBit)
{
    const DenseTensor t = decode_image(bytes_of(std::string("P5\n# made by hand\n1 2 # size\n65535\n") + '\x01' +
                                                '\x00' + '\xff' + '\xff'));
    EXPECT_EQ(t.shape(), (Shape{2, 1}));
    EXPECT_EQ(t[0], 256.0 / 65535.0);
    EXPECT_EQ(t[1], 1.0);
}

TEST(Image, ColorLayout)
{
    const DenseTensor t = decode_image(bytes_of(std::string("P6 2 1 255\n") + '\xff' + '\0' + '\0' + '\0' + '\0' +
                                                '\xff'));
    EXPECT_EQ(t.shape(), (Shape{1, 2, 3}));
    EXPECT_EQ(t.at({0, 0, 0}), 1.0);
    EXPECT_EQ(t.at({0, 0, 2}), 0.0);
    EXPECT_EQ(t.at({0, 1, 2}), 1.0);
}

TEST(Image, PpmRoundTripBytes)
{
    std::vector<std::uint8_t> raw = bytes_of("P6\n3 2\n255\n");
    for (int i = 0; i < 18; ++i)
        raw.push_back(static_cast<std::uint8_t>(i * 13));
    const DenseTensor t = decode_image(raw);
    EXPECT_EQ(encode_image(t), raw);
    const auto path = scratch("img.ppm");
    write_image(path, t);
    EXPECT_EQ(read_file(path), raw);
    EXPECT_EQ(load_image_pgm_ppm(path), t);

    std::vector<std::uint8_t> wide = bytes_of("P5\n2 1\n1023\n");
    wide.insert(wide.end(), {0x03, 0xff, 0x01, 0x00});
    EXPECT_EQ(encode_image(decode_image(wide), 1023), wide);
}

TEST(Image, Malformed)
{
    EXPECT_THROW(decode_image(bytes_of("P2\n1 1\n255\n0")), FormatError);
    EXPECT_THROW(decode_image(bytes_of("P5\n1\n")), FormatError);
    EXPECT_THROW(decode_image(bytes_of("P5\n1 1\n70000\n\0")), FormatError);
    EXPECT_THROW(decode_image(bytes_of("P5\n2 2\n255\n\1")), FormatError);
    EXPECT_THROW(decode_image(bytes_of("P5\n0 2\n255\n")), FormatError);
    EXPECT_THROW(decode_image(bytes_of("P5\nx 2\n255\n")), FormatError);
    EXPECT_THROW(decode_image(bytes_of(std::string("P5 1 1 9\n") + '\x0a')), FormatError);
    EXPECT_THROW(encode_image(DenseTensor(Shape{2, 2, 2})), ShapeError);
}

TEST(Activations, PackRoundTrip)
{
    std::mt19937_64 rng(209);
    const Shape s{5, 4, 3};
    const auto acts = oracle::random_activations(s, 3, 2, rng);
    const DenseTensor packed = pack_activations(acts);
    EXPECT_EQ(packed.shape(), (Shape{12, 2, 3}));
    EXPECT_EQ(packed.at({5 + 1, 1, 2}), acts[2].factor(1)(1, 1));
    const auto back = unpack_activations(packed, s);
    for (std::size_t m = 0; m < 3; ++m)
        EXPECT_EQ(back[m].factors(), acts[m].factors());
    EXPECT_THROW(unpack_activations(packed, Shape{5, 4}), ShapeError);
}
