#include "lrd/cli.hpp"
#include "lrd/io.hpp"
#include "lrd/metrics.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>

using namespace lrd;
namespace fs = std::filesystem;

namespace {

struct CliRun {
    int code;
    std::string out;
    std::string err;
};

CliRun run(std::vector<std::string> args)
{
    args.insert(args.begin(), "lrd");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

fs::path fresh_dir(const std::string& name)
{
    const fs::path dir = fs::temp_directory_path() / "lrd_cli_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::vector<std::string> lines(const std::string& text)
{
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);)
        out.push_back(line);
    return out;
}

std::vector<std::string> fields(const std::string& line)
{
    std::vector<std::string> out;
    std::istringstream in(line);
    for (std::string f; std::getline(in, f, ',');)
        out.push_back(f);
    return out;
}

fs::path synth(const std::string& name, const std::string& shape = "10x9x4", std::uint64_t seed = 3)
{
    const fs::path dir = fresh_dir(name);
    const CliRun r = run({"synth", "--shape", shape, "--num-filters", "2", "--rank", "2", "--support", "3", "--seed",
                       std::to_string(seed), "--out", dir.string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return dir;
}

}  // namespace

TEST(Cli, HelpAndUsageErrors)
{
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"frobnicate"}).code, 2);
    EXPECT_EQ(run({"synth", "--shape", "4x4"}).code, 2);
    EXPECT_EQ(run({"reconstruct", "--signal", "/nonexistent/file.lrt"}).code, 2);
}

TEST(Cli, SynthIsDeterministic)
{
    const fs::path a = synth("synth_a");
    const fs::path b = synth("synth_b");
    for (const char* f : {"dictionary.lrdict", "activations.lrt", "signal.lrt"})
        EXPECT_EQ(read_file(a / f), read_file(b / f)) << f;
    const fs::path c = synth("synth_c", "10x9x4", 4);
    EXPECT_NE(read_file(a / "signal.lrt"), read_file(c / "signal.lrt"));
}

TEST(Cli, SynthRejectsZeroRank)
{
    const fs::path dir = fresh_dir("synth_r0");
    EXPECT_EQ(run({"synth", "--shape", "8x8", "--rank", "0", "--out", dir.string()}).code, 2);
    EXPECT_EQ(run({"synth", "--shape", "8x0", "--out", dir.string()}).code, 2);
    EXPECT_EQ(run({"synth", "--shape", "4x4", "--support", "5", "--out", dir.string()}).code, 1);
}

TEST(Cli, SynthPartsRecompose)
{
    const fs::path dir = synth("synth_parts");
    const Dictionary dict = read_dictionary(dir / "dictionary.lrdict");
    const DenseTensor signal = read_tensor(dir / "signal.lrt");
    const auto acts = unpack_activations(read_tensor(dir / "activations.lrt"), signal.shape());
    EXPECT_LT(oracle::max_abs_diff(forward_model(dict, acts).values(), signal.values()), 1e-12);
    double peak = 0.0;
    for (double v : signal.values())
        peak = std::max(peak, std::abs(v));
    EXPECT_NEAR(peak, 1.0, 1e-12);
}

TEST(Cli, ReconstructSingleAlpha)
{
    const fs::path dir = synth("rec_single");
    const CliRun r = run({"reconstruct", "--signal", (dir / "signal.lrt").string(), "--filters",
                       (dir / "dictionary.lrdict").string(), "--alpha", "1e-8", "--rank", "2", "--tol", "1e-14"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = lines(r.out);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], "reg,rank,psnr_db,cr,nnz,iters,seconds");
    const auto f = fields(rows[1]);
    ASSERT_EQ(f.size(), 7u);
    EXPECT_EQ(f[0], "1e-08");
    EXPECT_EQ(f[1], "2");
    EXPECT_GE(std::stod(f[2]), 60.0);
    EXPECT_EQ(std::stoul(f[4]), 2u * 2u * (10 + 9 + 4));
}

TEST(Cli, ReconstructEmptySweepIsUsageError)
{
    const fs::path dir = synth("rec_empty");
    const std::string signal = (dir / "signal.lrt").string();
    EXPECT_EQ(run({"reconstruct", "--signal", signal, "--alpha", ""}).code, 2);
    EXPECT_EQ(run({"reconstruct", "--signal", signal, "--rank", ","}).code, 2);
    EXPECT_EQ(run({"reconstruct", "--signal", signal, "--reg", "l1", "--lambda", ""}).code, 2);
    EXPECT_EQ(run({"reconstruct", "--signal", signal, "--lambda", "0.1"}).code, 2);
    EXPECT_EQ(run({"reconstruct", "--signal", signal, "--reg", "l3"}).code, 2);
    EXPECT_EQ(run({"reconstruct", "--signal", signal, "--alpha", "abc"}).code, 2);
    EXPECT_EQ(run({"reconstruct", "--signal", signal, "--rank", "0"}).code, 2);
    EXPECT_EQ(run({"reconstruct", "--signal", signal, "--save-activations"}).code, 2);
}

TEST(Cli, ReconstructRuntimeFailure)
{
    const fs::path dir = fresh_dir("rec_bad");
    write_file(dir / "broken.lrt", std::vector<std::uint8_t>{'n', 'o', 'p', 'e'});
    const CliRun r = run({"reconstruct", "--signal", (dir / "broken.lrt").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("magic"), std::string::npos);
}

TEST(Cli, ReconstructSweepOrderAndDeterminism)
{
    const fs::path dir = synth("rec_sweep");
    const fs::path out_a = fresh_dir("rec_sweep_a");
    const fs::path out_b = fresh_dir("rec_sweep_b");
    auto sweep = [&](const fs::path& out) {
        return run({"reconstruct", "--signal", (dir / "signal.lrt").string(), "--filters",
                    (dir / "dictionary.lrdict").string(), "--reg", "l1", "--lambda", "0.01,0.1", "--rank", "2,1",
                    "--max-outer", "4", "--out", out.string(), "--save-activations", "--no-timing"});
    };
    ASSERT_EQ(sweep(out_a).code, 0);
    ASSERT_EQ(sweep(out_b).code, 0);
    const auto csv = read_file(out_a / "sweep.csv");
    EXPECT_EQ(csv, read_file(out_b / "sweep.csv"));
    const auto rows = lines(std::string(csv.begin(), csv.end()));
    ASSERT_EQ(rows.size(), 5u);
    EXPECT_EQ(fields(rows[1])[0], "0.01");
    EXPECT_EQ(fields(rows[1])[1], "2");
    EXPECT_EQ(fields(rows[2])[1], "1");
    EXPECT_EQ(fields(rows[3])[0], "0.1");
    EXPECT_EQ(fields(rows[4])[6], "0");
    for (int k = 0; k < 4; ++k) {
        const std::string name = "activations_" + std::to_string(k) + ".lrt";
        EXPECT_EQ(read_file(out_a / name), read_file(out_b / name));
    }
    EXPECT_EQ(read_tensor(out_a / "activations_1.lrt").shape(), (Shape{23, 1, 2}));
}

TEST(Cli, ReconstructWithFixedBank)
{
    const fs::path dir = synth("rec_bank", "12x10");
    const CliRun r = run({"reconstruct", "--signal", (dir / "signal.lrt").string(), "--support", "3", "--num-filters",
                       "4", "--max-outer", "3"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(lines(r.out).size(), 2u);
}

TEST(Cli, InpaintZeroFractionEqualsPlainFit)
{
    const fs::path dir = synth("inp_zero", "10x8");
    const fs::path out = fresh_dir("inp_zero_out");
    const CliRun r = run({"inpaint", "--signal", (dir / "signal.lrt").string(), "--filters",
                       (dir / "dictionary.lrdict").string(), "--missing", "0", "--rank", "2", "--max-outer", "5",
                       "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    SolverConfig cfg;
    cfg.rank = 2;
    cfg.outer_iters = 5;
    const Dictionary dict = read_dictionary(dir / "dictionary.lrdict");
    const DenseTensor s = read_tensor(dir / "signal.lrt");
    const FitResult fit = lrd_fit(s, dict, cfg);
    EXPECT_EQ(read_tensor(out / "completed.lrt"), forward_model(dict, fit.activations));
    EXPECT_EQ(read_mask(out / "mask.lrt").count_observed(), s.size());
}

TEST(Cli, InpaintSmoothSignal)
{
    // Seeded separable sum of three Gaussian bumps, scaled to [0, 1].
    const std::size_t n = 32;
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> centre(4.0, 28.0);
    std::uniform_real_distribution<double> width(4.0, 10.0);
    DenseTensor s(Shape{n, n});
    for (int r = 0; r < 3; ++r) {
        const double ca = centre(rng), wa = width(rng), cb = centre(rng), wb = width(rng);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                s.at({i, j}) += std::exp(-0.5 * std::pow((i - ca) / wa, 2.0)) * std::exp(-0.5 * std::pow((j - cb) / wb, 2.0));
    }
    const auto [lo, hi] = std::minmax_element(s.data().begin(), s.data().end());
    const double low = *lo, range = *hi - *lo;
    for (auto& v : s.data())
        v = (v - low) / range;

    const fs::path dir = fresh_dir("inp_smooth");
    write_tensor(dir / "smooth.lrt", s);
    const CliRun r = run({"inpaint", "--signal", (dir / "smooth.lrt").string(), "--missing", "0.5", "--max-outer", "20",
                       "--out", dir.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto rows = lines(r.out);
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], "missing,rank,alpha,psnr_db,iters,seconds");
    const auto f = fields(rows[1]);
    EXPECT_EQ(f[0], "0.5");
    EXPECT_EQ(f[1], "3");
    EXPECT_EQ(f[2], "1e-04");
    EXPECT_GT(std::stod(f[3]), 20.0);
    const DenseTensor completed = read_tensor(dir / "completed.lrt");
    EXPECT_NEAR(psnr(s, completed), std::stod(f[3]), 1e-9);
}

TEST(Cli, InpaintImageAndMaskFile)
{
    const fs::path dir = fresh_dir("inp_image");
    DenseTensor img(Shape{12, 10});
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 10; ++j)
            img.at({i, j}) = std::round(255.0 * (0.5 + 0.4 * std::sin(0.5 * i) * std::cos(0.3 * j))) / 255.0;
    write_image(dir / "in.pgm", img);
    write_mask(dir / "mask.lrt", generate_mask(img.shape(), 0.3, 1));
    const CliRun r = run({"inpaint", "--image", (dir / "in.pgm").string(), "--mask", (dir / "mask.lrt").string(),
                       "--truth", (dir / "in.pgm").string(), "--support", "3", "--num-filters", "4", "--max-outer",
                       "3", "--out", dir.string(), "--no-timing"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(dir / "completed.pgm"));
    const auto f = fields(lines(r.out)[1]);
    EXPECT_FALSE(f[3].empty());
    EXPECT_EQ(f[5], "0");

    const CliRun no_truth = run({"inpaint", "--image", (dir / "in.pgm").string(), "--mask",
                              (dir / "mask.lrt").string(), "--support", "3", "--num-filters", "4", "--max-outer", "2"});
    ASSERT_EQ(no_truth.code, 0) << no_truth.err;
    EXPECT_TRUE(fields(lines(no_truth.out)[1])[3].empty());
}

TEST(Cli, InpaintUsageErrors)
{
    const fs::path dir = synth("inp_usage", "8x8");
    const std::string s = (dir / "signal.lrt").string();
    EXPECT_EQ(run({"inpaint", "--signal", s}).code, 2);
    EXPECT_EQ(run({"inpaint", "--missing", "0.5"}).code, 2);
    EXPECT_EQ(run({"inpaint", "--signal", s, "--missing", "1.0", "--support", "3", "--num-filters", "2"}).code, 1);
}

TEST(Cli, MetricsLine)
{
    const fs::path dir = fresh_dir("metrics");
    std::mt19937_64 rng(301);
    const DenseTensor a = oracle::random_tensor(Shape{5, 4}, rng);
    DenseTensor b = a;
    for (auto& v : b.data())
        v += 0.1;
    write_tensor(dir / "a.lrt", a);
    write_tensor(dir / "b.lrt", b);

    CliRun r = run({"metrics", "--reference", (dir / "a.lrt").string(), "--estimate", (dir / "a.lrt").string()});
    ASSERT_EQ(r.code, 0);
    EXPECT_EQ(r.out, "inf,0\n");

    r = run({"metrics", "--reference", (dir / "a.lrt").string(), "--estimate", (dir / "b.lrt").string()});
    const auto f = fields(lines(r.out)[0]);
    EXPECT_NEAR(std::stod(f[0]), 20.0, 1e-9);
    EXPECT_NEAR(std::stod(f[1]), mse(a, b), 1e-15);

    const auto acts = oracle::random_activations(Shape{5, 4}, 2, 1, rng);
    write_tensor(dir / "acts.lrt", pack_activations(acts));
    r = run({"metrics", "--reference", (dir / "a.lrt").string(), "--estimate", (dir / "b.lrt").string(),
             "--activations", (dir / "acts.lrt").string()});
    const auto g = fields(lines(r.out)[0]);
    ASSERT_EQ(g.size(), 5u);
    const CompressionStats c = compression_ratio(acts, a.shape());
    EXPECT_EQ(std::stoul(g[3]), c.nnz);
    EXPECT_DOUBLE_EQ(std::stod(g[2]), c.cr);

    write_tensor(dir / "c.lrt", DenseTensor(Shape{4, 5}));
    EXPECT_EQ(run({"metrics", "--reference", (dir / "a.lrt").string(), "--estimate", (dir / "c.lrt").string()}).code,
              1);
}

TEST(Cli, BankWritesDictionary)
{
    const fs::path dir = fresh_dir("bank");
    const CliRun r = run({"bank", "--support", "5x5", "--num-filters", "15", "--out", (dir / "bank.lrdict").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const Dictionary d = read_dictionary(dir / "bank.lrdict");
    EXPECT_EQ(d.num_filters(), 15u);
    EXPECT_EQ(d.filters(), fixed_filter_bank(Shape{5, 5}, 15).filters());
}
