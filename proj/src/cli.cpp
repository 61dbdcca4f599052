#include "lrd/cli.hpp"

#include "lrd/conv_model.hpp"
#include "lrd/io.hpp"
#include "lrd/metrics.hpp"
#include "lrd/solver.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace lrd {

namespace {

namespace fs = std::filesystem;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t");
    if (first == std::string_view::npos)
        return {};
    const auto last = s.find_last_not_of(" \t");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& text, const std::string& seps)
{
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find_first_of(seps, start);
        std::string part = trim(std::string_view(text).substr(start, pos - start));
        if (!part.empty())
            parts.push_back(std::move(part));
        if (pos == std::string::npos)
            break;
        start = pos + 1;
    }
    return parts;
}

template <typename T>
T parse_value(const std::string& token, const std::string& flag)
{
    T value{};
    const char* end = token.data() + token.size();
    const auto [ptr, ec] = std::from_chars(token.data(), end, value);
    if (ec != std::errc() || ptr != end)
        throw UsageError(flag + ": cannot parse '" + token + "'");
    return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& flag)
{
    std::vector<T> values;
    for (const auto& token : split(text, ","))
        values.push_back(parse_value<T>(token, flag));
    if (values.empty())
        throw UsageError(flag + ": empty sweep list");
    return values;
}

/// "16x16x8" or "16,16,8".
std::vector<std::size_t> parse_extents(const std::string& text, const std::string& flag)
{
    std::vector<std::size_t> dims;
    for (const auto& token : split(text, "x,"))
        dims.push_back(parse_value<std::size_t>(token, flag));
    if (dims.empty())
        throw UsageError(flag + ": no extents given");
    for (auto d : dims)
        if (d == 0)
            throw UsageError(flag + ": extents must be positive");
    return dims;
}

/// A single extent is replicated across all `order` modes.
Shape support_shape(const std::string& text, std::size_t order)
{
    std::vector<std::size_t> dims = parse_extents(text, "--support");
    if (dims.size() == 1)
        dims.assign(order, dims.front());
    if (dims.size() != order)
        throw UsageError("--support: expected 1 or " + std::to_string(order) + " extents");
    return Shape(std::move(dims));
}

std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    if (std::isinf(v))
        return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void ensure_directory(const std::string& dir)
{
    if (!dir.empty())
        fs::create_directories(dir);
}

Regularization parse_reg(const std::string& text)
{
    if (text == "l1")
        return Regularization::L1;
    if (text == "l2")
        return Regularization::L2;
    throw UsageError("--reg must be l1 or l2");
}

Dictionary dictionary_for(const std::string& filters_path, const std::string& support, std::size_t num_filters,
                          std::size_t channels, const Shape& signal_shape)
{
    if (!filters_path.empty())
        return read_dictionary(filters_path);
    const std::size_t order = channels > 1 ? signal_shape.order() - 1 : signal_shape.order();
    if (order == 0)
        throw UsageError("signal has no spatial modes for a " + std::to_string(channels) + "-channel bank");
    return fixed_filter_bank(support_shape(support, order), num_filters, channels);
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
    std::string shape;
    std::size_t num_filters = 3;
    std::size_t rank = 2;
    std::string support = "5";
    std::size_t channels = 1;
    std::uint64_t seed = 0;
    std::string out;
    bool raw = false;
};

int cmd_synth(const SynthArgs& a, std::ostream& out)
{
    if (a.rank == 0)
        throw UsageError("--rank must be positive");
    if (a.num_filters == 0 || a.channels == 0)
        throw UsageError("--num-filters and --channels must be positive");
    const Shape act_shape(parse_extents(a.shape, "--shape"));
    const Dictionary dict = random_dictionary(support_shape(a.support, act_shape.order()), a.num_filters,
                                              a.channels, a.seed);
    dict.activation_shape(dict.signal_shape(act_shape));
    // Distinct stream for the activations so they do not mirror the filters.
    std::vector<KruskalTensor> acts = random_activations(act_shape, a.num_filters, a.rank,
                                                         a.seed ^ 0x9e3779b97f4a7c15ULL);
    DenseTensor signal = forward_model(dict, acts);

    // Unit peak so PSNR at peak 1 is meaningful.
    double peak = 0.0;
    for (double v : signal.values())
        peak = std::max(peak, std::abs(v));
    if (!a.raw && peak > 0.0) {
        for (auto& k : acts)
            k.set_factor(0, k.factor(0) / peak);
        signal = forward_model(dict, acts);
    }

    ensure_directory(a.out);
    const fs::path dir(a.out);
    write_dictionary(dir / "dictionary.lrdict", dict);
    write_tensor(dir / "activations.lrt", pack_activations(acts));
    write_tensor(dir / "signal.lrt", signal);
    out << "wrote " << (dir / "signal.lrt").string() << " " << signal.shape().to_string() << "\n";
    return 0;
}

// ---------------------------------------------------------- reconstruct

struct ReconstructArgs {
    std::string signal;
    std::string filters;
    std::string support = "5";
    std::size_t num_filters = 25;
    std::size_t channels = 1;
    std::string reg = "l2";
    std::string lambda;
    std::string alpha;
    std::string rank = "3";
    std::uint64_t seed = 0;
    std::size_t max_outer = 100;
    double tol = 1e-6;
    double rho = 0.0;
    std::size_t admm_iters = 50;
    double peak = 1.0;
    double eps = kDefaultNonzeroThreshold;
    std::string out;
    bool save_activations = false;
    bool no_timing = false;
    bool lambda_given = false;
    bool alpha_given = false;
};

int cmd_reconstruct(const ReconstructArgs& a, std::ostream& out)
{
    const Regularization reg = parse_reg(a.reg);
    if (reg == Regularization::L2 && a.lambda_given)
        throw UsageError("--lambda applies to --reg l1; use --alpha with l2");
    if (reg == Regularization::L1 && a.alpha_given)
        throw UsageError("--alpha applies to --reg l2; use --lambda with l1");
    const std::vector<double> weights = reg == Regularization::L2
                                            ? parse_list<double>(a.alpha_given ? a.alpha : "1e-4", "--alpha")
                                            : parse_list<double>(a.lambda_given ? a.lambda : "0.1", "--lambda");
    const std::vector<std::size_t> ranks = parse_list<std::size_t>(a.rank, "--rank");
    if (a.save_activations && a.out.empty())
        throw UsageError("--save-activations needs --out");

    const DenseTensor signal = read_tensor(a.signal);
    const Dictionary dict = dictionary_for(a.filters, a.support, a.num_filters, a.channels, signal.shape());

    std::ostringstream csv;
    csv << "reg,rank,psnr_db,cr,nnz,iters,seconds\n";
    ensure_directory(a.out);
    std::size_t point = 0;
    for (double w : weights)
        for (std::size_t r : ranks) {
            SolverConfig cfg;
            cfg.regularization = reg;
            (reg == Regularization::L2 ? cfg.alpha : cfg.lambda) = w;
            cfg.rank = r;
            cfg.seed = a.seed;
            cfg.outer_iters = a.max_outer;
            cfg.tol_outer = a.tol;
            cfg.admm_iters = a.admm_iters;
            cfg.rho_init = a.rho > 0.0 ? a.rho : 50.0 * w + 1.0;
            try {
                cfg.validate();
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            const FitResult fit = lrd_fit(signal, dict, cfg);
            const DenseTensor recon = forward_model(dict, fit.activations);
            const MetricReport m = metric_report(signal, recon, a.peak, fit.activations, a.eps);
            csv << format_number(w) << ',' << r << ',' << format_number(m.psnr_db) << ',' << format_number(m.cr)
                << ',' << m.nnz << ',' << fit.report.outer_iterations << ','
                << format_number(a.no_timing ? 0.0 : fit.report.wall_seconds) << '\n';
            if (a.save_activations)
                write_tensor(fs::path(a.out) / ("activations_" + std::to_string(point) + ".lrt"),
                             pack_activations(fit.activations));
            ++point;
        }
    if (a.out.empty()) {
        out << csv.str();
    } else {
        const std::string text = csv.str();
        write_file(fs::path(a.out) / "sweep.csv",
                   std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }
    return 0;
}

// -------------------------------------------------------------- inpaint

struct InpaintArgs {
    std::string image;
    std::string signal;
    std::string truth;
    std::string filters;
    std::string support = "5";
    std::size_t num_filters = 15;
    std::size_t channels = 0;
    double missing = -1.0;
    std::string mask;
    double alpha = 1e-4;
    std::size_t rank = 3;
    std::uint64_t seed = 0;
    std::size_t max_outer = 100;
    double tol = 1e-6;
    double peak = 1.0;
    std::string out;
    bool save_activations = false;
    bool no_timing = false;
};

int cmd_inpaint(const InpaintArgs& a, std::ostream& out)
{
    if (a.image.empty() == a.signal.empty())
        throw UsageError("give exactly one of --image or --signal");
    if ((a.missing >= 0.0) == !a.mask.empty())
        throw UsageError("give exactly one of --missing or --mask");
    if (a.save_activations && a.out.empty())
        throw UsageError("--save-activations needs --out");
    const bool from_image = !a.image.empty();
    const DenseTensor input = from_image ? load_image_pgm_ppm(a.image) : read_tensor(a.signal);

    std::size_t channels = a.channels;
    if (channels == 0)
        channels = from_image && input.shape().order() == 3 ? 3 : 1;
    const Dictionary dict = dictionary_for(a.filters, a.support, a.num_filters, channels, input.shape());

    const CompletionMask mask = a.mask.empty() ? generate_mask(input.shape(), a.missing, a.seed) : read_mask(a.mask);
    if (!(mask.shape() == input.shape()))
        throw ShapeError("mask " + mask.shape().to_string() + " does not match input " + input.shape().to_string());

    // Ground truth: explicit file, else the input itself when the holes were generated here.
    std::optional<DenseTensor> truth;
    if (!a.truth.empty())
        truth = a.truth.ends_with(".lrt") ? read_tensor(a.truth) : load_image_pgm_ppm(a.truth);
    else if (a.mask.empty())
        truth = input;

    SolverConfig cfg;
    cfg.regularization = Regularization::L2;
    cfg.alpha = a.alpha;
    cfg.rank = a.rank;
    cfg.seed = a.seed;
    cfg.outer_iters = a.max_outer;
    cfg.tol_outer = a.tol;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    std::vector<KruskalTensor> activations;
    DenseTensor completed(input.shape());
    std::size_t iters = 0;
    double seconds = 0.0;
    if (mask.count_observed() == mask.values().size()) {
        FitResult fit = lrd_fit(input, dict, cfg);
        completed = forward_model(dict, fit.activations);
        activations = std::move(fit.activations);
        iters = fit.report.outer_iterations;
        seconds = fit.report.wall_seconds;
    } else {
        MaskedFitResult fit = lrd_fit_masked(input, mask, dict, cfg);
        completed = std::move(fit.completed);
        activations = std::move(fit.activations);
        iters = fit.report.outer_iterations;
        seconds = fit.report.wall_seconds;
    }

    const double missing = 1.0 - static_cast<double>(mask.count_observed()) / static_cast<double>(mask.values().size());
    out << "missing,rank,alpha,psnr_db,iters,seconds\n";
    out << format_number(missing) << ',' << a.rank << ',' << format_number(a.alpha) << ','
        << (truth ? format_number(psnr(*truth, completed, a.peak)) : std::string()) << ',' << iters << ','
        << format_number(a.no_timing ? 0.0 : seconds) << '\n';

    if (!a.out.empty()) {
        ensure_directory(a.out);
        const fs::path dir(a.out);
        write_tensor(dir / "completed.lrt", completed);
        write_mask(dir / "mask.lrt", mask);
        if (from_image)
            write_image(dir / (completed.shape().order() == 2 ? "completed.pgm" : "completed.ppm"), completed);
        if (a.save_activations)
            write_tensor(dir / "activations.lrt", pack_activations(activations));
    }
    return 0;
}

// -------------------------------------------------------------- metrics

struct MetricsArgs {
    std::string reference;
    std::string estimate;
    std::string activations;
    double peak = 1.0;
    double eps = kDefaultNonzeroThreshold;
};

int cmd_metrics(const MetricsArgs& a, std::ostream& out)
{
    const DenseTensor ref = read_tensor(a.reference);
    const DenseTensor est = read_tensor(a.estimate);
    out << format_number(psnr(ref, est, a.peak)) << ',' << format_number(mse(ref, est));
    if (!a.activations.empty()) {
        const DenseTensor packed = read_tensor(a.activations);
        // Activations cover the spatial modes; drop a trailing channel mode if the rows say so.
        auto rows = [](const Shape& s) {
            std::size_t total = 0;
            for (auto d : s.dims())
                total += d;
            return total;
        };
        Shape act_shape = ref.shape();
        if (packed.shape().order() == 3 && rows(act_shape) != packed.shape().dim(0) && act_shape.order() > 1 &&
            rows(act_shape.drop_last()) == packed.shape().dim(0))
            act_shape = act_shape.drop_last();
        const std::vector<KruskalTensor> acts = unpack_activations(packed, act_shape);
        const CompressionStats c = compression_ratio(acts, ref.shape(), a.eps);
        out << ',' << format_number(c.cr) << ',' << c.nnz << ',' << format_number(c.l1);
    }
    out << '\n';
    return 0;
}

// ----------------------------------------------------------------- bank

struct BankArgs {
    std::string support = "5x5";
    std::size_t num_filters = 25;
    std::size_t channels = 1;
    std::string out;
};

int cmd_bank(const BankArgs& a, std::ostream& out)
{
    const Shape support(parse_extents(a.support, "--support"));
    write_dictionary(a.out, fixed_filter_bank(support, a.num_filters, a.channels));
    out << "wrote " << a.out << "\n";
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Low-rank deconvolution: reconstruction, in-painting and metrics", "lrd"};
    app.require_subcommand(1);

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "Synthesize a seeded dictionary, activations and signal");
    s->add_option("--shape", synth.shape, "Activation extents, e.g. 16x16x8")->required();
    s->add_option("--num-filters", synth.num_filters, "Filter count M")->capture_default_str();
    s->add_option("--rank", synth.rank, "Activation rank R")->capture_default_str();
    s->add_option("--support", synth.support, "Filter support (one extent or one per mode)")->capture_default_str();
    s->add_option("--channels", synth.channels, "Signal channels C")->capture_default_str();
    s->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
    s->add_option("--out", synth.out, "Output directory")->required();
    s->add_flag("--raw", synth.raw, "Skip scaling the signal to unit peak");

    ReconstructArgs rec;
    auto* r = app.add_subcommand("reconstruct", "Fit activations over a (weight, rank) sweep, one CSV row each");
    r->add_option("--signal", rec.signal, "Signal LRT file")->required()->check(CLI::ExistingFile);
    r->add_option("--filters", rec.filters, "Dictionary file (default: fixed DCT bank)")->check(CLI::ExistingFile);
    r->add_option("--support", rec.support, "Support of the fixed bank")->capture_default_str();
    r->add_option("--num-filters", rec.num_filters, "Size of the fixed bank")->capture_default_str();
    r->add_option("--channels", rec.channels, "Channels of the fixed bank")->capture_default_str();
    r->add_option("--reg", rec.reg, "l1 or l2")->capture_default_str();
    auto* lambda_opt = r->add_option("--lambda", rec.lambda, "Comma list of l1 weights (default 0.1)");
    auto* alpha_opt = r->add_option("--alpha", rec.alpha, "Comma list of l2 weights (default 1e-4)");
    r->add_option("--rank", rec.rank, "Comma list of ranks")->capture_default_str();
    r->add_option("--seed", rec.seed, "Initialization seed")->capture_default_str();
    r->add_option("--max-outer", rec.max_outer, "Outer sweeps")->capture_default_str();
    r->add_option("--tol", rec.tol, "Relative objective tolerance")->capture_default_str();
    r->add_option("--rho", rec.rho, "ADMM penalty (default 50*lambda+1)");
    r->add_option("--admm-iters", rec.admm_iters, "ADMM iterations per mode")->capture_default_str();
    r->add_option("--peak", rec.peak, "PSNR peak value")->capture_default_str();
    r->add_option("--eps", rec.eps, "Relative nonzero threshold for CR")->capture_default_str();
    r->add_option("--out", rec.out, "Output directory (CSV goes to stdout otherwise)");
    r->add_flag("--save-activations", rec.save_activations, "Write activations_<k>.lrt per sweep point");
    r->add_flag("--no-timing", rec.no_timing, "Write 0 in the seconds column");

    InpaintArgs inp;
    auto* i = app.add_subcommand("inpaint", "Complete missing entries of an image or tensor");
    i->add_option("--image", inp.image, "Binary PGM/PPM input")->check(CLI::ExistingFile);
    i->add_option("--signal", inp.signal, "LRT input")->check(CLI::ExistingFile);
    i->add_option("--truth", inp.truth, "Ground truth for PSNR")->check(CLI::ExistingFile);
    i->add_option("--filters", inp.filters, "Dictionary file (default: fixed DCT bank)")->check(CLI::ExistingFile);
    i->add_option("--support", inp.support, "Support of the fixed bank")->capture_default_str();
    i->add_option("--num-filters", inp.num_filters, "Size of the fixed bank")->capture_default_str();
    i->add_option("--channels", inp.channels, "Channels of the fixed bank (default: 3 for PPM, else 1)");
    i->add_option("--missing", inp.missing, "Fraction of entries to hide, in [0, 1)");
    i->add_option("--mask", inp.mask, "Mask LRT (1 observed, 0 missing)")->check(CLI::ExistingFile);
    i->add_option("--alpha", inp.alpha, "l2 weight")->capture_default_str();
    i->add_option("--rank", inp.rank, "Activation rank")->capture_default_str();
    i->add_option("--seed", inp.seed, "Mask and initialization seed")->capture_default_str();
    i->add_option("--max-outer", inp.max_outer, "Outer sweeps")->capture_default_str();
    i->add_option("--tol", inp.tol, "Relative objective tolerance")->capture_default_str();
    i->add_option("--peak", inp.peak, "PSNR peak value")->capture_default_str();
    i->add_option("--out", inp.out, "Output directory");
    i->add_flag("--save-activations", inp.save_activations, "Write activations.lrt");
    i->add_flag("--no-timing", inp.no_timing, "Write 0 in the seconds column");

    MetricsArgs met;
    auto* m = app.add_subcommand("metrics", "Print psnr_db,mse[,cr,nnz,l1] as one CSV line");
    m->add_option("--reference", met.reference, "Reference LRT")->required()->check(CLI::ExistingFile);
    m->add_option("--estimate", met.estimate, "Estimate LRT")->required()->check(CLI::ExistingFile);
    m->add_option("--activations", met.activations, "Packed activations LRT")->check(CLI::ExistingFile);
    m->add_option("--peak", met.peak, "PSNR peak value")->capture_default_str();
    m->add_option("--eps", met.eps, "Relative nonzero threshold")->capture_default_str();

    BankArgs bank;
    auto* b = app.add_subcommand("bank", "Write a fixed DCT filter bank as a dictionary file");
    b->add_option("--support", bank.support, "Filter support, e.g. 5x5")->capture_default_str();
    b->add_option("--num-filters", bank.num_filters, "Filter count")->capture_default_str();
    b->add_option("--channels", bank.channels, "Channels")->capture_default_str();
    b->add_option("--out", bank.out, "Output dictionary path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*s)
            return cmd_synth(synth, out);
        if (*r) {
            rec.lambda_given = lambda_opt->count() > 0;
            rec.alpha_given = alpha_opt->count() > 0;
            return cmd_reconstruct(rec, out);
        }
        if (*i)
            return cmd_inpaint(inp, out);
        if (*m)
            return cmd_metrics(met, out);
        if (*b)
            return cmd_bank(bank, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace lrd
