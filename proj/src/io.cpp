#include "lrd/io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string_view>

namespace lrd {

namespace {

constexpr std::string_view kTensorMagic = "LRTENS01";
constexpr std::string_view kDictMagic = "LRDICT01";

class Writer {
public:
    void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
    void u32(std::uint32_t v) { little_endian(v, 4); }
    void u64(std::uint64_t v) { little_endian(v, 8); }
    void f64(double v) { little_endian(std::bit_cast<std::uint64_t>(v), 8); }
    std::vector<std::uint8_t> take() { return std::move(out_); }

private:
    void little_endian(std::uint64_t v, int width)
    {
        for (int i = 0; i < width; ++i)
            out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t> out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void expect_magic(std::string_view magic)
    {
        need(magic.size(), "magic");
        if (std::memcmp(bytes_.data() + pos_, magic.data(), magic.size()) != 0)
            throw FormatError("bad magic, expected " + std::string(magic));
        pos_ += magic.size();
    }
    std::uint32_t u32() { return static_cast<std::uint32_t>(little_endian(4, "u32")); }
    std::uint64_t u64() { return little_endian(8, "u64"); }
    double f64() { return std::bit_cast<double>(little_endian(8, "payload")); }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    void need(std::size_t n, const char* what) const
    {
        if (bytes_.size() - pos_ < n)
            throw FormatError(std::string("truncated file while reading ") + what);
    }
    std::uint64_t little_endian(std::size_t width, const char* what)
    {
        need(width, what);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < width; ++i)
            v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += width;
        return v;
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

Shape read_dims(Reader& in, std::uint32_t order)
{
    if (order == 0)
        throw FormatError("header declares zero dimensions");
    if (in.remaining() / 8 < order)
        throw FormatError("truncated file while reading dimensions");
    std::vector<std::size_t> dims;
    dims.reserve(order);
    std::uint64_t total = 1;
    for (std::uint32_t n = 0; n < order; ++n) {
        const std::uint64_t d = in.u64();
        if (d == 0)
            throw FormatError("zero extent in header");
        if (d > std::numeric_limits<std::uint64_t>::max() / total)
            throw FormatError("dimension product overflows");
        total *= d;
        dims.push_back(static_cast<std::size_t>(d));
    }
    if (total > std::numeric_limits<std::size_t>::max() / 8)
        throw FormatError("dimension product overflows");
    return Shape(std::move(dims));
}

void write_dims(Writer& out, const Shape& shape)
{
    for (std::size_t d : shape.dims())
        out.u64(d);
}

DenseTensor read_payload(Reader& in, const Shape& shape)
{
    if (in.remaining() / 8 < shape.total_elements())
        throw FormatError("truncated payload");
    std::vector<double> data(shape.total_elements());
    for (auto& v : data)
        v = in.f64();
    return DenseTensor(shape, std::move(data));
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const DenseTensor& t)
{
    Writer out;
    out.bytes(kTensorMagic);
    out.u32(static_cast<std::uint32_t>(t.shape().order()));
    write_dims(out, t.shape());
    for (double v : t.values())
        out.f64(v);
    return out.take();
}

DenseTensor decode_tensor(std::span<const std::uint8_t> bytes)
{
    Reader in(bytes);
    in.expect_magic(kTensorMagic);
    const Shape shape = read_dims(in, in.u32());
    DenseTensor t = read_payload(in, shape);
    if (in.remaining() != 0)
        throw FormatError("trailing bytes after tensor payload");
    return t;
}

std::vector<std::uint8_t> encode_dictionary(const Dictionary& dict)
{
    Writer out;
    out.bytes(kDictMagic);
    out.u32(static_cast<std::uint32_t>(dict.num_filters()));
    out.u32(static_cast<std::uint32_t>(dict.num_channels()));
    out.u32(static_cast<std::uint32_t>(dict.support().order()));
    write_dims(out, dict.support());
    for (const auto& f : dict.filters())
        for (double v : f.values())
            out.f64(v);
    return out.take();
}

Dictionary decode_dictionary(std::span<const std::uint8_t> bytes)
{
    Reader in(bytes);
    in.expect_magic(kDictMagic);
    const std::uint32_t filters = in.u32();
    const std::uint32_t channels = in.u32();
    if (filters == 0 || channels == 0)
        throw FormatError("dictionary declares no filters");
    const Shape support = read_dims(in, in.u32());
    const std::uint64_t count = static_cast<std::uint64_t>(filters) * channels;
    if (in.remaining() / 8 / support.total_elements() < count)
        throw FormatError("truncated dictionary payload");
    std::vector<DenseTensor> payload;
    payload.reserve(static_cast<std::size_t>(count));
    for (std::uint64_t k = 0; k < count; ++k)
        payload.push_back(read_payload(in, support));
    if (in.remaining() != 0)
        throw FormatError("trailing bytes after dictionary payload");
    return Dictionary(support, channels, std::move(payload));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw std::runtime_error("write failed for " + path.string());
}

void write_tensor(const std::filesystem::path& path, const DenseTensor& t)
{
    write_file(path, encode_tensor(t));
}

DenseTensor read_tensor(const std::filesystem::path& path)
{
    return decode_tensor(read_file(path));
}

void write_dictionary(const std::filesystem::path& path, const Dictionary& dict)
{
    write_file(path, encode_dictionary(dict));
}

Dictionary read_dictionary(const std::filesystem::path& path)
{
    return decode_dictionary(read_file(path));
}

void write_mask(const std::filesystem::path& path, const CompletionMask& mask)
{
    DenseTensor t(mask.shape());
    for (std::size_t l = 0; l < t.size(); ++l)
        t[l] = mask.observed(l) ? 1.0 : 0.0;
    write_tensor(path, t);
}

CompletionMask read_mask(const std::filesystem::path& path)
{
    const DenseTensor t = read_tensor(path);
    std::vector<std::uint8_t> observed;
    observed.reserve(t.size());
    for (double v : t.values()) {
        if (v != 0.0 && v != 1.0)
            throw FormatError("mask entries must be 0 or 1");
        observed.push_back(v == 1.0);
    }
    return CompletionMask(t.shape(), std::move(observed));
}

DenseTensor pack_activations(std::span<const KruskalTensor> activations)
{
    if (activations.empty())
        throw ShapeError("no activations to pack");
    const Shape& shape = activations.front().shape();
    const std::size_t rank = activations.front().rank();
    std::size_t rows = 0;
    for (std::size_t d : shape.dims())
        rows += d;
    DenseTensor out(Shape{rows, rank, activations.size()});
    for (std::size_t m = 0; m < activations.size(); ++m) {
        const KruskalTensor& k = activations[m];
        if (!(k.shape() == shape) || k.rank() != rank)
            throw ShapeError("activations differ in shape or rank");
        std::size_t offset = 0;
        for (const auto& f : k.factors()) {
            for (Eigen::Index r = 0; r < f.cols(); ++r)
                for (Eigen::Index i = 0; i < f.rows(); ++i)
                    out.at({offset + static_cast<std::size_t>(i), static_cast<std::size_t>(r), m}) = f(i, r);
            offset += static_cast<std::size_t>(f.rows());
        }
    }
    return out;
}

std::vector<KruskalTensor> unpack_activations(const DenseTensor& packed, const Shape& shape)
{
    std::size_t rows = 0;
    for (std::size_t d : shape.dims())
        rows += d;
    if (packed.shape().order() != 3 || packed.shape().dim(0) != rows)
        throw ShapeError("packed activations " + packed.shape().to_string() + " do not match " + shape.to_string());
    const std::size_t rank = packed.shape().dim(1);
    std::vector<KruskalTensor> out;
    for (std::size_t m = 0; m < packed.shape().dim(2); ++m) {
        std::vector<Eigen::MatrixXd> factors;
        std::size_t offset = 0;
        for (std::size_t n = 0; n < shape.order(); ++n) {
            Eigen::MatrixXd f(static_cast<Eigen::Index>(shape.dim(n)), static_cast<Eigen::Index>(rank));
            for (Eigen::Index r = 0; r < f.cols(); ++r)
                for (Eigen::Index i = 0; i < f.rows(); ++i)
                    f(i, r) = packed.at({offset + static_cast<std::size_t>(i), static_cast<std::size_t>(r), m});
            offset += shape.dim(n);
            factors.push_back(std::move(f));
        }
        out.emplace_back(shape, std::move(factors));
    }
    return out;
}

namespace {

class HeaderParser {
public:
    explicit HeaderParser(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::string token()
    {
        skip_space_and_comments();
        std::string tok;
        while (pos_ < bytes_.size() && !std::isspace(bytes_[pos_]) && bytes_[pos_] != '#')
            tok.push_back(static_cast<char>(bytes_[pos_++]));
        if (tok.empty())
            throw FormatError("truncated image header");
        return tok;
    }

    unsigned long number(const char* what)
    {
        const std::string tok = token();
        for (char ch : tok)
            if (!std::isdigit(static_cast<unsigned char>(ch)))
                throw FormatError(std::string("malformed image ") + what);
        if (tok.size() > 9)
            throw FormatError(std::string("image ") + what + " too large");
        return std::stoul(tok);
    }

    // Exactly one whitespace byte separates the header from the raster.
    std::size_t raster_start()
    {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
            throw FormatError("missing whitespace before image raster");
        return pos_ + 1;
    }

private:
    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n')
                    ++pos_;
            } else {
                break;
            }
        }
    }
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

DenseTensor decode_image(std::span<const std::uint8_t> bytes)
{
    HeaderParser header(bytes);
    const std::string magic = header.token();
    std::size_t channels = 0;
    if (magic == "P5")
        channels = 1;
    else if (magic == "P6")
        channels = 3;
    else
        throw FormatError("unsupported image format '" + magic + "' (binary PGM/PPM only)");
    const unsigned long width = header.number("width");
    const unsigned long height = header.number("height");
    const unsigned long maxval = header.number("maxval");
    if (width == 0 || height == 0)
        throw FormatError("image has zero extent");
    if (maxval == 0 || maxval > 65535)
        throw FormatError("image maxval must be in [1, 65535]");
    const std::size_t start = header.raster_start();
    const std::size_t sample_bytes = maxval > 255 ? 2 : 1;
    const std::size_t samples = width * height * channels;
    if (bytes.size() - start < samples * sample_bytes)
        throw FormatError("truncated image raster");

    const Shape shape = channels == 1 ? Shape{height, width} : Shape{height, width, channels};
    DenseTensor t(shape);
    const double scale = 1.0 / static_cast<double>(maxval);
    std::size_t offset = start;
    for (std::size_t row = 0; row < height; ++row)
        for (std::size_t col = 0; col < width; ++col)
            for (std::size_t c = 0; c < channels; ++c) {
                unsigned v = bytes[offset];
                if (sample_bytes == 2)
                    v = (v << 8) | bytes[offset + 1];
                offset += sample_bytes;
                if (v > maxval)
                    throw FormatError("image sample exceeds maxval");
                t[row + height * (col + width * c)] = static_cast<double>(v) * scale;
            }
    return t;
}

DenseTensor load_image_pgm_ppm(const std::filesystem::path& path)
{
    return decode_image(read_file(path));
}

std::vector<std::uint8_t> encode_image(const DenseTensor& image, unsigned maxval)
{
    if (maxval == 0 || maxval > 65535)
        throw std::invalid_argument("image maxval must be in [1, 65535]");
    const Shape& shape = image.shape();
    std::size_t channels = 0;
    if (shape.order() == 2)
        channels = 1;
    else if (shape.order() == 3 && shape.dim(2) == 3)
        channels = 3;
    else
        throw ShapeError("images must be H x W or H x W x 3, got " + shape.to_string());
    const std::size_t height = shape.dim(0);
    const std::size_t width = shape.dim(1);
    const std::string header = std::string(channels == 1 ? "P5" : "P6") + "\n" + std::to_string(width) + " " +
                               std::to_string(height) + "\n" + std::to_string(maxval) + "\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    for (std::size_t row = 0; row < height; ++row)
        for (std::size_t col = 0; col < width; ++col)
            for (std::size_t c = 0; c < channels; ++c) {
                const double v = std::clamp(image[row + height * (col + width * c)], 0.0, 1.0);
                const auto q = static_cast<unsigned>(std::lround(v * maxval));
                if (maxval > 255)
                    out.push_back(static_cast<std::uint8_t>(q >> 8));
                out.push_back(static_cast<std::uint8_t>(q & 0xff));
            }
    return out;
}

void write_image(const std::filesystem::path& path, const DenseTensor& image, unsigned maxval)
{
    write_file(path, encode_image(image, maxval));
}

}  // namespace lrd
