#pragma once

#include "lrd/conv_model.hpp"
#include "lrd/solver.hpp"
#include "lrd/tensor.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace lrd {

// LRT tensor file:
//   "LRTENS01" | u32 N | N x u64 dims | prod(dims) x binary64
// Dictionary file:
//   "LRDICT01" | u32 M | u32 C | u32 N | N x u64 support | M*C payloads (m-major, c-minor)
// All integers and doubles little-endian, payloads mode-0 fastest.

std::vector<std::uint8_t> encode_tensor(const DenseTensor& t);
DenseTensor decode_tensor(std::span<const std::uint8_t> bytes);

void write_tensor(const std::filesystem::path& path, const DenseTensor& t);
DenseTensor read_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_dictionary(const Dictionary& dict);
Dictionary decode_dictionary(std::span<const std::uint8_t> bytes);

void write_dictionary(const std::filesystem::path& path, const Dictionary& dict);
Dictionary read_dictionary(const std::filesystem::path& path);

/// Masks are LRT files holding 0.0 (missing) and 1.0 (observed).
void write_mask(const std::filesystem::path& path, const CompletionMask& mask);
CompletionMask read_mask(const std::filesystem::path& path);

/// Binary PGM (P5) -> H x W, binary PPM (P6) -> H x W x 3, scaled to [0, 1].
DenseTensor load_image_pgm_ppm(const std::filesystem::path& path);
DenseTensor decode_image(std::span<const std::uint8_t> bytes);

/// Inverse of load_image_pgm_ppm. Values are clamped to [0, 1] and rounded.
void write_image(const std::filesystem::path& path, const DenseTensor& image, unsigned maxval = 255);
std::vector<std::uint8_t> encode_image(const DenseTensor& image, unsigned maxval = 255);

/// Stacks M rank-R activations into one (sum_n I_n) x R x M tensor: the
/// mode factors of filter m are concatenated row-wise in slice m.
DenseTensor pack_activations(std::span<const KruskalTensor> activations);
/// Inverse of pack_activations; `shape` supplies the row split.
std::vector<KruskalTensor> unpack_activations(const DenseTensor& packed, const Shape& shape);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace lrd
