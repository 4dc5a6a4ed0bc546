#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "relsal/raster.hpp"

namespace relsal {

/// Decoded image samples, interleaved, row-major. bit_depth is 8 or 16.
struct ImageData {
  int width = 0;
  int height = 0;
  int channels = 1;
  int bit_depth = 8;
  std::vector<std::uint16_t> samples;
};

/// Reads PNG, PGM (P5) or PPM (P6); the format is detected from the file's magic bytes.
ImageData read_image(const std::filesystem::path& path);

/// Writes PNG for a ".png" extension, binary PGM/PPM otherwise.
void write_image(const std::filesystem::path& path, const ImageData& image);

// Typed views. Agreement maps store raw observer counts; binary maps are {0,255}
// on disk; saliency maps are value/255; instance maps are 16-bit labels.
AgreementMap load_agreement_map(const std::filesystem::path& path, int n_observers);
void save_agreement_map(const std::filesystem::path& path, const AgreementMap& map);

BinaryMap load_binary_map(const std::filesystem::path& path);
void save_binary_map(const std::filesystem::path& path, const BinaryMap& map);

SaliencyMap load_saliency_map(const std::filesystem::path& path);
/// Quantizes to 8 bits with round-to-nearest.
void save_saliency_map(const std::filesystem::path& path, const SaliencyMap& map);

InstanceMap load_instance_map(const std::filesystem::path& path);
void save_instance_map(const std::filesystem::path& path, const InstanceMap& map);

/// The 8-bit value a saliency sample takes on disk.
std::uint8_t quantize_saliency(double v) noexcept;

}  // namespace relsal
