#pragma once

// Two-cluster toy face data. Live images are smooth low-frequency textures;
// spoof images are the same kind of texture with one or more high-contrast
// striped rectangles pasted at random positions.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "slip/labels.hpp"
#include "slip/model.hpp"

namespace slip {

struct SyntheticSpec {
  std::size_t image_size = 64;
  std::size_t live_train = 64;
  std::size_t live_dev = 16;
  std::size_t spoof_dev = 16;
  std::size_t live_test = 48;
  std::size_t spoof_test = 48;
  /// Attack names cycled over spoof samples; each has its own stripe style.
  std::vector<std::string> attacks{"print", "replay"};
  /// Occluder side lengths are drawn from [min, max] times the image size.
  double occluder_min = 0.375;
  double occluder_max = 0.625;
  std::size_t max_occluders = 2;
  std::uint64_t seed = 0;
};

struct SyntheticSplit {
  ImageBatch images;
  std::vector<SampleLabel> labels;
  std::vector<std::string> sample_ids;
  std::vector<std::string> attack_types;  // "none" for live
};

struct SyntheticDataset {
  SyntheticSplit train;
  SyntheticSplit dev;
  SyntheticSplit test;
};

std::vector<double> synthetic_live_image(std::size_t size, std::uint64_t seed);
std::vector<double> synthetic_spoof_image(const SyntheticSpec& spec, std::uint64_t seed,
                                          std::size_t attack_index);

SyntheticDataset make_synthetic(const SyntheticSpec& spec);

/// Writes PNGs under root/{train,dev,test}/{live,spoof/<attack>}.
void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& root);

}  // namespace slip
