#pragma once

// Directory-tree datasets laid out as
//   root/{train,dev,test}/live/<images>
//   root/{train,dev,test}/spoof/<attack_type>/<images>

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "slip/labels.hpp"
#include "slip/model.hpp"

namespace slip {

enum class Split { train, dev, test };

std::string_view to_string(Split split);
Split parse_split(std::string_view text);

/// print, replay, mask_3d, other, or none (live).
std::string normalize_attack(std::string_view directory_name);

struct SampleRecord {
  std::string sample_id;
  std::filesystem::path relative_path;
  SampleLabel label = SampleLabel::live;
  std::string attack_type = "none";
  Split split = Split::train;
};

struct DatasetManifest {
  std::string dataset;
  std::filesystem::path root;
  std::vector<SampleRecord> records;
  /// Files that could not be decoded, relative to root.
  std::vector<std::filesystem::path> skipped;

  std::vector<const SampleRecord*> select(Split split) const;
};

struct IngestOptions {
  /// Requires live-only, non-empty train split.
  bool one_class = true;
};

/// Walks the tree in sorted path order. Unreadable images are skipped with a
/// warning. Sample ids are "<dataset>/<relative path>".
DatasetManifest ingest_dataset(const std::filesystem::path& root, const std::string& dataset,
                               const IngestOptions& options = {});

/// Decodes images as 8-bit RGB scaled to [0, 1] and resized to size x size.
std::vector<double> load_image(const std::filesystem::path& path, std::size_t size);
ImageBatch load_images(const DatasetManifest& manifest, std::span<const SampleRecord* const> records,
                       std::size_t size);

void write_manifest_csv(const std::filesystem::path& path, const DatasetManifest& manifest);

}  // namespace slip
