#include "slip/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "slip/errors.hpp"
#include "slip/log.hpp"

namespace fs = std::filesystem;

namespace slip {
namespace {

const std::set<std::string> kImageExtensions = {".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"};

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return kImageExtensions.count(ext) > 0;
}

std::vector<fs::path> sorted_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

bool decodable(const fs::path& p) { return !cv::imread(p.string(), cv::IMREAD_COLOR).empty(); }

}  // namespace

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::dev: return "dev";
    case Split::test: return "test";
  }
  return "?";
}

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "dev") return Split::dev;
  if (text == "test") return Split::test;
  throw ArgumentError("unknown split '" + std::string(text) + "'");
}

std::string normalize_attack(std::string_view name) {
  if (name == "print" || name == "replay" || name == "mask_3d" || name == "none") {
    return std::string(name);
  }
  return "other";
}

std::vector<const SampleRecord*> DatasetManifest::select(Split split) const {
  std::vector<const SampleRecord*> out;
  for (const auto& r : records) {
    if (r.split == split) out.push_back(&r);
  }
  return out;
}

DatasetManifest ingest_dataset(const fs::path& root, const std::string& dataset,
                               const IngestOptions& options) {
  if (!fs::is_directory(root)) {
    throw IoError("dataset '" + dataset + "' root does not exist: " + root.string());
  }
  DatasetManifest m;
  m.dataset = dataset;
  m.root = root;

  auto add = [&](const fs::path& file, SampleLabel label, const std::string& attack, Split split) {
    const fs::path rel = fs::relative(file, root);
    if (!decodable(file)) {
      log_warning("skipping unreadable image " + file.string());
      m.skipped.push_back(rel);
      return;
    }
    m.records.push_back({dataset + "/" + rel.generic_string(), rel, label, attack, split});
  };

  for (Split split : {Split::train, Split::dev, Split::test}) {
    const fs::path base = root / std::string(to_string(split));
    for (const auto& f : sorted_images(base / "live")) add(f, SampleLabel::live, "none", split);
    const fs::path spoof = base / "spoof";
    if (!fs::is_directory(spoof)) continue;
    std::vector<fs::path> attack_dirs;
    for (const auto& entry : fs::directory_iterator(spoof)) {
      if (entry.is_directory()) {
        attack_dirs.push_back(entry.path());
      } else if (entry.is_regular_file() && is_image(entry.path())) {
        throw IoError("spoof images must live in spoof/<attack_type>/: " + entry.path().string());
      }
    }
    std::sort(attack_dirs.begin(), attack_dirs.end());
    for (const auto& dir : attack_dirs) {
      const std::string attack = normalize_attack(dir.filename().string());
      for (const auto& f : sorted_images(dir)) add(f, SampleLabel::spoof, attack, split);
    }
  }

  if (options.one_class) {
    bool any_live = false;
    for (const auto& r : m.records) {
      if (r.split != Split::train) continue;
      if (r.label == SampleLabel::spoof) {
        throw ProtocolError("one-class training split contains a spoof image: " +
                            (root / r.relative_path).string());
      }
      any_live = true;
    }
    if (!any_live) {
      throw ProtocolError("dataset '" + dataset + "' has no live training images under " +
                          (root / "train" / "live").string());
    }
  }
  return m;
}

std::vector<double> load_image(const fs::path& path, std::size_t size) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot decode image " + path.string());
  if (static_cast<std::size_t>(bgr.rows) != size || static_cast<std::size_t>(bgr.cols) != size) {
    cv::Mat resized;
    cv::resize(bgr, resized, cv::Size(static_cast<int>(size), static_cast<int>(size)), 0, 0,
               cv::INTER_AREA);
    bgr = resized;
  }
  std::vector<double> out(size * size * 3);
  for (int r = 0; r < bgr.rows; ++r) {
    for (int c = 0; c < bgr.cols; ++c) {
      const auto& px = bgr.at<cv::Vec3b>(r, c);
      const std::size_t k = (static_cast<std::size_t>(r) * size + static_cast<std::size_t>(c)) * 3;
      out[k] = px[2] / 255.0;
      out[k + 1] = px[1] / 255.0;
      out[k + 2] = px[0] / 255.0;
    }
  }
  return out;
}

ImageBatch load_images(const DatasetManifest& manifest, std::span<const SampleRecord* const> records,
                       std::size_t size) {
  ImageBatch batch;
  batch.height = batch.width = size;
  batch.pixels.reserve(records.size() * size * size * 3);
  for (const SampleRecord* r : records) batch.append(load_image(manifest.root / r->relative_path, size));
  return batch;
}

void write_manifest_csv(const fs::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write manifest '" + path.string() + "'");
  out << "sample_id,relative_path,label,attack_type,split\n";
  for (const auto& r : m.records) {
    out << r.sample_id << ',' << r.relative_path.generic_string() << ',' << to_string(r.label) << ','
        << r.attack_type << ',' << to_string(r.split) << '\n';
  }
}

}  // namespace slip
