#include "slip/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <opencv2/imgcodecs.hpp>

#include "slip/errors.hpp"
#include "slip/rng.hpp"

namespace slip {
namespace {

constexpr std::uint64_t kLiveStream = 21;
constexpr std::uint64_t kSpoofStream = 22;

void paste_occluder(std::vector<double>& img, const SyntheticSpec& spec, Rng& rng,
                    std::size_t attack) {
  const std::size_t size = spec.image_size;
  const auto side = [&](double f) {
    return std::clamp<std::uint64_t>(static_cast<std::uint64_t>(std::lround(f * static_cast<double>(size))), 1, size);
  };
  const std::uint64_t lo = side(spec.occluder_min);
  const std::uint64_t hi = std::max(lo, side(spec.occluder_max));
  const std::size_t h = static_cast<std::size_t>(lo + rng.index(hi - lo + 1));
  const std::size_t w = static_cast<std::size_t>(lo + rng.index(hi - lo + 1));
  const std::size_t top = static_cast<std::size_t>(rng.index(size - h + 1));
  const std::size_t left = static_cast<std::size_t>(rng.index(size - w + 1));
  const std::size_t period = 2 + attack % 3;
  for (std::size_t r = top; r < top + h; ++r) {
    for (std::size_t c = left; c < left + w; ++c) {
      // Attack styles alternate between horizontal, vertical and checker stripes.
      std::size_t phase = 0;
      switch (attack % 3) {
        case 0: phase = r / period; break;
        case 1: phase = c / period; break;
        default: phase = r / period + c / period; break;
      }
      const double v = phase % 2 == 0 ? 0.02 : 0.98;
      for (std::size_t ch = 0; ch < 3; ++ch) img[(r * size + c) * 3 + ch] = v;
    }
  }
}

SyntheticSplit make_split(const SyntheticSpec& spec, std::uint64_t split_tag, std::size_t n_live,
                          std::size_t n_spoof, const std::string& name) {
  SyntheticSplit out;
  out.images.height = out.images.width = spec.image_size;
  for (std::size_t i = 0; i < n_live; ++i) {
    const std::uint64_t s = Rng::derive(spec.seed, {kLiveStream, split_tag, i}).next_u64();
    out.images.append(synthetic_live_image(spec.image_size, s));
    out.labels.push_back(SampleLabel::live);
    out.sample_ids.push_back(name + "/live/" + std::to_string(i));
    out.attack_types.emplace_back("none");
  }
  for (std::size_t i = 0; i < n_spoof; ++i) {
    const std::uint64_t s = Rng::derive(spec.seed, {kSpoofStream, split_tag, i}).next_u64();
    const std::size_t attack = spec.attacks.empty() ? 0 : i % spec.attacks.size();
    out.images.append(synthetic_spoof_image(spec, s, attack));
    out.labels.push_back(SampleLabel::spoof);
    const std::string attack_name = spec.attacks.empty() ? "other" : spec.attacks[attack];
    out.sample_ids.push_back(name + "/spoof/" + attack_name + "/" + std::to_string(i));
    out.attack_types.push_back(attack_name);
  }
  return out;
}

}  // namespace

std::vector<double> synthetic_live_image(std::size_t size, std::uint64_t seed) {
  if (size == 0) throw ArgumentError("synthetic image size must be positive");
  Rng rng(seed);
  std::vector<double> img(size * size * 3);
  double base[3];
  for (double& b : base) b = rng.uniform(0.35, 0.65);
  struct Wave {
    double fy, fx, phase, amp;
  };
  Wave waves[3][3];
  for (auto& ch : waves) {
    for (auto& w : ch) {
      w.fy = rng.uniform(0.0, 2.0);
      w.fx = rng.uniform(0.0, 2.0);
      w.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
      w.amp = rng.uniform(0.03, 0.08);
    }
  }
  const double n = static_cast<double>(size);
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double v = base[ch];
        for (const Wave& w : waves[ch]) {
          v += w.amp * std::sin(2.0 * std::numbers::pi *
                                    (w.fy * static_cast<double>(r) + w.fx * static_cast<double>(c)) / n +
                                w.phase);
        }
        img[(r * size + c) * 3 + ch] = std::clamp(v, 0.0, 1.0);
      }
    }
  }
  return img;
}

std::vector<double> synthetic_spoof_image(const SyntheticSpec& spec, std::uint64_t seed,
                                          std::size_t attack_index) {
  if (spec.max_occluders == 0 || !(spec.occluder_min > 0.0) || spec.occluder_max > 1.0) {
    throw ArgumentError("synthetic occluder settings are out of range");
  }
  Rng rng(seed);
  std::vector<double> img = synthetic_live_image(spec.image_size, rng.next_u64());
  const std::size_t count = 1 + static_cast<std::size_t>(rng.index(spec.max_occluders));
  for (std::size_t k = 0; k < count; ++k) paste_occluder(img, spec, rng, attack_index);
  return img;
}

SyntheticDataset make_synthetic(const SyntheticSpec& spec) {
  SyntheticDataset d;
  d.train = make_split(spec, 0, spec.live_train, 0, "train");
  d.dev = make_split(spec, 1, spec.live_dev, spec.spoof_dev, "dev");
  d.test = make_split(spec, 2, spec.live_test, spec.spoof_test, "test");
  return d;
}

void write_synthetic(const SyntheticDataset& data, const std::filesystem::path& root) {
  auto write_split = [&](const SyntheticSplit& split, const std::string& name) {
    for (std::size_t i = 0; i < split.images.count; ++i) {
      std::filesystem::path dir = root / name;
      if (split.labels[i] == SampleLabel::live) {
        dir /= "live";
      } else {
        dir = dir / "spoof" / split.attack_types[i];
      }
      std::filesystem::create_directories(dir);
      const auto px = split.images.image(i);
      const int n = static_cast<int>(split.images.height);
      cv::Mat mat(n, static_cast<int>(split.images.width), CV_8UC3);
      for (int r = 0; r < mat.rows; ++r) {
        for (int c = 0; c < mat.cols; ++c) {
          const std::size_t k = (static_cast<std::size_t>(r) * split.images.width + c) * 3;
          // OpenCV stores BGR.
          for (int ch = 0; ch < 3; ++ch) {
            mat.at<cv::Vec3b>(r, c)[2 - ch] =
                static_cast<unsigned char>(std::lround(std::clamp(px[k + ch], 0.0, 1.0) * 255.0));
          }
        }
      }
      char name_buf[32];
      std::snprintf(name_buf, sizeof(name_buf), "%05zu.png", i);
      const auto file = dir / name_buf;
      if (!cv::imwrite(file.string(), mat)) throw IoError("cannot write '" + file.string() + "'");
    }
  };
  write_split(data.train, "train");
  write_split(data.dev, "dev");
  write_split(data.test, "test");
}

}  // namespace slip
