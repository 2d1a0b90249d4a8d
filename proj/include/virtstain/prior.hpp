#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "virtstain/image.hpp"

namespace virtstain {

// Continuous per-pixel cell probability map, same H x W as the source patch.
struct SoftPrior {
  Image prob;  // 1 channel, values in [0,1]

  int h() const { return prob.h; }
  int w() const { return prob.w; }
  double at(int y, int x) const { return prob.at(y, x, 0); }
};

// Thresholded counterpart, kept for ablation comparison only.
struct BinaryMask {
  Image mask;  // 1 channel, values in {0,1}
  double threshold = 0.5;
};

// Pluggable nuclei segmentation backend. The pretrained foundation model
// itself stays out of the repository; implementations either ingest its
// precomputed probability maps or synthesize maps for tests. Given identical
// input and construction, probability_map must return identical rasters, and
// implementations must be safe for concurrent read-only use.
class SegmentationBackend {
 public:
  virtual ~SegmentationBackend() = default;
  virtual std::string name() const = 0;
  virtual bool deterministic() const { return true; }
  // patch_key identifies the patch ("<case_id>/<patch_id>") for file lookup
  // and error reporting.
  virtual SoftPrior probability_map(const Image& patch, const std::string& patch_key) const = 0;
};

struct BlobCenter {
  int row = 0;
  int col = 0;
  double radius = 0.0;
};

// Gaussian-bump oracle: probability at q is max over centers of
// exp(-d(q, center)^2 / (2 * (radius/2)^2)). Deterministic; stands in for the
// out-of-scope segmentation model in tests and synthetic datasets.
class SyntheticBlobBackend : public SegmentationBackend {
 public:
  SyntheticBlobBackend(std::vector<BlobCenter> centers, uint64_t seed = 0);
  std::string name() const override { return "synthetic_blob"; }
  SoftPrior probability_map(const Image& patch, const std::string& patch_key) const override;
  const std::vector<BlobCenter>& centers() const { return centers_; }

 private:
  std::vector<BlobCenter> centers_;
  uint64_t seed_;
};

// Reads precomputed probability maps from
// <root>/priors/<case_id>/<patch_id>.png (16-bit grayscale, value/65535).
class FilePriorBackend : public SegmentationBackend {
 public:
  explicit FilePriorBackend(std::filesystem::path dataset_root);
  std::string name() const override { return "file_ingest"; }
  SoftPrior probability_map(const Image& patch, const std::string& patch_key) const override;

 private:
  std::filesystem::path root_;
};

// Probability = mean channel intensity mapped to [0,1]. Weight-free default
// for instance detection on fluorescence nuclear channels.
class IntensityBackend : public SegmentationBackend {
 public:
  std::string name() const override { return "intensity"; }
  SoftPrior probability_map(const Image& patch, const std::string& patch_key) const override;
};

// Single backend invocation; validates the [0,1] and shape contracts.
SoftPrior generate_soft_prior(const Image& patch, const SegmentationBackend& backend,
                              const std::string& patch_key = "");

// mask = 1 exactly where prob > t (strict). Requires 0 < t < 1.
BinaryMask binarize(const SoftPrior& prior, double threshold);

}  // namespace virtstain
