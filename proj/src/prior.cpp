#include "virtstain/prior.hpp"

#include <algorithm>
#include <cmath>

#include "virtstain/errors.hpp"
#include "virtstain/io.hpp"

namespace virtstain {

SyntheticBlobBackend::SyntheticBlobBackend(std::vector<BlobCenter> centers, uint64_t seed)
    : centers_(std::move(centers)), seed_(seed) {
  for (const auto& c : centers_) {
    if (c.radius <= 0.0) throw DataError("SyntheticBlobBackend: radius must be > 0");
  }
}

SoftPrior SyntheticBlobBackend::probability_map(const Image& patch,
                                                const std::string& patch_key) const {
  for (const auto& c : centers_) {
    if (c.row < 0 || c.row >= patch.h || c.col < 0 || c.col >= patch.w) {
      throw BackendError("synthetic_blob: center outside image bounds for patch '" +
                         patch_key + "'");
    }
  }
  SoftPrior out{Image(patch.h, patch.w, 1, ValueRange::Unit01)};
  for (int y = 0; y < patch.h; ++y) {
    for (int x = 0; x < patch.w; ++x) {
      double p = 0.0;
      for (const auto& c : centers_) {
        const double dy = y - c.row;
        const double dx = x - c.col;
        const double s = c.radius * 0.5;
        p = std::max(p, std::exp(-(dy * dy + dx * dx) / (2.0 * s * s)));
      }
      out.prob.at(y, x, 0) = std::min(p, 1.0);
    }
  }
  return out;
}

FilePriorBackend::FilePriorBackend(std::filesystem::path dataset_root)
    : root_(std::move(dataset_root)) {}

SoftPrior FilePriorBackend::probability_map(const Image& patch,
                                            const std::string& patch_key) const {
  const auto path = root_ / "priors" / (patch_key + ".png");
  if (!std::filesystem::exists(path)) {
    throw BackendError("file_ingest: no precomputed prior for patch '" + patch_key +
                       "' (expected " + path.string() + ")");
  }
  Image img = read_png(path);
  if (img.c != 1) {
    throw BackendError("file_ingest: prior for patch '" + patch_key +
                       "' must be single-channel grayscale");
  }
  if (img.h != patch.h || img.w != patch.w) {
    throw BackendError("file_ingest: prior size mismatch for patch '" + patch_key + "'");
  }
  return SoftPrior{std::move(img)};
}

SoftPrior IntensityBackend::probability_map(const Image& patch,
                                            const std::string& patch_key) const {
  (void)patch_key;
  Image u = to_range(patch, ValueRange::Unit01);
  SoftPrior out{Image(patch.h, patch.w, 1, ValueRange::Unit01)};
  for (int y = 0; y < u.h; ++y) {
    for (int x = 0; x < u.w; ++x) {
      double s = 0.0;
      for (int ch = 0; ch < u.c; ++ch) s += u.at(y, x, ch);
      out.prob.at(y, x, 0) = std::clamp(s / u.c, 0.0, 1.0);
    }
  }
  return out;
}

SoftPrior generate_soft_prior(const Image& patch, const SegmentationBackend& backend,
                              const std::string& patch_key) {
  if (patch.c != 3) throw DataError("generate_soft_prior: expected a 3-channel IHC patch");
  SoftPrior prior = backend.probability_map(patch, patch_key);
  if (prior.prob.h != patch.h || prior.prob.w != patch.w || prior.prob.c != 1) {
    throw BackendError("backend '" + backend.name() + "' returned a misshaped map for patch '" +
                       patch_key + "'");
  }
  prior.prob.check_range("soft prior from backend '" + backend.name() + "'");
  return prior;
}

BinaryMask binarize(const SoftPrior& prior, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw UsageError("binarize: threshold must lie strictly inside (0,1)");
  }
  BinaryMask out{Image(prior.h(), prior.w(), 1, ValueRange::Unit01), threshold};
  for (size_t i = 0; i < prior.prob.size(); ++i) {
    out.mask.v[i] = prior.prob.v[i] > threshold ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace virtstain
