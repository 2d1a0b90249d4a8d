#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace virtstain {

// Declared intensity interval of a raster. Unit01 is the storage/IO range,
// Sym11 the network range.
enum class ValueRange { Unit01, Sym11 };

double range_min(ValueRange r);
double range_max(ValueRange r);
const char* range_name(ValueRange r);

// H x W x C raster of doubles, HWC interleaved. The shared data model for
// IHC patches, mIF stacks, priors and metric inputs.
struct Image {
  int h = 0;
  int w = 0;
  int c = 0;
  ValueRange range = ValueRange::Unit01;
  std::vector<double> v;

  Image() = default;
  Image(int h_, int w_, int c_, ValueRange r = ValueRange::Unit01, double fill = 0.0)
      : h(h_), w(w_), c(c_), range(r), v(static_cast<size_t>(h_) * w_ * c_, fill) {}

  double& at(int y, int x, int ch) {
    return v[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  double at(int y, int x, int ch) const {
    return v[(static_cast<size_t>(y) * w + x) * c + ch];
  }
  size_t size() const { return v.size(); }
  bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }

  double min_value() const;
  double max_value() const;

  // Throws DataError if any value falls outside the declared range
  // (tolerance 1e-12 for IO round-off).
  void check_range(const std::string& what) const;
};

// Multi-channel mIF stack: raster plus marker names and the index of the
// nuclear reference channel (DAPI). Spatial size must match the paired IHC
// patch; that contract is checked where pairs are assembled.
struct MifStack {
  Image img;
  std::vector<std::string> channel_names;
  int nuclear_channel = 0;

  MifStack() = default;
  MifStack(Image im, std::vector<std::string> names, int nuclear);

  int channels() const { return img.c; }
  Image channel(int idx) const;  // single-channel copy
};

// [0,1] -> [-1,1], out = 2*in - 1. Input must declare and satisfy Unit01.
Image normalize(const Image& patch);

// [-1,1] -> [0,1]; inverse of normalize within 1e-6.
Image denormalize(const Image& patch);

// Bilinear resize (half-pixel-centre convention). Constant inputs stay
// constant and outputs never leave the input's [min, max].
Image resize_bilinear(const Image& patch, int out_h, int out_w);

// Standard preprocessing size.
Image resize_to_256(const Image& patch);

// Concatenate a 3-channel patch with a single-channel prior map (values in
// [0,1]), rescaling the prior to the patch's declared range so all four
// channels share statistics. Channels 0..2 are the patch, bit-exact.
Image concat_channels(const Image& x, const Image& prior);

// Channels [first, first+count) as a new image with x's range.
Image slice_channels(const Image& x, int first, int count);

// Convert to the requested range (no-op when already there).
Image to_range(const Image& x, ValueRange target);

}  // namespace virtstain
