#include "virtstain/image.hpp"

#include <algorithm>
#include <cmath>

#include "virtstain/errors.hpp"

namespace virtstain {

double range_min(ValueRange r) { return r == ValueRange::Unit01 ? 0.0 : -1.0; }
double range_max(ValueRange r) { return 1.0; }

const char* range_name(ValueRange r) {
  return r == ValueRange::Unit01 ? "[0,1]" : "[-1,1]";
}

double Image::min_value() const {
  return v.empty() ? 0.0 : *std::min_element(v.begin(), v.end());
}

double Image::max_value() const {
  return v.empty() ? 0.0 : *std::max_element(v.begin(), v.end());
}

void Image::check_range(const std::string& what) const {
  const double lo = range_min(range) - 1e-12;
  const double hi = range_max(range) + 1e-12;
  for (double x : v) {
    if (!(x >= lo && x <= hi)) {
      throw DataError(what + ": value " + std::to_string(x) +
                      " outside declared range " + range_name(range));
    }
  }
}

MifStack::MifStack(Image im, std::vector<std::string> names, int nuclear)
    : img(std::move(im)), channel_names(std::move(names)), nuclear_channel(nuclear) {
  if (img.c < 1 || static_cast<int>(channel_names.size()) != img.c) {
    throw DataError("MifStack: channel_names size must equal channel count");
  }
  if (nuclear_channel < 0 || nuclear_channel >= img.c) {
    throw DataError("MifStack: nuclear_channel_index out of range");
  }
}

Image MifStack::channel(int idx) const {
  if (idx < 0 || idx >= img.c) throw DataError("MifStack::channel: index out of range");
  return slice_channels(img, idx, 1);
}

Image normalize(const Image& patch) {
  if (patch.range != ValueRange::Unit01) {
    throw DataError("normalize: input must declare range [0,1]");
  }
  patch.check_range("normalize");
  Image out = patch;
  out.range = ValueRange::Sym11;
  for (double& x : out.v) x = 2.0 * x - 1.0;
  return out;
}

Image denormalize(const Image& patch) {
  if (patch.range != ValueRange::Sym11) {
    throw DataError("denormalize: input must declare range [-1,1]");
  }
  patch.check_range("denormalize");
  Image out = patch;
  out.range = ValueRange::Unit01;
  for (double& x : out.v) x = 0.5 * (x + 1.0);
  return out;
}

Image resize_bilinear(const Image& patch, int out_h, int out_w) {
  if (patch.h < 8 || patch.w < 8) {
    throw DataError("resize: degenerate input, height and width must be >= 8");
  }
  if (out_h < 1 || out_w < 1) throw DataError("resize: bad output size");
  if (out_h == patch.h && out_w == patch.w) return patch;

  Image out(out_h, out_w, patch.c, patch.range);
  const double sy = static_cast<double>(patch.h) / out_h;
  const double sx = static_cast<double>(patch.w) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(patch.h - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, patch.h - 1);
    const double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(patch.w - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, patch.w - 1);
      const double tx = fx - x0;
      for (int ch = 0; ch < patch.c; ++ch) {
        const double a = patch.at(y0, x0, ch);
        const double b = patch.at(y0, x1, ch);
        const double c = patch.at(y1, x0, ch);
        const double d = patch.at(y1, x1, ch);
        const double top = a + tx * (b - a);
        const double bot = c + tx * (d - c);
        double val = top + ty * (bot - top);
        // Convexity can be violated by a final rounding ulp; pin it.
        const double lo = std::min(std::min(a, b), std::min(c, d));
        const double hi = std::max(std::max(a, b), std::max(c, d));
        out.at(y, x, ch) = std::clamp(val, lo, hi);
      }
    }
  }
  return out;
}

Image resize_to_256(const Image& patch) { return resize_bilinear(patch, 256, 256); }

Image concat_channels(const Image& x, const Image& prior) {
  if (x.c != 3) throw DataError("concat_channels: patch must have 3 channels");
  if (prior.c != 1) throw DataError("concat_channels: prior must have 1 channel");
  if (x.h != prior.h || x.w != prior.w) {
    throw DataError("concat_channels: spatial shape mismatch");
  }
  Image out(x.h, x.w, 4, x.range);
  const bool sym = x.range == ValueRange::Sym11;
  for (int y = 0; y < x.h; ++y) {
    for (int xx = 0; xx < x.w; ++xx) {
      for (int ch = 0; ch < 3; ++ch) out.at(y, xx, ch) = x.at(y, xx, ch);
      const double p = prior.at(y, xx, 0);
      out.at(y, xx, 3) = sym ? 2.0 * p - 1.0 : p;
    }
  }
  return out;
}

Image slice_channels(const Image& x, int first, int count) {
  if (first < 0 || count < 1 || first + count > x.c) {
    throw DataError("slice_channels: channel range out of bounds");
  }
  Image out(x.h, x.w, count, x.range);
  for (int y = 0; y < x.h; ++y) {
    for (int xx = 0; xx < x.w; ++xx) {
      for (int ch = 0; ch < count; ++ch) {
        out.at(y, xx, ch) = x.at(y, xx, first + ch);
      }
    }
  }
  return out;
}

Image to_range(const Image& x, ValueRange target) {
  if (x.range == target) return x;
  return target == ValueRange::Sym11 ? normalize(x) : denormalize(x);
}

}  // namespace virtstain
