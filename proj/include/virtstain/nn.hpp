#pragma once

#include <memory>
#include <string>
#include <vector>

#include "virtstain/image.hpp"
#include "virtstain/rng.hpp"

namespace virtstain::nn {

// NCHW tensor of doubles. Double precision keeps the loss/metric kernels and
// the training path on one numeric footing (tests pin 1e-6 tolerances).
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> v;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, double fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_), v(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

  double& at(int in, int ic, int iy, int ix) {
    return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  double at(int in, int ic, int iy, int ix) const {
    return v[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  size_t size() const { return v.size(); }
  size_t chw() const { return static_cast<size_t>(c) * h * w; }
  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  void zero() { std::fill(v.begin(), v.end(), 0.0); }
};

// Image (HWC) <-> single-sample tensor (CHW).
Tensor tensor_from_image(const Image& img);
Tensor tensor_from_images(const std::vector<Image>& imgs);
Image image_from_tensor(const Tensor& t, int sample, ValueRange range);

struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

// A layer owns its parameters and the activation cache of the last forward.
// forward/backward are single-in-flight: backward consumes the cache written
// by the preceding forward.
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual void collect_params(std::vector<Param*>& out) {}
  virtual void init(Rng& rng) {}
};

class Conv2d : public Layer {
 public:
  Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad,
         bool bias = true);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void init(Rng& rng) override;

  int out_size_h(int ih) const { return (ih + 2 * pad_ - k_) / stride_ + 1; }
  int out_size_w(int iw) const { return (iw + 2 * pad_ - k_) / stride_ + 1; }

 private:
  int in_c_, out_c_, k_, stride_, pad_;
  bool has_bias_;
  Param w_, b_;
  Tensor x_cache_;
};

class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad,
                  int output_pad = 0, bool bias = true);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void init(Rng& rng) override;

  int out_size_h(int ih) const { return (ih - 1) * stride_ - 2 * pad_ + k_ + out_pad_; }
  int out_size_w(int iw) const { return (iw - 1) * stride_ - 2 * pad_ + k_ + out_pad_; }

 private:
  int in_c_, out_c_, k_, stride_, pad_, out_pad_;
  bool has_bias_;
  Param w_;  // stored [in_c, out_c, k, k]
  Param b_;
  Tensor x_cache_;
};

// Per-(sample, channel) normalization over H*W, affine. No running stats, so
// train and eval behave identically and batches stay independent.
class InstanceNorm2d : public Layer {
 public:
  explicit InstanceNorm2d(std::string name, int channels, double eps = 1e-5);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void init(Rng& rng) override;

 private:
  int c_;
  double eps_;
  Param gamma_, beta_;
  Tensor xhat_cache_;
  std::vector<double> invstd_cache_;
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(double slope = 0.2) : slope_(slope) {}
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;

 private:
  double slope_;
  Tensor x_cache_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor x_cache_;
};

class Tanh : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;

 private:
  Tensor y_cache_;
};

// Adds a learned per-channel projection of a per-sample embedding vector,
// broadcast over space. Carries the timestep signal into each denoiser
// resolution.
class EmbeddingBias : public Layer {
 public:
  EmbeddingBias(std::string name, int channels, int emb_dim);
  void set_embedding(const std::vector<std::vector<double>>& emb);  // [n][emb_dim]
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& dy) override;
  void collect_params(std::vector<Param*>& out) override;
  void init(Rng& rng) override;

 private:
  int c_, dim_;
  Param w_, b_;
  std::vector<std::vector<double>> emb_;
};

// Channel concatenation with split on the way back.
Tensor concat(const Tensor& a, const Tensor& b);
void split(const Tensor& dy, int c_a, Tensor& da, Tensor& db);

class Adam {
 public:
  Adam(std::vector<Param*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);
  void zero_grad();
  void step();
  double lr() const { return lr_; }

 private:
  std::vector<Param*> params_;
  std::vector<std::vector<double>> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
};

}  // namespace virtstain::nn
