#include "virtstain/nn.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "virtstain/errors.hpp"

namespace virtstain::nn {

namespace {

using RowMajorMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajorMat>;
using ConstMatMap = Eigen::Map<const RowMajorMat>;

// col[(ic*k+ky)*k+kx, oy*ow+ox] = x[ic, oy*s-p+ky, ox*s-p+kx], zero padded.
void im2col(const double* x, int c, int ih, int iw, int k, int s, int p, int oh, int ow,
            double* col) {
  for (int ic = 0; ic < c; ++ic) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = col + ((static_cast<size_t>(ic) * k + ky) * k + kx) *
                                (static_cast<size_t>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s - p + ky;
          if (iy < 0 || iy >= ih) {
            for (int ox = 0; ox < ow; ++ox) *dst++ = 0.0;
            continue;
          }
          const double* src = x + (static_cast<size_t>(ic) * ih + iy) * iw;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s - p + kx;
            *dst++ = (ix < 0 || ix >= iw) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

// Scatter-add transpose of im2col.
void col2im(const double* col, int c, int ih, int iw, int k, int s, int p, int oh, int ow,
            double* x) {
  for (int ic = 0; ic < c; ++ic) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = col + ((static_cast<size_t>(ic) * k + ky) * k + kx) *
                                      (static_cast<size_t>(oh) * ow);
        for (int oy = 0; oy < oh; ++oy, src += ow) {
          const int iy = oy * s - p + ky;
          if (iy < 0 || iy >= ih) continue;
          double* dst = x + (static_cast<size_t>(ic) * ih + iy) * iw;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s - p + kx;
            if (ix >= 0 && ix < iw) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor tensor_from_image(const Image& img) {
  Tensor t(1, img.c, img.h, img.w);
  for (int ch = 0; ch < img.c; ++ch) {
    for (int y = 0; y < img.h; ++y) {
      for (int x = 0; x < img.w; ++x) t.at(0, ch, y, x) = img.at(y, x, ch);
    }
  }
  return t;
}

Tensor tensor_from_images(const std::vector<Image>& imgs) {
  if (imgs.empty()) throw DataError("tensor_from_images: empty batch");
  Tensor t(static_cast<int>(imgs.size()), imgs[0].c, imgs[0].h, imgs[0].w);
  for (size_t i = 0; i < imgs.size(); ++i) {
    if (!imgs[i].same_shape(imgs[0])) throw DataError("tensor_from_images: ragged batch");
    for (int ch = 0; ch < t.c; ++ch) {
      for (int y = 0; y < t.h; ++y) {
        for (int x = 0; x < t.w; ++x) {
          t.at(static_cast<int>(i), ch, y, x) = imgs[i].at(y, x, ch);
        }
      }
    }
  }
  return t;
}

Image image_from_tensor(const Tensor& t, int sample, ValueRange range) {
  Image img(t.h, t.w, t.c, range);
  for (int ch = 0; ch < t.c; ++ch) {
    for (int y = 0; y < t.h; ++y) {
      for (int x = 0; x < t.w; ++x) img.at(y, x, ch) = t.at(sample, ch, y, x);
    }
  }
  return img;
}

// ---------------------------------------------------------------- Conv2d

Conv2d::Conv2d(std::string name, int in_c, int out_c, int kernel, int stride, int pad,
               bool bias)
    : in_c_(in_c), out_c_(out_c), k_(kernel), stride_(stride), pad_(pad), has_bias_(bias) {
  w_.name = name + ".w";
  w_.value = Tensor(out_c, in_c, kernel, kernel);
  w_.grad = Tensor(out_c, in_c, kernel, kernel);
  if (bias) {
    b_.name = name + ".b";
    b_.value = Tensor(1, out_c, 1, 1);
    b_.grad = Tensor(1, out_c, 1, 1);
  }
}

void Conv2d::init(Rng& rng) {
  for (double& x : w_.value.v) x = rng.normal(0.0, 0.02);
  if (has_bias_) b_.value.zero();
}

void Conv2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&w_);
  if (has_bias_) out.push_back(&b_);
}

Tensor Conv2d::forward(const Tensor& x) {
  if (x.c != in_c_) {
    throw UsageError("Conv2d " + w_.name + ": expected " + std::to_string(in_c_) +
                     " input channels, got " + std::to_string(x.c));
  }
  x_cache_ = x;
  const int oh = out_size_h(x.h), ow = out_size_w(x.w);
  Tensor y(x.n, out_c_, oh, ow);
  const int kk = in_c_ * k_ * k_;
  std::vector<double> col(static_cast<size_t>(kk) * oh * ow);
  ConstMatMap wm(w_.value.v.data(), out_c_, kk);
  for (int s = 0; s < x.n; ++s) {
    im2col(x.v.data() + s * x.chw(), in_c_, x.h, x.w, k_, stride_, pad_, oh, ow, col.data());
    ConstMatMap cm(col.data(), kk, static_cast<long>(oh) * ow);
    MatMap ym(y.v.data() + s * y.chw(), out_c_, static_cast<long>(oh) * ow);
    ym.noalias() = wm * cm;
    if (has_bias_) {
      for (int oc = 0; oc < out_c_; ++oc) ym.row(oc).array() += b_.value.v[oc];
    }
  }
  return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
  const Tensor& x = x_cache_;
  const int oh = dy.h, ow = dy.w;
  const int kk = in_c_ * k_ * k_;
  Tensor dx(x.n, in_c_, x.h, x.w);
  std::vector<double> col(static_cast<size_t>(kk) * oh * ow);
  std::vector<double> colg(static_cast<size_t>(kk) * oh * ow);
  ConstMatMap wm(w_.value.v.data(), out_c_, kk);
  MatMap dwm(w_.grad.v.data(), out_c_, kk);
  for (int s = 0; s < x.n; ++s) {
    ConstMatMap dym(dy.v.data() + s * dy.chw(), out_c_, static_cast<long>(oh) * ow);
    im2col(x.v.data() + s * x.chw(), in_c_, x.h, x.w, k_, stride_, pad_, oh, ow, col.data());
    ConstMatMap cm(col.data(), kk, static_cast<long>(oh) * ow);
    dwm.noalias() += dym * cm.transpose();
    if (has_bias_) {
      for (int oc = 0; oc < out_c_; ++oc) b_.grad.v[oc] += dym.row(oc).sum();
    }
    MatMap cgm(colg.data(), kk, static_cast<long>(oh) * ow);
    cgm.noalias() = wm.transpose() * dym;
    col2im(colg.data(), in_c_, x.h, x.w, k_, stride_, pad_, oh, ow, dx.v.data() + s * dx.chw());
  }
  return dx;
}

// ------------------------------------------------------- ConvTranspose2d

ConvTranspose2d::ConvTranspose2d(std::string name, int in_c, int out_c, int kernel, int stride,
                                 int pad, int output_pad, bool bias)
    : in_c_(in_c), out_c_(out_c), k_(kernel), stride_(stride), pad_(pad), out_pad_(output_pad),
      has_bias_(bias) {
  w_.name = name + ".w";
  w_.value = Tensor(in_c, out_c, kernel, kernel);
  w_.grad = Tensor(in_c, out_c, kernel, kernel);
  if (bias) {
    b_.name = name + ".b";
    b_.value = Tensor(1, out_c, 1, 1);
    b_.grad = Tensor(1, out_c, 1, 1);
  }
}

void ConvTranspose2d::init(Rng& rng) {
  for (double& x : w_.value.v) x = rng.normal(0.0, 0.02);
  if (has_bias_) b_.value.zero();
}

void ConvTranspose2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&w_);
  if (has_bias_) out.push_back(&b_);
}

// Forward is the data-gradient of a stride-s conv whose weight is w_ viewed
// as [in_c (conv out), out_c (conv in), k, k]; backward is that conv.
Tensor ConvTranspose2d::forward(const Tensor& x) {
  if (x.c != in_c_) {
    throw UsageError("ConvTranspose2d " + w_.name + ": expected " + std::to_string(in_c_) +
                     " input channels, got " + std::to_string(x.c));
  }
  x_cache_ = x;
  const int oh = out_size_h(x.h), ow = out_size_w(x.w);
  Tensor y(x.n, out_c_, oh, ow);
  const int kk = out_c_ * k_ * k_;
  std::vector<double> colg(static_cast<size_t>(kk) * x.h * x.w);
  ConstMatMap wm(w_.value.v.data(), in_c_, kk);
  for (int s = 0; s < x.n; ++s) {
    ConstMatMap xm(x.v.data() + s * x.chw(), in_c_, static_cast<long>(x.h) * x.w);
    MatMap cgm(colg.data(), kk, static_cast<long>(x.h) * x.w);
    cgm.noalias() = wm.transpose() * xm;
    double* yp = y.v.data() + s * y.chw();
    col2im(colg.data(), out_c_, oh, ow, k_, stride_, pad_, x.h, x.w, yp);
    if (has_bias_) {
      for (int oc = 0; oc < out_c_; ++oc) {
        double* p = yp + static_cast<size_t>(oc) * oh * ow;
        const double bv = b_.value.v[oc];
        for (long i = 0; i < static_cast<long>(oh) * ow; ++i) p[i] += bv;
      }
    }
  }
  return y;
}

Tensor ConvTranspose2d::backward(const Tensor& dy) {
  const Tensor& x = x_cache_;
  const int oh = dy.h, ow = dy.w;  // spatial size of the convT output
  const int kk = out_c_ * k_ * k_;
  Tensor dx(x.n, in_c_, x.h, x.w);
  std::vector<double> col(static_cast<size_t>(kk) * x.h * x.w);
  ConstMatMap wm(w_.value.v.data(), in_c_, kk);
  MatMap dwm(w_.grad.v.data(), in_c_, kk);
  for (int s = 0; s < x.n; ++s) {
    // dx = conv(dy, w): gather dy through the kernel geometry.
    im2col(dy.v.data() + s * dy.chw(), out_c_, oh, ow, k_, stride_, pad_, x.h, x.w, col.data());
    ConstMatMap cm(col.data(), kk, static_cast<long>(x.h) * x.w);
    MatMap dxm(dx.v.data() + s * dx.chw(), in_c_, static_cast<long>(x.h) * x.w);
    dxm.noalias() = wm * cm;
    // dw[a,b,ky,kx] = sum x[a, iy, ix] * dy[b, iy*s-p+ky, ix*s-p+kx].
    ConstMatMap xm(x.v.data() + s * x.chw(), in_c_, static_cast<long>(x.h) * x.w);
    dwm.noalias() += xm * cm.transpose();
    if (has_bias_) {
      const double* dp = dy.v.data() + s * dy.chw();
      for (int oc = 0; oc < out_c_; ++oc) {
        double acc = 0.0;
        const double* p = dp + static_cast<size_t>(oc) * oh * ow;
        for (long i = 0; i < static_cast<long>(oh) * ow; ++i) acc += p[i];
        b_.grad.v[oc] += acc;
      }
    }
  }
  return dx;
}

// -------------------------------------------------------- InstanceNorm2d

InstanceNorm2d::InstanceNorm2d(std::string name, int channels, double eps)
    : c_(channels), eps_(eps) {
  gamma_.name = name + ".gamma";
  gamma_.value = Tensor(1, channels, 1, 1, 1.0);
  gamma_.grad = Tensor(1, channels, 1, 1);
  beta_.name = name + ".beta";
  beta_.value = Tensor(1, channels, 1, 1);
  beta_.grad = Tensor(1, channels, 1, 1);
}

void InstanceNorm2d::init(Rng& rng) {
  for (double& g : gamma_.value.v) g = rng.normal(1.0, 0.02);
  beta_.value.zero();
}

void InstanceNorm2d::collect_params(std::vector<Param*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

Tensor InstanceNorm2d::forward(const Tensor& x) {
  if (x.c != c_) throw UsageError("InstanceNorm2d " + gamma_.name + ": channel mismatch");
  const long hw = static_cast<long>(x.h) * x.w;
  Tensor y(x.n, x.c, x.h, x.w);
  xhat_cache_ = Tensor(x.n, x.c, x.h, x.w);
  invstd_cache_.assign(static_cast<size_t>(x.n) * x.c, 0.0);
  for (int s = 0; s < x.n; ++s) {
    for (int ch = 0; ch < x.c; ++ch) {
      const double* xp = x.v.data() + (static_cast<size_t>(s) * x.c + ch) * hw;
      double mean = 0.0;
      for (long i = 0; i < hw; ++i) mean += xp[i];
      mean /= hw;
      double var = 0.0;
      for (long i = 0; i < hw; ++i) {
        const double d = xp[i] - mean;
        var += d * d;
      }
      var /= hw;
      const double inv = 1.0 / std::sqrt(var + eps_);
      invstd_cache_[static_cast<size_t>(s) * x.c + ch] = inv;
      const double g = gamma_.value.v[ch], b = beta_.value.v[ch];
      double* hp = xhat_cache_.v.data() + (static_cast<size_t>(s) * x.c + ch) * hw;
      double* yp = y.v.data() + (static_cast<size_t>(s) * x.c + ch) * hw;
      for (long i = 0; i < hw; ++i) {
        hp[i] = (xp[i] - mean) * inv;
        yp[i] = g * hp[i] + b;
      }
    }
  }
  return y;
}

Tensor InstanceNorm2d::backward(const Tensor& dy) {
  const long hw = static_cast<long>(dy.h) * dy.w;
  Tensor dx(dy.n, dy.c, dy.h, dy.w);
  for (int s = 0; s < dy.n; ++s) {
    for (int ch = 0; ch < dy.c; ++ch) {
      const size_t off = (static_cast<size_t>(s) * dy.c + ch) * hw;
      const double* dp = dy.v.data() + off;
      const double* hp = xhat_cache_.v.data() + off;
      const double g = gamma_.value.v[ch];
      const double inv = invstd_cache_[static_cast<size_t>(s) * dy.c + ch];
      double sum_d = 0.0, sum_dh = 0.0;
      for (long i = 0; i < hw; ++i) {
        sum_d += dp[i];
        sum_dh += dp[i] * hp[i];
      }
      gamma_.grad.v[ch] += sum_dh;
      beta_.grad.v[ch] += sum_d;
      const double m_d = sum_d / hw, m_dh = sum_dh / hw;
      double* xp = dx.v.data() + off;
      for (long i = 0; i < hw; ++i) {
        xp[i] = g * inv * (dp[i] - m_d - hp[i] * m_dh);
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------ activations

Tensor LeakyReLU::forward(const Tensor& x) {
  x_cache_ = x;
  Tensor y = x;
  for (double& v : y.v) {
    if (v < 0.0) v *= slope_;
  }
  return y;
}

Tensor LeakyReLU::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (size_t i = 0; i < dx.size(); ++i) {
    if (x_cache_.v[i] < 0.0) dx.v[i] *= slope_;
  }
  return dx;
}

Tensor ReLU::forward(const Tensor& x) {
  x_cache_ = x;
  Tensor y = x;
  for (double& v : y.v) {
    if (v < 0.0) v = 0.0;
  }
  return y;
}

Tensor ReLU::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (size_t i = 0; i < dx.size(); ++i) {
    if (x_cache_.v[i] < 0.0) dx.v[i] = 0.0;
  }
  return dx;
}

Tensor Tanh::forward(const Tensor& x) {
  Tensor y = x;
  for (double& v : y.v) v = std::tanh(v);
  y_cache_ = y;
  return y;
}

Tensor Tanh::backward(const Tensor& dy) {
  Tensor dx = dy;
  for (size_t i = 0; i < dx.size(); ++i) {
    dx.v[i] *= 1.0 - y_cache_.v[i] * y_cache_.v[i];
  }
  return dx;
}

// ---------------------------------------------------------- EmbeddingBias

EmbeddingBias::EmbeddingBias(std::string name, int channels, int emb_dim)
    : c_(channels), dim_(emb_dim) {
  w_.name = name + ".w";
  w_.value = Tensor(1, 1, channels, emb_dim);
  w_.grad = Tensor(1, 1, channels, emb_dim);
  b_.name = name + ".b";
  b_.value = Tensor(1, channels, 1, 1);
  b_.grad = Tensor(1, channels, 1, 1);
}

void EmbeddingBias::init(Rng& rng) {
  for (double& x : w_.value.v) x = rng.normal(0.0, 0.02);
  b_.value.zero();
}

void EmbeddingBias::collect_params(std::vector<Param*>& out) {
  out.push_back(&w_);
  out.push_back(&b_);
}

void EmbeddingBias::set_embedding(const std::vector<std::vector<double>>& emb) { emb_ = emb; }

Tensor EmbeddingBias::forward(const Tensor& x) {
  if (static_cast<int>(emb_.size()) != x.n) {
    throw UsageError("EmbeddingBias " + w_.name + ": embedding batch mismatch");
  }
  const long hw = static_cast<long>(x.h) * x.w;
  Tensor y = x;
  for (int s = 0; s < x.n; ++s) {
    for (int ch = 0; ch < c_; ++ch) {
      double bias = b_.value.v[ch];
      const double* wr = w_.value.v.data() + static_cast<size_t>(ch) * dim_;
      for (int e = 0; e < dim_; ++e) bias += wr[e] * emb_[s][e];
      double* yp = y.v.data() + (static_cast<size_t>(s) * x.c + ch) * hw;
      for (long i = 0; i < hw; ++i) yp[i] += bias;
    }
  }
  return y;
}

Tensor EmbeddingBias::backward(const Tensor& dy) {
  const long hw = static_cast<long>(dy.h) * dy.w;
  for (int s = 0; s < dy.n; ++s) {
    for (int ch = 0; ch < c_; ++ch) {
      const double* dp = dy.v.data() + (static_cast<size_t>(s) * dy.c + ch) * hw;
      double acc = 0.0;
      for (long i = 0; i < hw; ++i) acc += dp[i];
      b_.grad.v[ch] += acc;
      double* wg = w_.grad.v.data() + static_cast<size_t>(ch) * dim_;
      for (int e = 0; e < dim_; ++e) wg[e] += acc * emb_[s][e];
    }
  }
  return dy;
}

// ----------------------------------------------------------------- concat

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) {
    throw DataError("concat: spatial/batch shape mismatch");
  }
  Tensor y(a.n, a.c + b.c, a.h, a.w);
  const long hw = static_cast<long>(a.h) * a.w;
  for (int s = 0; s < a.n; ++s) {
    std::copy_n(a.v.data() + s * a.chw(), a.chw(), y.v.data() + s * y.chw());
    std::copy_n(b.v.data() + s * b.chw(), b.chw(), y.v.data() + s * y.chw() + a.c * hw);
  }
  return y;
}

void split(const Tensor& dy, int c_a, Tensor& da, Tensor& db) {
  da = Tensor(dy.n, c_a, dy.h, dy.w);
  db = Tensor(dy.n, dy.c - c_a, dy.h, dy.w);
  const long hw = static_cast<long>(dy.h) * dy.w;
  for (int s = 0; s < dy.n; ++s) {
    std::copy_n(dy.v.data() + s * dy.chw(), da.chw(), da.v.data() + s * da.chw());
    std::copy_n(dy.v.data() + s * dy.chw() + static_cast<size_t>(c_a) * hw, db.chw(),
                db.v.data() + s * db.chw());
  }
}

// ------------------------------------------------------------------- Adam

Adam::Adam(std::vector<Param*> params, double lr, double beta1, double beta2, double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  for (Param* p : params_) {
    m_.emplace_back(p->value.size(), 0.0);
    v_.emplace_back(p->value.size(), 0.0);
  }
}

void Adam::zero_grad() {
  for (Param* p : params_) p->grad.zero();
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t i = 0; i < params_.size(); ++i) {
    Param* p = params_[i];
    for (size_t j = 0; j < p->value.size(); ++j) {
      const double g = p->grad.v[j];
      m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g;
      v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g * g;
      const double mhat = m_[i][j] / bc1;
      const double vhat = v_[i][j] / bc2;
      p->value.v[j] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

}  // namespace virtstain::nn
