#include "virtstain/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

#include "virtstain/errors.hpp"

namespace virtstain {

using nn::Tensor;

GeneratorArch generator_arch_from_string(const std::string& s) {
  if (s == "unet") return GeneratorArch::UNet;
  if (s == "resnet") return GeneratorArch::ResNet;
  throw UsageError("unknown generator arch '" + s + "'");
}

std::string to_string(GeneratorArch a) {
  return a == GeneratorArch::UNet ? "unet" : "resnet";
}

void GeneratorSpec::validate() const {
  if (in_channels != 3 && in_channels != 4) {
    throw UsageError("GeneratorSpec: in_channels must be 3 or 4");
  }
  if (out_channels < 1) throw UsageError("GeneratorSpec: out_channels must be >= 1");
  if (base_width < 1 || depth < 1) throw UsageError("GeneratorSpec: bad width/depth");
  if (arch == GeneratorArch::ResNet && resnet_blocks < 1) {
    throw UsageError("GeneratorSpec: resnet_blocks must be >= 1");
  }
}

// ----------------------------------------------------------------- U-Net

// Encoder/decoder with skip connections; stride-2 convs down, stride-2
// transposed convs up. Optional per-level embedding bias (denoiser mode) and
// optional tanh head (generator mode).
class UNetCore {
 public:
  UNetCore(int in_c, int out_c, int width, int depth, bool tanh_out, int emb_dim)
      : depth_(depth), tanh_out_(tanh_out), emb_dim_(emb_dim) {
    ch_.resize(depth);
    for (int i = 0; i < depth; ++i) ch_[i] = width * std::min(1 << i, 8);
    for (int i = 0; i < depth; ++i) {
      const int ic = i == 0 ? in_c : ch_[i - 1];
      enc_conv_.push_back(std::make_unique<nn::Conv2d>("enc" + std::to_string(i), ic, ch_[i],
                                                       4, 2, 1));
      enc_norm_.push_back(i == 0 ? nullptr
                                 : std::make_unique<nn::InstanceNorm2d>(
                                       "enc" + std::to_string(i) + ".norm", ch_[i]));
      enc_act_.push_back(std::make_unique<nn::LeakyReLU>(0.2));
      enc_emb_.push_back(emb_dim > 0
                             ? std::make_unique<nn::EmbeddingBias>(
                                   "enc" + std::to_string(i) + ".emb", ch_[i], emb_dim)
                             : nullptr);
    }
    for (int i = depth - 1; i >= 1; --i) {
      const int ic = i == depth - 1 ? ch_[i] : 2 * ch_[i];
      dec_convt_.push_back(std::make_unique<nn::ConvTranspose2d>("dec" + std::to_string(i), ic,
                                                                 ch_[i - 1], 4, 2, 1));
      dec_norm_.push_back(std::make_unique<nn::InstanceNorm2d>(
          "dec" + std::to_string(i) + ".norm", ch_[i - 1]));
      dec_act_.push_back(std::make_unique<nn::ReLU>());
      dec_emb_.push_back(emb_dim > 0
                             ? std::make_unique<nn::EmbeddingBias>(
                                   "dec" + std::to_string(i) + ".emb", ch_[i - 1], emb_dim)
                             : nullptr);
    }
    const int fic = depth > 1 ? 2 * ch_[0] : ch_[0];
    final_ = std::make_unique<nn::ConvTranspose2d>("head", fic, out_c, 4, 2, 1);
    if (tanh_out_) tanh_ = std::make_unique<nn::Tanh>();
  }

  void set_embedding(const std::vector<std::vector<double>>& emb) {
    for (auto& e : enc_emb_) {
      if (e) e->set_embedding(emb);
    }
    for (auto& e : dec_emb_) {
      if (e) e->set_embedding(emb);
    }
  }

  Tensor forward(const Tensor& x) {
    if (x.h % (1 << depth_) != 0 || x.w % (1 << depth_) != 0) {
      throw UsageError("UNet: input size must be divisible by 2^depth");
    }
    skips_.assign(depth_, Tensor());
    Tensor h = x;
    for (int i = 0; i < depth_; ++i) {
      h = enc_conv_[i]->forward(h);
      if (enc_emb_[i]) h = enc_emb_[i]->forward(h);
      if (enc_norm_[i]) h = enc_norm_[i]->forward(h);
      h = enc_act_[i]->forward(h);
      skips_[i] = h;
    }
    for (size_t d = 0; d < dec_convt_.size(); ++d) {
      const int level = depth_ - 1 - static_cast<int>(d);
      h = dec_convt_[d]->forward(h);
      if (dec_emb_[d]) h = dec_emb_[d]->forward(h);
      h = dec_norm_[d]->forward(h);
      h = dec_act_[d]->forward(h);
      h = nn::concat(h, skips_[level - 1]);
    }
    h = final_->forward(h);
    if (tanh_) h = tanh_->forward(h);
    return h;
  }

  Tensor backward(const Tensor& dy) {
    Tensor g = dy;
    if (tanh_) g = tanh_->backward(g);
    g = final_->backward(g);
    std::vector<Tensor> dskip(depth_);
    // Decoder ran levels depth-1 .. 1; unwind from the head back up.
    for (int d = static_cast<int>(dec_convt_.size()) - 1; d >= 0; --d) {
      const int level = depth_ - 1 - d;
      Tensor dpart, ds;
      nn::split(g, ch_[level - 1], dpart, ds);
      dskip[level - 1] = std::move(ds);
      dpart = dec_act_[d]->backward(dpart);
      dpart = dec_norm_[d]->backward(dpart);
      if (dec_emb_[d]) dpart = dec_emb_[d]->backward(dpart);
      g = dec_convt_[d]->backward(dpart);
    }
    for (int i = depth_ - 1; i >= 0; --i) {
      if (i < depth_ - 1 && dskip[i].size() > 0) {
        for (size_t j = 0; j < g.size(); ++j) g.v[j] += dskip[i].v[j];
      }
      g = enc_act_[i]->backward(g);
      if (enc_norm_[i]) g = enc_norm_[i]->backward(g);
      if (enc_emb_[i]) g = enc_emb_[i]->backward(g);
      g = enc_conv_[i]->backward(g);
    }
    return g;
  }

  std::vector<nn::Param*> params() {
    std::vector<nn::Param*> out;
    auto add = [&out](nn::Layer* l) {
      if (l) l->collect_params(out);
    };
    for (int i = 0; i < depth_; ++i) {
      add(enc_conv_[i].get());
      add(enc_emb_[i].get());
      add(enc_norm_[i].get());
    }
    for (size_t d = 0; d < dec_convt_.size(); ++d) {
      add(dec_convt_[d].get());
      add(dec_emb_[d].get());
      add(dec_norm_[d].get());
    }
    add(final_.get());
    return out;
  }

  void init(Rng& rng) {
    for (nn::Param* p : params()) {
      (void)p;
    }
    for (int i = 0; i < depth_; ++i) {
      enc_conv_[i]->init(rng);
      if (enc_emb_[i]) enc_emb_[i]->init(rng);
      if (enc_norm_[i]) enc_norm_[i]->init(rng);
    }
    for (size_t d = 0; d < dec_convt_.size(); ++d) {
      dec_convt_[d]->init(rng);
      if (dec_emb_[d]) dec_emb_[d]->init(rng);
      dec_norm_[d]->init(rng);
    }
    final_->init(rng);
  }

 private:
  int depth_;
  bool tanh_out_;
  int emb_dim_;
  std::vector<int> ch_;
  std::vector<std::unique_ptr<nn::Conv2d>> enc_conv_;
  std::vector<std::unique_ptr<nn::InstanceNorm2d>> enc_norm_;
  std::vector<std::unique_ptr<nn::LeakyReLU>> enc_act_;
  std::vector<std::unique_ptr<nn::EmbeddingBias>> enc_emb_;
  std::vector<std::unique_ptr<nn::ConvTranspose2d>> dec_convt_;
  std::vector<std::unique_ptr<nn::InstanceNorm2d>> dec_norm_;
  std::vector<std::unique_ptr<nn::ReLU>> dec_act_;
  std::vector<std::unique_ptr<nn::EmbeddingBias>> dec_emb_;
  std::unique_ptr<nn::ConvTranspose2d> final_;
  std::unique_ptr<nn::Tanh> tanh_;
  std::vector<Tensor> skips_;
};

namespace {

class UNetGenerator : public Generator {
 public:
  explicit UNetGenerator(const GeneratorSpec& spec)
      : spec_(spec),
        core_(spec.in_channels, spec.out_channels, spec.base_width, spec.depth,
              /*tanh_out=*/true, /*emb_dim=*/0) {}

  Tensor forward(const Tensor& x) override { return core_.forward(x); }
  Tensor backward(const Tensor& dy) override { return core_.backward(dy); }
  std::vector<nn::Param*> params() override { return core_.params(); }
  const GeneratorSpec& spec() const override { return spec_; }
  void init(Rng& rng) override { core_.init(rng); }

 private:
  GeneratorSpec spec_;
  UNetCore core_;
};

// c7s1-w, two stride-2 downs, residual blocks at 4w, two ups, c7s1-out.
class ResNetGenerator : public Generator {
 public:
  explicit ResNetGenerator(const GeneratorSpec& spec) : spec_(spec) {
    const int w = spec.base_width;
    head_.push_back(std::make_unique<nn::Conv2d>("stem", spec.in_channels, w, 7, 1, 3));
    head_.push_back(std::make_unique<nn::InstanceNorm2d>("stem.norm", w));
    head_.push_back(std::make_unique<nn::ReLU>());
    head_.push_back(std::make_unique<nn::Conv2d>("down0", w, 2 * w, 3, 2, 1));
    head_.push_back(std::make_unique<nn::InstanceNorm2d>("down0.norm", 2 * w));
    head_.push_back(std::make_unique<nn::ReLU>());
    head_.push_back(std::make_unique<nn::Conv2d>("down1", 2 * w, 4 * w, 3, 2, 1));
    head_.push_back(std::make_unique<nn::InstanceNorm2d>("down1.norm", 4 * w));
    head_.push_back(std::make_unique<nn::ReLU>());
    for (int b = 0; b < spec.resnet_blocks; ++b) {
      const std::string nm = "block" + std::to_string(b);
      blocks_.emplace_back();
      auto& bl = blocks_.back();
      bl.push_back(std::make_unique<nn::Conv2d>(nm + ".c0", 4 * w, 4 * w, 3, 1, 1));
      bl.push_back(std::make_unique<nn::InstanceNorm2d>(nm + ".n0", 4 * w));
      bl.push_back(std::make_unique<nn::ReLU>());
      bl.push_back(std::make_unique<nn::Conv2d>(nm + ".c1", 4 * w, 4 * w, 3, 1, 1));
      bl.push_back(std::make_unique<nn::InstanceNorm2d>(nm + ".n1", 4 * w));
    }
    tail_.push_back(std::make_unique<nn::ConvTranspose2d>("up0", 4 * w, 2 * w, 3, 2, 1, 1));
    tail_.push_back(std::make_unique<nn::InstanceNorm2d>("up0.norm", 2 * w));
    tail_.push_back(std::make_unique<nn::ReLU>());
    tail_.push_back(std::make_unique<nn::ConvTranspose2d>("up1", 2 * w, w, 3, 2, 1, 1));
    tail_.push_back(std::make_unique<nn::InstanceNorm2d>("up1.norm", w));
    tail_.push_back(std::make_unique<nn::ReLU>());
    tail_.push_back(std::make_unique<nn::Conv2d>("head", w, spec.out_channels, 7, 1, 3));
    tail_.push_back(std::make_unique<nn::Tanh>());
  }

  Tensor forward(const Tensor& x) override {
    if (x.h % 4 != 0 || x.w % 4 != 0) {
      throw UsageError("ResNet generator: input size must be divisible by 4");
    }
    Tensor h = x;
    for (auto& l : head_) h = l->forward(h);
    for (auto& bl : blocks_) {
      Tensor in = h;
      for (auto& l : bl) h = l->forward(h);
      for (size_t i = 0; i < h.size(); ++i) h.v[i] += in.v[i];
    }
    for (auto& l : tail_) h = l->forward(h);
    return h;
  }

  Tensor backward(const Tensor& dy) override {
    Tensor g = dy;
    for (auto it = tail_.rbegin(); it != tail_.rend(); ++it) g = (*it)->backward(g);
    for (auto bl = blocks_.rbegin(); bl != blocks_.rend(); ++bl) {
      Tensor gb = g;
      for (auto it = bl->rbegin(); it != bl->rend(); ++it) gb = (*it)->backward(gb);
      for (size_t i = 0; i < g.size(); ++i) g.v[i] += gb.v[i] - g.v[i] + gb.v[i];
    }
    for (auto it = head_.rbegin(); it != head_.rend(); ++it) g = (*it)->backward(g);
    return g;
  }

  std::vector<nn::Param*> params() override {
    std::vector<nn::Param*> out;
    for (auto& l : head_) l->collect_params(out);
    for (auto& bl : blocks_) {
      for (auto& l : bl) l->collect_params(out);
    }
    for (auto& l : tail_) l->collect_params(out);
    return out;
  }

  const GeneratorSpec& spec() const override { return spec_; }

  void init(Rng& rng) override {
    for (auto& l : head_) l->init(rng);
    for (auto& bl : blocks_) {
      for (auto& l : bl) l->init(rng);
    }
    for (auto& l : tail_) l->init(rng);
  }

 private:
  GeneratorSpec spec_;
  std::vector<std::unique_ptr<nn::Layer>> head_;
  std::vector<std::vector<std::unique_ptr<nn::Layer>>> blocks_;
  std::vector<std::unique_ptr<nn::Layer>> tail_;
};

}  // namespace

std::unique_ptr<Generator> build_generator(const GeneratorSpec& spec) {
  spec.validate();
  if (spec.arch == GeneratorArch::UNet) return std::make_unique<UNetGenerator>(spec);
  return std::make_unique<ResNetGenerator>(spec);
}

nn::Tensor generator_forward(Generator& g, const nn::Tensor& x) {
  if (x.c != g.spec().in_channels) {
    throw UsageError("generator_forward: input has " + std::to_string(x.c) +
                     " channels, spec wants " + std::to_string(g.spec().in_channels));
  }
  return g.forward(x);
}

// -------------------------------------------------------- PatchDiscriminator

int DiscriminatorSpec::receptive_field() const {
  // k=4 layers: n_strided at stride 2, then two at stride 1.
  int rf = 1;
  int jump = 1;
  for (int i = 0; i < n_strided; ++i) {
    rf += 3 * jump;
    jump *= 2;
  }
  rf += 3 * jump;  // stride-1 widening layer
  rf += 3 * jump;  // stride-1 head
  return rf;
}

void DiscriminatorSpec::validate() const {
  if (in_channels < 2) throw UsageError("DiscriminatorSpec: in_channels must be >= 2");
  if (base_width < 1 || n_strided < 1) throw UsageError("DiscriminatorSpec: bad width/layers");
}

PatchDiscriminator::PatchDiscriminator(const DiscriminatorSpec& spec) : spec_(spec) {
  spec.validate();
  const int w = spec.base_width;
  int ic = spec.in_channels;
  int oc = w;
  for (int i = 0; i < spec.n_strided; ++i) {
    layers_.push_back(std::make_unique<nn::Conv2d>("d" + std::to_string(i), ic, oc, 4, 2, 1));
    if (i > 0) {
      layers_.push_back(
          std::make_unique<nn::InstanceNorm2d>("d" + std::to_string(i) + ".norm", oc));
    }
    layers_.push_back(std::make_unique<nn::LeakyReLU>(0.2));
    ic = oc;
    oc = std::min(oc * 2, 8 * w);
  }
  layers_.push_back(std::make_unique<nn::Conv2d>("dwide", ic, oc, 4, 1, 1));
  layers_.push_back(std::make_unique<nn::InstanceNorm2d>("dwide.norm", oc));
  layers_.push_back(std::make_unique<nn::LeakyReLU>(0.2));
  layers_.push_back(std::make_unique<nn::Conv2d>("dhead", oc, 1, 4, 1, 1));
}

Tensor PatchDiscriminator::forward(const Tensor& xy) {
  Tensor h = xy;
  for (auto& l : layers_) h = l->forward(h);
  return h;
}

Tensor PatchDiscriminator::backward(const Tensor& dy) {
  Tensor g = dy;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

std::vector<nn::Param*> PatchDiscriminator::params() {
  std::vector<nn::Param*> out;
  for (auto& l : layers_) l->collect_params(out);
  return out;
}

void PatchDiscriminator::init(Rng& rng) {
  for (auto& l : layers_) l->init(rng);
}

// -------------------------------------------------------------- diffusion

DiffusionSchedule DiffusionSchedule::linear(int T, double beta_1, double beta_T) {
  DiffusionSchedule s;
  s.T = T;
  s.beta.assign(T + 1, 0.0);
  s.alpha.assign(T + 1, 1.0);
  s.alpha_bar.assign(T + 1, 1.0);
  for (int t = 1; t <= T; ++t) {
    s.beta[t] = T == 1 ? beta_1 : beta_1 + (beta_T - beta_1) * (t - 1) / (T - 1);
    s.alpha[t] = 1.0 - s.beta[t];
    s.alpha_bar[t] = s.alpha_bar[t - 1] * s.alpha[t];
  }
  s.validate();
  return s;
}

void DiffusionSchedule::validate() const {
  if (T < 1 || static_cast<int>(beta.size()) != T + 1) {
    throw UsageError("DiffusionSchedule: inconsistent sizes");
  }
  if (!(beta[1] > 0.0 && beta[T] < 1.0)) {
    throw UsageError("DiffusionSchedule: betas must lie in (0,1)");
  }
  for (int t = 2; t <= T; ++t) {
    if (!(beta[t] > beta[t - 1]) && T > 1) {
      throw UsageError("DiffusionSchedule: beta must increase strictly");
    }
  }
  if (alpha_bar[0] != 1.0) throw UsageError("DiffusionSchedule: alpha_bar[0] must be 1");
  for (int t = 1; t <= T; ++t) {
    if (!(alpha_bar[t] < alpha_bar[t - 1])) {
      throw UsageError("DiffusionSchedule: alpha_bar must decrease strictly");
    }
  }
}

Tensor ddpm_forward_noise(const DiffusionSchedule& sched, const Tensor& y0,
                          const std::vector<int>& t, const Tensor& noise) {
  if (!y0.same_shape(noise)) throw DataError("ddpm_forward_noise: noise shape mismatch");
  if (static_cast<int>(t.size()) != y0.n) throw DataError("ddpm_forward_noise: t batch mismatch");
  Tensor y = y0;
  for (int s = 0; s < y0.n; ++s) {
    if (t[s] < 1 || t[s] > sched.T) {
      throw UsageError("ddpm_forward_noise: t=" + std::to_string(t[s]) + " outside 1.." +
                       std::to_string(sched.T));
    }
    const double a = std::sqrt(sched.alpha_bar[t[s]]);
    const double b = std::sqrt(1.0 - sched.alpha_bar[t[s]]);
    double* yp = y.v.data() + s * y.chw();
    const double* np = noise.v.data() + s * noise.chw();
    for (size_t i = 0; i < y.chw(); ++i) yp[i] = a * yp[i] + b * np[i];
  }
  return y;
}

DdpmStepResult ddpm_train_step(const DiffusionSchedule& sched, Denoiser& denoiser,
                               const Tensor& cond, const Tensor& y0, const std::vector<int>& t,
                               const Tensor& noise) {
  DdpmStepResult out;
  out.y_t = ddpm_forward_noise(sched, y0, t, noise);
  out.predicted_noise = denoiser.predict_noise(out.y_t, t, cond);
  if (!out.predicted_noise.same_shape(y0)) {
    throw DataError("ddpm_train_step: denoiser output shape mismatch");
  }
  return out;
}

Tensor ddpm_sample(const DiffusionSchedule& sched, Denoiser& denoiser, const Tensor& cond,
                   int out_channels, uint64_t seed) {
  Rng rng(seed);
  Tensor x(cond.n, out_channels, cond.h, cond.w);
  for (double& v : x.v) v = rng.normal();
  for (int t = sched.T; t >= 1; --t) {
    const std::vector<int> ts(cond.n, t);
    Tensor eps = denoiser.predict_noise(x, ts, cond);
    const double ab = sched.alpha_bar[t];
    const double ab_prev = sched.alpha_bar[t - 1];
    const double a_t = sched.alpha[t];
    const double b_t = sched.beta[t];
    const double sigma = t > 1 ? std::sqrt((1.0 - ab_prev) / (1.0 - ab) * b_t) : 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
      double x0 = (x.v[i] - std::sqrt(1.0 - ab) * eps.v[i]) / std::sqrt(ab);
      x0 = std::clamp(x0, -1.0, 1.0);
      double mean = (std::sqrt(ab_prev) * b_t * x0 + std::sqrt(a_t) * (1.0 - ab_prev) * x.v[i]) /
                    (1.0 - ab);
      x.v[i] = t > 1 ? mean + sigma * rng.normal() : mean;
      if (!std::isfinite(x.v[i])) {
        throw NumericalError("ddpm_sample: non-finite value at step " + std::to_string(t));
      }
    }
  }
  for (double& v : x.v) v = std::clamp(v, -1.0, 1.0);
  return x;
}

// ----------------------------------------------------------- UNetDenoiser

UNetDenoiser::UNetDenoiser(const GeneratorSpec& spec, int emb_dim)
    : spec_(spec), emb_dim_(emb_dim) {
  spec.validate();
  core_ = std::make_unique<UNetCore>(spec.out_channels + spec.in_channels, spec.out_channels,
                                     spec.base_width, spec.depth, /*tanh_out=*/false, emb_dim);
}

UNetDenoiser::~UNetDenoiser() = default;

namespace {

std::vector<std::vector<double>> sinusoidal_embedding(const std::vector<int>& t, int dim) {
  const int half = dim / 2;
  std::vector<std::vector<double>> emb(t.size(), std::vector<double>(dim, 0.0));
  for (size_t s = 0; s < t.size(); ++s) {
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * i / std::max(half - 1, 1));
      emb[s][i] = std::sin(t[s] * freq);
      emb[s][half + i] = std::cos(t[s] * freq);
    }
  }
  return emb;
}

}  // namespace

Tensor UNetDenoiser::predict_noise(const Tensor& y_t, const std::vector<int>& t,
                                   const Tensor& cond) {
  if (cond.c != spec_.in_channels) {
    throw UsageError("UNetDenoiser: conditioning has " + std::to_string(cond.c) +
                     " channels, spec wants " + std::to_string(spec_.in_channels));
  }
  core_->set_embedding(sinusoidal_embedding(t, emb_dim_));
  return core_->forward(nn::concat(y_t, cond));
}

Tensor UNetDenoiser::backward(const Tensor& dy) {
  Tensor dxy = core_->backward(dy);
  Tensor dyt, dcond;
  nn::split(dxy, spec_.out_channels, dyt, dcond);
  return dyt;
}

std::vector<nn::Param*> UNetDenoiser::params() { return core_->params(); }

void UNetDenoiser::init(Rng& rng) { core_->init(rng); }

// ------------------------------------------------------------ checkpoints

void save_checkpoint(const std::filesystem::path& path,
                     const std::map<std::string, std::string>& meta,
                     const std::vector<nn::Param*>& params) {
  nlohmann::json j;
  j["format"] = "vstain_ckpt_v1";
  j["meta"] = meta;
  nlohmann::json manifest = nlohmann::json::array();
  for (const nn::Param* p : params) {
    manifest.push_back({{"name", p->name},
                        {"shape", {p->value.n, p->value.c, p->value.h, p->value.w}}});
  }
  j["params"] = manifest;
  const std::string header = j.dump();

  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw DataError("save_checkpoint: cannot open " + tmp);
    f.write("VSTAINCKPT1\n", 12);
    const uint64_t len = header.size();
    f.write(reinterpret_cast<const char*>(&len), 8);
    f.write(header.data(), static_cast<std::streamsize>(header.size()));
    for (const nn::Param* p : params) {
      f.write(reinterpret_cast<const char*>(p->value.v.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    }
    if (!f) throw DataError("save_checkpoint: write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("load_checkpoint: cannot open " + path.string());
  char magic[12];
  f.read(magic, 12);
  if (!f || std::memcmp(magic, "VSTAINCKPT1\n", 12) != 0) {
    throw DataError("load_checkpoint: bad magic in " + path.string());
  }
  uint64_t len = 0;
  f.read(reinterpret_cast<char*>(&len), 8);
  std::string header(len, '\0');
  f.read(header.data(), static_cast<std::streamsize>(len));
  if (!f) throw DataError("load_checkpoint: truncated header in " + path.string());

  nlohmann::json j = nlohmann::json::parse(header);
  Checkpoint ckpt;
  for (auto& [k, v] : j.at("meta").items()) ckpt.meta[k] = v.get<std::string>();
  for (const auto& entry : j.at("params")) {
    const auto shape = entry.at("shape");
    nn::Tensor t(shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>(),
                 shape[3].get<int>());
    f.read(reinterpret_cast<char*>(t.v.data()),
           static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!f) throw DataError("load_checkpoint: truncated data in " + path.string());
    ckpt.tensors[entry.at("name").get<std::string>()] = std::move(t);
  }
  return ckpt;
}

void assign_params(const Checkpoint& ckpt, const std::vector<nn::Param*>& params) {
  for (nn::Param* p : params) {
    auto it = ckpt.tensors.find(p->name);
    if (it == ckpt.tensors.end()) {
      throw DataError("checkpoint missing parameter '" + p->name + "'");
    }
    if (!it->second.same_shape(p->value)) {
      throw DataError("checkpoint shape mismatch for parameter '" + p->name + "'");
    }
    p->value = it->second;
  }
}

}  // namespace virtstain
