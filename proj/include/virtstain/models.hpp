#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "virtstain/nn.hpp"

namespace virtstain {

enum class GeneratorArch { UNet, ResNet };

GeneratorArch generator_arch_from_string(const std::string& s);
std::string to_string(GeneratorArch a);

struct GeneratorSpec {
  GeneratorArch arch = GeneratorArch::UNet;
  int in_channels = 3;   // 3 or 4 (with prior channel)
  int out_channels = 3;  // K marker channels
  int base_width = 32;
  int depth = 4;          // downsampling levels (U-Net)
  int resnet_blocks = 6;  // residual blocks (ResNet generator)

  void validate() const;
};

// Spatial-size-preserving generator with a bounded (tanh) output in [-1,1].
// forward caches activations for a following backward; backward accumulates
// parameter gradients and returns the gradient w.r.t. the input.
class Generator {
 public:
  virtual ~Generator() = default;
  virtual nn::Tensor forward(const nn::Tensor& x) = 0;
  virtual nn::Tensor backward(const nn::Tensor& dy) = 0;
  virtual std::vector<nn::Param*> params() = 0;
  virtual const GeneratorSpec& spec() const = 0;
  virtual void init(Rng& rng) = 0;
};

std::unique_ptr<Generator> build_generator(const GeneratorSpec& spec);

// Convenience wrapper enforcing the channel contract on Image inputs.
nn::Tensor generator_forward(Generator& g, const nn::Tensor& x);

struct DiscriminatorSpec {
  int in_channels = 6;  // input-plus-target channels
  int base_width = 32;
  int n_strided = 3;  // stride-2 front layers; 3 gives the 70-px field

  int receptive_field() const;  // pixels covered by one output score
  void validate() const;
};

// PatchGAN: emits a raster of per-patch logits, one per overlapping
// receptive field of the concatenated (input, target) pair.
class PatchDiscriminator {
 public:
  explicit PatchDiscriminator(const DiscriminatorSpec& spec);
  nn::Tensor forward(const nn::Tensor& xy);
  nn::Tensor backward(const nn::Tensor& dy);
  std::vector<nn::Param*> params();
  void init(Rng& rng);
  const DiscriminatorSpec& spec() const { return spec_; }

 private:
  DiscriminatorSpec spec_;
  std::vector<std::unique_ptr<nn::Layer>> layers_;
};

// Linear beta schedule. alpha_bar[0] = 1 by convention; alpha_bar[t] is the
// cumulative product up to step t (1-based).
struct DiffusionSchedule {
  int T = 1000;
  std::vector<double> beta;       // beta[t], t = 1..T (index 0 unused)
  std::vector<double> alpha;      // 1 - beta
  std::vector<double> alpha_bar;  // alpha_bar[0] = 1

  static DiffusionSchedule linear(int T = 1000, double beta_1 = 1e-4, double beta_T = 0.02);
  void validate() const;
};

// Noise prediction interface; tests substitute closed-form denoisers.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  // y_t: noisy target stack; t: per-sample timestep (1..T); cond: 3- or
  // 4-channel conditioning input. Returns a tensor of y_t's shape.
  virtual nn::Tensor predict_noise(const nn::Tensor& y_t, const std::vector<int>& t,
                                   const nn::Tensor& cond) = 0;
};

// Time-conditioned U-Net denoiser over concat(y_t, cond).
class UNetDenoiser : public Denoiser {
 public:
  UNetDenoiser(const GeneratorSpec& spec, int emb_dim = 64);
  ~UNetDenoiser() override;
  nn::Tensor predict_noise(const nn::Tensor& y_t, const std::vector<int>& t,
                           const nn::Tensor& cond) override;
  nn::Tensor backward(const nn::Tensor& dy);  // grad w.r.t. predicted noise
  std::vector<nn::Param*> params();
  void init(Rng& rng);
  const GeneratorSpec& spec() const { return spec_; }
  int emb_dim() const { return emb_dim_; }

 private:
  GeneratorSpec spec_;
  int emb_dim_;
  std::unique_ptr<class UNetCore> core_;
};

// y_t = sqrt(alpha_bar_t) * y0 + sqrt(1 - alpha_bar_t) * noise.
nn::Tensor ddpm_forward_noise(const DiffusionSchedule& sched, const nn::Tensor& y0,
                              const std::vector<int>& t, const nn::Tensor& noise);

struct DdpmStepResult {
  nn::Tensor y_t;
  nn::Tensor predicted_noise;
};

// One conditional training forward: noise y0 at step t, run the denoiser on
// (y_t, t, cond). Throws if any t is outside 1..T.
DdpmStepResult ddpm_train_step(const DiffusionSchedule& sched, Denoiser& denoiser,
                               const nn::Tensor& cond, const nn::Tensor& y0,
                               const std::vector<int>& t, const nn::Tensor& noise);

// Ancestral sampling from pure noise, conditioned on cond; x0 estimates are
// clipped to [-1,1] each step and the result is clipped on return.
// Deterministic given seed; noise draw order: initial x_T first, then one
// tensor per step T..2.
nn::Tensor ddpm_sample(const DiffusionSchedule& sched, Denoiser& denoiser,
                       const nn::Tensor& cond, int out_channels, uint64_t seed);

// Self-describing checkpoint: JSON header (specs + experiment config echo +
// named parameter manifest) followed by raw float64 parameter data.
void save_checkpoint(const std::filesystem::path& path,
                     const std::map<std::string, std::string>& meta,
                     const std::vector<nn::Param*>& params);

struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::map<std::string, nn::Tensor> tensors;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);
void assign_params(const Checkpoint& ckpt, const std::vector<nn::Param*>& params);

}  // namespace virtstain
