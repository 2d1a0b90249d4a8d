#pragma once

#include <optional>
#include <string>

#include "virtstain/image.hpp"

namespace virtstain {

// Per-pixel local variance map: V = avgpool_k(I^2) - avgpool_k(I)^2 with
// reflect padding, computed per channel. Negatives from floating-point
// cancellation are clamped to 0 on output.
struct VarianceMap {
  Image var;      // H x W x K, >= 0
  int kernel = 0;  // odd window size
};

enum class BaseLossKind { AdversarialL1, L1Regression, DiffusionNoise };

BaseLossKind base_loss_kind_from_string(const std::string& s);
std::string to_string(BaseLossKind k);

struct LossConfig {
  double lambda_var = 50.0;
  int kernel_k = 15;
  double lambda_l1 = 100.0;
  BaseLossKind base_kind = BaseLossKind::AdversarialL1;

  void validate() const;
};

// Box mean with reflect padding (edge not repeated), summed-area-table
// implementation: O(1) per pixel for any k. Requires k odd,
// 3 <= k <= min(H, W).
Image avgpool_reflect(const Image& img, int k);

// Adjoint of avgpool_reflect: scatters g[p]/k^2 back to the reflected source
// pixels. Needed by the analytic variance-loss gradient.
Image avgpool_reflect_adjoint(const Image& g, int k);

VarianceMap local_variance(const Image& img, int k);

// || clamp(V_k(pred)) - clamp(V_k(target)) ||_2^2 / numel. Mean reduction so
// lambda_var stays resolution independent.
double variance_loss(const Image& pred, const Image& target, int k);

struct VarianceLossResult {
  double value = 0.0;
  Image grad;  // d value / d pred, same shape as pred
};

// Loss plus analytic gradient with respect to pred (target held fixed).
VarianceLossResult variance_loss_with_grad(const Image& pred, const Image& target, int k);

// Mean absolute error plus (sub)gradient sign(pred-target)/numel.
struct ScalarLossResult {
  double value = 0.0;
  Image grad;
};
ScalarLossResult l1_loss_with_grad(const Image& pred, const Image& target);
ScalarLossResult mse_loss_with_grad(const Image& pred, const Image& target);

// Architecture-specific base objective.
//   AdversarialL1: mean(-log sigmoid(score)) over discriminator logits plus
//                  lambda_l1 * MAE (non-saturating generator loss).
//   L1Regression:  MAE.
//   DiffusionNoise: MSE between predicted and true noise.
// discriminator_scores must be present iff kind == AdversarialL1.
double base_loss(BaseLossKind kind, const Image& pred, const Image& target,
                 const std::optional<Image>& discriminator_scores, double lambda_l1 = 100.0);

// L_total = L_base + lambda_var * L_var. Non-finite inputs raise a
// NumericalError carrying batch_id.
double total_loss(double base, double var, const LossConfig& cfg,
                  const std::string& batch_id = "");

}  // namespace virtstain
