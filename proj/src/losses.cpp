#include "virtstain/losses.hpp"

#include <algorithm>
#include <cmath>

#include "virtstain/errors.hpp"

namespace virtstain {

namespace {

// Reflect index into [0, n) without repeating the edge sample (torch-style
// reflect padding): -1 -> 1, n -> n-2.
inline int reflect_index(int i, int n) {
  if (i < 0) i = -i;
  if (i >= n) i = 2 * n - 2 - i;
  return i;
}

void check_kernel(const Image& img, int k) {
  if (k < 3 || k % 2 == 0) throw UsageError("kernel size must be odd and >= 3");
  if (k > std::min(img.h, img.w)) {
    throw UsageError("kernel size " + std::to_string(k) + " exceeds image size " +
                     std::to_string(img.h) + "x" + std::to_string(img.w));
  }
}

}  // namespace

BaseLossKind base_loss_kind_from_string(const std::string& s) {
  if (s == "adversarial_l1") return BaseLossKind::AdversarialL1;
  if (s == "l1_regression") return BaseLossKind::L1Regression;
  if (s == "diffusion_noise") return BaseLossKind::DiffusionNoise;
  throw UsageError("unknown base loss kind '" + s + "'");
}

std::string to_string(BaseLossKind k) {
  switch (k) {
    case BaseLossKind::AdversarialL1: return "adversarial_l1";
    case BaseLossKind::L1Regression: return "l1_regression";
    case BaseLossKind::DiffusionNoise: return "diffusion_noise";
  }
  return "?";
}

void LossConfig::validate() const {
  if (lambda_var < 0.0 || lambda_l1 < 0.0) {
    throw UsageError("loss weights must be nonnegative");
  }
  if (kernel_k < 3 || kernel_k % 2 == 0) {
    throw UsageError("kernel_k must be odd and >= 3");
  }
}

Image avgpool_reflect(const Image& img, int k) {
  check_kernel(img, k);
  const int r = k / 2;
  const int ph = img.h + 2 * r;
  const int pw = img.w + 2 * r;

  Image out(img.h, img.w, img.c, img.range);
  // Per channel: reflect-pad, summed-area table, then O(1) box sums.
  std::vector<double> pad(static_cast<size_t>(ph) * pw);
  std::vector<double> sat(static_cast<size_t>(ph + 1) * (pw + 1), 0.0);
  const double inv = 1.0 / (static_cast<double>(k) * k);

  for (int ch = 0; ch < img.c; ++ch) {
    for (int y = 0; y < ph; ++y) {
      const int sy = reflect_index(y - r, img.h);
      for (int x = 0; x < pw; ++x) {
        pad[static_cast<size_t>(y) * pw + x] = img.at(sy, reflect_index(x - r, img.w), ch);
      }
    }
    for (int y = 0; y < ph; ++y) {
      double rowsum = 0.0;
      for (int x = 0; x < pw; ++x) {
        rowsum += pad[static_cast<size_t>(y) * pw + x];
        sat[static_cast<size_t>(y + 1) * (pw + 1) + x + 1] =
            sat[static_cast<size_t>(y) * (pw + 1) + x + 1] + rowsum;
      }
    }
    for (int y = 0; y < img.h; ++y) {
      const size_t top = static_cast<size_t>(y) * (pw + 1);
      const size_t bot = static_cast<size_t>(y + k) * (pw + 1);
      for (int x = 0; x < img.w; ++x) {
        const double s = sat[bot + x + k] - sat[bot + x] - sat[top + x + k] + sat[top + x];
        out.at(y, x, ch) = s * inv;
      }
    }
  }
  return out;
}

Image avgpool_reflect_adjoint(const Image& g, int k) {
  check_kernel(g, k);
  const int r = k / 2;
  Image out(g.h, g.w, g.c, g.range);
  const double inv = 1.0 / (static_cast<double>(k) * k);
  for (int ch = 0; ch < g.c; ++ch) {
    for (int y = 0; y < g.h; ++y) {
      for (int x = 0; x < g.w; ++x) {
        const double gv = g.at(y, x, ch) * inv;
        if (gv == 0.0) continue;
        for (int dy = -r; dy <= r; ++dy) {
          const int sy = reflect_index(y + dy, g.h);
          for (int dx = -r; dx <= r; ++dx) {
            out.at(sy, reflect_index(x + dx, g.w), ch) += gv;
          }
        }
      }
    }
  }
  return out;
}

VarianceMap local_variance(const Image& img, int k) {
  check_kernel(img, k);
  Image sq = img;
  for (double& x : sq.v) x *= x;
  Image mu = avgpool_reflect(img, k);
  Image mu2 = avgpool_reflect(sq, k);
  VarianceMap vm{Image(img.h, img.w, img.c, img.range), k};
  for (size_t i = 0; i < vm.var.size(); ++i) {
    vm.var.v[i] = std::max(mu2.v[i] - mu.v[i] * mu.v[i], 0.0);
  }
  return vm;
}

double variance_loss(const Image& pred, const Image& target, int k) {
  if (!pred.same_shape(target)) throw DataError("variance_loss: shape mismatch");
  const Image vp = local_variance(pred, k).var;
  const Image vt = local_variance(target, k).var;
  double acc = 0.0;
  for (size_t i = 0; i < vp.size(); ++i) {
    const double d = vp.v[i] - vt.v[i];
    acc += d * d;
  }
  return acc / static_cast<double>(vp.size());
}

VarianceLossResult variance_loss_with_grad(const Image& pred, const Image& target, int k) {
  if (!pred.same_shape(target)) throw DataError("variance_loss: shape mismatch");
  check_kernel(pred, k);

  Image sq = pred;
  for (double& x : sq.v) x *= x;
  const Image mu = avgpool_reflect(pred, k);
  const Image mu2 = avgpool_reflect(sq, k);
  const Image vt = local_variance(target, k).var;

  const double n = static_cast<double>(pred.size());
  VarianceLossResult out;
  // g = dL/dV_raw: 2(Vp - Vt)/n where Vp_raw > 0, else 0 (clamp subgradient).
  Image g(pred.h, pred.w, pred.c, pred.range);
  for (size_t i = 0; i < g.size(); ++i) {
    const double raw = mu2.v[i] - mu.v[i] * mu.v[i];
    const double vp = std::max(raw, 0.0);
    const double d = vp - vt.v[i];
    out.value += d * d;
    g.v[i] = raw > 0.0 ? 2.0 * d / n : 0.0;
  }
  out.value /= n;

  // V = A(x^2) - A(x)^2  =>  dL/dx = 2x * A^T(g) - 2 A^T(g * A(x)).
  Image at_g = avgpool_reflect_adjoint(g, k);
  Image g_mu = g;
  for (size_t i = 0; i < g_mu.size(); ++i) g_mu.v[i] *= mu.v[i];
  Image at_gmu = avgpool_reflect_adjoint(g_mu, k);

  out.grad = Image(pred.h, pred.w, pred.c, pred.range);
  for (size_t i = 0; i < out.grad.size(); ++i) {
    out.grad.v[i] = 2.0 * pred.v[i] * at_g.v[i] - 2.0 * at_gmu.v[i];
  }
  return out;
}

ScalarLossResult l1_loss_with_grad(const Image& pred, const Image& target) {
  if (!pred.same_shape(target)) throw DataError("l1_loss: shape mismatch");
  ScalarLossResult out;
  out.grad = Image(pred.h, pred.w, pred.c, pred.range);
  const double n = static_cast<double>(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.v[i] - target.v[i];
    out.value += std::abs(d);
    out.grad.v[i] = (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0)) / n;
  }
  out.value /= n;
  return out;
}

ScalarLossResult mse_loss_with_grad(const Image& pred, const Image& target) {
  if (!pred.same_shape(target)) throw DataError("mse_loss: shape mismatch");
  ScalarLossResult out;
  out.grad = Image(pred.h, pred.w, pred.c, pred.range);
  const double n = static_cast<double>(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.v[i] - target.v[i];
    out.value += d * d;
    out.grad.v[i] = 2.0 * d / n;
  }
  out.value /= n;
  return out;
}

double base_loss(BaseLossKind kind, const Image& pred, const Image& target,
                 const std::optional<Image>& discriminator_scores, double lambda_l1) {
  if (kind == BaseLossKind::AdversarialL1) {
    if (!discriminator_scores) {
      throw UsageError("base_loss: adversarial_l1 requires discriminator scores");
    }
    double gan = 0.0;
    for (double s : discriminator_scores->v) {
      // score = sigmoid(logit); -log(score) = softplus(-logit).
      gan += s > 0.0 ? std::log1p(std::exp(-s)) : -s + std::log1p(std::exp(s));
    }
    gan /= static_cast<double>(discriminator_scores->size());
    return gan + lambda_l1 * l1_loss_with_grad(pred, target).value;
  }
  if (discriminator_scores) {
    throw UsageError("base_loss: discriminator scores only apply to adversarial_l1");
  }
  if (kind == BaseLossKind::L1Regression) return l1_loss_with_grad(pred, target).value;
  return mse_loss_with_grad(pred, target).value;
}

double total_loss(double base, double var, const LossConfig& cfg, const std::string& batch_id) {
  cfg.validate();
  const double total = base + cfg.lambda_var * var;
  if (!std::isfinite(base) || !std::isfinite(var) || !std::isfinite(total)) {
    throw NumericalError("total_loss: non-finite loss" +
                         (batch_id.empty() ? std::string() : " at batch " + batch_id) +
                         " (base=" + std::to_string(base) + ", var=" + std::to_string(var) + ")");
  }
  return total;
}

}  // namespace virtstain
