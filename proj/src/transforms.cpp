#include "ordfa/transforms.hpp"

#include <cmath>

#include "ordfa/errors.hpp"
#include "ordfa/normal.hpp"

namespace ordfa {

const char* to_string(ConstraintKind kind) {
  switch (kind) {
    case ConstraintKind::Unconstrained: return "unconstrained";
    case ConstraintKind::Ordered: return "ordered";
    case ConstraintKind::UnitInterval: return "unit-interval";
    case ConstraintKind::Positive: return "positive";
    case ConstraintKind::CorrCholesky: return "correlation-cholesky";
  }
  return "?";
}

const TransformBlock& TransformLayout::add(std::string name, ConstraintKind kind, std::size_t size) {
  if (contains(name)) throw ConfigError("duplicate parameter block '" + name + "'");
  TransformBlock b;
  b.name = std::move(name);
  b.kind = kind;
  b.offset = total_;
  b.order = size;
  b.dim = kind == ConstraintKind::CorrCholesky ? size * (size - 1) / 2 : size;
  total_ += b.dim;
  blocks_.push_back(std::move(b));
  return blocks_.back();
}

const TransformBlock& TransformLayout::find(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw ConfigError("unknown parameter block '" + name + "'");
}

bool TransformLayout::contains(const std::string& name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return true;
  return false;
}

namespace transform {

double forward(const TransformBlock& block, std::span<const double> w, std::span<double> out) {
  double logj = 0.0;
  switch (block.kind) {
    case ConstraintKind::Unconstrained:
      for (std::size_t k = 0; k < block.dim; ++k) out[k] = w[k];
      break;
    case ConstraintKind::Ordered:
      for (std::size_t k = 0; k < block.dim; ++k) {
        if (k == 0) {
          out[0] = w[0];
        } else {
          out[k] = out[k - 1] + std::exp(w[k]);
          logj += w[k];
        }
      }
      break;
    case ConstraintKind::UnitInterval:
      for (std::size_t k = 0; k < block.dim; ++k) {
        out[k] = logistic(w[k]);
        const double a = std::fabs(w[k]);
        logj += -a - 2.0 * std::log1p(std::exp(-a));
      }
      break;
    case ConstraintKind::Positive:
      for (std::size_t k = 0; k < block.dim; ++k) {
        out[k] = std::exp(w[k]);
        logj += w[k];
      }
      break;
    case ConstraintKind::CorrCholesky: {
      // Canonical partial correlations z = tanh(w), filled row by row.
      const std::size_t K = block.order;
      for (std::size_t k = 0; k < K * K; ++k) out[k] = 0.0;
      out[0] = 1.0;
      std::size_t idx = 0;
      for (std::size_t i = 1; i < K; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < i; ++j, ++idx) {
          const double z = std::tanh(w[idx]);
          const double r = std::sqrt(1.0 - sum);
          const double l = z * r;
          out[i * K + j] = l;
          logj += std::log1p(-z * z) + std::log(r);
          sum += l * l;
        }
        const double lii = std::sqrt(1.0 - sum);
        out[i * K + i] = lii;
        // Jacobian of L -> L L' for the off-diagonal correlations.
        logj += static_cast<double>(K - i - 1) * std::log(lii);
      }
      break;
    }
  }
  return logj;
}

void reverse(const TransformBlock& block, std::span<const double> w, std::span<const double> out,
             std::span<const double> out_adj, std::span<double> w_adj) {
  switch (block.kind) {
    case ConstraintKind::Unconstrained:
      for (std::size_t k = 0; k < block.dim; ++k) w_adj[k] += out_adj[k];
      break;
    case ConstraintKind::Ordered: {
      double tail = 0.0;
      for (std::size_t k = block.dim; k-- > 0;) {
        tail += out_adj[k];
        w_adj[k] += k == 0 ? tail : tail * std::exp(w[k]) + 1.0;
      }
      break;
    }
    case ConstraintKind::UnitInterval:
      for (std::size_t k = 0; k < block.dim; ++k) {
        const double v = out[k];
        const double vc = logistic(-w[k]);
        w_adj[k] += out_adj[k] * v * vc + (vc - v);
      }
      break;
    case ConstraintKind::Positive:
      for (std::size_t k = 0; k < block.dim; ++k) w_adj[k] += out_adj[k] * out[k] + 1.0;
      break;
    case ConstraintKind::CorrCholesky: {
      const std::size_t K = block.order;
      std::size_t row_start = 0;
      std::vector<double> r(K), z(K);
      for (std::size_t i = 1; i < K; ++i) {
        // Recompute the row's forward quantities.
        double sum = 0.0;
        for (std::size_t j = 0; j < i; ++j) {
          z[j] = std::tanh(w[row_start + j]);
          r[j] = std::sqrt(1.0 - sum);
          const double l = out[i * K + j];
          sum += l * l;
        }
        const double lii = out[i * K + i];
        double r_bar = out_adj[i * K + i] + static_cast<double>(K - i - 1) / lii;
        double s_bar = -r_bar / (2.0 * lii);  // adjoint of the running sum after column j
        for (std::size_t j = i; j-- > 0;) {
          const double l = out[i * K + j];
          const double l_bar = out_adj[i * K + j] + 2.0 * l * s_bar;
          const double z_bar = l_bar * r[j];
          const double rj_bar = l_bar * z[j] + 1.0 / r[j];
          s_bar += -rj_bar / (2.0 * r[j]);
          w_adj[row_start + j] += z_bar * (1.0 - z[j] * z[j]) - 2.0 * z[j];
        }
        row_start += i;
      }
      break;
    }
  }
}

void inverse(const TransformBlock& block, std::span<const double> value, std::span<double> w) {
  const auto fail = [&](const std::string& why) {
    throw DomainError("parameter block '" + block.name + "' (" + to_string(block.kind) + "): " + why);
  };
  switch (block.kind) {
    case ConstraintKind::Unconstrained:
      for (std::size_t k = 0; k < block.dim; ++k) w[k] = value[k];
      break;
    case ConstraintKind::Ordered:
      for (std::size_t k = 0; k < block.dim; ++k) {
        if (k == 0) {
          w[0] = value[0];
        } else {
          if (!(value[k] > value[k - 1])) fail("values not strictly increasing");
          w[k] = std::log(value[k] - value[k - 1]);
        }
      }
      break;
    case ConstraintKind::UnitInterval:
      for (std::size_t k = 0; k < block.dim; ++k) {
        if (!(value[k] > 0.0 && value[k] < 1.0)) fail("value outside (0, 1)");
        w[k] = logit(value[k]);
      }
      break;
    case ConstraintKind::Positive:
      for (std::size_t k = 0; k < block.dim; ++k) {
        if (!(value[k] > 0.0)) fail("value not positive");
        w[k] = std::log(value[k]);
      }
      break;
    case ConstraintKind::CorrCholesky: {
      const std::size_t K = block.order;
      std::size_t idx = 0;
      for (std::size_t i = 0; i < K; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j <= i; ++j) sum += value[i * K + j] * value[i * K + j];
        for (std::size_t j = i + 1; j < K; ++j)
          if (value[i * K + j] != 0.0) fail("factor is not lower triangular");
        if (std::fabs(sum - 1.0) > 1e-8) fail("row " + std::to_string(i + 1) + " is not unit length");
        if (!(value[i * K + i] > 0.0)) fail("diagonal must be positive");
        sum = 0.0;
        for (std::size_t j = 0; j < i; ++j, ++idx) {
          const double l = value[i * K + j];
          const double z = l / std::sqrt(1.0 - sum);
          if (!(std::fabs(z) < 1.0)) fail("partial correlation outside (-1, 1)");
          w[idx] = std::atanh(z);
          sum += l * l;
        }
      }
      break;
    }
  }
}

}  // namespace transform

ConstrainedResult to_constrained(std::span<const double> flat, const TransformLayout& layout) {
  if (flat.size() != layout.total_dim())
    throw DimensionError("unconstrained vector has length " + std::to_string(flat.size()) + ", layout needs " +
                         std::to_string(layout.total_dim()));
  ConstrainedResult res;
  for (const auto& b : layout.blocks()) {
    std::vector<double> out(b.constrained_dim());
    res.log_jacobian += transform::forward(b, flat.subspan(b.offset, b.dim), out);
    res.params.emplace(b.name, std::move(out));
  }
  return res;
}

std::vector<double> to_unconstrained(const ConstrainedParams& params, const TransformLayout& layout) {
  std::vector<double> flat(layout.total_dim());
  for (const auto& b : layout.blocks()) {
    const auto it = params.find(b.name);
    if (it == params.end()) throw DomainError("missing parameter block '" + b.name + "'");
    if (it->second.size() != b.constrained_dim())
      throw DimensionError("parameter block '" + b.name + "' has wrong length");
    transform::inverse(b, it->second, std::span<double>(flat).subspan(b.offset, b.dim));
  }
  return flat;
}

}  // namespace ordfa
