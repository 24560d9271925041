#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace ordfa {

enum class ConstraintKind { Unconstrained, Ordered, UnitInterval, Positive, CorrCholesky };

const char* to_string(ConstraintKind kind);

/// One named block of the flat unconstrained vector.
struct TransformBlock {
  std::string name;
  ConstraintKind kind = ConstraintKind::Unconstrained;
  std::size_t offset = 0;
  std::size_t dim = 0;    // unconstrained length
  std::size_t order = 0;  // K for CorrCholesky, else equal to dim

  /// Length of the constrained representation (K * K for CorrCholesky, row-major).
  std::size_t constrained_dim() const { return kind == ConstraintKind::CorrCholesky ? order * order : dim; }
};

class TransformLayout {
 public:
  /// Appends a block. `size` is the number of values, or K for CorrCholesky.
  const TransformBlock& add(std::string name, ConstraintKind kind, std::size_t size);

  const std::vector<TransformBlock>& blocks() const { return blocks_; }
  std::size_t total_dim() const { return total_; }
  const TransformBlock& find(const std::string& name) const;
  bool contains(const std::string& name) const;

 private:
  std::vector<TransformBlock> blocks_;
  std::size_t total_ = 0;
};

using ConstrainedParams = std::map<std::string, std::vector<double>>;

struct ConstrainedResult {
  ConstrainedParams params;
  double log_jacobian = 0.0;
};

ConstrainedResult to_constrained(std::span<const double> flat, const TransformLayout& layout);

/// Inverse of to_constrained; throws DomainError naming the offending block.
std::vector<double> to_unconstrained(const ConstrainedParams& params, const TransformLayout& layout);

/// Block-level maps. `forward` fills `out` and returns the block's log-Jacobian.
/// `reverse` adds J' * out_adj plus the gradient of the log-Jacobian into w_adj.
namespace transform {

double forward(const TransformBlock& block, std::span<const double> w, std::span<double> out);
void reverse(const TransformBlock& block, std::span<const double> w, std::span<const double> out,
             std::span<const double> out_adj, std::span<double> w_adj);
void inverse(const TransformBlock& block, std::span<const double> value, std::span<double> w);

}  // namespace transform

}  // namespace ordfa
