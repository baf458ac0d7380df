#pragma once

namespace anderson {

enum class MollifierKind { gaussian, sharp_cutoff };

/// Tag carried by fields derived from a mollified noise, so that
/// renormalization constants can be matched against the field they correct.
struct Regularization {
  double eps = 0.0;
  MollifierKind kind = MollifierKind::gaussian;

  bool operator==(const Regularization&) const = default;
};

const char* to_string(MollifierKind kind) noexcept;

}  // namespace anderson
