// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <compare>

#include "greenran/errors.hpp"

namespace greenran {

/// Transmit-beam codebook laid out as an azimuth x elevation index grid.
struct BeamGrid {
  int n_az = 8;
  int n_el = 8;

  int size() const noexcept { return n_az * n_el; }

  /// Row-major linear index; every tie in the toolkit is broken on this.
  int linear(int az, int el) const noexcept { return az * n_el + el; }

  bool contains(int az, int el) const noexcept {
    return az >= 0 && az < n_az && el >= 0 && el < n_el;
  }

  void validate() const {
    if (n_az < 1 || n_el < 1) throw InvalidArgument("beam grid dimensions must be positive");
    if (size() < 2) throw InvalidArgument("beam grid needs at least two beams");
  }

  friend bool operator==(const BeamGrid&, const BeamGrid&) = default;
};

struct BeamIndex {
  int az = 0;
  int el = 0;

  friend bool operator==(const BeamIndex&, const BeamIndex&) = default;
};

} // namespace greenran
