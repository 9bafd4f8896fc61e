#pragma once

#include <span>
#include <string>
#include <vector>

#include "glomkit/losses.hpp"

namespace glom {

struct SweepRow {
  LossId loss = LossId::Dice;
  double gtr = 0.0;           // requested ground-truth ratio
  double displacement = 0.0;  // pixels along +x
  double iou = 0.0;
  double value = 0.0;
};

struct SweepConfig {
  int width = 128;
  int height = 128;
  LossConfig losses;
};

/// For every (gtr, displacement) pair: a centered disc of that area ratio as
/// ground truth and the same disc shifted by the displacement as a binary
/// prediction. Rows are ordered by gtr, then displacement, then loss.
std::vector<SweepRow> loss_sweep(std::span<const double> gtrs, std::span<const double> displacements,
                                 std::span<const LossId> losses, const SweepConfig& cfg = {});

std::string sweep_to_csv(std::span<const SweepRow> rows);

}  // namespace glom
