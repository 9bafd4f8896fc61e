#pragma once

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "glomkit/uaan.hpp"

namespace glom {

enum class Branch { Parent, Child };

struct DensityPair {
  std::vector<double> p_e;
  std::vector<double> p_r;
  double u = 1.0;
  Branch branch = Branch::Parent;
};

/// Softmax with max subtraction.
std::vector<double> estimated_density(std::span<const double> logits);

/// Gaussian with the mean and standard deviation of `phi`, evaluated at the
/// class positions 0..K-1 and normalized. Uniform when the std is < 1e-12.
std::vector<double> raw_density(std::span<const double> phi, int num_classes);

/// 1 - Pearson correlation of the two densities across classes, in [0, 2].
/// 1 when either vector is constant.
double uncertainty_factor(std::span<const double> p_r, std::span<const double> p_e);

DensityPair branch_density(std::span<const double> phi, std::span<const double> logits,
                           Branch branch);

/// u of the parent branch for samples labelled Neg/GS; max over both
/// branches for samples labelled CSN. Throws ValidationError when a CSN
/// sample lacks child outputs.
double sample_uncertainty(const Prediction& bundle, ParentClass labelled_parent);

struct ReconstitutionReport {
  double threshold = 0.5;
  std::vector<int> selected_ids;
  int n_select = 0;
  std::map<Lesion, double> per_class_removed_fraction;
  int original_size = 0;
  int d_c_size = 0;
  std::optional<double> r_m;          // mislabeled fraction among selected
  std::optional<double> r_m_overall;  // mislabeled fraction of the pool
};

/// Per-sample uncertainty of every regular sample of the pool.
std::vector<double> pool_uncertainty(const ToyDataset& dataset, const ModelParams& model);

/// Removes regular samples with u > threshold; fixed samples are kept.
std::pair<ToyDataset, ReconstitutionReport> reconstitute(const ToyDataset& dataset,
                                                         const ModelParams& model,
                                                         double threshold = 0.5);

/// Same selection from precomputed uncertainties (aligned with dataset.samples).
std::pair<ToyDataset, ReconstitutionReport> reconstitute_with(const ToyDataset& dataset,
                                                              std::span<const double> uncertainty,
                                                              double threshold);

}  // namespace glom
