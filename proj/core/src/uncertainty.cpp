#include "glomkit/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glomkit/errors.hpp"

namespace glom {

std::vector<double> estimated_density(std::span<const double> logits) {
  require(!logits.empty(), "estimated_density: empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) sum += (p[k] = std::exp(logits[k] - m));
  for (double& v : p) v /= sum;
  return p;
}

std::vector<double> raw_density(std::span<const double> phi, int num_classes) {
  require(phi.size() >= 2, "raw_density: need at least two feature values");
  require(num_classes >= 1, "raw_density: need at least one class");
  const double n = static_cast<double>(phi.size());
  const double mean = std::accumulate(phi.begin(), phi.end(), 0.0) / n;
  double var = 0.0;
  for (double v : phi) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  std::vector<double> p(num_classes, 1.0 / num_classes);
  if (sd < 1e-12) return p;

  // The 1/sqrt(2 pi sigma) prefactor cancels in the normalization; the
  // exponents are shifted by their maximum so the sum never underflows.
  std::vector<double> expo(num_classes);
  for (int k = 0; k < num_classes; ++k) expo[k] = -(k - mean) * (k - mean) / (2.0 * sd * sd);
  const double top = *std::max_element(expo.begin(), expo.end());
  double sum = 0.0;
  for (int k = 0; k < num_classes; ++k) sum += (p[k] = std::exp(expo[k] - top));
  for (double& v : p) v /= sum;
  return p;
}

double uncertainty_factor(std::span<const double> p_r, std::span<const double> p_e) {
  require(p_r.size() == p_e.size(), "uncertainty_factor: length mismatch");
  require(p_r.size() >= 2, "uncertainty_factor: need at least two classes");
  const double k = static_cast<double>(p_r.size());
  const double mean_r = std::accumulate(p_r.begin(), p_r.end(), 0.0) / k;
  const double mean_e = std::accumulate(p_e.begin(), p_e.end(), 0.0) / k;
  double cross = 0.0, ss_r = 0.0, ss_e = 0.0;
  for (std::size_t i = 0; i < p_r.size(); ++i) {
    const double dr = p_r[i] - mean_r;
    const double de = p_e[i] - mean_e;
    cross += dr * de;
    ss_r += dr * dr;
    ss_e += de * de;
  }
  if (ss_r <= 0.0 || ss_e <= 0.0) return 1.0;
  const double corr = std::clamp(cross / (std::sqrt(ss_r) * std::sqrt(ss_e)), -1.0, 1.0);
  return 1.0 - corr;
}

DensityPair branch_density(std::span<const double> phi, std::span<const double> logits,
                           Branch branch) {
  DensityPair out;
  out.branch = branch;
  out.p_e = estimated_density(logits);
  out.p_r = raw_density(phi, static_cast<int>(logits.size()));
  out.u = uncertainty_factor(out.p_r, out.p_e);
  return out;
}

double sample_uncertainty(const Prediction& bundle, ParentClass labelled_parent) {
  const double u_parent = branch_density(bundle.phi_p, bundle.parent_logits, Branch::Parent).u;
  if (labelled_parent != ParentClass::CSN) return u_parent;
  require(bundle.phi_c.has_value() && bundle.child_logits.has_value(),
          "sample_uncertainty: CSN sample without child-branch outputs");
  const double u_child = branch_density(*bundle.phi_c, *bundle.child_logits, Branch::Child).u;
  return std::max(u_parent, u_child);
}

std::vector<double> pool_uncertainty(const ToyDataset& dataset, const ModelParams& model) {
  std::vector<double> u;
  u.reserve(dataset.samples.size());
  for (const ToySample& s : dataset.samples) u.push_back(sample_uncertainty(predict(s, model), s.parent));
  return u;
}

std::pair<ToyDataset, ReconstitutionReport> reconstitute_with(const ToyDataset& dataset,
                                                              std::span<const double> uncertainty,
                                                              double threshold) {
  require(uncertainty.size() == dataset.samples.size(),
          "reconstitute: one uncertainty value per sample required");
  ReconstitutionReport report;
  report.threshold = threshold;
  report.original_size = static_cast<int>(dataset.samples.size());

  ToyDataset kept = dataset;
  kept.samples.clear();
  std::map<Lesion, int> removed;
  int mislabeled_selected = 0;
  int mislabeled_total = 0;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const ToySample& s = dataset.samples[i];
    mislabeled_total += s.is_mislabeled;
    if (uncertainty[i] > threshold) {
      report.selected_ids.push_back(s.id);
      ++removed[s.lesion()];
      mislabeled_selected += s.is_mislabeled;
    } else {
      kept.samples.push_back(s);
    }
  }
  kept.recount();
  report.n_select = static_cast<int>(report.selected_ids.size());
  report.d_c_size = static_cast<int>(kept.samples.size());
  for (const auto& [lesion, count] : dataset.class_counts) {
    report.per_class_removed_fraction[lesion] = count > 0 ? static_cast<double>(removed[lesion]) / count : 0.0;
  }
  if (dataset.noise_rate > 0.0 || mislabeled_total > 0) {
    report.r_m_overall = static_cast<double>(mislabeled_total) / report.original_size;
    report.r_m = report.n_select > 0 ? static_cast<double>(mislabeled_selected) / report.n_select : 0.0;
  }
  return {std::move(kept), std::move(report)};
}

std::pair<ToyDataset, ReconstitutionReport> reconstitute(const ToyDataset& dataset,
                                                         const ModelParams& model, double threshold) {
  const std::vector<double> u = pool_uncertainty(dataset, model);
  return reconstitute_with(dataset, u, threshold);
}

}  // namespace glom
