#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "glomkit/labels.hpp"
#include "glomkit/metrics.hpp"
#include "glomkit/synthgen.hpp"

namespace glom {

// Dual-branch hierarchical classifier at toy scale.
//
//   features (g x d0) -> backbone (per position affine + PReLU) -> F (g x d1)
//   parent:  F_p = PReLU(A_p F)         phi_p = GMP(F_p)  -> dropout -> head_p
//   grasper: gate = sigmoid(F_p[csn])   (gathered at the CSN index list)
//   child:   F_c = PReLU(A_c F[csn])    phi_c = GMP(gate * F_c) -> dropout -> head_c

struct DenseLayer {
  int in_dim = 0;
  int out_dim = 0;
  std::vector<double> weight;  // out_dim x in_dim, row-major
  std::vector<double> bias;    // out_dim

  DenseLayer() = default;
  DenseLayer(int in, int out) : in_dim(in), out_dim(out), weight(std::size_t(in) * out), bias(out) {}

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct ModelDims {
  int positions = 8;
  int in_channels = 16;
  int backbone_channels = 16;
  int branch_channels = 8;

  friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

inline constexpr int kNumLayers = 5;

struct ModelParams {
  ModelDims dims;
  DenseLayer backbone;
  DenseLayer parent_transform;
  DenseLayer parent_head;
  DenseLayer child_transform;
  DenseLayer child_head;
  double prelu_slope = 0.25;
  double dropout_rate = 0.5;
  bool apportionment = true;  // false: gate replaced by ones

  explicit ModelParams(const ModelDims& d = {});

  std::array<DenseLayer*, kNumLayers> layers();
  std::array<const DenseLayer*, kNumLayers> layers() const;
  std::size_t parameter_count() const;

  /// Same shapes, all weights zero.
  ModelParams zeros_like() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Glorot-uniform weights, zero biases.
ModelParams glorot_init(const ModelDims& dims, std::mt19937_64& rng);

/// Flat views in layer order (weight then bias per layer).
std::vector<double> flatten(const ModelParams& params);
void unflatten(std::span<const double> values, ModelParams& params);

struct BatchLayout {
  std::vector<const ToySample*> samples;  // slot 0: fixed sample when present
  std::vector<int> csn_indices;

  int size() const { return static_cast<int>(samples.size()); }
  int csn_count() const { return static_cast<int>(csn_indices.size()); }
};

/// Positions whose parent label is CSN. With fixed_in_slot0 the first slot is
/// always included. Throws ValidationError when the result is empty.
std::vector<int> build_csn_index_list(std::span<const ParentClass> labels, bool fixed_in_slot0);

/// Batch with `fixed` (may be null) in slot 0 followed by `regular`.
BatchLayout make_batch(const ToySample* fixed, std::span<const ToySample* const> regular);

/// delta_k = (N_T / n_k) / sum_j (N_T / n_j); throws on a zero count.
std::vector<double> class_weights(std::span<const int> counts);

struct ForwardOptions {
  bool training = false;         // enables dropout
  bool gate_stop_gradient = false;
  bool force_unit_gate = false;  // test hook, same effect as apportionment off
};

struct ForwardOutputs {
  int batch = 0;
  int csn = 0;
  std::vector<double> parent_logits;  // batch x 3
  std::vector<double> child_logits;   // csn x 3
  std::vector<double> phi_p;          // batch x d2
  std::vector<double> phi_c;          // csn x d2
  std::vector<double> gate;           // csn x g x d2

  // Intermediates kept for backpropagation.
  std::vector<double> backbone_pre;   // batch x g x d1
  std::vector<double> backbone_out;   // batch x g x d1
  std::vector<double> parent_pre;     // batch x g x d2
  std::vector<double> parent_out;     // batch x g x d2
  std::vector<int> parent_argmax;     // batch x d2
  std::vector<double> parent_drop;    // batch x d2 dropout scale (0 or 1/(1-r))
  std::vector<double> child_pre;      // csn x g x d2
  std::vector<double> child_out;      // csn x g x d2 (before gating)
  std::vector<int> child_argmax;      // csn x d2
  std::vector<double> child_drop;     // csn x d2
  bool gated = true;
};

ForwardOutputs forward(const BatchLayout& batch, const ModelParams& params,
                       const ForwardOptions& options, std::mt19937_64& rng);

struct LossWeights {
  std::vector<double> parent;  // 3 entries
  std::vector<double> child;   // 3 entries
};

struct LossAndGrads {
  double loss = 0.0;
  double parent_loss = 0.0;
  double child_loss = 0.0;
  ModelParams grads;
};

/// Weighted cross-entropy of the parent head over non-fixed samples plus the
/// child head over non-fixed CSN samples (each term a mean over its samples),
/// with gradients backpropagated through the gate into the parent branch.
LossAndGrads loss_and_grads(const ForwardOutputs& outputs, const BatchLayout& batch,
                            const ModelParams& params, const LossWeights& weights,
                            const ForwardOptions& options = {});

/// Class weights of a training pool: parent over {Neg, GS, CSN}, child over
/// {C, SS, NoA}.
LossWeights pool_weights(std::span<const ToySample> pool);

struct Prediction {
  Lesion label = Lesion::Neg;
  double confidence = 0.0;
  std::vector<double> phi_p;
  std::array<double, 3> parent_logits{};
  std::optional<std::vector<double>> phi_c;
  std::optional<std::array<double, 3>> child_logits;
};

/// Runs the sample as a singleton batch with csn_indices = [0], no dropout.
/// Neg/GS come from the parent argmax; otherwise the child argmax decides.
Prediction predict(const ToySample& sample, const ModelParams& params);

/// Routing rule alone, from two rows of logits.
std::pair<Lesion, double> route(std::span<const double, 3> parent_logits,
                                std::span<const double, 3> child_logits);

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double learning_rate = 1e-4;
  double lr_decay = 0.96;  // multiplicative per epoch
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  std::uint64_t seed = 0;
  bool apportionment = true;
  ModelDims dims;  // positions/in_channels overwritten from the dataset
  double dropout_rate = 0.5;
};

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double acc_micro = 0.0;
  double acc_macro = 0.0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochStats> history;
};

/// Adam training with one randomly chosen fixed sample in slot 0 of every
/// batch. History accuracies are measured on `eval` when given, else on the
/// training pool. Throws NumericalError on a non-finite loss.
TrainResult train(const ToyDataset& dataset, const TrainConfig& cfg,
                  const ToyDataset* eval = nullptr);

struct ClassificationScores {
  Confusion confusion{kNumLesions};     // five-way routed prediction
  Confusion child_confusion{kNumChild};  // child head on samples labelled CSN
  double acc_micro = 0.0;
  double acc_macro = 0.0;
  double child_acc_macro = 0.0;  // child head alone on samples whose truth is CSN
};

/// Scores predictions against the samples' labels (true labels when the
/// dataset is noise-free).
ClassificationScores score(std::span<const ToySample> samples, const ModelParams& params);

}  // namespace glom
