#include "glomkit/uaan.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "glomkit/errors.hpp"

namespace glom {
namespace {

void dense_apply(const DenseLayer& layer, const double* in, double* out) {
  for (int o = 0; o < layer.out_dim; ++o) {
    const double* row = layer.weight.data() + static_cast<std::size_t>(o) * layer.in_dim;
    double acc = layer.bias[o];
    for (int i = 0; i < layer.in_dim; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
}

// Accumulates weight/bias gradients for one input row and returns
// d loss / d input (added into `din` when non-null).
void dense_backward(const DenseLayer& layer, const double* in, const double* dout,
                    DenseLayer& grad, double* din) {
  for (int o = 0; o < layer.out_dim; ++o) {
    const double d = dout[o];
    if (d == 0.0) continue;
    const double* row = layer.weight.data() + static_cast<std::size_t>(o) * layer.in_dim;
    double* grow = grad.weight.data() + static_cast<std::size_t>(o) * layer.in_dim;
    for (int i = 0; i < layer.in_dim; ++i) {
      grow[i] += d * in[i];
      if (din) din[i] += d * row[i];
    }
    grad.bias[o] += d;
  }
}

double prelu(double z, double slope) { return z > 0.0 ? z : slope * z; }
double prelu_grad(double z, double slope) { return z > 0.0 ? 1.0 : slope; }
double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

std::array<double, 3> softmax3(const double* logits) {
  const double m = std::max({logits[0], logits[1], logits[2]});
  std::array<double, 3> p{};
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) sum += (p[k] = std::exp(logits[k] - m));
  for (double& v : p) v /= sum;
  return p;
}

int argmax3(const std::array<double, 3>& v) {
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

// Global max over positions of a g x c block; ties go to the lowest position.
void global_max_pool(const double* block, int positions, int channels, double* out, int* argmax) {
  for (int c = 0; c < channels; ++c) {
    int best = 0;
    for (int pos = 1; pos < positions; ++pos) {
      if (block[pos * channels + c] > block[best * channels + c]) best = pos;
    }
    out[c] = block[best * channels + c];
    argmax[c] = best;
  }
}

}  // namespace

ModelParams::ModelParams(const ModelDims& d)
    : dims(d),
      backbone(d.in_channels, d.backbone_channels),
      parent_transform(d.backbone_channels, d.branch_channels),
      parent_head(d.branch_channels, kNumParent),
      child_transform(d.backbone_channels, d.branch_channels),
      child_head(d.branch_channels, kNumChild) {}

std::array<DenseLayer*, kNumLayers> ModelParams::layers() {
  return {&backbone, &parent_transform, &parent_head, &child_transform, &child_head};
}

std::array<const DenseLayer*, kNumLayers> ModelParams::layers() const {
  return {&backbone, &parent_transform, &parent_head, &child_transform, &child_head};
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const DenseLayer* l : layers()) n += l->weight.size() + l->bias.size();
  return n;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z(dims);
  z.prelu_slope = prelu_slope;
  z.dropout_rate = dropout_rate;
  z.apportionment = apportionment;
  return z;
}

ModelParams glorot_init(const ModelDims& dims, std::mt19937_64& rng) {
  require(dims.positions >= 1 && dims.in_channels >= 1 && dims.backbone_channels >= 1 &&
              dims.branch_channels >= 1,
          "glorot_init: dimensions must be positive");
  ModelParams params(dims);
  for (DenseLayer* layer : params.layers()) {
    const double limit = std::sqrt(6.0 / (layer->in_dim + layer->out_dim));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (double& w : layer->weight) w = dist(rng);
  }
  return params;
}

std::vector<double> flatten(const ModelParams& params) {
  std::vector<double> out;
  out.reserve(params.parameter_count());
  for (const DenseLayer* l : params.layers()) {
    out.insert(out.end(), l->weight.begin(), l->weight.end());
    out.insert(out.end(), l->bias.begin(), l->bias.end());
  }
  return out;
}

void unflatten(std::span<const double> values, ModelParams& params) {
  require(values.size() == params.parameter_count(), "unflatten: size mismatch");
  std::size_t k = 0;
  for (DenseLayer* l : params.layers()) {
    for (double& w : l->weight) w = values[k++];
    for (double& b : l->bias) b = values[k++];
  }
}

std::vector<int> build_csn_index_list(std::span<const ParentClass> labels, bool fixed_in_slot0) {
  require(!labels.empty(), "build_csn_index_list: empty batch");
  std::vector<int> out;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == ParentClass::CSN || (i == 0 && fixed_in_slot0)) out.push_back(static_cast<int>(i));
  }
  require(!out.empty(), "build_csn_index_list: batch has no CSN sample");
  return out;
}

BatchLayout make_batch(const ToySample* fixed, std::span<const ToySample* const> regular) {
  BatchLayout batch;
  if (fixed) batch.samples.push_back(fixed);
  batch.samples.insert(batch.samples.end(), regular.begin(), regular.end());
  std::vector<ParentClass> labels;
  labels.reserve(batch.samples.size());
  for (const ToySample* s : batch.samples) labels.push_back(s->parent);
  batch.csn_indices = build_csn_index_list(labels, fixed != nullptr);
  return batch;
}

std::vector<double> class_weights(std::span<const int> counts) {
  require(!counts.empty(), "class_weights: no classes");
  double total = 0.0;
  for (int c : counts) {
    require(c >= 1, "class_weights: every class needs at least one sample");
    total += c;
  }
  std::vector<double> w(counts.size());
  double norm = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) norm += (w[k] = total / counts[k]);
  for (double& v : w) v /= norm;
  return w;
}

ForwardOutputs forward(const BatchLayout& batch, const ModelParams& params,
                       const ForwardOptions& options, std::mt19937_64& rng) {
  const ModelDims& d = params.dims;
  const int g = d.positions, d0 = d.in_channels, d1 = d.backbone_channels, d2 = d.branch_channels;
  const int n = batch.size();
  const int m = batch.csn_count();
  require(n >= 1, "forward: empty batch");
  require(m >= 1, "forward: empty CSN index list");
  for (int idx : batch.csn_indices) require(idx >= 0 && idx < n, "forward: CSN index out of range");
  for (const ToySample* s : batch.samples) {
    require(s->features.size() == static_cast<std::size_t>(g) * d0,
            "forward: sample " + std::to_string(s->id) + " has the wrong feature shape");
  }

  ForwardOutputs out;
  out.batch = n;
  out.csn = m;
  out.gated = params.apportionment && !options.force_unit_gate;
  out.backbone_pre.resize(std::size_t(n) * g * d1);
  out.backbone_out.resize(out.backbone_pre.size());
  out.parent_pre.resize(std::size_t(n) * g * d2);
  out.parent_out.resize(out.parent_pre.size());
  out.parent_argmax.resize(std::size_t(n) * d2);
  out.phi_p.resize(std::size_t(n) * d2);
  out.parent_drop.assign(std::size_t(n) * d2, 1.0);
  out.parent_logits.resize(std::size_t(n) * kNumParent);

  const double slope = params.prelu_slope;
  const double keep_scale = 1.0 / (1.0 - params.dropout_rate);
  std::bernoulli_distribution keep(1.0 - params.dropout_rate);
  auto dropout = [&](double* scale, int count) {
    if (!options.training || params.dropout_rate <= 0.0) return;
    for (int i = 0; i < count; ++i) scale[i] = keep(rng) ? keep_scale : 0.0;
  };

  std::vector<double> dropped(d2);
  for (int s = 0; s < n; ++s) {
    const double* x = batch.samples[s]->features.data();
    double* bpre = &out.backbone_pre[std::size_t(s) * g * d1];
    double* bout = &out.backbone_out[std::size_t(s) * g * d1];
    double* ppre = &out.parent_pre[std::size_t(s) * g * d2];
    double* pout = &out.parent_out[std::size_t(s) * g * d2];
    for (int pos = 0; pos < g; ++pos) {
      dense_apply(params.backbone, x + pos * d0, bpre + pos * d1);
      for (int c = 0; c < d1; ++c) bout[pos * d1 + c] = prelu(bpre[pos * d1 + c], slope);
      dense_apply(params.parent_transform, bout + pos * d1, ppre + pos * d2);
      for (int c = 0; c < d2; ++c) pout[pos * d2 + c] = prelu(ppre[pos * d2 + c], slope);
    }
    double* phi = &out.phi_p[std::size_t(s) * d2];
    global_max_pool(pout, g, d2, phi, &out.parent_argmax[std::size_t(s) * d2]);
    double* scale = &out.parent_drop[std::size_t(s) * d2];
    dropout(scale, d2);
    for (int c = 0; c < d2; ++c) dropped[c] = phi[c] * scale[c];
    dense_apply(params.parent_head, dropped.data(), &out.parent_logits[std::size_t(s) * kNumParent]);
  }

  out.gate.resize(std::size_t(m) * g * d2);
  out.child_pre.resize(out.gate.size());
  out.child_out.resize(out.gate.size());
  out.child_argmax.resize(std::size_t(m) * d2);
  out.phi_c.resize(std::size_t(m) * d2);
  out.child_drop.assign(std::size_t(m) * d2, 1.0);
  out.child_logits.resize(std::size_t(m) * kNumChild);

  std::vector<double> refined(std::size_t(g) * d2);
  for (int j = 0; j < m; ++j) {
    const int s = batch.csn_indices[j];
    // Grasper: gather the CSN sample's parent-branch features.
    const double* gathered = &out.parent_out[std::size_t(s) * g * d2];
    const double* bout = &out.backbone_out[std::size_t(s) * g * d1];
    double* gate = &out.gate[std::size_t(j) * g * d2];
    double* cpre = &out.child_pre[std::size_t(j) * g * d2];
    double* cout = &out.child_out[std::size_t(j) * g * d2];
    for (int pos = 0; pos < g; ++pos) {
      dense_apply(params.child_transform, bout + pos * d1, cpre + pos * d2);
      for (int c = 0; c < d2; ++c) {
        const int k = pos * d2 + c;
        cout[k] = prelu(cpre[k], slope);
        gate[k] = out.gated ? sigmoid(gathered[k]) : 1.0;
        refined[k] = gate[k] * cout[k];
      }
    }
    double* phi = &out.phi_c[std::size_t(j) * d2];
    global_max_pool(refined.data(), g, d2, phi, &out.child_argmax[std::size_t(j) * d2]);
    double* scale = &out.child_drop[std::size_t(j) * d2];
    dropout(scale, d2);
    for (int c = 0; c < d2; ++c) dropped[c] = phi[c] * scale[c];
    dense_apply(params.child_head, dropped.data(), &out.child_logits[std::size_t(j) * kNumChild]);
  }
  return out;
}

LossAndGrads loss_and_grads(const ForwardOutputs& fo, const BatchLayout& batch,
                            const ModelParams& params, const LossWeights& weights,
                            const ForwardOptions& options) {
  require(weights.parent.size() == kNumParent && weights.child.size() == kNumChild,
          "loss_and_grads: weights must have three entries per branch");
  require(fo.batch == batch.size() && fo.csn == batch.csn_count(),
          "loss_and_grads: outputs do not match the batch");
  const ModelDims& d = params.dims;
  const int g = d.positions, d0 = d.in_channels, d1 = d.backbone_channels, d2 = d.branch_channels;
  const int n = fo.batch;
  const int m = fo.csn;
  const double slope = params.prelu_slope;

  LossAndGrads out{0.0, 0.0, 0.0, params.zeros_like()};
  std::vector<double> d_backbone(std::size_t(n) * g * d1, 0.0);
  std::vector<double> d_parent(std::size_t(n) * g * d2, 0.0);
  std::vector<double> dphi(d2), dropped(d2);

  // Parent head: weighted CE over non-fixed samples.
  int parent_terms = 0;
  for (const ToySample* s : batch.samples) parent_terms += !s->is_fixed;
  for (int s = 0; s < n && parent_terms > 0; ++s) {
    const ToySample& sample = *batch.samples[s];
    if (sample.is_fixed) continue;
    const int y = static_cast<int>(sample.parent);
    const double* logits = &fo.parent_logits[std::size_t(s) * kNumParent];
    const auto prob = softmax3(logits);
    const double w = weights.parent[y] / parent_terms;
    out.parent_loss -= w * std::log(prob[y]);
    double dlogit[kNumParent];
    for (int k = 0; k < kNumParent; ++k) dlogit[k] = w * (prob[k] - (k == y ? 1.0 : 0.0));

    const double* phi = &fo.phi_p[std::size_t(s) * d2];
    const double* scale = &fo.parent_drop[std::size_t(s) * d2];
    for (int c = 0; c < d2; ++c) dropped[c] = phi[c] * scale[c];
    std::fill(dphi.begin(), dphi.end(), 0.0);
    dense_backward(params.parent_head, dropped.data(), dlogit, out.grads.parent_head, dphi.data());
    const int* arg = &fo.parent_argmax[std::size_t(s) * d2];
    for (int c = 0; c < d2; ++c) {
      d_parent[(std::size_t(s) * g + arg[c]) * d2 + c] += dphi[c] * scale[c];
    }
  }

  // Child head: weighted CE over non-fixed CSN samples, back through the gate.
  int child_terms = 0;
  for (int idx : batch.csn_indices) child_terms += !batch.samples[idx]->is_fixed;
  std::vector<double> d_refined(std::size_t(g) * d2), d_child_pre(std::size_t(g) * d2);
  for (int j = 0; j < m && child_terms > 0; ++j) {
    const int s = batch.csn_indices[j];
    const ToySample& sample = *batch.samples[s];
    if (sample.is_fixed) continue;
    require(sample.child.has_value(), "loss_and_grads: CSN sample without a child label");
    const int y = static_cast<int>(*sample.child);
    const double* logits = &fo.child_logits[std::size_t(j) * kNumChild];
    const auto prob = softmax3(logits);
    const double w = weights.child[y] / child_terms;
    out.child_loss -= w * std::log(prob[y]);
    double dlogit[kNumChild];
    for (int k = 0; k < kNumChild; ++k) dlogit[k] = w * (prob[k] - (k == y ? 1.0 : 0.0));

    const double* phi = &fo.phi_c[std::size_t(j) * d2];
    const double* scale = &fo.child_drop[std::size_t(j) * d2];
    for (int c = 0; c < d2; ++c) dropped[c] = phi[c] * scale[c];
    std::fill(dphi.begin(), dphi.end(), 0.0);
    dense_backward(params.child_head, dropped.data(), dlogit, out.grads.child_head, dphi.data());

    std::fill(d_refined.begin(), d_refined.end(), 0.0);
    const int* arg = &fo.child_argmax[std::size_t(j) * d2];
    for (int c = 0; c < d2; ++c) d_refined[arg[c] * d2 + c] += dphi[c] * scale[c];

    const double* gate = &fo.gate[std::size_t(j) * g * d2];
    const double* cpre = &fo.child_pre[std::size_t(j) * g * d2];
    const double* cout = &fo.child_out[std::size_t(j) * g * d2];
    const bool through_gate = fo.gated && !options.gate_stop_gradient;
    for (int k = 0; k < g * d2; ++k) {
      const double dr = d_refined[k];
      d_child_pre[k] = dr * gate[k] * prelu_grad(cpre[k], slope);
      if (through_gate && dr != 0.0) {
        d_parent[std::size_t(s) * g * d2 + k] += dr * cout[k] * gate[k] * (1.0 - gate[k]);
      }
    }
    const double* bout = &fo.backbone_out[std::size_t(s) * g * d1];
    double* dback = &d_backbone[std::size_t(s) * g * d1];
    for (int pos = 0; pos < g; ++pos) {
      dense_backward(params.child_transform, bout + pos * d1, &d_child_pre[pos * d2],
                     out.grads.child_transform, dback + pos * d1);
    }
  }

  // Parent transform and backbone.
  std::vector<double> dz(std::max(d1, d2));
  for (int s = 0; s < n; ++s) {
    const double* x = batch.samples[s]->features.data();
    const double* ppre = &fo.parent_pre[std::size_t(s) * g * d2];
    const double* bpre = &fo.backbone_pre[std::size_t(s) * g * d1];
    const double* bout = &fo.backbone_out[std::size_t(s) * g * d1];
    double* dpar = &d_parent[std::size_t(s) * g * d2];
    double* dback = &d_backbone[std::size_t(s) * g * d1];
    for (int pos = 0; pos < g; ++pos) {
      for (int c = 0; c < d2; ++c) dz[c] = dpar[pos * d2 + c] * prelu_grad(ppre[pos * d2 + c], slope);
      dense_backward(params.parent_transform, bout + pos * d1, dz.data(), out.grads.parent_transform,
                     dback + pos * d1);
      for (int c = 0; c < d1; ++c) dz[c] = dback[pos * d1 + c] * prelu_grad(bpre[pos * d1 + c], slope);
      dense_backward(params.backbone, x + pos * d0, dz.data(), out.grads.backbone, nullptr);
    }
  }

  out.loss = out.parent_loss + out.child_loss;
  return out;
}

std::pair<Lesion, double> route(std::span<const double, 3> parent_logits,
                                std::span<const double, 3> child_logits) {
  const auto pp = softmax3(parent_logits.data());
  const int parent = argmax3(pp);
  if (parent != static_cast<int>(ParentClass::CSN)) {
    return {lesion_from(static_cast<ParentClass>(parent), std::nullopt), pp[parent]};
  }
  const auto pc = softmax3(child_logits.data());
  const int child = argmax3(pc);
  return {lesion_of(static_cast<ChildClass>(child)), pc[child]};
}

Prediction predict(const ToySample& sample, const ModelParams& params) {
  BatchLayout batch;
  batch.samples = {&sample};
  batch.csn_indices = {0};
  std::mt19937_64 unused(0);
  const ForwardOutputs fo = forward(batch, params, ForwardOptions{}, unused);

  Prediction p;
  std::copy_n(fo.parent_logits.begin(), 3, p.parent_logits.begin());
  std::array<double, 3> child{};
  std::copy_n(fo.child_logits.begin(), 3, child.begin());
  p.child_logits = child;
  p.phi_p = fo.phi_p;
  p.phi_c = fo.phi_c;
  std::tie(p.label, p.confidence) = route(p.parent_logits, child);
  return p;
}

}  // namespace glom
