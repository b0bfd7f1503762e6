// Copyright (c) 2026 binsed contributors
// SPDX-License-Identifier: Apache-2.0
//
// The multichannel detector network: one CNN branch per feature volume,
// branch maps merged by per-frame concatenation, two bidirectional LSTM
// layers and a time-distributed sigmoid output, one unit per class.

#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>

#include "binsed/nn_core.hpp"
#include "binsed/volume.hpp"

namespace binsed {

enum class LayeringMode { volume, concat };

const char* layering_mode_name(LayeringMode m);
LayeringMode parse_layering_mode(const std::string& s);

struct ConvBlockSpec {
  int filters = 100;
  int kh = 3;
  int kw = 3;
  int pool = 1;  // feature axis only
};

struct BranchSpec {
  std::string feature;  // "mel", "mel-mono", "tdoa", "gcc", "domfreq", "acr"
  FeatureType type = FeatureType::mel;
  int input_length = 0;
  int input_layers = 0;
  std::vector<ConvBlockSpec> blocks;

  int out_width() const;
  int out_maps() const { return blocks.back().filters; }
  int flat_width() const { return out_width() * out_maps(); }
  void validate() const;
};

bool is_known_feature(const std::string& name);
FeatureType feature_type_of(const std::string& name);
/// Binaural volume dimensions (length, layers) of a named feature.
std::pair<int, int> feature_volume_dims(const std::string& name);

/// The default branch architecture for a feature under the given input
/// arrangement. High-dimensional features get three conv blocks whose pools
/// reduce the width to 5; tdoa and domfreq get a single block without
/// pooling.
BranchSpec make_branch_spec(const std::string& feature, LayeringMode mode, int filters = 100);

struct ModelConfig {
  std::vector<BranchSpec> branches;
  LayeringMode layering = LayeringMode::volume;
  int lstm_units = 128;
  std::vector<std::string> class_list;

  int classes() const { return static_cast<int>(class_list.size()); }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Flat parameter storage with a named-block schema. Gradients and Adam
// moments reuse the same layout as plain vectors.
// ---------------------------------------------------------------------------

template <class Real>
struct ParamStore {
  struct Block {
    std::string name;
    std::size_t offset = 0;
    std::size_t count = 0;
  };
  std::vector<Real> data;
  std::vector<Block> blocks;

  std::size_t add(const std::string& name, std::size_t count) {
    const std::size_t off = data.size();
    blocks.push_back({name, off, count});
    data.resize(off + count, Real(0));
    return off;
  }
  Real* at(std::size_t offset) { return data.data() + offset; }
  const Real* at(std::size_t offset) const { return data.data() + offset; }
};

struct ConvBlockRef {
  ConvDims dims;
  int pool = 1;
  int in_len = 0;  // feature width entering the block
  std::size_t w = 0, b = 0, gamma = 0, beta = 0;
  std::size_t rmean = 0, rvar = 0;  // in the state store
};

struct LstmDirRef {
  int input = 0, hidden = 0;
  std::size_t w = 0, u = 0, b = 0;
};

struct BilstmRef {
  LstmDirRef fwd, bwd;
  int input = 0, hidden = 0;
};

struct DenseRef {
  int input = 0, output = 0;
  std::size_t w = 0, b = 0;
};

template <class Real>
struct Model {
  ModelConfig config;
  ParamStore<Real> params;  // trainable
  ParamStore<Real> state;   // batch-norm running statistics
  std::vector<std::vector<ConvBlockRef>> branch_layers;
  BilstmRef lstm1, lstm2;
  DenseRef output;
  int merged_width = 0;

  explicit Model(ModelConfig cfg);
  void init_params(Rng& rng);
};

// ---------------------------------------------------------------------------
// Forward / backward.
// ---------------------------------------------------------------------------

template <class Real>
struct SequenceBatchItem {
  std::vector<Ten3<Real>> branch_inputs;  // one per model branch
  Mat<Real> targets;                      // T x K
  std::vector<std::uint8_t> frame_mask;   // T (1 = scored frame)
};

template <class Real>
struct ConvBlockCache {
  std::vector<Ten3<Real>> conv_out;  // per element, pre-normalization
  BnBatchStats<Real> stats;
  std::vector<Ten3<Real>> act;   // post-BN, post-ReLU (pool input)
  std::vector<std::vector<std::uint8_t>> pool_idx;
  std::vector<Ten3<Real>> post;  // post-pool, post-dropout
  std::vector<std::vector<std::uint8_t>> drop_mask;
};

template <class Real>
struct ForwardCache {
  int batch = 0;
  int frames = 0;
  bool dropout_on = false;
  Real dropout_rate = Real(0);
  std::vector<std::vector<ConvBlockCache<Real>>> branches;  // [branch][block]
  std::vector<Mat<Real>> merged;                            // per element
  std::vector<std::array<LstmCache<Real>, 2>> lstm1_cache;  // fwd, bwd
  std::vector<Mat<Real>> lstm1_out;                         // post-dropout
  std::vector<std::vector<std::uint8_t>> lstm1_mask;
  std::vector<std::array<LstmCache<Real>, 2>> lstm2_cache;
  std::vector<Mat<Real>> lstm2_out;  // post-dropout
  std::vector<std::vector<std::uint8_t>> lstm2_mask;
  std::vector<Mat<Real>> probs;
};

/// Train-mode forward over a batch of sequences. Dropout masks are derived
/// from `rng` (one seed per tensor, drawn in a fixed order), so a fixed rng
/// state reproduces the pass exactly. Batch-norm running statistics update
/// only when `update_running` is set.
template <class Real>
void forward_train(Model<Real>& model, const std::vector<SequenceBatchItem<Real>>& batch,
                   Real dropout_rate, Rng& rng, ForwardCache<Real>& cache,
                   bool update_running = true);

/// Inference forward for a single sequence: running statistics, no dropout.
/// When `merged_out` is given it receives the pre-recurrent merged features.
template <class Real>
Mat<Real> forward_infer(const Model<Real>& model, const std::vector<Ten3<Real>>& branch_inputs,
                        Mat<Real>* merged_out = nullptr);

/// Mean clipped binary cross-entropy over the batch's unmasked cells.
template <class Real>
double batch_loss(const ForwardCache<Real>& cache,
                  const std::vector<SequenceBatchItem<Real>>& batch);

/// Exact gradients of batch_loss with respect to every trainable parameter.
/// `grads` must have params.data.size() entries; it is zeroed first.
template <class Real>
void backward(Model<Real>& model, const std::vector<SequenceBatchItem<Real>>& batch,
              ForwardCache<Real>& cache, std::vector<Real>& grads);

// ---------------------------------------------------------------------------
// Checkpoint I/O (float models).
// ---------------------------------------------------------------------------

struct Checkpoint {
  ModelConfig config;
  std::map<std::string, NormStats> norms;  // per branch feature name
  int sample_rate = 44100;
  double hop = 0.02;
  bool normalize = true;
};

void save_checkpoint(const std::filesystem::path& path, const Model<float>& model,
                     const Checkpoint& meta);

struct LoadedModel {
  Model<float> model;
  Checkpoint meta;
};

LoadedModel load_checkpoint(const std::filesystem::path& path);

}  // namespace binsed

#include "binsed/model_impl.hpp"
