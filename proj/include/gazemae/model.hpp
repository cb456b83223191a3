#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gazemae/image.hpp"

namespace gazemae {

struct TokenGrid {
  int t_tokens = 0;
  int h_tokens = 0;
  int w_tokens = 0;

  int spatial() const { return h_tokens * w_tokens; }
  int total() const { return t_tokens * spatial(); }

  bool operator==(const TokenGrid&) const = default;
};

struct ModelConfig {
  int image_size = 224;
  int patch_size = 16;
  int tubelet_size = 1;
  int frames = 7;
  int embed_dim = 96;
  int depth = 4;
  int heads = 4;
  int decoder_dim = 48;
  int decoder_depth = 2;
  double mask_ratio = 0.9;
  int num_classes = 2;
  std::string variant = "toy";
  std::array<double, 3> pixel_mean{0.485, 0.456, 0.406};
  std::array<double, 3> pixel_std{0.229, 0.224, 0.225};

  void validate() const;
  TokenGrid grid() const;
  int voxel_dim() const { return tubelet_size * patch_size * patch_size * 3; }
};

// Random spatial cell subset replicated across every temporal token position.
struct TubeMask {
  int t_tokens = 0;
  std::vector<std::uint8_t> spatial;  // one flag per spatial cell, 1 = masked

  int spatial_cells() const { return static_cast<int>(spatial.size()); }
  int count() const;
  bool masked_spatial(int s) const { return spatial[s] != 0; }
  bool masked_token(int token) const { return spatial[token % spatial.size()] != 0; }
  // Expansion over all t_tokens * spatial_cells token positions, temporal-major.
  std::vector<std::uint8_t> expanded() const;
};

// Exact masked-cell count: floor(mask_ratio * S + 0.5).
int tube_mask_count(int spatial_cells, double mask_ratio);

TubeMask generate_tube_mask(std::uint64_t seed, const TokenGrid& grid, double mask_ratio);

struct Logits {
  std::array<double, 2> values{0, 0};

  std::array<double, 2> softmax() const;
  double p_positive() const { return softmax()[1]; }
};

// All trainable tensors in one flat buffer. Entry offsets never move after
// registration, so gradient/optimizer buffers share the same layout.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    std::size_t offset = 0;
    int rows = 0;
    int cols = 0;
    bool decay = true;  // false exempts the entry from weight decay

    std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  };

  std::size_t add(std::string name, int rows, int cols, bool decay);

  std::size_t size() const { return values_.size(); }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<Entry>& entries() const { return entries_; }

  Eigen::Map<Eigen::MatrixXd> matrix(std::size_t entry_index);
  Eigen::Map<const Eigen::MatrixXd> matrix(std::size_t entry_index) const;

  const Entry& entry(std::size_t entry_index) const { return entries_[entry_index]; }
  // Entry covering a flat value index (for diagnostics).
  const Entry& entry_for_value(std::size_t value_index) const;
  // Throws ValidationError when the name is unknown.
  std::size_t index_of(const std::string& name) const;

  // 1 = apply weight decay to this scalar.
  std::vector<std::uint8_t> decay_mask() const;

 private:
  std::vector<Entry> entries_;
  std::vector<double> values_;
};

// [0,1] float window -> per-channel normalized double tensor.
VideoTensorD normalize_window(const VideoTensor& window, const std::array<double, 3>& mean,
                              const std::array<double, 3>& stddev);

struct MaeForwardResult {
  double loss = 0;
  Eigen::MatrixXd predictions;  // tokens x voxel_dim, every token position
  Eigen::MatrixXd targets;      // tokens x voxel_dim
};

// Mean squared error over masked token voxels only.
double masked_mse(const Eigen::MatrixXd& predictions, const Eigen::MatrixXd& targets,
                  const TubeMask& mask);

// Video transformer with tubelet embedding, an MAE decoder for pretraining
// and a linear 2-way head over mean-pooled encoder tokens. All math is
// double precision; forward and backward passes are hand-written.
class VideoMae {
 public:
  VideoMae(ModelConfig config, std::uint64_t init_seed);

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return store_; }
  const ParamStore& params() const { return store_; }

  // Voxel pixels per token, N x voxel_dim, temporal-major token order.
  Eigen::MatrixXd voxelize(const VideoTensorD& window) const;
  // Linear voxel embedding plus learned position encoding, N x embed_dim.
  Eigen::MatrixXd tubelet_embed(const VideoTensorD& window) const;

  Logits classify(const VideoTensorD& window) const;
  double classification_loss(const VideoTensorD& window, int label) const;
  // Accumulates dLoss/dParams into `grad` (same layout as params().values()).
  double classification_loss_grad(const VideoTensorD& window, int label,
                                  std::span<double> grad) const;

  MaeForwardResult mae_forward(const VideoTensorD& window, const TubeMask& mask) const;
  double mae_loss(const VideoTensorD& window, const TubeMask& mask) const;
  double mae_loss_grad(const VideoTensorD& window, const TubeMask& mask,
                       std::span<double> grad) const;

 private:
  struct LinearH {
    std::size_t w = 0;
    std::size_t b = 0;
  };
  struct LnH {
    std::size_t g = 0;
    std::size_t b = 0;
  };
  struct BlockH {
    LnH ln1;
    LinearH qkv;
    LinearH proj;
    LnH ln2;
    LinearH fc1;
    LinearH fc2;
  };

  void register_params();
  void init_params(std::uint64_t seed);
  BlockH register_block(const std::string& prefix, int dim);

  ModelConfig config_;
  ParamStore store_;

  LinearH embed_;
  std::size_t pos_ = 0;
  std::vector<BlockH> enc_blocks_;
  LnH enc_norm_;
  LinearH head_;
  LinearH dec_proj_;
  std::size_t mask_token_ = 0;
  std::size_t dec_pos_ = 0;
  std::vector<BlockH> dec_blocks_;
  LnH dec_norm_;
  LinearH pred_;

  friend struct VideoMaeOps;
};

// Spec-level convenience wrapper.
double mae_reconstruction_loss(const VideoTensorD& window, const TubeMask& mask,
                               const VideoMae& model);

// Softmax cross-entropy of a batch of logits against integer labels, mean
// over the batch.
double cross_entropy(const std::vector<Logits>& logits, const std::vector<int>& labels);

}  // namespace gazemae
