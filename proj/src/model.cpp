#include "gazemae/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gazemae/errors.hpp"
#include "gazemae/rng.hpp"

namespace gazemae {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using MapMat = Eigen::Map<Eigen::MatrixXd>;
using CMapMat = Eigen::Map<const Eigen::MatrixXd>;

void ModelConfig::validate() const {
  const auto fail = [](const std::string& what) { throw ValidationError("ModelConfig: " + what); };
  if (image_size <= 0 || patch_size <= 0 || tubelet_size <= 0 || frames <= 0) {
    fail("geometry fields must be positive");
  }
  if (image_size % patch_size != 0) {
    fail("image_size " + std::to_string(image_size) + " not divisible by patch_size " +
         std::to_string(patch_size));
  }
  if (frames % tubelet_size != 0) {
    fail("frames " + std::to_string(frames) + " not divisible by tubelet_size " +
         std::to_string(tubelet_size));
  }
  if (embed_dim <= 0 || depth <= 0 || heads <= 0 || decoder_dim <= 0 || decoder_depth <= 0) {
    fail("transformer fields must be positive");
  }
  if (embed_dim % heads != 0) {
    fail("embed_dim " + std::to_string(embed_dim) + " not divisible by heads " +
         std::to_string(heads));
  }
  if (decoder_dim % heads != 0) {
    fail("decoder_dim " + std::to_string(decoder_dim) + " not divisible by heads " +
         std::to_string(heads));
  }
  if (!(mask_ratio > 0.0) || !(mask_ratio < 1.0)) {
    fail("mask_ratio must lie in (0,1)");
  }
  if (num_classes != 2) fail("num_classes must be 2");
  for (double s : pixel_std) {
    if (!(s > 0)) fail("pixel_std entries must be positive");
  }
}

TokenGrid ModelConfig::grid() const {
  TokenGrid g;
  g.t_tokens = frames / tubelet_size;
  g.h_tokens = image_size / patch_size;
  g.w_tokens = image_size / patch_size;
  return g;
}

int TubeMask::count() const {
  return static_cast<int>(std::count(spatial.begin(), spatial.end(), std::uint8_t{1}));
}

std::vector<std::uint8_t> TubeMask::expanded() const {
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(t_tokens) * spatial.size());
  for (int t = 0; t < t_tokens; ++t) {
    out.insert(out.end(), spatial.begin(), spatial.end());
  }
  return out;
}

int tube_mask_count(int spatial_cells, double mask_ratio) {
  return static_cast<int>(std::floor(mask_ratio * spatial_cells + 0.5));
}

TubeMask generate_tube_mask(std::uint64_t seed, const TokenGrid& grid, double mask_ratio) {
  if (!(mask_ratio > 0.0) || !(mask_ratio < 1.0)) {
    throw ValidationError("generate_tube_mask: mask_ratio must lie in (0,1)");
  }
  if (grid.spatial() <= 0 || grid.t_tokens <= 0) {
    throw ValidationError("generate_tube_mask: empty token grid");
  }
  const int S = grid.spatial();
  const int k = tube_mask_count(S, mask_ratio);
  std::vector<int> order(S);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  TubeMask mask;
  mask.t_tokens = grid.t_tokens;
  mask.spatial.assign(S, 0);
  for (int i = 0; i < k; ++i) {
    mask.spatial[order[i]] = 1;
  }
  return mask;
}

std::array<double, 2> Logits::softmax() const {
  const double m = std::max(values[0], values[1]);
  const double e0 = std::exp(values[0] - m);
  const double e1 = std::exp(values[1] - m);
  const double z = e0 + e1;
  return {e0 / z, e1 / z};
}

std::size_t ParamStore::add(std::string name, int rows, int cols, bool decay) {
  Entry entry;
  entry.name = std::move(name);
  entry.offset = values_.size();
  entry.rows = rows;
  entry.cols = cols;
  entry.decay = decay;
  values_.resize(values_.size() + entry.size(), 0.0);
  entries_.push_back(std::move(entry));
  return entries_.size() - 1;
}

MapMat ParamStore::matrix(std::size_t entry_index) {
  const Entry& e = entries_[entry_index];
  return MapMat(values_.data() + e.offset, e.rows, e.cols);
}

CMapMat ParamStore::matrix(std::size_t entry_index) const {
  const Entry& e = entries_[entry_index];
  return CMapMat(values_.data() + e.offset, e.rows, e.cols);
}

const ParamStore::Entry& ParamStore::entry_for_value(std::size_t value_index) const {
  for (const Entry& e : entries_) {
    if (value_index >= e.offset && value_index < e.offset + e.size()) return e;
  }
  throw ValidationError("ParamStore: value index out of range");
}

std::size_t ParamStore::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].name == name) return i;
  }
  throw ValidationError("ParamStore: unknown parameter '" + name + "'");
}

std::vector<std::uint8_t> ParamStore::decay_mask() const {
  std::vector<std::uint8_t> mask(values_.size(), 0);
  for (const Entry& e : entries_) {
    if (!e.decay) continue;
    std::fill(mask.begin() + e.offset, mask.begin() + e.offset + e.size(), std::uint8_t{1});
  }
  return mask;
}

VideoTensorD normalize_window(const VideoTensor& window, const std::array<double, 3>& mean,
                              const std::array<double, 3>& stddev) {
  VideoTensorD out = VideoTensorD::zeros(window.frames, window.height, window.width);
  const std::size_t n = window.data.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int c = static_cast<int>(i % 3);
    out.data[i] = (window.data[i] - mean[c]) / stddev[c];
  }
  return out;
}

double masked_mse(const Mat& predictions, const Mat& targets, const TubeMask& mask) {
  if (predictions.rows() != targets.rows() || predictions.cols() != targets.cols()) {
    throw ValidationError("masked_mse: prediction/target shape mismatch");
  }
  const int N = static_cast<int>(predictions.rows());
  double acc = 0;
  std::int64_t masked_rows = 0;
  for (int n = 0; n < N; ++n) {
    if (!mask.masked_token(n)) continue;
    ++masked_rows;
    acc += (predictions.row(n) - targets.row(n)).squaredNorm();
  }
  if (masked_rows == 0) throw ValidationError("masked_mse: mask selects no tokens");
  return acc / (static_cast<double>(masked_rows) * predictions.cols());
}

// ---------------------------------------------------------------------------
// internal math

namespace {

constexpr double kLnEps = 1e-6;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

struct LnCache {
  Mat xhat;
  Vec istd;
};

struct AttnCache {
  Mat qkv;
  std::vector<Mat> probs;
  Mat concat;
};

struct BlockCache {
  Mat x_in;
  LnCache ln1;
  Mat ln1_out;
  AttnCache attn;
  Mat x_mid;
  LnCache ln2;
  Mat ln2_out;
  Mat fc1_pre;
  Mat gelu_out;
};

struct StackCache {
  std::vector<BlockCache> blocks;
  Mat pre_final;
  LnCache final_ln;
};

Mat gelu(const Mat& x) {
  return x.unaryExpr([](double v) { return 0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)); });
}

Mat gelu_bwd(const Mat& x_pre, const Mat& dy) {
  Mat d = x_pre.unaryExpr([](double v) {
    const double cdf = 0.5 * (1.0 + std::erf(v * M_SQRT1_2));
    const double pdf = std::exp(-0.5 * v * v) * kInvSqrt2Pi;
    return cdf + v * pdf;
  });
  return (dy.array() * d.array()).matrix();
}

void softmax_rows(Mat& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double m = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - m).exp();
    s.row(i) /= s.row(i).sum();
  }
}

}  // namespace

// Internal operations bound to one model + parameter buffer. Gradients are
// accumulated into an external flat buffer with the store's layout.
struct VideoMaeOps {
  const VideoMae& m;
  const ParamStore& ps;
  std::span<double> grad;  // may be empty for forward-only use

  CMapMat value(std::size_t e) const { return ps.matrix(e); }

  MapMat gmap(std::size_t e) const {
    const auto& en = ps.entry(e);
    return MapMat(grad.data() + en.offset, en.rows, en.cols);
  }

  // y = x W + b
  Mat linear_fwd(const Mat& x, const VideoMae::LinearH& h) const {
    Mat y = x * value(h.w);
    y.rowwise() += value(h.b).row(0);
    return y;
  }

  Mat linear_bwd(const Mat& x, const Mat& dy, const VideoMae::LinearH& h) const {
    gmap(h.w).noalias() += x.transpose() * dy;
    gmap(h.b).row(0) += dy.colwise().sum();
    return dy * value(h.w).transpose();
  }

  Mat layernorm_fwd(const Mat& x, const VideoMae::LnH& h, LnCache* c) const {
    const Vec mean = x.rowwise().mean();
    Mat xc = x.colwise() - mean;
    const Vec var = xc.array().square().matrix().rowwise().mean();
    const Vec istd = (var.array() + kLnEps).sqrt().inverse();
    Mat xhat = (xc.array().colwise() * istd.array()).matrix();
    const RowVec g = value(h.g).row(0);
    const RowVec b = value(h.b).row(0);
    Mat y = ((xhat.array().rowwise() * g.array()).rowwise() + b.array()).matrix();
    if (c) {
      c->xhat = std::move(xhat);
      c->istd = istd;
    }
    return y;
  }

  Mat layernorm_bwd(const Mat& dy, const LnCache& c, const VideoMae::LnH& h) const {
    gmap(h.g).row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
    gmap(h.b).row(0) += dy.colwise().sum();
    const RowVec g = value(h.g).row(0);
    Mat dxhat = (dy.array().rowwise() * g.array()).matrix();
    const Vec m1 = dxhat.rowwise().mean();
    const Vec m2 = (dxhat.array() * c.xhat.array()).rowwise().mean();
    Mat dx = ((dxhat.colwise() - m1).array() - (c.xhat.array().colwise() * m2.array())).matrix();
    dx = (dx.array().colwise() * c.istd.array()).matrix();
    return dx;
  }

  Mat attn_fwd(const Mat& x, const VideoMae::BlockH& h, int heads, AttnCache* c) const {
    const int D = static_cast<int>(x.cols());
    const int dh = D / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat qkv = linear_fwd(x, h.qkv);
    Mat concat(x.rows(), D);
    std::vector<Mat> probs(static_cast<std::size_t>(heads));
    for (int hd = 0; hd < heads; ++hd) {
      const auto q = qkv.middleCols(hd * dh, dh);
      const auto k = qkv.middleCols(D + hd * dh, dh);
      const auto v = qkv.middleCols(2 * D + hd * dh, dh);
      Mat s = q * k.transpose() * scale;
      softmax_rows(s);
      concat.middleCols(hd * dh, dh).noalias() = s * v;
      if (c) probs[hd] = std::move(s);
    }
    Mat out = linear_fwd(concat, h.proj);
    if (c) {
      c->qkv = std::move(qkv);
      c->probs = std::move(probs);
      c->concat = std::move(concat);
    }
    return out;
  }

  Mat attn_bwd(const Mat& x, const Mat& d_out, const VideoMae::BlockH& h, int heads,
               const AttnCache& c) const {
    const int D = static_cast<int>(x.cols());
    const int dh = D / heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    Mat d_concat = linear_bwd(c.concat, d_out, h.proj);
    Mat d_qkv = Mat::Zero(x.rows(), 3 * D);
    for (int hd = 0; hd < heads; ++hd) {
      const auto q = c.qkv.middleCols(hd * dh, dh);
      const auto k = c.qkv.middleCols(D + hd * dh, dh);
      const Mat& p = c.probs[static_cast<std::size_t>(hd)];
      const auto v = c.qkv.middleCols(2 * D + hd * dh, dh);
      const auto d_oh = d_concat.middleCols(hd * dh, dh);
      Mat dp = d_oh * v.transpose();
      d_qkv.middleCols(2 * D + hd * dh, dh).noalias() = p.transpose() * d_oh;
      const Vec rs = (dp.array() * p.array()).rowwise().sum();
      Mat ds = (p.array() * (dp.colwise() - rs).array()).matrix();
      d_qkv.middleCols(hd * dh, dh).noalias() = ds * k * scale;
      d_qkv.middleCols(D + hd * dh, dh).noalias() = ds.transpose() * q * scale;
    }
    return linear_bwd(x, d_qkv, h.qkv);
  }

  Mat block_fwd(const Mat& x, const VideoMae::BlockH& h, int heads, BlockCache* c) const {
    LnCache ln1c;
    Mat ln1_out = layernorm_fwd(x, h.ln1, c ? &ln1c : nullptr);
    AttnCache attnc;
    Mat attn = attn_fwd(ln1_out, h, heads, c ? &attnc : nullptr);
    Mat x_mid = x + attn;
    LnCache ln2c;
    Mat ln2_out = layernorm_fwd(x_mid, h.ln2, c ? &ln2c : nullptr);
    Mat fc1_pre = linear_fwd(ln2_out, h.fc1);
    Mat act = gelu(fc1_pre);
    Mat out = x_mid + linear_fwd(act, h.fc2);
    if (c) {
      c->x_in = x;
      c->ln1 = std::move(ln1c);
      c->ln1_out = std::move(ln1_out);
      c->attn = std::move(attnc);
      c->x_mid = std::move(x_mid);
      c->ln2 = std::move(ln2c);
      c->ln2_out = std::move(ln2_out);
      c->fc1_pre = std::move(fc1_pre);
      c->gelu_out = std::move(act);
    }
    return out;
  }

  Mat block_bwd(const Mat& d_out, const VideoMae::BlockH& h, int heads, const BlockCache& c) const {
    Mat d_act = linear_bwd(c.gelu_out, d_out, h.fc2);
    Mat d_fc1 = gelu_bwd(c.fc1_pre, d_act);
    Mat d_ln2 = linear_bwd(c.ln2_out, d_fc1, h.fc1);
    Mat d_xmid = layernorm_bwd(d_ln2, c.ln2, h.ln2);
    d_xmid += d_out;
    Mat d_ln1 = attn_bwd(c.ln1_out, d_xmid, h, heads, c.attn);
    Mat d_x = layernorm_bwd(d_ln1, c.ln1, h.ln1);
    d_x += d_xmid;
    return d_x;
  }

  Mat stack_fwd(const Mat& tokens, const std::vector<VideoMae::BlockH>& blocks,
                const VideoMae::LnH& norm, int heads, StackCache* c) const {
    Mat x = tokens;
    if (c) c->blocks.resize(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      x = block_fwd(x, blocks[i], heads, c ? &c->blocks[i] : nullptr);
    }
    if (c) c->pre_final = x;
    return layernorm_fwd(x, norm, c ? &c->final_ln : nullptr);
  }

  Mat stack_bwd(const Mat& d_encoded, const std::vector<VideoMae::BlockH>& blocks,
                const VideoMae::LnH& norm, int heads, const StackCache& c) const {
    Mat dx = layernorm_bwd(d_encoded, c.final_ln, norm);
    for (std::size_t i = blocks.size(); i-- > 0;) {
      dx = block_bwd(dx, blocks[i], heads, c.blocks[i]);
    }
    return dx;
  }
};

// ---------------------------------------------------------------------------
// VideoMae

VideoMae::VideoMae(ModelConfig config, std::uint64_t init_seed) : config_(std::move(config)) {
  config_.validate();
  register_params();
  init_params(init_seed);
}

VideoMae::BlockH VideoMae::register_block(const std::string& prefix, int dim) {
  BlockH h;
  h.ln1.g = store_.add(prefix + ".ln1.g", 1, dim, false);
  h.ln1.b = store_.add(prefix + ".ln1.b", 1, dim, false);
  h.qkv.w = store_.add(prefix + ".qkv.w", dim, 3 * dim, true);
  h.qkv.b = store_.add(prefix + ".qkv.b", 1, 3 * dim, false);
  h.proj.w = store_.add(prefix + ".proj.w", dim, dim, true);
  h.proj.b = store_.add(prefix + ".proj.b", 1, dim, false);
  h.ln2.g = store_.add(prefix + ".ln2.g", 1, dim, false);
  h.ln2.b = store_.add(prefix + ".ln2.b", 1, dim, false);
  h.fc1.w = store_.add(prefix + ".fc1.w", dim, 4 * dim, true);
  h.fc1.b = store_.add(prefix + ".fc1.b", 1, 4 * dim, false);
  h.fc2.w = store_.add(prefix + ".fc2.w", 4 * dim, dim, true);
  h.fc2.b = store_.add(prefix + ".fc2.b", 1, dim, false);
  return h;
}

void VideoMae::register_params() {
  const int D = config_.embed_dim;
  const int dd = config_.decoder_dim;
  const int P = config_.voxel_dim();
  const int N = config_.grid().total();

  embed_.w = store_.add("embed.w", P, D, true);
  embed_.b = store_.add("embed.b", 1, D, false);
  pos_ = store_.add("pos", N, D, false);
  for (int i = 0; i < config_.depth; ++i) {
    enc_blocks_.push_back(register_block("enc." + std::to_string(i), D));
  }
  enc_norm_.g = store_.add("enc.norm.g", 1, D, false);
  enc_norm_.b = store_.add("enc.norm.b", 1, D, false);
  head_.w = store_.add("head.w", D, config_.num_classes, true);
  head_.b = store_.add("head.b", 1, config_.num_classes, false);

  dec_proj_.w = store_.add("dec.proj_in.w", D, dd, true);
  dec_proj_.b = store_.add("dec.proj_in.b", 1, dd, false);
  mask_token_ = store_.add("dec.mask_token", 1, dd, false);
  dec_pos_ = store_.add("dec.pos", N, dd, false);
  for (int i = 0; i < config_.decoder_depth; ++i) {
    dec_blocks_.push_back(register_block("dec." + std::to_string(i), dd));
  }
  dec_norm_.g = store_.add("dec.norm.g", 1, dd, false);
  dec_norm_.b = store_.add("dec.norm.b", 1, dd, false);
  pred_.w = store_.add("dec.pred.w", dd, P, true);
  pred_.b = store_.add("dec.pred.b", 1, P, false);
}

void VideoMae::init_params(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "model-init"));
  const auto trunc_normal = [&rng](double stddev) {
    double v;
    do {
      v = rng.normal();
    } while (std::abs(v) > 2.0);
    return v * stddev;
  };
  for (std::size_t i = 0; i < store_.entries().size(); ++i) {
    const auto& entry = store_.entry(i);
    auto mat = store_.matrix(i);
    const bool is_ln_gain = entry.name.size() >= 2 && entry.name.ends_with(".g");
    const bool is_bias = entry.name.ends_with(".b");
    if (is_ln_gain) {
      mat.setOnes();
    } else if (is_bias) {
      mat.setZero();
    } else {
      // weights, position encodings, mask token
      for (Eigen::Index ccol = 0; ccol < mat.cols(); ++ccol) {
        for (Eigen::Index rrow = 0; rrow < mat.rows(); ++rrow) {
          mat(rrow, ccol) = trunc_normal(0.02);
        }
      }
    }
  }
}

Mat VideoMae::voxelize(const VideoTensorD& window) const {
  const auto& cfg = config_;
  if (window.frames != cfg.frames || window.height != cfg.image_size ||
      window.width != cfg.image_size) {
    std::ostringstream msg;
    msg << "voxelize: window shape (" << window.frames << "," << window.height << ","
        << window.width << ") does not match model (" << cfg.frames << "," << cfg.image_size
        << "," << cfg.image_size << ")";
    throw ValidationError(msg.str());
  }
  const TokenGrid grid = cfg.grid();
  const int P = cfg.voxel_dim();
  Mat out(grid.total(), P);
  int token = 0;
  for (int tt = 0; tt < grid.t_tokens; ++tt) {
    for (int gy = 0; gy < grid.h_tokens; ++gy) {
      for (int gx = 0; gx < grid.w_tokens; ++gx, ++token) {
        int idx = 0;
        for (int f = 0; f < cfg.tubelet_size; ++f) {
          const int frame = tt * cfg.tubelet_size + f;
          for (int py = 0; py < cfg.patch_size; ++py) {
            const int y = gy * cfg.patch_size + py;
            for (int px = 0; px < cfg.patch_size; ++px) {
              const int x = gx * cfg.patch_size + px;
              for (int c = 0; c < 3; ++c, ++idx) {
                out(token, idx) = window.at(frame, y, x, c);
              }
            }
          }
        }
      }
    }
  }
  return out;
}

Mat VideoMae::tubelet_embed(const VideoTensorD& window) const {
  VideoMaeOps ops{*this, store_, {}};
  Mat tokens = ops.linear_fwd(voxelize(window), embed_);
  tokens += store_.matrix(pos_);
  return tokens;
}

Logits VideoMae::classify(const VideoTensorD& window) const {
  VideoMaeOps ops{*this, store_, {}};
  Mat tokens = tubelet_embed(window);
  Mat encoded = ops.stack_fwd(tokens, enc_blocks_, enc_norm_, config_.heads, nullptr);
  RowVec pooled = encoded.colwise().mean();
  RowVec z = pooled * store_.matrix(head_.w);
  z += store_.matrix(head_.b).row(0);
  Logits logits;
  logits.values = {z(0), z(1)};
  return logits;
}

namespace {

double ce_from_logits(const Logits& logits, int label, std::array<double, 2>* dz) {
  if (label != 0 && label != 1) throw ValidationError("cross-entropy: label must be 0 or 1");
  const auto p = logits.softmax();
  const double m = std::max(logits.values[0], logits.values[1]);
  const double lse =
      m + std::log(std::exp(logits.values[0] - m) + std::exp(logits.values[1] - m));
  const double loss = lse - logits.values[static_cast<std::size_t>(label)];
  if (dz) {
    (*dz) = {p[0], p[1]};
    (*dz)[static_cast<std::size_t>(label)] -= 1.0;
  }
  return loss;
}

}  // namespace

double VideoMae::classification_loss(const VideoTensorD& window, int label) const {
  return ce_from_logits(classify(window), label, nullptr);
}

double VideoMae::classification_loss_grad(const VideoTensorD& window, int label,
                                          std::span<double> grad) const {
  if (grad.size() != store_.size()) {
    throw ValidationError("classification_loss_grad: gradient buffer size mismatch");
  }
  VideoMaeOps ops{*this, store_, grad};
  const Mat voxels = voxelize(window);
  Mat tokens = ops.linear_fwd(voxels, embed_);
  tokens += store_.matrix(pos_);

  StackCache cache;
  Mat encoded = ops.stack_fwd(tokens, enc_blocks_, enc_norm_, config_.heads, &cache);
  const double n_tokens = static_cast<double>(encoded.rows());
  RowVec pooled = encoded.colwise().mean();
  RowVec z = pooled * store_.matrix(head_.w);
  z += store_.matrix(head_.b).row(0);

  Logits logits;
  logits.values = {z(0), z(1)};
  std::array<double, 2> dz_arr{};
  const double loss = ce_from_logits(logits, label, &dz_arr);

  RowVec dz(2);
  dz << dz_arr[0], dz_arr[1];
  ops.gmap(head_.w).noalias() += pooled.transpose() * dz;
  ops.gmap(head_.b).row(0) += dz;
  RowVec d_pooled = dz * store_.matrix(head_.w).transpose();
  Mat d_encoded = Mat::Ones(encoded.rows(), 1) * (d_pooled / n_tokens);

  Mat d_tokens = ops.stack_bwd(d_encoded, enc_blocks_, enc_norm_, config_.heads, cache);
  ops.gmap(pos_) += d_tokens;
  ops.gmap(embed_.w).noalias() += voxels.transpose() * d_tokens;
  ops.gmap(embed_.b).row(0) += d_tokens.colwise().sum();
  return loss;
}

namespace {

void check_mask(const TubeMask& mask, const TokenGrid& grid) {
  if (mask.spatial_cells() != grid.spatial() || mask.t_tokens != grid.t_tokens) {
    std::ostringstream msg;
    msg << "tube mask geometry (" << mask.t_tokens << "x" << mask.spatial_cells()
        << ") does not match token grid (" << grid.t_tokens << "x" << grid.spatial() << ")";
    throw ValidationError(msg.str());
  }
  if (mask.count() == 0) throw ValidationError("tube mask selects no cells");
  if (mask.count() == mask.spatial_cells()) {
    throw ValidationError("tube mask covers every cell; encoder would see no tokens");
  }
}

}  // namespace

MaeForwardResult VideoMae::mae_forward(const VideoTensorD& window, const TubeMask& mask) const {
  const TokenGrid grid = config_.grid();
  check_mask(mask, grid);
  VideoMaeOps ops{*this, store_, {}};

  const Mat voxels = voxelize(window);
  Mat tokens = ops.linear_fwd(voxels, embed_);
  tokens += store_.matrix(pos_);

  const int N = grid.total();
  std::vector<int> visible;
  visible.reserve(static_cast<std::size_t>(N));
  for (int n = 0; n < N; ++n) {
    if (!mask.masked_token(n)) visible.push_back(n);
  }

  Mat enc_in(static_cast<Eigen::Index>(visible.size()), config_.embed_dim);
  for (std::size_t i = 0; i < visible.size(); ++i) {
    enc_in.row(static_cast<Eigen::Index>(i)) = tokens.row(visible[i]);
  }
  Mat encoded = ops.stack_fwd(enc_in, enc_blocks_, enc_norm_, config_.heads, nullptr);
  Mat z = ops.linear_fwd(encoded, dec_proj_);

  Mat dec_in(N, config_.decoder_dim);
  const RowVec mask_tok = store_.matrix(mask_token_).row(0);
  for (int n = 0; n < N; ++n) dec_in.row(n) = mask_tok;
  for (std::size_t i = 0; i < visible.size(); ++i) {
    dec_in.row(visible[i]) = z.row(static_cast<Eigen::Index>(i));
  }
  dec_in += store_.matrix(dec_pos_);

  Mat dec_out = ops.stack_fwd(dec_in, dec_blocks_, dec_norm_, config_.heads, nullptr);
  MaeForwardResult result;
  result.predictions = ops.linear_fwd(dec_out, pred_);
  result.targets = voxels;
  result.loss = masked_mse(result.predictions, result.targets, mask);
  return result;
}

double VideoMae::mae_loss(const VideoTensorD& window, const TubeMask& mask) const {
  return mae_forward(window, mask).loss;
}

double VideoMae::mae_loss_grad(const VideoTensorD& window, const TubeMask& mask,
                               std::span<double> grad) const {
  if (grad.size() != store_.size()) {
    throw ValidationError("mae_loss_grad: gradient buffer size mismatch");
  }
  const TokenGrid grid = config_.grid();
  check_mask(mask, grid);
  VideoMaeOps ops{*this, store_, grad};

  const Mat voxels = voxelize(window);
  Mat tokens = ops.linear_fwd(voxels, embed_);
  tokens += store_.matrix(pos_);

  const int N = grid.total();
  std::vector<int> visible;
  visible.reserve(static_cast<std::size_t>(N));
  std::int64_t n_masked = 0;
  for (int n = 0; n < N; ++n) {
    if (mask.masked_token(n)) {
      ++n_masked;
    } else {
      visible.push_back(n);
    }
  }

  Mat enc_in(static_cast<Eigen::Index>(visible.size()), config_.embed_dim);
  for (std::size_t i = 0; i < visible.size(); ++i) {
    enc_in.row(static_cast<Eigen::Index>(i)) = tokens.row(visible[i]);
  }
  StackCache enc_cache;
  Mat encoded = ops.stack_fwd(enc_in, enc_blocks_, enc_norm_, config_.heads, &enc_cache);
  Mat z = ops.linear_fwd(encoded, dec_proj_);

  Mat dec_in(N, config_.decoder_dim);
  const RowVec mask_tok = store_.matrix(mask_token_).row(0);
  for (int n = 0; n < N; ++n) dec_in.row(n) = mask_tok;
  for (std::size_t i = 0; i < visible.size(); ++i) {
    dec_in.row(visible[i]) = z.row(static_cast<Eigen::Index>(i));
  }
  dec_in += store_.matrix(dec_pos_);

  StackCache dec_cache;
  Mat dec_out = ops.stack_fwd(dec_in, dec_blocks_, dec_norm_, config_.heads, &dec_cache);
  Mat pred = ops.linear_fwd(dec_out, pred_);
  const double loss = masked_mse(pred, voxels, mask);

  // d loss / d pred
  const double scale = 2.0 / (static_cast<double>(n_masked) * pred.cols());
  Mat d_pred = Mat::Zero(pred.rows(), pred.cols());
  for (int n = 0; n < N; ++n) {
    if (!mask.masked_token(n)) continue;
    d_pred.row(n) = scale * (pred.row(n) - voxels.row(n));
  }

  Mat d_dec_out = ops.linear_bwd(dec_out, d_pred, pred_);
  Mat d_dec_in = ops.stack_bwd(d_dec_out, dec_blocks_, dec_norm_, config_.heads, dec_cache);
  ops.gmap(dec_pos_) += d_dec_in;
  auto d_mask_tok = ops.gmap(mask_token_);
  for (int n = 0; n < N; ++n) {
    if (mask.masked_token(n)) d_mask_tok.row(0) += d_dec_in.row(n);
  }
  Mat d_z(static_cast<Eigen::Index>(visible.size()), config_.decoder_dim);
  for (std::size_t i = 0; i < visible.size(); ++i) {
    d_z.row(static_cast<Eigen::Index>(i)) = d_dec_in.row(visible[i]);
  }
  Mat d_encoded = ops.linear_bwd(encoded, d_z, dec_proj_);
  Mat d_enc_in = ops.stack_bwd(d_encoded, enc_blocks_, enc_norm_, config_.heads, enc_cache);

  Mat d_tokens = Mat::Zero(N, config_.embed_dim);
  for (std::size_t i = 0; i < visible.size(); ++i) {
    d_tokens.row(visible[i]) = d_enc_in.row(static_cast<Eigen::Index>(i));
  }
  ops.gmap(pos_) += d_tokens;
  ops.gmap(embed_.w).noalias() += voxels.transpose() * d_tokens;
  ops.gmap(embed_.b).row(0) += d_tokens.colwise().sum();
  return loss;
}

double mae_reconstruction_loss(const VideoTensorD& window, const TubeMask& mask,
                               const VideoMae& model) {
  return model.mae_loss(window, mask);
}

double cross_entropy(const std::vector<Logits>& logits, const std::vector<int>& labels) {
  if (logits.size() != labels.size() || logits.empty()) {
    throw ValidationError("cross_entropy: batch size mismatch or empty batch");
  }
  double acc = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    acc += ce_from_logits(logits[i], labels[i], nullptr);
  }
  return acc / static_cast<double>(logits.size());
}

}  // namespace gazemae
