#include "hostpred/neural.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "hostpred/error.hpp"
#include "hostpred/baseline.hpp"

namespace hostpred::nn {

namespace {

constexpr char kMagic[8] = {'H', 'P', 'C', 'N', 'N', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

// Tensor positions for a given architecture; -1 when absent.
struct Layout {
  int embedding = -1;
  int conv_w = 0;
  int conv_b = 0;
  int gamma = 0;
  int beta = 0;
  int running_mean = 0;
  int running_var = 0;
  std::vector<int> fc_w;
  std::vector<int> fc_b;
};

Layout layout_for(const Architecture& arch) {
  Layout l;
  int next = 0;
  if (arch.mode == InputMode::embedding) l.embedding = next++;
  l.conv_w = next++;
  l.conv_b = next++;
  l.gamma = next++;
  l.beta = next++;
  l.running_mean = next++;
  l.running_var = next++;
  for (std::size_t i = 0; i <= arch.fc_widths.size(); ++i) {
    l.fc_w.push_back(next++);
    l.fc_b.push_back(next++);
  }
  return l;
}

void glorot_fill(std::vector<double>& values, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : values) v = rng.uniform(-a, a);
}

// Activations of one pass, kept for the backward pass.
struct Workspace {
  std::size_t B = 0, T = 0, cin = 0, W = 0, F = 0;
  std::vector<double> x;        // B*T*cin
  std::vector<double> xhat;     // B*W*F
  std::vector<double> y;        // B*W*F, after scale/shift
  std::vector<double> mask;     // B*W*F dropout scale; empty in eval mode
  std::vector<double> mean, var, inv_std;  // F
  std::vector<std::size_t> argmax;         // B*F, position within W
  std::vector<std::vector<double>> h;      // h[0] pooled (B*F), h[l] layer outputs
  std::vector<double> logits;              // B*C
};

void check_batch(const CnnModel& model, const TokenBatch& batch) {
  if (batch.cols != model.target_len()) {
    throw Error(ErrorKind::length_mismatch, "batch sentences have length " +
                                                std::to_string(batch.cols) + ", model expects " +
                                                std::to_string(model.target_len()));
  }
  for (auto id : batch.ids) {
    if (id >= model.vocab_size()) {
      throw Error(ErrorKind::invalid_argument,
                  "token id " + std::to_string(id) + " outside the model vocabulary");
    }
  }
}

void run_forward(const CnnModel& model, const TokenBatch& batch, bool training, Rng* dropout_rng,
                 Workspace& ws) {
  const auto& arch = model.architecture();
  const auto& tensors = model.tensors();
  const Layout lay = layout_for(arch);
  const std::size_t k = static_cast<std::size_t>(arch.ngram);
  ws.B = batch.rows;
  ws.T = batch.cols;
  ws.cin = model.input_channels();
  ws.W = model.conv_width();
  ws.F = arch.filters;
  const std::size_t B = ws.B, T = ws.T, cin = ws.cin, W = ws.W, F = ws.F;

  // Input features.
  ws.x.assign(B * T * cin, 0.0);
  if (arch.mode == InputMode::embedding) {
    const auto& emb = tensors[lay.embedding].values;
    for (std::size_t p = 0; p < B * T; ++p) {
      std::copy_n(emb.data() + batch.ids[p] * cin, cin, ws.x.data() + p * cin);
    }
  } else {
    const double scale = 1.0 / static_cast<double>(model.vocab_size());
    for (std::size_t p = 0; p < B * T; ++p) ws.x[p] = static_cast<double>(batch.ids[p]) * scale;
  }

  // Valid convolution; weights laid out [k*cin][F].
  const std::size_t window = k * cin;
  const auto& wconv = tensors[lay.conv_w].values;
  const auto& bconv = tensors[lay.conv_b].values;
  std::vector<double> z(B * W * F);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t w = 0; w < W; ++w) {
      double* out = z.data() + (b * W + w) * F;
      std::copy(bconv.begin(), bconv.end(), out);
      const double* in = ws.x.data() + (b * T + w) * cin;
      for (std::size_t e = 0; e < window; ++e) {
        const double v = in[e];
        if (v == 0.0) continue;
        const double* wr = wconv.data() + e * F;
        for (std::size_t f = 0; f < F; ++f) out[f] += v * wr[f];
      }
    }
  }

  // Batch normalisation.
  const std::size_t M = B * W;
  ws.mean.assign(F, 0.0);
  ws.var.assign(F, 0.0);
  ws.inv_std.assign(F, 0.0);
  if (training) {
    for (std::size_t r = 0; r < M; ++r) {
      for (std::size_t f = 0; f < F; ++f) ws.mean[f] += z[r * F + f];
    }
    for (double& m : ws.mean) m /= static_cast<double>(M);
    for (std::size_t r = 0; r < M; ++r) {
      for (std::size_t f = 0; f < F; ++f) {
        const double d = z[r * F + f] - ws.mean[f];
        ws.var[f] += d * d;
      }
    }
    for (double& v : ws.var) v /= static_cast<double>(M);
  } else {
    ws.mean = tensors[lay.running_mean].values;
    ws.var = tensors[lay.running_var].values;
  }
  for (std::size_t f = 0; f < F; ++f) ws.inv_std[f] = 1.0 / std::sqrt(ws.var[f] + kBatchNormEpsilon);

  const auto& gamma = tensors[lay.gamma].values;
  const auto& beta = tensors[lay.beta].values;
  ws.xhat.resize(M * F);
  ws.y.resize(M * F);
  for (std::size_t r = 0; r < M; ++r) {
    for (std::size_t f = 0; f < F; ++f) {
      const double xh = (z[r * F + f] - ws.mean[f]) * ws.inv_std[f];
      ws.xhat[r * F + f] = xh;
      ws.y[r * F + f] = gamma[f] * xh + beta[f];
    }
  }

  // ReLU, dropout, global max-pool over the width.
  ws.mask.clear();
  if (training && arch.dropout > 0.0) {
    ws.mask.resize(M * F);
    const double keep = 1.0 / (1.0 - arch.dropout);
    for (double& m : ws.mask) m = dropout_rng->uniform() < arch.dropout ? 0.0 : keep;
  }
  ws.h.assign(arch.fc_widths.size() + 1, {});
  auto& pooled = ws.h[0];
  pooled.assign(B * F, -std::numeric_limits<double>::infinity());
  ws.argmax.assign(B * F, 0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t w = 0; w < W; ++w) {
      const std::size_t r = b * W + w;
      for (std::size_t f = 0; f < F; ++f) {
        double a = std::max(0.0, ws.y[r * F + f]);
        if (!ws.mask.empty()) a *= ws.mask[r * F + f];
        if (a > pooled[b * F + f]) {
          pooled[b * F + f] = a;
          ws.argmax[b * F + f] = w;
        }
      }
    }
  }

  // Fully connected stack.
  const std::size_t layers = lay.fc_w.size();
  std::size_t in_dim = F;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& wt = tensors[lay.fc_w[l]];
    const auto& bias = tensors[lay.fc_b[l]].values;
    const std::size_t out_dim = wt.shape[0];
    const auto& in = ws.h[l];
    std::vector<double> out(B * out_dim);
    for (std::size_t b = 0; b < B; ++b) {
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double* wr = wt.values.data() + o * in_dim;
        const double* xr = in.data() + b * in_dim;
        double s = bias[o];
        for (std::size_t i = 0; i < in_dim; ++i) s += wr[i] * xr[i];
        out[b * out_dim + o] = (l + 1 < layers) ? std::max(0.0, s) : s;
      }
    }
    if (l + 1 < layers) {
      ws.h[l + 1] = std::move(out);
    } else {
      ws.logits = std::move(out);
    }
    in_dim = out_dim;
  }
}

Matrix softmax_rows(const std::vector<double>& logits, std::size_t B, std::size_t C) {
  Matrix p(B, C);
  for (std::size_t b = 0; b < B; ++b) {
    const double* z = logits.data() + b * C;
    const double mx = *std::max_element(z, z + C);
    double sum = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      p(b, c) = std::exp(z[c] - mx);
      sum += p(b, c);
    }
    for (std::size_t c = 0; c < C; ++c) p(b, c) /= sum;
  }
  return p;
}

// -log softmax(z)[label]
double cross_entropy_row(const double* z, std::size_t C, std::size_t label) {
  const double mx = *std::max_element(z, z + C);
  double sum = 0.0;
  for (std::size_t c = 0; c < C; ++c) sum += std::exp(z[c] - mx);
  return -(z[label] - mx - std::log(sum));
}

constexpr std::size_t kEvalChunk = 256;

}  // namespace

// ---------------------------------------------------------------------------
// Model

std::size_t CnnModel::input_channels() const noexcept {
  return arch_.mode == InputMode::embedding ? embedding_dim_ : 1;
}

const Tensor& CnnModel::tensor(std::string_view name) const {
  for (const auto& t : tensors_) {
    if (t.name == name) return t;
  }
  throw Error(ErrorKind::invalid_argument, "no tensor named '" + std::string(name) + "'");
}

Tensor& CnnModel::tensor(std::string_view name) {
  return const_cast<Tensor&>(std::as_const(*this).tensor(name));
}

bool CnnModel::is_trainable(std::size_t tensor_index) const {
  const Layout lay = layout_for(arch_);
  const int i = static_cast<int>(tensor_index);
  return i != lay.running_mean && i != lay.running_var;
}

std::size_t CnnModel::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (is_trainable(i)) n += tensors_[i].size();
  }
  return n;
}

bool CnnModel::operator==(const CnnModel& other) const {
  if (arch_.mode != other.arch_.mode || arch_.ngram != other.arch_.ngram ||
      arch_.filters != other.arch_.filters || arch_.fc_widths != other.arch_.fc_widths ||
      arch_.num_classes != other.arch_.num_classes || vocab_size_ != other.vocab_size_ ||
      target_len_ != other.target_len_ || embedding_dim_ != other.embedding_dim_ ||
      tensors_.size() != other.tensors_.size()) {
    return false;
  }
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].shape != other.tensors_[i].shape) return false;
    if (std::memcmp(tensors_[i].values.data(), other.tensors_[i].values.data(),
                    tensors_[i].values.size() * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

CnnModel init_model(const TrainConfig& cfg, const Architecture& arch, std::size_t vocab_size,
                    std::size_t target_len) {
  ngram::check_gram(arch.ngram);
  const auto k = static_cast<std::size_t>(arch.ngram);
  if (target_len < k) {
    throw Error(ErrorKind::invalid_dimensions, "target length " + std::to_string(target_len) +
                                                   " is shorter than the kernel width " +
                                                   std::to_string(k));
  }
  if (vocab_size < 3 || arch.filters == 0 || arch.num_classes < 2 ||
      (arch.mode == InputMode::embedding && cfg.embedding_dim == 0)) {
    throw Error(ErrorKind::invalid_dimensions, "model dimensions must be positive");
  }
  for (auto w : arch.fc_widths) {
    if (w == 0) throw Error(ErrorKind::invalid_dimensions, "fully connected widths must be positive");
  }
  if (!(arch.dropout >= 0.0 && arch.dropout < 1.0)) {
    throw Error(ErrorKind::invalid_dimensions, "dropout rate must be in [0, 1)");
  }

  CnnModel m;
  m.arch_ = arch;
  m.vocab_size_ = vocab_size;
  m.target_len_ = target_len;
  m.embedding_dim_ = arch.mode == InputMode::embedding ? cfg.embedding_dim : 1;
  const std::size_t cin = m.input_channels();
  const std::size_t F = arch.filters;

  Rng rng(mix_seed(cfg.seed, 0));
  auto add = [&](std::string name, std::vector<std::size_t> shape, double fill) -> Tensor& {
    std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
    m.tensors_.push_back({std::move(name), std::move(shape), std::vector<double>(n, fill)});
    return m.tensors_.back();
  };

  if (arch.mode == InputMode::embedding) {
    auto& emb = add("embedding", {vocab_size, cin}, 0.0);
    const double a = std::sqrt(3.0 / static_cast<double>(cin));
    for (std::size_t i = cin; i < emb.values.size(); ++i) emb.values[i] = rng.uniform(-a, a);
  }
  glorot_fill(add("conv.weight", {k, cin, F}, 0.0).values, k * cin, F, rng);
  add("conv.bias", {F}, 0.0);
  add("bn.gamma", {F}, 1.0);
  add("bn.beta", {F}, 0.0);
  add("bn.running_mean", {F}, 0.0);
  add("bn.running_var", {F}, 1.0);
  std::size_t in_dim = F;
  for (std::size_t l = 0; l <= arch.fc_widths.size(); ++l) {
    const std::size_t out_dim = l < arch.fc_widths.size() ? arch.fc_widths[l] : arch.num_classes;
    const std::string prefix = "fc" + std::to_string(l + 1);
    glorot_fill(add(prefix + ".weight", {out_dim, in_dim}, 0.0).values, in_dim, out_dim, rng);
    add(prefix + ".bias", {out_dim}, 0.0);
    in_dim = out_dim;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Batches

TokenBatch make_batch(const std::vector<ngram::EncodedSentence>& sentences) {
  TokenBatch batch;
  batch.rows = sentences.size();
  batch.cols = sentences.empty() ? 0 : sentences.front().ids.size();
  batch.ids.reserve(batch.rows * batch.cols);
  for (const auto& s : sentences) {
    if (s.ids.size() != batch.cols) {
      throw Error(ErrorKind::length_mismatch, "sentences must be padded to one length");
    }
    batch.ids.insert(batch.ids.end(), s.ids.begin(), s.ids.end());
  }
  return batch;
}

TokenBatch select_rows(const TokenBatch& batch, std::span<const std::size_t> rows) {
  TokenBatch out;
  out.rows = rows.size();
  out.cols = batch.cols;
  out.ids.reserve(out.rows * out.cols);
  for (auto r : rows) {
    auto src = batch.row(r);
    out.ids.insert(out.ids.end(), src.begin(), src.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward / backward

Matrix forward(const CnnModel& model, const TokenBatch& batch) {
  check_batch(model, batch);
  const std::size_t C = model.architecture().num_classes;
  Matrix probs(batch.rows, C);
  Workspace ws;
  for (std::size_t start = 0; start < batch.rows; start += kEvalChunk) {
    const std::size_t end = std::min(batch.rows, start + kEvalChunk);
    std::vector<std::size_t> rows(end - start);
    std::iota(rows.begin(), rows.end(), start);
    run_forward(model, select_rows(batch, rows), false, nullptr, ws);
    Matrix p = softmax_rows(ws.logits, rows.size(), C);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      std::copy(p.row(r).begin(), p.row(r).end(), probs.row(start + r).begin());
    }
  }
  return probs;
}

LossResult loss_and_backward(const CnnModel& model, const TokenBatch& batch,
                             std::span<const std::size_t> labels, Rng& dropout_rng) {
  check_batch(model, batch);
  const auto& arch = model.architecture();
  const std::size_t C = arch.num_classes;
  if (labels.size() != batch.rows) {
    throw Error(ErrorKind::length_mismatch, "label count does not match the batch");
  }
  if (batch.rows == 0) throw Error(ErrorKind::empty_training_set, "empty batch");
  for (auto y : labels) {
    if (y >= C) {
      throw Error(ErrorKind::label_out_of_range,
                  "label " + std::to_string(y) + " outside [0, " + std::to_string(C) + ")");
    }
  }

  Workspace ws;
  run_forward(model, batch, true, &dropout_rng, ws);
  const std::size_t B = ws.B, T = ws.T, cin = ws.cin, W = ws.W, F = ws.F;
  const std::size_t k = static_cast<std::size_t>(arch.ngram);
  const Layout lay = layout_for(arch);
  const auto& tensors = model.tensors();

  LossResult res;
  res.grads.values.resize(tensors.size());
  for (std::size_t i = 0; i < tensors.size(); ++i) res.grads.values[i].assign(tensors[i].size(), 0.0);
  auto& g = res.grads.values;

  // Softmax cross-entropy.
  Matrix probs = softmax_rows(ws.logits, B, C);
  std::vector<double> dout(B * C);
  const double invB = 1.0 / static_cast<double>(B);
  for (std::size_t b = 0; b < B; ++b) {
    res.loss += cross_entropy_row(ws.logits.data() + b * C, C, labels[b]);
    if (argmax(probs.row(b)) == labels[b]) ++res.correct;
    for (std::size_t c = 0; c < C; ++c) {
      dout[b * C + c] = (probs(b, c) - (c == labels[b] ? 1.0 : 0.0)) * invB;
    }
  }
  res.loss *= invB;

  // Fully connected stack, last layer first.
  const std::size_t layers = lay.fc_w.size();
  for (std::size_t l = layers; l-- > 0;) {
    const auto& wt = tensors[lay.fc_w[l]];
    const std::size_t out_dim = wt.shape[0];
    const std::size_t in_dim = wt.shape[1];
    const auto& in = ws.h[l];
    auto& gw = g[lay.fc_w[l]];
    auto& gb = g[lay.fc_b[l]];
    std::vector<double> din(B * in_dim, 0.0);
    for (std::size_t b = 0; b < B; ++b) {
      const double* xr = in.data() + b * in_dim;
      double* dxr = din.data() + b * in_dim;
      for (std::size_t o = 0; o < out_dim; ++o) {
        const double d = dout[b * out_dim + o];
        if (d == 0.0) continue;
        gb[o] += d;
        double* gwr = gw.data() + o * in_dim;
        const double* wr = wt.values.data() + o * in_dim;
        for (std::size_t i = 0; i < in_dim; ++i) {
          gwr[i] += d * xr[i];
          dxr[i] += d * wr[i];
        }
      }
    }
    if (l > 0) {
      // ReLU of the previous hidden layer.
      for (std::size_t i = 0; i < din.size(); ++i) {
        if (in[i] <= 0.0) din[i] = 0.0;
      }
    }
    dout = std::move(din);
  }

  // Max-pool, dropout and ReLU: gradient reaches only the pooled positions.
  const std::size_t M = B * W;
  std::vector<double> dy(M * F, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t f = 0; f < F; ++f) {
      const std::size_t r = b * W + ws.argmax[b * F + f];
      const std::size_t idx = r * F + f;
      if (ws.y[idx] <= 0.0) continue;
      double d = dout[b * F + f];
      if (!ws.mask.empty()) d *= ws.mask[idx];
      dy[idx] = d;
    }
  }

  // Batch normalisation.
  const auto& gamma = tensors[lay.gamma].values;
  auto& ggamma = g[lay.gamma];
  auto& gbeta = g[lay.beta];
  std::vector<double> sum_dxhat(F, 0.0), sum_dxhat_xhat(F, 0.0);
  for (std::size_t r = 0; r < M; ++r) {
    for (std::size_t f = 0; f < F; ++f) {
      const double d = dy[r * F + f];
      const double xh = ws.xhat[r * F + f];
      ggamma[f] += d * xh;
      gbeta[f] += d;
      const double dxh = d * gamma[f];
      sum_dxhat[f] += dxh;
      sum_dxhat_xhat[f] += dxh * xh;
    }
  }
  const double invM = 1.0 / static_cast<double>(M);
  std::vector<double> dz(M * F);
  for (std::size_t r = 0; r < M; ++r) {
    for (std::size_t f = 0; f < F; ++f) {
      const double dxh = dy[r * F + f] * gamma[f];
      dz[r * F + f] = ws.inv_std[f] * invM *
                      (static_cast<double>(M) * dxh - sum_dxhat[f] -
                       ws.xhat[r * F + f] * sum_dxhat_xhat[f]);
    }
  }

  // Convolution.
  const std::size_t window = k * cin;
  const auto& wconv = tensors[lay.conv_w].values;
  auto& gw = g[lay.conv_w];
  auto& gbias = g[lay.conv_b];
  const bool want_dx = arch.mode == InputMode::embedding;
  std::vector<double> dx(want_dx ? B * T * cin : 0, 0.0);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t w = 0; w < W; ++w) {
      const double* d = dz.data() + (b * W + w) * F;
      for (std::size_t f = 0; f < F; ++f) gbias[f] += d[f];
      const double* in = ws.x.data() + (b * T + w) * cin;
      double* din = want_dx ? dx.data() + (b * T + w) * cin : nullptr;
      for (std::size_t e = 0; e < window; ++e) {
        const double v = in[e];
        double* gwr = gw.data() + e * F;
        const double* wr = wconv.data() + e * F;
        if (v != 0.0) {
          for (std::size_t f = 0; f < F; ++f) gwr[f] += v * d[f];
        }
        if (din) {
          double s = 0.0;
          for (std::size_t f = 0; f < F; ++f) s += wr[f] * d[f];
          din[e] += s;
        }
      }
    }
  }

  if (want_dx) {
    auto& gemb = g[lay.embedding];
    for (std::size_t p = 0; p < B * T; ++p) {
      const auto id = batch.ids[p];
      if (id == ngram::kPad) continue;
      double* row = gemb.data() + id * cin;
      const double* src = dx.data() + p * cin;
      for (std::size_t c = 0; c < cin; ++c) row[c] += src[c];
    }
  }

  res.batch_mean = std::move(ws.mean);
  res.batch_var = std::move(ws.var);
  return res;
}

Matrix batchnorm_normalized(const CnnModel& model, const TokenBatch& batch) {
  check_batch(model, batch);
  Rng rng(0);
  Workspace ws;
  run_forward(model, batch, true, &rng, ws);
  Matrix out(ws.B * ws.W, ws.F);
  std::copy(ws.xhat.begin(), ws.xhat.end(), out.data().begin());
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct OptimizerState {
  std::vector<std::vector<double>> first;
  std::vector<std::vector<double>> second;
  std::size_t steps = 0;
};

void apply_update(CnnModel& model, const Gradients& grads, const TrainConfig& cfg,
                  OptimizerState& state) {
  auto& tensors = model.tensors();
  if (state.first.empty()) {
    state.first.resize(tensors.size());
    state.second.resize(tensors.size());
    for (std::size_t i = 0; i < tensors.size(); ++i) {
      state.first[i].assign(tensors[i].size(), 0.0);
      if (cfg.optimizer == Optimizer::adam) state.second[i].assign(tensors[i].size(), 0.0);
    }
  }
  ++state.steps;
  const double lr = cfg.learning_rate;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (!model.is_trainable(i)) continue;
    auto& w = tensors[i].values;
    const auto& gr = grads.values[i];
    auto& m = state.first[i];
    if (cfg.optimizer == Optimizer::sgd_momentum) {
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = cfg.momentum * m[j] - lr * gr[j];
        w[j] += m[j];
      }
    } else {
      constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
      auto& v = state.second[i];
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.steps));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.steps));
      for (std::size_t j = 0; j < w.size(); ++j) {
        m[j] = beta1 * m[j] + (1.0 - beta1) * gr[j];
        v[j] = beta2 * v[j] + (1.0 - beta2) * gr[j] * gr[j];
        w[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
      }
    }
  }
}

}  // namespace

std::pair<double, double> evaluate(const CnnModel& model, const LabeledBatch& data) {
  if (data.tokens.rows == 0) {
    return {std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};
  }
  const Matrix probs = forward(model, data.tokens);
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < probs.rows(); ++b) {
    const std::size_t y = data.labels[b];
    if (y >= probs.cols()) throw Error(ErrorKind::label_out_of_range, "label out of range");
    loss -= std::log(std::max(probs(b, y), std::numeric_limits<double>::min()));
    if (argmax(probs.row(b)) == y) ++correct;
  }
  const auto n = static_cast<double>(probs.rows());
  return {loss / n, static_cast<double>(correct) / n};
}

FitResult fit(CnnModel model, const LabeledBatch& train, const LabeledBatch& val,
              const TrainConfig& cfg) {
  if (train.tokens.rows == 0) throw Error(ErrorKind::empty_training_set, "training set is empty");
  if (train.labels.size() != train.tokens.rows || val.labels.size() != val.tokens.rows) {
    throw Error(ErrorKind::length_mismatch, "label count does not match the data");
  }
  if (cfg.batch_size == 0 || cfg.epochs == 0 || !(cfg.learning_rate >= 0.0)) {
    throw Error(ErrorKind::invalid_config, "batch size and epochs must be positive");
  }

  const Layout lay = layout_for(model.architecture());
  const double bn_m = model.architecture().bn_momentum;
  Rng order_rng(mix_seed(cfg.seed, 1));
  Rng dropout_rng(mix_seed(cfg.seed, 2));
  OptimizerState state;
  std::vector<std::size_t> order(train.tokens.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});

  FitResult result{std::move(model), {}};
  CnnModel& m = result.model;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> rows(order.data() + start, end - start);
      TokenBatch batch = select_rows(train.tokens, rows);
      std::vector<std::size_t> labels;
      labels.reserve(rows.size());
      for (auto r : rows) labels.push_back(train.labels[r]);

      LossResult step = loss_and_backward(m, batch, labels, dropout_rng);
      loss_sum += step.loss * static_cast<double>(rows.size());
      correct += step.correct;
      apply_update(m, step.grads, cfg, state);

      auto& rmean = m.tensors()[lay.running_mean].values;
      auto& rvar = m.tensors()[lay.running_var].values;
      for (std::size_t f = 0; f < rmean.size(); ++f) {
        rmean[f] = bn_m * rmean[f] + (1.0 - bn_m) * step.batch_mean[f];
        rvar[f] = bn_m * rvar[f] + (1.0 - bn_m) * step.batch_var[f];
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    std::tie(rec.val_loss, rec.val_acc) = evaluate(m, val);
    result.history.push_back(rec);
  }
  return result;
}

std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c) {
    if (row[c] > row[best]) best = c;
  }
  return best;
}

Prediction predict(const CnnModel& model, const TokenBatch& batch) {
  Prediction p;
  if (batch.rows == 0) {
    p.probabilities = Matrix(0, model.architecture().num_classes);
    return p;
  }
  p.probabilities = forward(model, batch);
  p.labels.reserve(batch.rows);
  for (std::size_t b = 0; b < batch.rows; ++b) p.labels.push_back(argmax(p.probabilities.row(b)));
  return p;
}

// ---------------------------------------------------------------------------
// Checkpoints: little-endian, fixed-width fields.

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

std::uint64_t get_bytes(std::istream& in, int n) {
  unsigned char b[8] = {};
  in.read(reinterpret_cast<char*>(b), n);
  if (!in) throw Error(ErrorKind::bad_checkpoint, "checkpoint is truncated");
  std::uint64_t v = 0;
  for (int i = n - 1; i >= 0; --i) v = (v << 8) | b[i];
  return v;
}

std::uint32_t get_u32(std::istream& in) { return static_cast<std::uint32_t>(get_bytes(in, 4)); }
std::uint64_t get_u64(std::istream& in) { return get_bytes(in, 8); }

std::uint32_t narrow(std::size_t v) {
  if (v > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorKind::invalid_dimensions, "dimension too large for the checkpoint header");
  }
  return static_cast<std::uint32_t>(v);
}

}  // namespace

void write_checkpoint(const CnnModel& model, std::ostream& out) {
  const auto& arch = model.architecture();
  out.write(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(arch.mode));
  put_u32(out, narrow(static_cast<std::size_t>(arch.ngram)));
  put_u32(out, narrow(model.embedding_dim()));
  put_u32(out, narrow(model.target_len()));
  put_u32(out, narrow(model.vocab_size()));
  put_u32(out, narrow(model.tensors().size()));
  for (const auto& t : model.tensors()) {
    put_u32(out, narrow(t.shape.size()));
    for (auto d : t.shape) put_u64(out, d);
    for (double v : t.values) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  if (!out) throw Error(ErrorKind::io_failure, "failed to write checkpoint");
}

CnnModel read_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw Error(ErrorKind::bad_checkpoint, "not a hostpred CNN checkpoint");
  }
  const auto version = get_u32(in);
  if (version != kVersion) {
    throw Error(ErrorKind::bad_checkpoint, "unsupported checkpoint version " + std::to_string(version));
  }
  CnnModel m;
  const auto mode = get_u32(in);
  if (mode > 1) throw Error(ErrorKind::bad_checkpoint, "unknown input mode");
  m.arch_.mode = static_cast<InputMode>(mode);
  m.arch_.ngram = static_cast<int>(get_u32(in));
  m.embedding_dim_ = get_u32(in);
  m.target_len_ = get_u32(in);
  m.vocab_size_ = get_u32(in);
  const auto count = get_u32(in);
  const int base = m.arch_.mode == InputMode::embedding ? 7 : 6;
  if (count < static_cast<std::uint32_t>(base + 2) || (count - base) % 2 != 0) {
    throw Error(ErrorKind::bad_checkpoint, "unexpected tensor count");
  }
  ngram::check_gram(m.arch_.ngram);

  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t;
    const auto rank = get_u32(in);
    if (rank == 0 || rank > 4) throw Error(ErrorKind::bad_checkpoint, "bad tensor rank");
    std::size_t n = 1;
    for (std::uint32_t r = 0; r < rank; ++r) {
      t.shape.push_back(get_u64(in));
      n *= t.shape.back();
    }
    if (n > (std::size_t{1} << 32)) throw Error(ErrorKind::bad_checkpoint, "tensor too large");
    t.values.resize(n);
    for (double& v : t.values) v = std::bit_cast<double>(get_u64(in));
    m.tensors_.push_back(std::move(t));
  }

  // Recover the architecture from the tensor shapes and name the tensors.
  const std::size_t fc_layers = (count - base) / 2;
  Layout lay;
  {
    Architecture probe = m.arch_;
    probe.fc_widths.assign(fc_layers - 1, 1);
    lay = layout_for(probe);
  }
  const auto& conv = m.tensors_[lay.conv_w];
  if (conv.shape.size() != 3 || conv.shape[0] != static_cast<std::size_t>(m.arch_.ngram) ||
      conv.shape[1] != m.input_channels()) {
    throw Error(ErrorKind::bad_checkpoint, "convolution shape does not match the header");
  }
  m.arch_.filters = conv.shape[2];
  m.arch_.fc_widths.clear();
  std::size_t in_dim = m.arch_.filters;
  for (std::size_t l = 0; l < fc_layers; ++l) {
    const auto& w = m.tensors_[lay.fc_w[l]];
    if (w.shape.size() != 2 || w.shape[1] != in_dim ||
        m.tensors_[lay.fc_b[l]].size() != w.shape[0]) {
      throw Error(ErrorKind::bad_checkpoint, "fully connected shapes are inconsistent");
    }
    if (l + 1 < fc_layers) m.arch_.fc_widths.push_back(w.shape[0]);
    in_dim = w.shape[0];
  }
  m.arch_.num_classes = in_dim;

  // Compare against a freshly built model of the same shape for names and sizes.
  TrainConfig cfg;
  cfg.embedding_dim = m.embedding_dim_;
  CnnModel reference = init_model(cfg, m.arch_, m.vocab_size_, m.target_len_);
  for (std::size_t i = 0; i < m.tensors_.size(); ++i) {
    if (reference.tensors_[i].shape != m.tensors_[i].shape) {
      throw Error(ErrorKind::bad_checkpoint, "tensor " + std::to_string(i) + " has the wrong shape");
    }
    m.tensors_[i].name = reference.tensors_[i].name;
  }
  return m;
}

void save_checkpoint(const CnnModel& model, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io_failure, "cannot write " + path.string());
  write_checkpoint(model, out);
}

CnnModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io_failure, "cannot open " + path.string());
  return read_checkpoint(in);
}

std::string format_history(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,train_acc,val_loss,val_acc\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch);
    for (double v : {r.train_loss, r.train_acc, r.val_loss, r.val_acc}) {
      out += ',';
      out += baseline::format_number(v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace hostpred::nn
