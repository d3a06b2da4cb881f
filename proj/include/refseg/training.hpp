// Copyright 2026 The refseg Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef REFSEG_TRAINING_HPP_
#define REFSEG_TRAINING_HPP_

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "refseg/binary_io.hpp"
#include "refseg/language.hpp"
#include "refseg/masks.hpp"
#include "refseg/model.hpp"
#include "refseg/numerics.hpp"
#include "refseg/object_embedding.hpp"

namespace refseg {

// ---------------------------------------------------------------------------
// Contrastive objective.

inline constexpr double kLossGuard = 1e-12;
inline constexpr double kNormTolerance = 1e-6;

inline void require_normalized(std::span<const double> v, const char* what) {
  if (std::abs(norm(v) - 1.0) > kNormTolerance) throw Error(std::string(what) + ": input is not L2-normalized");
}

// s_i = softmax_i(<e_i, language> / tau)
inline Vector contrastive_scores(const std::vector<Vector>& embeddings, std::span<const double> language, double tau) {
  require(tau > 0.0, "contrastive_scores: tau must be positive");
  require(!embeddings.empty(), "contrastive_scores: no candidates");
  require_normalized(language, "contrastive_scores");
  Vector logits(embeddings.size());
  for (std::size_t i = 0; i < embeddings.size(); ++i) {
    require_normalized(embeddings[i], "contrastive_scores");
    logits[i] = dot(embeddings[i], language) / tau;
  }
  return softmax(logits);
}

inline double contrastive_loss(std::span<const double> scores, std::size_t gt) {
  require(gt < scores.size(), "contrastive_loss: gt index out of range");
  return -std::log(scores[gt] + kLossGuard);
}

// d loss / d logits of the guarded loss.
inline Vector contrastive_loss_logit_grad(std::span<const double> scores, std::size_t gt) {
  const double s_gt = scores[gt];
  const double k = s_gt / (s_gt + kLossGuard);
  Vector g(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) g[i] = k * (scores[i] - (i == gt ? 1.0 : 0.0));
  return g;
}

// ---------------------------------------------------------------------------
// Optimizer and scheduler.

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  Vector m;
  Vector v;
  std::uint64_t step = 0;
  double lr = 1e-4;
};

inline std::size_t total_size(const std::vector<ParamRef>& refs) {
  std::size_t n = 0;
  for (const auto& r : refs) n += r.values.size();
  return n;
}

inline void adam_step(const std::vector<ParamRef>& params, const std::vector<ParamRef>& grads, OptimizerState& state,
                      const AdamConfig& cfg = {}) {
  require(params.size() == grads.size(), "adam_step: parameter/gradient count mismatch");
  const std::size_t n = total_size(params);
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(n, 0.0);
    state.v.assign(n, 0.0);
  }
  require(state.m.size() == n && state.v.size() == n, "adam_step: optimizer state shape mismatch");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  std::size_t k = 0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    require(params[t].values.size() == grads[t].values.size(), "adam_step: shape mismatch for " + params[t].name);
    for (std::size_t i = 0; i < params[t].values.size(); ++i, ++k) {
      const double g = grads[t].values[i];
      state.m[k] = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g;
      state.v[k] = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g;
      const double m_hat = state.m[k] / c1;
      const double v_hat = state.v[k] / c2;
      params[t].values[i] -= state.lr * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
    }
  }
}

inline void adam_step(ModelParams& params, ModelParams& grads, OptimizerState& state, const AdamConfig& cfg = {}) {
  adam_step(params.refs(), grads.refs(), state, cfg);
}

struct PlateauState {
  int patience = 2;
  double factor = 10.0;
  double threshold = 1e-6;
  double best = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;
};

// Records one epoch loss and returns the learning rate for the next epoch.
inline double plateau_scheduler(double epoch_loss, double lr, PlateauState& state) {
  if (epoch_loss < state.best - state.threshold) {
    state.best = epoch_loss;
    state.bad_epochs = 0;
    return lr;
  }
  state.best = std::min(state.best, epoch_loss);
  if (++state.bad_epochs >= state.patience) {
    state.bad_epochs = 0;
    return lr / state.factor;
  }
  return lr;
}

// Replays a whole history from a fresh state.
inline double plateau_scheduler(std::span<const double> history, double lr, PlateauState state = {}) {
  require(!history.empty(), "plateau_scheduler: empty loss history");
  for (double loss : history) lr = plateau_scheduler(loss, lr, state);
  return lr;
}

// ---------------------------------------------------------------------------
// Training samples.

struct VideoSample {
  std::vector<std::shared_ptr<const Frame>> frames;
  std::vector<std::vector<BinaryMask>> candidates;          // [frame][candidate]
  std::vector<std::optional<BinaryMask>> referent_masks;    // annotation per frame, if any
  std::vector<std::vector<int>> candidate_sources;          // object id per candidate (may be empty)
  TokenSequence tokens;
  int referent = 0;
  int family = 0;

  std::size_t num_frames() const { return frames.size(); }
};

inline VideoSample flip_sample(const VideoSample& s, const Vocabulary& vocab, const SwapTable& table) {
  VideoSample out = s;
  for (std::size_t f = 0; f < s.frames.size(); ++f) {
    out.frames[f] = std::make_shared<const Frame>(horizontal_flip(*s.frames[f]));
    for (auto& m : out.candidates[f]) m = horizontal_flip(m);
    if (out.referent_masks[f]) out.referent_masks[f] = horizontal_flip(*out.referent_masks[f]);
  }
  out.tokens = swap_direction_tokens(s.tokens, vocab, table);
  return out;
}

// Mirrors frames and masks and swaps left/right tokens with probability `prob`.
inline VideoSample augment_flip(const VideoSample& s, double prob, Rng& rng, const Vocabulary& vocab,
                                const SwapTable& table = default_swap_table()) {
  const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  if (!(u < prob)) return s;
  return flip_sample(s, vocab, table);
}

// Candidate with the highest IoU against the annotation, if that IoU is >= 0.5.
inline std::optional<std::size_t> link_ground_truth(const std::vector<BinaryMask>& candidates,
                                                    const BinaryMask& referent, double min_iou = 0.5) {
  std::optional<std::size_t> best;
  double best_iou = -1.0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double iou = mask_iou(candidates[i], referent);
    if (iou > best_iou) {
      best_iou = iou;
      best = i;
    }
  }
  if (!best || best_iou < min_iou) return std::nullopt;
  return best;
}

struct SampleLoss {
  double loss = 0.0;
  std::size_t frames_used = 0;
};

// Mean contrastive loss over the sample's linked frames. When `grads` is set the
// gradient of that mean is accumulated into it.
inline SampleLoss sample_loss(const ModelParams& params, const ModelConfig& cfg, const VideoSample& sample,
                              ModelParams* grads = nullptr) {
  require(sample.candidates.size() == sample.frames.size() && sample.referent_masks.size() == sample.frames.size(),
          "sample_loss: per-frame arrays disagree in length");
  std::vector<std::pair<std::size_t, std::size_t>> linked;  // (frame, gt candidate)
  for (std::size_t f = 0; f < sample.frames.size(); ++f) {
    if (!sample.referent_masks[f] || sample.candidates[f].empty()) continue;
    if (auto gt = link_ground_truth(sample.candidates[f], *sample.referent_masks[f])) linked.emplace_back(f, *gt);
  }
  SampleLoss out;
  out.frames_used = linked.size();
  if (linked.empty()) return out;
  const double scale = 1.0 / static_cast<double>(linked.size());

  LanguageTape ltape;
  const LanguageOutput lang = encode_language(params, cfg, sample.tokens, grads ? &ltape : nullptr);
  Vector d_language(lang.language.size(), 0.0);
  Vector d_text(lang.text.size(), 0.0);

  for (const auto& [f, gt] : linked) {
    FrameTape tape;
    const FrameOutput fo =
        embed_frame(params, cfg, *sample.frames[f], sample.candidates[f], lang.text, grads ? &tape : nullptr);
    const Vector s = contrastive_scores(fo.normalized, lang.language, cfg.tau);
    out.loss += scale * contrastive_loss(s, gt);
    if (!grads) continue;
    const Vector dz = contrastive_loss_logit_grad(s, gt);
    std::vector<Vector> d_normalized(fo.normalized.size());
    for (std::size_t i = 0; i < fo.normalized.size(); ++i) {
      const double w = scale * dz[i] / cfg.tau;
      d_normalized[i] = lang.language;
      for (double& x : d_normalized[i]) x *= w;
      add_into(d_language, fo.normalized[i], w);
    }
    const FrameBackwardResult back = embed_frame_backward(params, cfg, *sample.frames[f], tape, d_normalized, *grads);
    if (!back.text.empty()) add_into(d_text, back.text);
  }
  if (grads) encode_language_backward(params, cfg, ltape, d_language, d_text, *grads);
  return out;
}

// ---------------------------------------------------------------------------
// Optimization loop.

struct TrainConfig {
  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  double lr = 1e-3;
  double flip_prob = 0.5;
  std::uint64_t seed = 0;
  int patience = 2;
  double factor = 10.0;
  double threshold = 1e-6;

  void validate() const {
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(lr >= 0.0, "TrainConfig: lr must be >= 0");
    require(flip_prob >= 0.0 && flip_prob <= 1.0, "TrainConfig: flip_prob outside [0, 1]");
  }
};

struct StepResult {
  double loss = 0.0;
  std::size_t samples_used = 0;
  std::size_t samples_skipped = 0;
};

// Mean loss over the usable samples of the batch followed by one Adam update.
// Per-sample gradients are reduced in batch order.
inline StepResult training_step(ModelParams& params, const ModelConfig& cfg, const std::vector<VideoSample>& batch,
                                OptimizerState& opt, const AdamConfig& adam = {}) {
  StepResult out;
  ModelParams total = ModelParams::zeros(cfg);
  ModelParams local = ModelParams::zeros(cfg);
  for (const auto& sample : batch) {
    zero(local);
    const SampleLoss sl = sample_loss(params, cfg, sample, &local);
    if (sl.frames_used == 0) {
      ++out.samples_skipped;
      continue;
    }
    ++out.samples_used;
    out.loss += sl.loss;
    accumulate(total, local);
  }
  if (out.samples_used == 0) return out;
  const double inv = 1.0 / static_cast<double>(out.samples_used);
  out.loss *= inv;
  for (auto& r : total.refs())
    for (double& g : r.values) g *= inv;
  adam_step(params, total, opt, adam);
  return out;
}

struct EpochRecord {
  std::size_t epoch = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::size_t skipped = 0;
};

struct TrainLog {
  std::vector<EpochRecord> epochs;
  std::uint64_t steps = 0;
};

// Runs `cfg.epochs` epochs of shuffled mini-batches with flip augmentation and
// plateau learning-rate decay. Returns the per-epoch log.
inline TrainLog train_model(ModelParams& params, const ModelConfig& mcfg, const TrainConfig& cfg,
                            const std::vector<VideoSample>& samples, const Vocabulary& vocab,
                            const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  require(!samples.empty(), "train_model: no training samples");
  Rng rng(cfg.seed ^ 0x7261696eULL);
  OptimizerState opt;
  opt.lr = cfg.lr;
  PlateauState plateau{cfg.patience, cfg.factor, cfg.threshold};
  TrainLog log;
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochRecord rec;
    rec.epoch = epoch + 1;
    rec.lr = opt.lr;
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<VideoSample> batch;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
        batch.push_back(augment_flip(samples[order[i]], cfg.flip_prob, rng, vocab));
      }
      const StepResult r = training_step(params, mcfg, batch, opt);
      rec.skipped += r.samples_skipped;
      if (r.samples_used == 0) continue;
      loss_sum += r.loss;
      ++batches;
    }
    rec.loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;
    log.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    opt.lr = plateau_scheduler(rec.loss, opt.lr, plateau);
  }
  log.steps = opt.step;
  return log;
}

// ---------------------------------------------------------------------------
// Checkpoints.
//
// Layout (little-endian):
//   "RSCK" u32 version
//   string model config ("key=value" lines)
//   u32 vocabulary size, then one string per token
//   u64 training step
//   u32 tensor count, then per tensor: string name, u32 rows, u32 cols, rows*cols f64
//   u32 CRC32 of everything above

inline constexpr std::uint32_t kCheckpointVersion = 1;

inline std::string model_config_text(const ModelConfig& c) {
  std::ostringstream out;
  out << "vocab_size=" << c.vocab_size << "\nword_dim=" << c.word_dim << "\nhidden_dim=" << c.hidden_dim
      << "\nfeature_dim=" << c.feature_dim << "\nkernel=" << c.kernel << "\nembed_dim=" << c.embed_dim << "\ntext_dim=" << c.text_dim
      << "\nmlp_layers=" << c.mlp_layers << "\nuse_prm=" << (c.use_prm ? 1 : 0)
      << "\nuse_tsrm=" << (c.use_tsrm ? 1 : 0) << "\ntau=" << std::hexfloat << c.tau << "\n";
  return out.str();
}

inline ModelConfig parse_model_config_text(const std::string& text) {
  ModelConfig c;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("checkpoint: malformed config line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "vocab_size") c.vocab_size = std::stoul(value);
    else if (key == "word_dim") c.word_dim = std::stoul(value);
    else if (key == "hidden_dim") c.hidden_dim = std::stoul(value);
    else if (key == "feature_dim") c.feature_dim = std::stoul(value);
    else if (key == "kernel") c.kernel = std::stoul(value);
    else if (key == "embed_dim") c.embed_dim = std::stoul(value);
    else if (key == "text_dim") c.text_dim = std::stoul(value);
    else if (key == "mlp_layers") c.mlp_layers = std::stoul(value);
    else if (key == "use_prm") c.use_prm = value == "1";
    else if (key == "use_tsrm") c.use_tsrm = value == "1";
    else if (key == "tau") c.tau = std::strtod(value.c_str(), nullptr);
    else throw Error("checkpoint: unknown config key '" + key + "'");
  }
  return c;
}

struct Checkpoint {
  ModelConfig config;
  Vocabulary vocab;
  ModelParams params;
  std::uint64_t step = 0;
};

inline std::vector<std::uint8_t> serialize_checkpoint(Checkpoint& ck) {
  ByteWriter w;
  w.u32(fourcc("RSCK"));
  w.u32(kCheckpointVersion);
  w.str(model_config_text(ck.config));
  w.u32(static_cast<std::uint32_t>(ck.vocab.size()));
  for (const auto& t : ck.vocab.tokens()) w.str(t);
  w.u64(ck.step);
  const auto refs = ck.params.refs();
  w.u32(static_cast<std::uint32_t>(refs.size()));
  for (const auto& r : refs) {
    w.str(r.name);
    w.u32(static_cast<std::uint32_t>(r.rows));
    w.u32(static_cast<std::uint32_t>(r.cols));
    for (double v : r.values) w.f64(v);
  }
  w.crc_from(0);
  return w.bytes();
}

inline Checkpoint deserialize_checkpoint(std::vector<std::uint8_t> bytes, const std::string& source) {
  ByteReader r(std::move(bytes), source);
  if (r.u32("checkpoint header") != fourcc("RSCK")) r.fail("not a checkpoint file (bad magic)", 0);
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    r.fail("checkpoint version mismatch (found " + std::to_string(version) + ", expected " +
               std::to_string(kCheckpointVersion) + ")",
           4);
  }
  Checkpoint ck;
  ck.config = parse_model_config_text(r.str("config"));
  const std::uint32_t vocab_size = r.u32("vocabulary size");
  std::vector<std::string> tokens;
  for (std::uint32_t i = 0; i < vocab_size; ++i) tokens.push_back(r.str("vocabulary token"));
  ck.vocab = Vocabulary::from_tokens(std::move(tokens));
  require(ck.vocab.size() == ck.config.vocab_size, source + ": vocabulary size disagrees with config");
  ck.step = r.u64("step");
  ck.params = ModelParams::zeros(ck.config);
  const auto refs = ck.params.refs();
  const std::uint32_t count = r.u32("tensor count");
  if (count != refs.size()) r.fail("tensor count mismatch", r.pos() - 4);
  for (const auto& ref : refs) {
    const std::size_t at = r.pos();
    const std::string name = r.str("tensor name");
    const std::uint32_t rows = r.u32("tensor rows");
    const std::uint32_t cols = r.u32("tensor cols");
    if (name != ref.name || rows != ref.rows || cols != ref.cols) {
      r.fail("unexpected tensor " + name + " [" + std::to_string(rows) + "x" + std::to_string(cols) + "], expected " +
                 ref.name + " [" + std::to_string(ref.rows) + "x" + std::to_string(ref.cols) + "]",
             at);
    }
    for (double& v : ref.values) v = r.f64("tensor data");
  }
  r.check_crc(0, "checkpoint");
  if (!r.done()) r.fail("trailing bytes after checkpoint", r.pos());
  return ck;
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return deserialize_checkpoint(read_file_bytes(path), path.string());
}

inline void save_checkpoint(const std::filesystem::path& path, Checkpoint& ck) {
  write_file_bytes(path, serialize_checkpoint(ck));
}

}  // namespace refseg

#endif  // REFSEG_TRAINING_HPP_
