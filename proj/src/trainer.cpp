#include "slip/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "slip/errors.hpp"
#include "slip/log.hpp"
#include "slip/rng.hpp"

namespace slip {
namespace {

// Stream labels for Rng::derive.
constexpr std::uint64_t kShuffleStream = 11;
constexpr std::uint64_t kBatchStream = 12;
constexpr std::uint64_t kWarmupStream = 13;
constexpr std::uint64_t kPromptStream = 1;
constexpr std::uint64_t kMapStream = 2;

void add_rows(Matrix& dst, std::size_t offset, const Matrix& src, double scale) {
  for (std::size_t r = 0; r < src.rows; ++r) {
    auto d = dst.row(offset + r);
    const auto s = src.row(r);
    for (std::size_t k = 0; k < s.size(); ++k) d[k] += scale * s[k];
  }
}

void add_scaled(ParamGroup& dst, const ParamGroup& src, double scale) {
  for (std::size_t t = 0; t < dst.tensors.size(); ++t) {
    auto& d = dst.tensors[t].data;
    const auto& s = src.tensors[t].data;
    for (std::size_t k = 0; k < d.size(); ++k) d[k] += scale * s[k];
  }
}

void scale_in_place(Matrix& m, double scale) {
  for (double& v : m.data) v *= scale;
}

double divisor(double count) { return std::max(count, 1.0); }

bool report_finite(const LossReport& r) {
  const double terms[] = {r.l_i, r.l_t, r.l_s, r.l_fd, r.l_fa, r.l_r, r.l_a};
  return std::all_of(std::begin(terms), std::end(terms), [](double v) { return std::isfinite(v); });
}

LossReport mean_report(const LossReport& raw, const LossReport& counts) {
  LossReport m = raw;
  m.l_i = raw.l_i / divisor(counts.l_i);
  m.l_t = raw.l_t / divisor(counts.l_t);
  m.l_s = raw.l_s / divisor(counts.l_s);
  m.l_fd = raw.l_fd / divisor(counts.l_fd);
  m.l_fa = raw.l_fa / divisor(counts.l_fa);
  m.l_r = raw.l_r / divisor(counts.l_r);
  m.l_a = raw.l_a / divisor(counts.l_a);
  m.l_l = m.l_i + m.l_t;
  m.total = total_objective(m, raw.lambda);
  return m;
}

void clip_gradients(ModelParams& grads, std::initializer_list<Component> groups, double max_norm) {
  if (max_norm <= 0.0) return;
  double sq = 0.0;
  for (Component c : groups) {
    for (const Tensor& t : grads[c].tensors) {
      for (double v : t.data) sq += v * v;
    }
  }
  const double n = std::sqrt(sq);
  if (n <= max_norm) return;
  const double scale = max_norm / n;
  for (Component c : groups) {
    for (Tensor& t : grads[c].tensors) {
      for (double& v : t.data) v *= scale;
    }
  }
}

void require_finite(const ModelParams& grads, const LossReport& report, const char* where) {
  if (!report_finite(report) || !grads.all_finite()) {
    throw NumericError(std::string("non-finite loss or gradient in ") + where);
  }
}

std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.index(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

std::string padded(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03zu", epoch);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("training.learning_rate must be positive");
  if (epochs < 1) throw ConfigError("training.epochs must be at least 1");
  if (optimizer != "adam") throw ConfigError("training.optimizer must be 'adam'");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("training.adam_betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("training.adam_eps must be positive");
  if (!(lambda >= 0.0)) throw ConfigError("training.lambda must be non-negative");
  if (!(temperature > 0.0)) throw ConfigError("training.temperature must be positive");
  if (!(grad_clip >= 0.0)) throw ConfigError("training.grad_clip must be non-negative");
  if (batch_images == 0) throw ConfigError("training.batch_images must be positive");
  if (prompt_counts.live == 0 || prompt_counts.spoof == 0 || prompt_counts.content == 0) {
    throw ConfigError("training.prompt_counts must be positive");
  }
  if (losses.disentanglement && (prompt_counts.live < 2 || prompt_counts.content < 2)) {
    throw ConfigError("the disentanglement loss needs at least 2 live and 2 content prompts");
  }
  scm.validate();
}

TrainBatch make_batch(const ImageBatch& images, const TrainConfig& cfg, const VocabConfig& vocab,
                      const ScmShape& shape, std::uint64_t seed,
                      std::initializer_list<std::uint64_t> stream) {
  std::vector<std::uint64_t> path(stream);
  TrainBatch batch;
  batch.images = images;
  path.push_back(kPromptStream);
  batch.prompts = sample_batch(Rng::derive(seed, path).next_u64(), cfg.prompt_counts, vocab);
  path.back() = kMapStream;
  Rng map_rng = Rng::derive(seed, path);
  for (const Prompt& p : batch.prompts.spoof) {
    batch.spoof_targets.push_back(scm_for_prompt(p, shape, map_rng, cfg.scm));
  }
  return batch;
}

LossReport term_counts(const TrainBatch& batch) {
  const auto nz = static_cast<double>(batch.images.count);
  const auto nl = static_cast<double>(batch.prompts.live.size());
  const auto ns = static_cast<double>(batch.prompts.spoof.size());
  const auto nc = static_cast<double>(batch.prompts.content.size());
  const auto nh = static_cast<double>(batch.prompts.hybrid.size());
  LossReport c;
  c.l_i = nz;
  c.l_t = nl;
  c.l_s = ns;
  c.l_fd = nc * (nc - 1.0) + nl * (nl - 1.0);
  c.l_fa = nl * nz;
  c.l_r = nh;
  c.l_a = nz * ns;
  return c;
}

double weighted_objective(const ModelState& state, const TrainBatch& batch,
                          const TermWeights& w, const LossToggles& toggles, double temperature,
                          double lambda, GradientRoute route, ModelParams* grads,
                          LossReport* report) {
  const PromptBatch& pb = batch.prompts;
  const std::size_t nl = pb.live.size();
  const std::size_t ns = pb.spoof.size();
  const std::size_t nc = pb.content.size();
  const std::size_t d = state.config.d_emb;
  if (batch.spoof_targets.size() != ns) {
    throw ArgumentError("batch spoof targets are not aligned with spoof prompts");
  }

  std::vector<Prompt> prompts;
  prompts.reserve(nl + ns + nc + pb.hybrid.size());
  for (const auto* family : {&pb.live, &pb.spoof, &pb.content, &pb.hybrid}) {
    prompts.insert(prompts.end(), family->begin(), family->end());
  }
  const std::size_t off_s = nl;
  const std::size_t off_c = nl + ns;
  const std::size_t off_h = nl + ns + nc;

  TextEncoderCache tcache;
  ImageEncoderCache icache;
  const Matrix text = encode_texts(state, prompts, grads ? &tcache : nullptr);
  const Matrix z = encode_images(state, batch.images, grads ? &icache : nullptr);
  const Matrix l = slice_rows(text, 0, nl);
  const Matrix s = slice_rows(text, off_s, ns);
  const Matrix c = slice_rows(text, off_c, nc);
  const Matrix h = slice_rows(text, off_h, pb.hybrid.size());
  const Matrix targets = ns ? maps_to_matrix(batch.spoof_targets) : Matrix(0, state.config.scm_shape.size());

  Matrix gtext(text.rows, d);
  Matrix gz(z.rows, d);
  LossReport r;
  r.lambda = lambda;
  double value = 0.0;

  // Squared-error terms through the decoder.
  auto decoder_term = [&](const Matrix& emb, const Matrix* target, double weight, Matrix& gdst,
                          std::size_t offset) {
    const bool want = grads && weight != 0.0;
    DecoderCache dc;
    const Matrix maps = decode(state, emb, want ? &dc : nullptr);
    Matrix gmaps;
    const double loss = squared_error(maps, target, want ? &gmaps : nullptr);
    if (want) {
      scale_in_place(gmaps, weight);
      Matrix gin;
      backward_decoder(state, dc, gmaps, &(*grads)[Component::decoder], &gin);
      add_rows(gdst, offset, gin, 1.0);
    }
    return loss;
  };

  if (toggles.image_liveness) {
    r.l_i = decoder_term(z, nullptr, w.l_i, gz, 0);
    value += w.l_i * r.l_i;
  }
  if (toggles.text_liveness) {
    r.l_t = decoder_term(l, nullptr, w.l_t, gtext, 0);
    value += w.l_t * r.l_t;
  }
  if (toggles.spoof && ns > 0) {
    r.l_s = decoder_term(s, &targets, w.l_s, gtext, off_s);
    value += w.l_s * r.l_s;
  }
  if (toggles.disentanglement) {
    const bool want = grads && w.l_fd != 0.0;
    DisentanglementGrad g;
    r.l_fd = disentanglement_loss(c, l, s, temperature, want ? &g : nullptr);
    value += w.l_fd * r.l_fd;
    if (want) {
      add_rows(gtext, 0, g.live, w.l_fd);
      add_rows(gtext, off_s, g.spoof, w.l_fd);
      add_rows(gtext, off_c, g.content, w.l_fd);
    }
  }
  if (toggles.alignment) {
    const bool want = grads && w.l_fa != 0.0;
    AlignmentGrad g;
    r.l_fa = alignment_loss(l, z, s, temperature, want ? &g : nullptr);
    value += w.l_fa * r.l_fa;
    if (want) {
      add_rows(gz, 0, g.image, w.l_fa);
      if (route == GradientRoute::full) {
        add_rows(gtext, 0, g.live, w.l_fa);
        add_rows(gtext, off_s, g.spoof, w.l_fa);
      }
    }
  }
  if (toggles.reconstruction && !pb.hybrid.empty()) {
    const bool want = grads && w.l_r != 0.0;
    Matrix lp(pb.hybrid.size(), d);
    Matrix sp(pb.hybrid.size(), d);
    for (std::size_t k = 0; k < pb.hybrid_pairs.size(); ++k) {
      const auto [li, si] = pb.hybrid_pairs[k];
      std::copy(l.row(li).begin(), l.row(li).end(), lp.row(k).begin());
      std::copy(s.row(si).begin(), s.row(si).end(), sp.row(k).begin());
    }
    ReconstructionGrad g;
    ParamGroup fusion_grad;
    if (want) {
      fusion_grad = state.params[Component::fusion].zeros_like();
      g.fusion = &fusion_grad;
    }
    r.l_r = reconstruction_loss(state, lp, sp, h, want ? &g : nullptr);
    value += w.l_r * r.l_r;
    if (want) {
      add_scaled((*grads)[Component::fusion], fusion_grad, w.l_r);
      if (route == GradientRoute::full) {
        for (std::size_t k = 0; k < pb.hybrid_pairs.size(); ++k) {
          const auto [li, si] = pb.hybrid_pairs[k];
          auto gl = gtext.row(li);
          auto gs = gtext.row(off_s + si);
          for (std::size_t j = 0; j < d; ++j) {
            gl[j] += w.l_r * g.live(k, j);
            gs[j] += w.l_r * g.spoof(k, j);
          }
        }
        add_rows(gtext, off_h, g.hybrid, w.l_r);
      }
    }
  }
  if (toggles.augmented && ns > 0) {
    const bool want = grads && w.l_a != 0.0;
    AugmentedGrad g;
    ParamGroup decoder_grad;
    if (want) {
      decoder_grad = state.params[Component::decoder].zeros_like();
      g.decoder = &decoder_grad;
    }
    r.l_a = augmented_spoof_loss(state, z, s, targets, want ? &g : nullptr);
    value += w.l_a * r.l_a;
    if (want) {
      add_scaled((*grads)[Component::decoder], decoder_grad, w.l_a);
      add_rows(gz, 0, g.image, w.l_a);
      add_rows(gtext, off_s, g.spoof, w.l_a);
    }
  }

  if (grads) {
    backward_image_encoder(state, icache, gz, (*grads)[Component::image_encoder]);
    backward_text_encoder(state, tcache, gtext, (*grads)[Component::text_encoder]);
  }
  r.l_l = r.l_i + r.l_t;
  if (!report_finite(r)) throw NumericError("non-finite loss term");
  r.total = total_objective(r, lambda);
  if (report) *report = r;
  return value;
}

// ------------------------------------------------------------------- Adam

AdamOptimizer::AdamOptimizer(const ModelParams& shape_like) {
  for (Component c : kAllComponents) {
    slot(c).m = shape_like[c].zeros_like();
    slot(c).v = shape_like[c].zeros_like();
  }
}

void AdamOptimizer::step(Component component, ParamGroup& params, const ParamGroup& grads,
                         const TrainConfig& cfg) {
  Slot& sl = slot(component);
  if (sl.m.tensors.empty()) {
    sl.m = params.zeros_like();
    sl.v = params.zeros_like();
  }
  ++sl.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(sl.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(sl.t));
  for (std::size_t ti = 0; ti < params.tensors.size(); ++ti) {
    auto& p = params.tensors[ti].data;
    const auto& g = grads.tensors[ti].data;
    auto& m = sl.m.tensors[ti].data;
    auto& v = sl.v.tensors[ti].data;
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      p[k] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

// ------------------------------------------------------------ stage steps

LossReport stage1_step(ModelState& state, AdamOptimizer& adam, const TrainConfig& cfg,
                       const TrainBatch& batch) {
  const LossReport n = term_counts(batch);
  const double avg = cfg.average_terms ? 1.0 : 0.0;
  auto weight = [&](bool on, double count, double scale) {
    if (!on) return 0.0;
    return scale * (avg > 0.0 ? 1.0 / divisor(count) : 1.0);
  };
  TermWeights w;
  w.l_fd = weight(cfg.losses.disentanglement, n.l_fd, cfg.lambda);
  w.l_fa = weight(cfg.losses.alignment, n.l_fa, cfg.lambda);
  w.l_r = weight(cfg.losses.reconstruction, n.l_r, 1.0);

  ModelParams grads = state.params.zeros_like();
  LossReport report;
  weighted_objective(state, batch, w, cfg.losses, cfg.temperature, cfg.lambda,
                     GradientRoute::staged, &grads, &report);
  require_finite(grads, report, "stage 1");
  clip_gradients(grads, {Component::text_encoder, Component::image_encoder, Component::fusion},
                 cfg.grad_clip);
  if (w.l_fd != 0.0) {
    adam.step(Component::text_encoder, state.params[Component::text_encoder],
              grads[Component::text_encoder], cfg);
  }
  if (w.l_fa != 0.0) {
    adam.step(Component::image_encoder, state.params[Component::image_encoder],
              grads[Component::image_encoder], cfg);
  }
  if (w.l_r != 0.0) {
    adam.step(Component::fusion, state.params[Component::fusion], grads[Component::fusion], cfg);
  }
  return report;
}

LossReport stage2_step(ModelState& state, AdamOptimizer& adam, const TrainConfig& cfg,
                       const TrainBatch& batch) {
  const LossReport n = term_counts(batch);
  auto weight = [&](bool on, double count) {
    if (!on) return 0.0;
    return cfg.average_terms ? 1.0 / divisor(count) : 1.0;
  };
  TermWeights w;
  w.l_i = weight(cfg.losses.image_liveness, n.l_i);
  w.l_t = weight(cfg.losses.text_liveness, n.l_t);
  w.l_s = weight(cfg.losses.spoof, n.l_s);
  w.l_a = weight(cfg.losses.augmented, n.l_a);

  ModelParams grads = state.params.zeros_like();
  LossReport report;
  weighted_objective(state, batch, w, cfg.losses, cfg.temperature, cfg.lambda,
                     GradientRoute::staged, &grads, &report);
  require_finite(grads, report, "stage 2");
  clip_gradients(grads, {Component::text_encoder, Component::image_encoder, Component::decoder},
                 cfg.grad_clip);
  const bool text = w.l_t != 0.0 || w.l_s != 0.0 || w.l_a != 0.0;
  const bool image = w.l_i != 0.0 || w.l_a != 0.0;
  const bool decoder = text || image;
  if (text) {
    adam.step(Component::text_encoder, state.params[Component::text_encoder],
              grads[Component::text_encoder], cfg);
  }
  if (image) {
    adam.step(Component::image_encoder, state.params[Component::image_encoder],
              grads[Component::image_encoder], cfg);
  }
  if (decoder) {
    adam.step(Component::decoder, state.params[Component::decoder], grads[Component::decoder], cfg);
  }
  return report;
}

void warmup(ModelState& state, AdamOptimizer& adam, const TrainConfig& cfg, const VocabConfig& vocab,
            const ImageBatch& live_images) {
  if (cfg.warmup_steps == 0) return;
  if (live_images.count == 0) throw ArgumentError("warmup needs at least one live image");
  const std::size_t take = std::min(cfg.batch_images, live_images.count);

  auto batch_for = [&](std::uint64_t phase, std::size_t step) {
    Rng rng = Rng::derive(cfg.seed, {kWarmupStream, phase, step, 0});
    auto order = permutation(live_images.count, rng);
    order.resize(take);
    return make_batch(select_images(live_images, order), cfg, vocab, state.config.scm_shape,
                      cfg.seed, {kWarmupStream, phase, step});
  };

  // (i) contrastive initialization of E_T and E_I.
  LossToggles contrastive{};
  contrastive.image_liveness = contrastive.text_liveness = contrastive.spoof = false;
  contrastive.reconstruction = contrastive.augmented = false;
  contrastive.disentanglement = cfg.losses.disentanglement;
  contrastive.alignment = cfg.losses.alignment;
  if (contrastive.disentanglement || contrastive.alignment) {
    for (std::size_t step = 0; step < cfg.warmup_steps; ++step) {
      const TrainBatch batch = batch_for(1, step);
      const LossReport n = term_counts(batch);
      TermWeights w;
      if (contrastive.disentanglement) w.l_fd = cfg.average_terms ? 1.0 / divisor(n.l_fd) : 1.0;
      if (contrastive.alignment) w.l_fa = cfg.average_terms ? 1.0 / divisor(n.l_fa) : 1.0;
      ModelParams grads = state.params.zeros_like();
      LossReport report;
      weighted_objective(state, batch, w, contrastive, cfg.temperature, cfg.lambda,
                         GradientRoute::staged, &grads, &report);
      require_finite(grads, report, "warm-up");
      clip_gradients(grads, {Component::text_encoder, Component::image_encoder}, cfg.grad_clip);
      if (w.l_fd != 0.0) {
        adam.step(Component::text_encoder, state.params[Component::text_encoder],
                  grads[Component::text_encoder], cfg);
      }
      if (w.l_fa != 0.0) {
        adam.step(Component::image_encoder, state.params[Component::image_encoder],
                  grads[Component::image_encoder], cfg);
      }
    }
  }

  // (ii) fusion initialization with E_T frozen.
  if (cfg.losses.reconstruction) {
    LossToggles recon{};
    recon.image_liveness = recon.text_liveness = recon.spoof = false;
    recon.disentanglement = recon.alignment = recon.augmented = false;
    for (std::size_t step = 0; step < cfg.warmup_steps; ++step) {
      const TrainBatch batch = batch_for(2, step);
      TermWeights w;
      w.l_r = cfg.average_terms ? 1.0 / divisor(term_counts(batch).l_r) : 1.0;
      ModelParams grads = state.params.zeros_like();
      LossReport report;
      weighted_objective(state, batch, w, recon, cfg.temperature, cfg.lambda,
                         GradientRoute::staged, &grads, &report);
      require_finite(grads, report, "warm-up");
      clip_gradients(grads, {Component::fusion}, cfg.grad_clip);
      adam.step(Component::fusion, state.params[Component::fusion], grads[Component::fusion], cfg);
    }
  }
}

// ------------------------------------------------------------- full loop

std::filesystem::path checkpoint_path(const std::filesystem::path& dir, std::size_t epoch) {
  return dir / ("epoch_" + padded(epoch) + ".ckpt");
}

std::filesystem::path resume_path(const std::filesystem::path& dir, std::size_t epoch) {
  return dir / ("epoch_" + padded(epoch) + ".resume");
}

void save_resume_state(const std::filesystem::path& path, const ModelState& state,
                       const AdamOptimizer& adam, std::size_t epochs_done, std::size_t next_step) {
  TensorArchive a;
  a.d_emb = static_cast<std::uint32_t>(state.config.d_emb);
  a.scm_shape = state.config.scm_shape;
  a.tensors = flatten_params(state.params);
  for (Component c : kAllComponents) {
    const auto& sl = adam.slot(c);
    const std::string comp(to_string(c));
    const ParamGroup& m = sl.m.tensors.empty() ? state.params[c] : sl.m;
    const bool empty = sl.m.tensors.empty();
    for (std::size_t t = 0; t < m.tensors.size(); ++t) {
      Tensor tm = m.tensors[t];
      Tensor tv = empty ? m.tensors[t] : sl.v.tensors[t];
      if (empty) {
        std::fill(tm.data.begin(), tm.data.end(), 0.0);
        std::fill(tv.data.begin(), tv.data.end(), 0.0);
      }
      tm.name = "adam.m/" + comp + "/" + m.tensors[t].name;
      tv.name = "adam.v/" + comp + "/" + m.tensors[t].name;
      a.tensors.push_back(std::move(tm));
      a.tensors.push_back(std::move(tv));
    }
    a.tensors.push_back(Tensor{"adam.t/" + comp, {1}, {static_cast<double>(sl.t)}});
  }
  a.tensors.push_back(Tensor{"progress", {2},
                             {static_cast<double>(epochs_done), static_cast<double>(next_step)}});
  write_archive(path, a, Precision::float64);
}

ResumePoint load_resume_state(const std::filesystem::path& path, ModelState& state,
                              AdamOptimizer& adam) {
  const TensorArchive a = read_archive(path);
  if (a.d_emb != state.config.d_emb || !(a.scm_shape == state.config.scm_shape)) {
    throw IoError("resume state '" + path.string() + "' does not match the model configuration");
  }
  std::vector<Tensor> params;
  auto find = [&](const std::string& name) -> const Tensor& {
    for (const Tensor& t : a.tensors) {
      if (t.name == name) return t;
    }
    throw IoError("resume state is missing tensor '" + name + "'");
  };
  for (const Tensor& t : a.tensors) {
    if (t.name.find('/') != std::string::npos && !t.name.starts_with("adam.")) params.push_back(t);
  }
  assign_params(state.params, params);
  adam = AdamOptimizer(state.params);
  for (Component c : kAllComponents) {
    const std::string comp(to_string(c));
    auto& sl = adam.slot(c);
    for (std::size_t t = 0; t < sl.m.tensors.size(); ++t) {
      const std::string tn = sl.m.tensors[t].name;
      const Tensor& m = find("adam.m/" + comp + "/" + tn);
      const Tensor& v = find("adam.v/" + comp + "/" + tn);
      if (m.shape != sl.m.tensors[t].shape || v.shape != sl.v.tensors[t].shape) {
        throw IoError("resume state optimizer tensor has a mismatched shape");
      }
      sl.m.tensors[t].data = m.data;
      sl.v.tensors[t].data = v.data;
    }
    sl.t = static_cast<std::uint64_t>(find("adam.t/" + comp).data.at(0));
  }
  const Tensor& progress = find("progress");
  return {static_cast<std::size_t>(progress.data.at(0)), static_cast<std::size_t>(progress.data.at(1))};
}

TrainLog train(ModelState& state, const TrainConfig& cfg, const VocabConfig& vocab,
               const TrainingSet& data, const TrainSession& session) {
  cfg.validate();
  if (data.labels.size() != data.images.count) {
    throw ArgumentError("training set labels do not match the image count");
  }
  for (std::size_t i = 0; i < data.labels.size(); ++i) {
    if (data.labels[i] != SampleLabel::live) {
      const std::string id = i < data.sample_ids.size() ? data.sample_ids[i] : std::to_string(i);
      throw ProtocolError("one-class training received a spoof-labeled image: " + id);
    }
  }
  if (data.images.count == 0) throw ArgumentError("training set has no live images");

  TrainLog log;
  log.seed = cfg.seed;
  AdamOptimizer adam(state.params);
  std::size_t first_epoch = 0;
  std::size_t step = 0;
  const bool to_disk = !session.output_dir.empty();
  if (to_disk) std::filesystem::create_directories(session.output_dir);

  std::ofstream csv;
  std::ofstream mean_csv;
  auto open_csv = [&](std::ofstream& os, const std::filesystem::path& p, bool append) {
    const bool fresh = !append || !std::filesystem::exists(p);
    os.open(p, fresh ? std::ios::trunc : std::ios::app);
    if (!os) throw IoError("cannot write '" + p.string() + "'");
    if (fresh) os << loss_csv_header() << '\n';
  };

  auto snapshot_and_abort = [&](const std::exception& e) -> TrainingAborted {
    std::filesystem::path snap;
    if (to_disk) {
      snap = session.output_dir / "diagnostic_snapshot.resume";
      try {
        save_resume_state(snap, state, adam, first_epoch, step);
      } catch (const std::exception&) {
        snap.clear();
      }
    }
    return TrainingAborted(e.what(), snap);
  };

  try {
    if (session.resume_from) {
      const ResumePoint rp = load_resume_state(*session.resume_from, state, adam);
      first_epoch = rp.epochs_done;
      step = rp.next_step;
    } else {
      warmup(state, adam, cfg, vocab, data.images);
    }
  } catch (const NumericError& e) {
    throw snapshot_and_abort(e);
  }
  if (to_disk) {
    open_csv(csv, session.output_dir / "loss.csv", session.resume_from.has_value());
    open_csv(mean_csv, session.output_dir / "loss_mean.csv", session.resume_from.has_value());
  }

  auto record = [&](std::size_t epoch, int stage, const LossReport& raw, const TrainBatch& batch) {
    TrainLogRow row{epoch, step, stage, raw, mean_report(raw, term_counts(batch))};
    if (to_disk) {
      csv << loss_csv_row(step, stage, row.raw) << '\n';
      mean_csv << loss_csv_row(step, stage, row.mean) << '\n';
    }
    if (session.on_row) session.on_row(row);
    log.rows.push_back(row);
    ++step;
  };

  const std::size_t n = data.images.count;
  const std::size_t per_batch = cfg.batch_images;
  const std::size_t batches = (n + per_batch - 1) / per_batch;
  try {
    for (std::size_t epoch = first_epoch; epoch < cfg.epochs; ++epoch) {
      Rng shuffle = Rng::derive(cfg.seed, {kShuffleStream, epoch});
      const auto order = permutation(n, shuffle);
      auto batch_at = [&](std::size_t b) {
        const std::size_t begin = b * per_batch;
        const std::size_t end = std::min(n, begin + per_batch);
        const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
        return make_batch(select_images(data.images, idx), cfg, vocab, state.config.scm_shape,
                          cfg.seed, {kBatchStream, epoch, b});
      };
      if (cfg.alternation == Alternation::per_step) {
        for (std::size_t b = 0; b < batches; ++b) {
          const TrainBatch batch = batch_at(b);
          record(epoch, 1, stage1_step(state, adam, cfg, batch), batch);
          record(epoch, 2, stage2_step(state, adam, cfg, batch), batch);
        }
      } else {
        for (std::size_t b = 0; b < batches; ++b) {
          const TrainBatch batch = batch_at(b);
          record(epoch, 1, stage1_step(state, adam, cfg, batch), batch);
        }
        for (std::size_t b = 0; b < batches; ++b) {
          const TrainBatch batch = batch_at(b);
          record(epoch, 2, stage2_step(state, adam, cfg, batch), batch);
        }
      }
      first_epoch = epoch + 1;
      if (to_disk) {
        csv.flush();
        mean_csv.flush();
        const auto ckpt = checkpoint_path(session.output_dir, epoch + 1);
        save_checkpoint(ckpt, state);
        save_resume_state(resume_path(session.output_dir, epoch + 1), state, adam, epoch + 1, step);
        log.checkpoints.push_back(ckpt);
      }
    }
  } catch (const NumericError& e) {
    throw snapshot_and_abort(e);
  }
  return log;
}

}  // namespace slip
