// Acceptance suite: one PASS/FAIL line per criterion.
//
//   slip_acceptance [--only N,...] [--expect-fail N,...]
//
// Exit status is 0 when the set of failing criteria equals the --expect-fail
// set (empty by default), so a known gap stays visible in the report without
// hiding a new regression or an unexpected fix.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "slip/commands.hpp"
#include "slip/protocols.hpp"
#include "slip/synthetic.hpp"

using namespace slip;
namespace fs = std::filesystem;

namespace {

// Pinned tolerances and bounds.
constexpr double kOracleTol = 1e-9;
constexpr double kOracleSeconds = 10.0;
constexpr double kGradientTol = 1e-4;
constexpr double kGradientSeconds = 60.0;
constexpr double kClosedFormTol = 1e-9;
constexpr double kAucTol = 1e-9;
constexpr double kEndToEndAuc = 0.95;
constexpr double kEndToEndAcer = 0.10;
constexpr double kEndToEndSeconds = 600.0;
constexpr double kAblationGap = 0.02;

// End-to-end training recipe shared by the synthetic runs. The warm-up keeps
// the default 200 steps' budget at lr 1e-5 (200 * 1e-5 / 1e-3 = 2 steps).
constexpr double kLearningRate = 1e-3;
constexpr std::size_t kEpochs = 50;
constexpr std::size_t kWarmupSteps = 2;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ------------------------------------------------------------ 1. oracles

ModelConfig random_toy_config(Rng& rng) {
  ModelConfig c = oracle::tiny_config(rng.next_u64());
  c.image_hidden = 3 + rng.index(6);
  c.token_dim = 3 + rng.index(6);
  c.text_hidden = 3 + rng.index(6);
  c.fusion_hidden = 3 + rng.index(6);
  c.d_emb = 2 + rng.index(11);
  c.scm_shape = {1 + rng.index(2), 2 * (1 + rng.index(3)), 2 * (1 + rng.index(3))};
  return c;
}

std::vector<SpoofCueMap> decoded(const ModelState& st, const Matrix& e) {
  std::vector<SpoofCueMap> out;
  for (std::size_t i = 0; i < e.rows; ++i) out.push_back(decode_scm(st, oracle::row(e, i)));
  return out;
}

double oracle_norms(const ModelState& st, const Matrix& e) {
  double s = 0.0;
  for (std::size_t i = 0; i < e.rows; ++i) {
    for (double v : oracle::decode(st, oracle::row(e, i))) s += v * v;
  }
  return s;
}

Outcome loss_oracles() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  double worst = 0.0;
  std::size_t cases = 0;
  auto track = [&](double got, double want) {
    worst = std::max(worst, std::abs(got - want));
    ++cases;
  };
  for (int trial = 0; trial < 100; ++trial) {
    const ModelState st = create_model(random_toy_config(rng), VocabConfig{});
    const std::size_t d = st.config.d_emb;
    const ScmShape shape = st.config.scm_shape;
    const Matrix z = oracle::random_matrix(1 + rng.index(4), d, rng);
    const Matrix l = oracle::random_matrix(2 + rng.index(3), d, rng);
    const Matrix s = oracle::random_matrix(1 + rng.index(4), d, rng);
    const Matrix c = oracle::random_matrix(2 + rng.index(3), d, rng);

    const auto live = liveness_loss(decoded(st, z), decoded(st, l));
    track(live.image, oracle_norms(st, z));
    track(live.text, oracle_norms(st, l));

    std::vector<SpoofCueMap> targets;
    Matrix target_rows(s.rows, shape.size());
    for (std::size_t k = 0; k < s.rows; ++k) {
      const Position p = kAllPositions[rng.index(kAllPositions.size())];
      targets.push_back(scm_for_prompt(make_spoof_prompt("fake", p, "mask"), shape, rng));
      std::copy(targets[k].data.begin(), targets[k].data.end(), target_rows.row(k).begin());
    }
    double ls = 0.0;
    for (std::size_t k = 0; k < s.rows; ++k) {
      ls += oracle::sum_sq_diff(oracle::decode(st, oracle::row(s, k)), targets[k].data);
    }
    track(spoof_loss(decoded(st, s), targets), ls);

    track(disentanglement_loss(c, l, s), oracle::disentanglement(c, l, s));
    track(alignment_loss(l, z, s), oracle::alignment(l, z, s));

    const Matrix h = oracle::random_matrix(l.rows, d, rng);
    const Matrix paired = oracle::random_matrix(l.rows, d, rng);
    track(reconstruction_loss(st, l, paired, h), oracle::reconstruction(st, l, paired, h));
    track(augmented_spoof_loss(st, z, s, targets), oracle::augmented(st, z, s, target_rows));
  }
  const double secs = seconds_since(t0);
  return {worst <= kOracleTol && secs < kOracleSeconds,
          fmt("max abs error %.2e over %zu loss evaluations (100 configurations x 7 losses), %.2f s", worst,
              cases, secs)};
}

// ----------------------------------------------------------- 2. gradients

Outcome gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  using oracle::Term;
  double worst = 0.0;
  std::size_t checks = 0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    ModelState st = create_model(oracle::tiny_config(seed), VocabConfig{});
    const auto batch = oracle::tiny_batch(seed + 10);
    for (Term t : {Term::l_i, Term::l_t, Term::l_s, Term::l_fd, Term::l_fa, Term::l_r, Term::l_a}) {
      const auto res = oracle::check_term_gradient(st, batch, t, 400);
      for (std::size_t c = 0; c < 4; ++c) {
        if (!res.checked[c]) continue;
        worst = std::max(worst, res.error[c]);
        ++checks;
      }
      // The augmented term is defined with R held fixed.
      if (t == Term::l_a) {
        const auto& g = res.analytic[Component::fusion];
        for (const auto& tensor : g.tensors)
          for (double v : tensor.data)
            if (v != 0.0) worst = std::numeric_limits<double>::infinity();
      }
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= kGradientTol && secs < kGradientSeconds,
          fmt("max relative error %.2e over %zu term/component checks, %.2f s", worst, checks, secs)};
}

// ----------------------------------------------------------- 3. exact fit

Outcome exact_fit() {
  const ModelState st = create_model(oracle::tiny_config(4), VocabConfig{});
  Rng rng(5);
  std::vector<double> values;

  const Matrix pred = oracle::random_matrix(3, 16, rng);
  values.push_back(squared_error(pred, &pred));
  const std::vector<SpoofCueMap> zeros(3, zero_scm({1, 4, 4}));
  values.push_back(liveness_loss(zeros, zeros).total);

  std::vector<SpoofCueMap> targets;
  for (Position p : {Position::upper, Position::center, Position::whole}) {
    targets.push_back(scm_for_prompt(make_spoof_prompt("fake", p, "mask"), {1, 4, 4}, rng));
  }
  values.push_back(spoof_loss(targets, targets));

  const Matrix l = oracle::random_matrix(3, 8, rng), s = oracle::random_matrix(3, 8, rng);
  values.push_back(reconstruction_loss(st, l, s, fuse(st, l, s)));

  // Targets equal to D(R(z, s_k)) for a single image embedding z.
  const Matrix z = oracle::random_matrix(1, 8, rng);
  Matrix zz(3, 8);
  for (std::size_t k = 0; k < 3; ++k) std::copy(z.row(0).begin(), z.row(0).end(), zz.row(k).begin());
  values.push_back(augmented_spoof_loss(st, z, s, decode(st, fuse(st, zz, s))));

  ModelState silent = st;
  zero_final_layer(silent, Component::decoder);
  values.push_back(augmented_spoof_loss(silent, oracle::random_matrix(4, 8, rng), s, Matrix(3, 16)));

  bool all_zero = true;
  for (double v : values) all_zero = all_zero && v == 0.0;
  return {all_zero, fmt("%zu exact-fit evaluations, all %s", values.size(), all_zero ? "exactly 0" : "not 0")};
}

// ------------------------------------------------------- 4. closed forms

Outcome closed_forms() {
  Matrix e1(1, 2), e2(1, 2);
  e1(0, 0) = 1.0;
  e2(0, 1) = 1.0;
  const double fa = alignment_loss(e1, e1, e2);

  // Two identical content rows; the live pair and the spoof row share one
  // direction at cosine log(2/3) to them, so each first-term denominator is
  // 3 * (2/3) = 2 and the second term vanishes.
  const double x = std::log(2.0 / 3.0);
  Matrix c(2, 2), u(2, 2), s(1, 2);
  c(0, 0) = c(1, 0) = 1.0;
  for (std::size_t i = 0; i < 2; ++i) {
    u(i, 0) = x;
    u(i, 1) = std::sqrt(1.0 - x * x);
  }
  s(0, 0) = x;
  s(0, 1) = std::sqrt(1.0 - x * x);
  const double fd = disentanglement_loss(c, u, s);
  const double fd_want = 2.0 * (std::log(2.0) - 1.0);
  const bool ok = std::abs(fa + 1.0) <= kClosedFormTol && std::abs(fd - fd_want) <= kClosedFormTol;
  return {ok, fmt("alignment %.12f (want -1), disentanglement %.12f (want %.12f)", fa, fd, fd_want)};
}

// ------------------------------------------------------ 5. freeze checks

Outcome freeze_invariants() {
  ModelState st = create_model(oracle::tiny_config(6), VocabConfig{});
  Rng rng(6);
  TrainingSet data;
  data.images = oracle::random_images(8, 8, rng);
  data.labels.assign(8, SampleLabel::live);
  TrainConfig cfg;
  cfg.learning_rate = 1e-3;
  cfg.epochs = 5;
  cfg.batch_images = 4;
  cfg.prompt_counts = {2, 3, 2};
  cfg.warmup_steps = 0;

  ParamGroup last_d = st.params[Component::decoder];
  ParamGroup last_r = st.params[Component::fusion];
  std::size_t steps = 0, d_violations = 0, r_violations = 0, stage1 = 0, stage2 = 0;
  TrainSession session;
  session.on_row = [&](const TrainLogRow& row) {
    ++steps;
    if (row.stage == 1) {
      ++stage1;
      if (!st.params[Component::decoder].identical_to(last_d)) ++d_violations;
    } else {
      ++stage2;
      if (!st.params[Component::fusion].identical_to(last_r)) ++r_violations;
    }
    last_d = st.params[Component::decoder];
    last_r = st.params[Component::fusion];
  };
  train(st, cfg, VocabConfig{}, data, session);
  const bool ok = steps == 20 && d_violations == 0 && r_violations == 0 && stage1 == 10 && stage2 == 10;
  return {ok, fmt("%zu steps: D changed in %zu of %zu stage-1 steps, R changed in %zu of %zu stage-2 steps",
                  steps, d_violations, stage1, r_violations, stage2)};
}

// ----------------------------------------------------------- 6. metrics

Outcome metric_oracles() {
  Rng rng(606);
  double worst_auc = 0.0;
  std::size_t threshold_mismatch = 0, identity_mismatch = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 2 + rng.index(199);
    const std::size_t n_live = 1 + rng.index(n - 1);
    const double shift = rng.uniform(0.0, 2.0);
    const double grid = static_cast<double>(1 + rng.index(16));
    std::vector<ScoredSample> samples;
    for (std::size_t i = 0; i < n; ++i) {
      const bool live = i < n_live;
      double v = rng.normal() + (live ? 0.0 : shift);
      if (trial % 2 == 0) v = std::round(v * grid) / grid;  // force ties
      samples.push_back({std::to_string(i), v, live ? SampleLabel::live : SampleLabel::spoof, std::nullopt, "S"});
    }
    worst_auc = std::max(worst_auc, std::abs(auc(samples) - oracle::auc(samples)));
    const auto t = youden_threshold(samples);
    const auto sweep = oracle::youden(samples);
    if (t.value != sweep.threshold || std::abs(t.youden_j - sweep.j) > 1e-12) ++threshold_mismatch;
    const auto m = compute_metrics(samples, t);
    if (m.acer != (m.apcer + m.bpcer) / 2 || m.hter != (m.far + m.frr) / 2) ++identity_mismatch;
  }
  const bool ok = worst_auc <= kAucTol && threshold_mismatch == 0 && identity_mismatch == 0;
  return {ok, fmt("1000 instances: max AUC error %.2e, %zu threshold mismatches, %zu identity violations",
                  worst_auc, threshold_mismatch, identity_mismatch)};
}

// ---------------------------------------------------------- 7. coverage

Outcome scm_coverage() {
  std::size_t uncovered = 0;
  for (std::size_t side : {16u, 32u}) {
    const ScmShape shape{1, side, side};
    std::vector<double> un(shape.size(), 0.0);
    Rng rng(side);
    for (Position p : kAllPositions) {
      const auto m = pseudo_scm({p, 1.0}, shape, rng);
      for (std::size_t k = 0; k < un.size(); ++k) un[k] = std::max(un[k], m.data[k]);
    }
    for (double v : un) uncovered += v != 1.0;
  }
  Rng rng(707);
  std::size_t outside = 0, empty = 0, non_binary = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t side = i % 2 == 0 ? 16 : 32;
    const ScmShape shape{1, side, side};
    const Position p = kAllPositions[rng.index(kAllPositions.size())];
    const auto m = scm_for_prompt(make_spoof_prompt("fake", p, "mask"), shape, rng);
    const Region r = position_region(p, side, side);
    bool inside = true;
    for (std::size_t y = 0; y < side; ++y)
      for (std::size_t x = 0; x < side; ++x)
        if (m.at(0, y, x) != 0.0 && !r.contains(y, x)) inside = false;
    outside += !inside;
    empty += m.is_zero();
    non_binary += !m.is_binary();
  }
  const bool ok = uncovered == 0 && outside == 0 && empty == 0 && non_binary == 0;
  return {ok, fmt("%zu uncovered cells; of 10000 masks %zu leave their region, %zu empty, %zu non-binary",
                  uncovered, outside, empty, non_binary)};
}

// ---------------------------------------------------- 8/9. synthetic runs

std::vector<ScoredSample> scored(const ModelState& st, const SyntheticSplit& split) {
  const auto scores = score_images(st, split.images);
  std::vector<ScoredSample> out;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out.push_back({split.sample_ids[i], scores[i], split.labels[i], split.attack_types[i], "synthetic"});
  }
  return out;
}

TrainConfig synthetic_recipe(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.learning_rate = kLearningRate;
  cfg.epochs = kEpochs;
  cfg.warmup_steps = kWarmupSteps;
  cfg.seed = seed;
  return cfg;
}

MetricBundle evaluate_dev_calibrated(const ModelState& st, const SyntheticDataset& data) {
  return compute_metrics(scored(st, data.test), youden_threshold(scored(st, data.dev)));
}

struct SyntheticRun {
  MetricBundle metrics;
  double seconds = 0.0;
};

SyntheticRun run_slip(std::uint64_t seed, const LossToggles& toggles) {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticSpec spec;
  spec.seed = seed;
  const auto data = make_synthetic(spec);
  ModelConfig mc;
  mc.init_seed = seed;
  ModelState st = create_model(mc, VocabConfig{});
  TrainConfig cfg = synthetic_recipe(seed);
  cfg.losses = toggles;
  train(st, cfg, VocabConfig{}, {data.train.images, data.train.labels, data.train.sample_ids});
  return {evaluate_dev_calibrated(st, data), seconds_since(t0)};
}

// Image liveness plus a spoof loss whose spoof features are Gaussian noise
// instead of prompt embeddings: E_I and D trained, no language involved.
SyntheticRun run_noise_baseline(std::uint64_t seed) {
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticSpec spec;
  spec.seed = seed;
  const auto data = make_synthetic(spec);
  ModelConfig mc;
  mc.init_seed = seed;
  ModelState st = create_model(mc, VocabConfig{});
  const TrainConfig cfg = synthetic_recipe(seed);
  AdamOptimizer adam(st.params);
  const std::size_t n = data.train.images.count;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng shuffle = Rng::derive(seed, {31, epoch});
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.index(i)]);
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_images) {
      const std::size_t b = begin / cfg.batch_images;
      const std::vector<std::size_t> idx(order.begin() + begin,
                                         order.begin() + std::min(n, begin + cfg.batch_images));
      const auto batch = make_batch(select_images(data.train.images, idx), cfg, VocabConfig{},
                                    mc.scm_shape, seed, {32, epoch, b});
      Rng noise_rng = Rng::derive(seed, {33, epoch, b});
      const Matrix noise = oracle::random_matrix(batch.spoof_targets.size(), mc.d_emb, noise_rng);
      const Matrix targets = maps_to_matrix(batch.spoof_targets);

      ModelParams grads = st.params.zeros_like();
      ImageEncoderCache ic;
      const Matrix z = encode_images(st, batch.images, &ic);
      DecoderCache dz;
      Matrix g_live;
      squared_error(decode(st, z, &dz), nullptr, &g_live);
      for (double& v : g_live.data) v /= static_cast<double>(z.rows);
      Matrix g_z;
      backward_decoder(st, dz, g_live, &grads[Component::decoder], &g_z);
      backward_image_encoder(st, ic, g_z, grads[Component::image_encoder]);

      DecoderCache ds;
      Matrix g_spoof;
      squared_error(decode(st, noise, &ds), &targets, &g_spoof);
      for (double& v : g_spoof.data) v /= static_cast<double>(noise.rows);
      backward_decoder(st, ds, g_spoof, &grads[Component::decoder], nullptr);

      adam.step(Component::image_encoder, st.params[Component::image_encoder],
                grads[Component::image_encoder], cfg);
      adam.step(Component::decoder, st.params[Component::decoder], grads[Component::decoder], cfg);
    }
  }
  return {evaluate_dev_calibrated(st, data), seconds_since(t0)};
}

Outcome end_to_end() {
  const auto run = run_slip(0, LossToggles{});
  const auto& m = run.metrics;
  const bool ok = m.auc > kEndToEndAuc && m.acer < kEndToEndAcer && run.seconds < kEndToEndSeconds;
  return {ok, fmt("seed 0, %zu epochs, lr %.0e: AUC %.4f, ACER %.4f (APCER %.4f, BPCER %.4f), %.1f s",
                  kEpochs, kLearningRate, m.auc, m.acer, m.apcer, m.bpcer, run.seconds)};
}

Outcome ablation_ordering() {
  LossToggles language_only{};
  language_only.disentanglement = language_only.alignment = false;
  language_only.reconstruction = language_only.augmented = false;
  std::size_t ordered = 0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const double full = run_slip(seed, LossToggles{}).metrics.auc;
    const double ll_ls = run_slip(seed, language_only).metrics.auc;
    const double noise = run_noise_baseline(seed).metrics.auc;
    const bool ok = full - ll_ls >= kAblationGap && ll_ls - noise >= kAblationGap;
    ordered += ok;
    detail += fmt("%sseed %llu: %.4f / %.4f / %.4f", seed ? "; " : "", static_cast<unsigned long long>(seed), full,
                  ll_ls, noise);
  }
  return {ordered >= 3, fmt("full / L_L+L_S / L_I+L_S(noise) AUC, ordered with gaps >= %.2f on %zu of 5 seeds: ",
                            kAblationGap, ordered) +
                            detail};
}

// ------------------------------------------------------- 10. determinism

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "slip_acceptance_determinism";
  fs::remove_all(root);
  SyntheticSpec spec;
  spec.image_size = 32;
  spec.live_train = 16;
  write_synthetic(make_synthetic(spec), root / "data" / "S");
  auto config_for = [&](const std::string& run) {
    const fs::path p = root / (run + ".yaml");
    std::ofstream(p) << "seed: 7\noutput_dir: " << (root / run).string() << "\n"
                     << "model: {image_size: 32, patch_size: 8, image_hidden: 16, d_emb: 16}\n"
                     << "training: {learning_rate: 1.0e-3, epochs: 3, batch_images: 8, warmup_steps: 2,"
                        " sources: [S]}\n"
                     << "datasets: {S: " << (root / "data" / "S").string() << "}\n";
    return p;
  };
  cmd_train({config_for("a"), std::nullopt, std::nullopt, std::nullopt});
  cmd_train({config_for("b"), std::nullopt, std::nullopt, std::nullopt});
  const std::string a = slurp(root / "a" / "loss.csv"), b = slurp(root / "b" / "loss.csv");
  const std::string am = slurp(root / "a" / "loss_mean.csv"), bm = slurp(root / "b" / "loss_mean.csv");
  const bool ok = !a.empty() && a == b && am == bm;
  return {ok, fmt("loss.csv %zu bytes, identical: %s; loss_mean.csv identical: %s", a.size(), a == b ? "yes" : "no",
                  am == bm ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::vector<int> expect_fail;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--expect-fail", expect_fail, "Criteria known to fail")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"loss oracles", loss_oracles},
      {"gradient suite", gradient_suite},
      {"exact-fit minima", exact_fit},
      {"closed-form contrastive values", closed_forms},
      {"stage freeze invariants", freeze_invariants},
      {"metric oracles", metric_oracles},
      {"pseudo map coverage", scm_coverage},
      {"synthetic end to end", end_to_end},
      {"ablation ordering", ablation_ordering},
      {"determinism", determinism},
  };

  std::set<int> failed;
  const std::set<int> selected(only.begin(), only.end());
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) failed.insert(id);
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }

  std::set<int> expected;
  for (int id : expect_fail) {
    if (selected.empty() || selected.count(id)) expected.insert(id);
  }
  if (failed != expected) {
    std::printf("acceptance: failing set differs from the expected set\n");
    return 1;
  }
  return 0;
}
