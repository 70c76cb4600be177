#include "slip/commands.hpp"

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "slip/dataset.hpp"
#include "slip/errors.hpp"
#include "slip/log.hpp"
#include "slip/rng.hpp"
#include "slip/scoring.hpp"
#include "slip/synthetic.hpp"

namespace fs = std::filesystem;

namespace slip {
namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<std::string> train_sources(const RunConfig& cfg) {
  if (!cfg.train_sources.empty()) return cfg.train_sources;
  if (cfg.datasets.size() == 1) return {cfg.datasets.begin()->first};
  throw ConfigError("config key 'training.sources' must name the training datasets");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
}

std::set<std::string> training_ids(const RunConfig& cfg, const std::vector<std::string>& sources) {
  std::set<std::string> ids;
  for (const auto& id : sources) {
    IngestOptions opts;
    opts.one_class = false;
    const auto manifest = ingest_dataset(cfg.dataset_path(id), id, opts);
    for (const auto* r : manifest.select(Split::train)) ids.insert(r->sample_id);
  }
  return ids;
}

}  // namespace

void cmd_train(const TrainOptions& options) {
  RunConfig cfg = load_config(options.config);
  if (options.seed) {
    cfg.seed = *options.seed;
    cfg.training.seed = *options.seed;
    cfg.model.init_seed = *options.seed;
  }
  if (options.out) cfg.output_dir = *options.out;
  cfg.validate();
  const std::string started = utc_now();

  TrainingSet data;
  data.images.height = data.images.width = cfg.model.image_size;
  nlohmann::json dataset_info = nlohmann::json::object();
  fs::create_directories(cfg.output_dir);
  for (const auto& id : train_sources(cfg)) {
    const auto manifest = ingest_dataset(cfg.dataset_path(id), id);
    write_manifest_csv(cfg.output_dir / ("manifest_" + id + ".csv"), manifest);
    const auto records = manifest.select(Split::train);
    const ImageBatch images = load_images(manifest, records, cfg.model.image_size);
    data.images.pixels.insert(data.images.pixels.end(), images.pixels.begin(), images.pixels.end());
    data.images.count += images.count;
    for (const auto* r : records) {
      data.labels.push_back(r->label);
      data.sample_ids.push_back(r->sample_id);
    }
    dataset_info[id] = {{"train_live", records.size()}, {"skipped", manifest.skipped.size()}};
  }
  log_info("training on " + std::to_string(data.images.count) + " live images");

  ModelState state = create_model(cfg.model, cfg.vocab);
  TrainSession session;
  session.output_dir = cfg.output_dir;
  session.resume_from = options.resume;
  const TrainLog log = train(state, cfg.training, cfg.vocab, data, session);

  write_text(cfg.output_dir / "config.yaml", serialize_config(cfg));
  nlohmann::json manifest;
  manifest["config"] = serialize_config(cfg);
  manifest["seed"] = cfg.seed;
  manifest["start_time"] = started;
  manifest["end_time"] = utc_now();
  manifest["datasets"] = dataset_info;
  manifest["checkpoints"] = nlohmann::json::array();
  for (const auto& p : log.checkpoints) manifest["checkpoints"].push_back(p.filename().string());
  // Fingerprint of the parameters as stored in the final checkpoint.
  ModelState stored = state;
  if (!log.checkpoints.empty()) load_checkpoint(log.checkpoints.back(), stored);
  manifest["parameter_checksum"] = checksum(stored.params);
  manifest["log_rows"] = log.rows.size();
  write_text(cfg.output_dir / "run_manifest.json", manifest.dump(2) + "\n");
}

void cmd_score(const ScoreOptions& options) {
  RunConfig cfg = load_config(options.config);
  cfg.validate();
  ModelState state = create_model(cfg.model, cfg.vocab);
  try {
    load_checkpoint(options.checkpoint, state);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  const Split split = parse_split(options.split);
  std::vector<std::string> ids = options.datasets;
  if (ids.empty()) {
    for (const auto& [id, path] : cfg.datasets) ids.push_back(id);
  }
  std::vector<ScoredSample> rows;
  for (const auto& id : ids) {
    IngestOptions opts;
    opts.one_class = false;
    const auto manifest = ingest_dataset(cfg.dataset_path(id), id, opts);
    const auto records = manifest.select(split);
    const auto scores = score_images(state, load_images(manifest, records, cfg.model.image_size));
    for (std::size_t i = 0; i < records.size(); ++i) {
      const auto* r = records[i];
      ScoredSample s{r->sample_id, scores[i], r->label, std::nullopt, id};
      if (r->label == SampleLabel::spoof) s.attack_type = r->attack_type;
      rows.push_back(std::move(s));
    }
  }
  if (options.out.has_parent_path()) fs::create_directories(options.out.parent_path());
  write_scores_csv(options.out, rows);
}

void cmd_evaluate(const EvaluateOptions& options) {
  RunConfig cfg = load_config(options.config);
  cfg.validate(false);
  const ProtocolSpec& spec = cfg.protocol(options.protocol);
  if (options.scores.size() != spec.repetitions) {
    throw ConfigError("protocol '" + spec.name + "' has " + std::to_string(spec.repetitions) +
                      " repetitions but " + std::to_string(options.scores.size()) +
                      " score files were given");
  }
  if (!options.calibration.empty() && options.calibration.size() != options.scores.size()) {
    throw ConfigError("give either no calibration files or one per score file");
  }
  std::vector<std::vector<ScoredSample>> tests;
  for (const auto& p : options.scores) tests.push_back(read_scores_csv(p));
  for (std::size_t r = 0; r < tests.size(); ++r) {
    std::set<std::string> present;
    for (const auto& s : tests[r]) present.insert(s.dataset);
    std::string missing;
    for (const auto& id : spec.test_sources) {
      if (!present.count(id)) missing += (missing.empty() ? "" : ", ") + id;
    }
    if (!missing.empty()) {
      throw ConfigError("score file '" + options.scores[r].string() +
                        "' does not cover test datasets: " + missing);
    }
  }
  std::set<std::string> train_ids;
  bool have_paths = true;
  for (const auto& id : spec.train_sources) have_paths = have_paths && fs::is_directory(cfg.dataset_path(id));
  if (have_paths) {
    train_ids = training_ids(cfg, spec.train_sources);
  } else {
    log_warning("training datasets not on disk; leakage check limited to score files");
  }

  const ProtocolResult result = run_protocol(spec, [&](std::size_t r) {
    RepetitionScores rep;
    rep.test = tests[r];
    if (!options.calibration.empty()) rep.calibration = read_scores_csv(options.calibration[r]);
    rep.train_ids = train_ids;
    return rep;
  });
  if (result.calibrated_on_test) {
    log_warning("protocol '" + spec.name + "': no calibration scores, threshold calibrated on test");
  }
  const fs::path out = options.out.value_or(cfg.output_dir / "eval");
  fs::create_directories(out);
  write_text(out / (spec.name + ".json"), to_json(result).dump(2) + "\n");
  std::string csv = protocol_csv_header() + "\n";
  for (const auto& row : protocol_csv_rows(result)) csv += row + "\n";
  write_text(out / (spec.name + ".csv"), csv);
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spoof-cue prompt learning for one-class face anti-spoofing"};
  app.require_subcommand(1);

  TrainOptions train_opts;
  std::uint64_t seed_value = 0;
  std::string out_dir;
  std::string resume;
  auto* train = app.add_subcommand("train", "Warm up and train a model");
  train->add_option("--config", train_opts.config, "Run config (YAML)")->required();
  auto* seed_opt = train->add_option("--seed", seed_value, "Override the config seed");
  auto* out_opt = train->add_option("--out", out_dir, "Override the output directory");
  auto* resume_opt = train->add_option("--resume", resume, "Resume from an epoch_NNN.resume file");

  ScoreOptions score_opts;
  std::string score_out;
  auto* score = app.add_subcommand("score", "Score dataset images with a checkpoint");
  score->add_option("--config", score_opts.config, "Run config (YAML)")->required();
  score->add_option("--checkpoint", score_opts.checkpoint, "Checkpoint file")->required();
  score->add_option("--out", score_out, "Score CSV to write")->required();
  score->add_option("--dataset", score_opts.datasets, "Dataset ids (default: all)");
  score->add_option("--split", score_opts.split, "train, dev or test")->capture_default_str();

  EvaluateOptions eval_opts;
  std::string eval_out;
  auto* evaluate = app.add_subcommand("evaluate", "Compute protocol metrics from score files");
  evaluate->add_option("--config", eval_opts.config, "Run config (YAML)")->required();
  evaluate->add_option("--protocol", eval_opts.protocol, "Protocol name")->required();
  evaluate->add_option("--scores", eval_opts.scores, "Score CSV, one per repetition")->required();
  evaluate->add_option("--calibration", eval_opts.calibration, "Calibration score CSVs");
  auto* eval_out_opt = evaluate->add_option("--out", eval_out, "Report directory");

  std::string prompts_config;
  std::string family_name;
  auto* dump_prompts = app.add_subcommand("dump-prompts", "List every prompt of the grammar");
  dump_prompts->add_option("--config", prompts_config, "Run config (YAML) for the vocabulary");
  dump_prompts->add_option("--family", family_name, "live, spoof, content or hybrid");

  std::string scm_config;
  std::uint64_t scm_seed = 0;
  std::size_t scm_count = 10;
  std::string scm_prompt;
  auto* dump_scm = app.add_subcommand("dump-scm", "Emit pseudo spoof cue maps as JSON lines");
  dump_scm->add_option("--config", scm_config, "Run config (YAML) for vocabulary and SCM shape");
  dump_scm->add_option("--seed", scm_seed, "Sampling seed")->capture_default_str();
  dump_scm->add_option("--count", scm_count, "Number of maps")->capture_default_str();
  dump_scm->add_option("--prompt", scm_prompt, "Prompt text (default: cycle spoof prompts)");

  std::string synth_out;
  std::uint64_t synth_seed = 0;
  auto* synth = app.add_subcommand("synth", "Write the synthetic two-cluster dataset");
  synth->add_option("--out", synth_out, "Dataset root")->required();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) {
      if (*seed_opt) train_opts.seed = seed_value;
      if (*out_opt) train_opts.out = out_dir;
      if (*resume_opt) train_opts.resume = resume;
      cmd_train(train_opts);
    } else if (*score) {
      score_opts.out = score_out;
      cmd_score(score_opts);
    } else if (*evaluate) {
      if (*eval_out_opt) eval_opts.out = eval_out;
      cmd_evaluate(eval_opts);
    } else if (*dump_prompts) {
      const VocabConfig vocab = prompts_config.empty() ? VocabConfig{} : load_config(prompts_config).vocab;
      vocab.validate();
      std::vector<PromptFamily> families{PromptFamily::live, PromptFamily::spoof,
                                         PromptFamily::content, PromptFamily::hybrid};
      if (!family_name.empty()) {
        const auto f = parse_family(family_name);
        if (!f) throw ArgumentError("unknown prompt family '" + family_name + "'");
        families = {*f};
      }
      for (PromptFamily f : families) {
        for (const Prompt& p : enumerate_prompts(f, vocab)) out << dump_line(p) << '\n';
      }
    } else if (*dump_scm) {
      RunConfig cfg = scm_config.empty() ? RunConfig{} : load_config(scm_config);
      cfg.vocab.validate();
      cfg.training.scm.validate();
      std::vector<Prompt> prompts;
      if (!scm_prompt.empty()) {
        prompts.push_back(parse_prompt(scm_prompt));
      } else {
        prompts = enumerate_prompts(PromptFamily::spoof, cfg.vocab);
      }
      Rng rng(scm_seed);
      for (std::size_t i = 0; i < scm_count; ++i) {
        const Prompt& p = prompts[i % prompts.size()];
        out << supervision_record(p, scm_for_prompt(p, cfg.model.scm_shape, rng, cfg.training.scm))
            << '\n';
      }
    } else if (*synth) {
      SyntheticSpec spec;
      spec.seed = synth_seed;
      write_synthetic(make_synthetic(spec), synth_out);
    }
    return kExitOk;
  } catch (const TrainingAborted& e) {
    err << "error: " << e.what() << '\n';
    if (!e.snapshot().empty()) err << "diagnostic snapshot: " << e.snapshot().string() << '\n';
    return kExitNumeric;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ArgumentError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "i/o error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ProtocolError& e) {
    err << "protocol error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace slip
