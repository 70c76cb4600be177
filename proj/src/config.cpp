#include "slip/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "slip/errors.hpp"

namespace fs = std::filesystem;

namespace slip {
namespace {

template <typename T>
T read(const YAML::Node& parent, const char* key, const std::string& where, T fallback) {
  const YAML::Node n = parent[key];
  if (!n) return fallback;
  try {
    return n.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("config key '" + where + key + "' has an invalid value");
  }
}

std::vector<std::string> read_list(const YAML::Node& parent, const char* key,
                                   const std::string& where, std::vector<std::string> fallback) {
  const YAML::Node n = parent[key];
  if (!n) return fallback;
  if (!n.IsSequence()) throw ConfigError("config key '" + where + key + "' must be a list");
  return read<std::vector<std::string>>(parent, key, where, {});
}

void check_keys(const YAML::Node& node, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!node) return;
  if (!node.IsMap()) throw ConfigError("config section '" + where + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown config key '" + where + (where.empty() ? "" : ".") + key + "'");
  }
}

std::string position_list_error(const std::string& name) {
  return "config key 'vocab.positions' has an unknown position '" + name + "'";
}

}  // namespace

fs::path RunConfig::dataset_path(const std::string& id) const {
  const auto it = datasets.find(id);
  if (it == datasets.end()) throw ConfigError("config key 'datasets." + id + "' is missing");
  if (it->second.is_absolute()) return it->second;
  fs::path root = data_root;
  if (const char* env = std::getenv(kDataRootEnv); env && *env) root = env;
  return root.empty() ? it->second : root / it->second;
}

const ProtocolSpec& RunConfig::protocol(const std::string& name) const {
  for (const auto& p : protocols) {
    if (p.name == name) return p;
  }
  throw ConfigError("no protocol named '" + name + "' under config key 'protocols'");
}

void RunConfig::validate(bool check_paths) const {
  model.validate();
  if (model.backbone == BackboneKind::external_adapter) {
    throw ConfigError("config key 'backbone': external_adapter is not available in this build");
  }
  vocab.validate();
  training.validate();
  for (const auto& id : train_sources) {
    if (!datasets.count(id)) throw ConfigError("config key 'training.sources' names unknown dataset '" + id + "'");
  }
  for (const auto& p : protocols) {
    p.validate();
    for (const auto* list : {&p.train_sources, &p.test_sources}) {
      for (const auto& id : *list) {
        if (!datasets.count(id)) {
          throw ConfigError("protocol '" + p.name + "' names unknown dataset '" + id +
                            "' (config key 'datasets." + id + "')");
        }
      }
    }
  }
  if (check_paths) {
    for (const auto& [id, path] : datasets) {
      const fs::path resolved = dataset_path(id);
      if (!fs::is_directory(resolved)) {
        throw ConfigError("config key 'datasets." + id + "': path does not exist: " +
                          resolved.string());
      }
    }
  }
}

RunConfig parse_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config is not valid YAML: ") + e.what());
  }
  if (!root || root.IsNull()) return RunConfig{};
  check_keys(root, "", {"seed", "output_dir", "backbone", "model", "scm", "vocab", "training",
                        "datasets", "protocols"});
  RunConfig c;
  c.seed = read<std::uint64_t>(root, "seed", "", 0);
  c.output_dir = read<std::string>(root, "output_dir", "", c.output_dir.string());
  const auto backbone = read<std::string>(root, "backbone", "", "toy");
  if (backbone == "toy") {
    c.model.backbone = BackboneKind::toy;
  } else if (backbone == "external_adapter") {
    c.model.backbone = BackboneKind::external_adapter;
  } else {
    throw ConfigError("config key 'backbone' must be 'toy' or 'external_adapter'");
  }

  const YAML::Node m = root["model"];
  check_keys(m, "model", {"image_size", "patch_size", "image_hidden", "token_dim", "text_hidden",
                          "fusion_hidden", "d_emb", "max_tokens"});
  if (m) {
    auto& mc = c.model;
    mc.image_size = read(m, "image_size", "model.", mc.image_size);
    mc.patch_size = read(m, "patch_size", "model.", mc.patch_size);
    mc.image_hidden = read(m, "image_hidden", "model.", mc.image_hidden);
    mc.token_dim = read(m, "token_dim", "model.", mc.token_dim);
    mc.text_hidden = read(m, "text_hidden", "model.", mc.text_hidden);
    mc.fusion_hidden = read(m, "fusion_hidden", "model.", mc.fusion_hidden);
    mc.d_emb = read(m, "d_emb", "model.", mc.d_emb);
    mc.max_tokens = read(m, "max_tokens", "model.", mc.max_tokens);
  }

  const YAML::Node s = root["scm"];
  check_keys(s, "scm", {"channels", "height", "width", "min_fraction", "max_fraction"});
  if (s) {
    auto& sh = c.model.scm_shape;
    sh.channels = read(s, "channels", "scm.", sh.channels);
    sh.height = read(s, "height", "scm.", sh.height);
    sh.width = read(s, "width", "scm.", sh.width);
    c.training.scm.min_fraction = read(s, "min_fraction", "scm.", c.training.scm.min_fraction);
    c.training.scm.max_fraction = read(s, "max_fraction", "scm.", c.training.scm.max_fraction);
  }

  const YAML::Node v = root["vocab"];
  check_keys(v, "vocab", {"live_adjectives", "spoof_adjectives", "occluding_objects",
                          "content_words", "positions"});
  if (v) {
    auto& vc = c.vocab;
    vc.live_adjectives = read_list(v, "live_adjectives", "vocab.", vc.live_adjectives);
    vc.spoof_adjectives = read_list(v, "spoof_adjectives", "vocab.", vc.spoof_adjectives);
    vc.occluding_objects = read_list(v, "occluding_objects", "vocab.", vc.occluding_objects);
    vc.content_words = read_list(v, "content_words", "vocab.", vc.content_words);
    if (v["positions"]) {
      vc.positions.clear();
      for (const auto& name : read_list(v, "positions", "vocab.", {})) {
        const auto pos = parse_position(name);
        if (!pos) throw ConfigError(position_list_error(name));
        vc.positions.push_back(*pos);
      }
    }
  }

  const YAML::Node t = root["training"];
  check_keys(t, "training", {"learning_rate", "epochs", "optimizer", "adam_betas", "adam_eps",
                             "lambda", "batch_images", "prompt_counts", "warmup_steps",
                             "temperature", "alternation", "grad_clip", "average_terms", "losses",
                             "sources"});
  auto& tc = c.training;
  tc.seed = c.seed;
  c.model.init_seed = c.seed;
  if (t) {
    tc.learning_rate = read(t, "learning_rate", "training.", tc.learning_rate);
    tc.epochs = read(t, "epochs", "training.", tc.epochs);
    tc.optimizer = read(t, "optimizer", "training.", tc.optimizer);
    if (t["adam_betas"]) {
      const auto betas = read<std::vector<double>>(t, "adam_betas", "training.", {});
      if (betas.size() != 2) throw ConfigError("config key 'training.adam_betas' needs two values");
      tc.beta1 = betas[0];
      tc.beta2 = betas[1];
    }
    tc.adam_eps = read(t, "adam_eps", "training.", tc.adam_eps);
    tc.lambda = read(t, "lambda", "training.", tc.lambda);
    tc.batch_images = read(t, "batch_images", "training.", tc.batch_images);
    const YAML::Node pc = t["prompt_counts"];
    check_keys(pc, "training.prompt_counts", {"live", "spoof", "content"});
    if (pc) {
      tc.prompt_counts.live = read(pc, "live", "training.prompt_counts.", tc.prompt_counts.live);
      tc.prompt_counts.spoof = read(pc, "spoof", "training.prompt_counts.", tc.prompt_counts.spoof);
      tc.prompt_counts.content =
          read(pc, "content", "training.prompt_counts.", tc.prompt_counts.content);
    }
    tc.warmup_steps = read(t, "warmup_steps", "training.", tc.warmup_steps);
    tc.temperature = read(t, "temperature", "training.", tc.temperature);
    const auto alt = read<std::string>(t, "alternation", "training.", "per_step");
    if (alt == "per_step") {
      tc.alternation = Alternation::per_step;
    } else if (alt == "per_epoch") {
      tc.alternation = Alternation::per_epoch;
    } else {
      throw ConfigError("config key 'training.alternation' must be per_step or per_epoch");
    }
    tc.grad_clip = read(t, "grad_clip", "training.", tc.grad_clip);
    tc.average_terms = read(t, "average_terms", "training.", tc.average_terms);
    const YAML::Node l = t["losses"];
    check_keys(l, "training.losses", {"image_liveness", "text_liveness", "spoof",
                                      "disentanglement", "alignment", "reconstruction",
                                      "augmented"});
    if (l) {
      auto& lt = tc.losses;
      lt.image_liveness = read(l, "image_liveness", "training.losses.", lt.image_liveness);
      lt.text_liveness = read(l, "text_liveness", "training.losses.", lt.text_liveness);
      lt.spoof = read(l, "spoof", "training.losses.", lt.spoof);
      lt.disentanglement = read(l, "disentanglement", "training.losses.", lt.disentanglement);
      lt.alignment = read(l, "alignment", "training.losses.", lt.alignment);
      lt.reconstruction = read(l, "reconstruction", "training.losses.", lt.reconstruction);
      lt.augmented = read(l, "augmented", "training.losses.", lt.augmented);
    }
    c.train_sources = read_list(t, "sources", "training.", {});
  }

  const YAML::Node d = root["datasets"];
  if (d) {
    if (!d.IsMap()) throw ConfigError("config section 'datasets' must be a mapping");
    for (const auto& kv : d) {
      const auto key = kv.first.as<std::string>();
      const auto value = read<std::string>(d, key.c_str(), "datasets.", "");
      if (key == "root") {
        c.data_root = value;
      } else {
        if (value.empty()) throw ConfigError("config key 'datasets." + key + "' needs a path");
        c.datasets[key] = value;
      }
    }
  }

  const YAML::Node p = root["protocols"];
  if (p) {
    if (!p.IsSequence()) throw ConfigError("config key 'protocols' must be a list");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const YAML::Node e = p[i];
      const std::string where = "protocols[" + std::to_string(i) + "].";
      check_keys(e, "protocols[" + std::to_string(i) + "]",
                 {"name", "train_sources", "test_sources", "unseen_attack", "repetitions"});
      ProtocolSpec spec;
      spec.name = read<std::string>(e, "name", where, "");
      spec.train_sources = read_list(e, "train_sources", where, {});
      spec.test_sources = read_list(e, "test_sources", where, {});
      if (e["unseen_attack"] && !e["unseen_attack"].IsNull()) {
        spec.unseen_attack = read<std::string>(e, "unseen_attack", where, "");
      }
      spec.repetitions = read(e, "repetitions", where, spec.repetitions);
      c.protocols.push_back(std::move(spec));
    }
  }
  return c;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize_config(const RunConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "seed" << YAML::Value << c.seed;
  out << YAML::Key << "output_dir" << YAML::Value << c.output_dir.string();
  out << YAML::Key << "backbone" << YAML::Value
      << (c.model.backbone == BackboneKind::toy ? "toy" : "external_adapter");

  const auto& m = c.model;
  out << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "image_size" << YAML::Value << m.image_size;
  out << YAML::Key << "patch_size" << YAML::Value << m.patch_size;
  out << YAML::Key << "image_hidden" << YAML::Value << m.image_hidden;
  out << YAML::Key << "token_dim" << YAML::Value << m.token_dim;
  out << YAML::Key << "text_hidden" << YAML::Value << m.text_hidden;
  out << YAML::Key << "fusion_hidden" << YAML::Value << m.fusion_hidden;
  out << YAML::Key << "d_emb" << YAML::Value << m.d_emb;
  out << YAML::Key << "max_tokens" << YAML::Value << m.max_tokens;
  out << YAML::EndMap;

  out << YAML::Key << "scm" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "channels" << YAML::Value << m.scm_shape.channels;
  out << YAML::Key << "height" << YAML::Value << m.scm_shape.height;
  out << YAML::Key << "width" << YAML::Value << m.scm_shape.width;
  out << YAML::Key << "min_fraction" << YAML::Value << c.training.scm.min_fraction;
  out << YAML::Key << "max_fraction" << YAML::Value << c.training.scm.max_fraction;
  out << YAML::EndMap;

  out << YAML::Key << "vocab" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "live_adjectives" << YAML::Value << YAML::Flow << c.vocab.live_adjectives;
  out << YAML::Key << "spoof_adjectives" << YAML::Value << YAML::Flow << c.vocab.spoof_adjectives;
  out << YAML::Key << "occluding_objects" << YAML::Value << YAML::Flow << c.vocab.occluding_objects;
  out << YAML::Key << "content_words" << YAML::Value << YAML::Flow << c.vocab.content_words;
  std::vector<std::string> positions;
  for (Position p : c.vocab.positions) positions.emplace_back(to_string(p));
  out << YAML::Key << "positions" << YAML::Value << YAML::Flow << positions;
  out << YAML::EndMap;

  const auto& t = c.training;
  out << YAML::Key << "training" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "learning_rate" << YAML::Value << t.learning_rate;
  out << YAML::Key << "epochs" << YAML::Value << t.epochs;
  out << YAML::Key << "optimizer" << YAML::Value << t.optimizer;
  out << YAML::Key << "adam_betas" << YAML::Value << YAML::Flow
      << std::vector<double>{t.beta1, t.beta2};
  out << YAML::Key << "adam_eps" << YAML::Value << t.adam_eps;
  out << YAML::Key << "lambda" << YAML::Value << t.lambda;
  out << YAML::Key << "batch_images" << YAML::Value << t.batch_images;
  out << YAML::Key << "prompt_counts" << YAML::Value << YAML::Flow << YAML::BeginMap;
  out << YAML::Key << "live" << YAML::Value << t.prompt_counts.live;
  out << YAML::Key << "spoof" << YAML::Value << t.prompt_counts.spoof;
  out << YAML::Key << "content" << YAML::Value << t.prompt_counts.content;
  out << YAML::EndMap;
  out << YAML::Key << "warmup_steps" << YAML::Value << t.warmup_steps;
  out << YAML::Key << "temperature" << YAML::Value << t.temperature;
  out << YAML::Key << "alternation" << YAML::Value
      << (t.alternation == Alternation::per_step ? "per_step" : "per_epoch");
  out << YAML::Key << "grad_clip" << YAML::Value << t.grad_clip;
  out << YAML::Key << "average_terms" << YAML::Value << t.average_terms;
  out << YAML::Key << "losses" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "image_liveness" << YAML::Value << t.losses.image_liveness;
  out << YAML::Key << "text_liveness" << YAML::Value << t.losses.text_liveness;
  out << YAML::Key << "spoof" << YAML::Value << t.losses.spoof;
  out << YAML::Key << "disentanglement" << YAML::Value << t.losses.disentanglement;
  out << YAML::Key << "alignment" << YAML::Value << t.losses.alignment;
  out << YAML::Key << "reconstruction" << YAML::Value << t.losses.reconstruction;
  out << YAML::Key << "augmented" << YAML::Value << t.losses.augmented;
  out << YAML::EndMap;
  out << YAML::Key << "sources" << YAML::Value << YAML::Flow << c.train_sources;
  out << YAML::EndMap;

  out << YAML::Key << "datasets" << YAML::Value << YAML::BeginMap;
  if (!c.data_root.empty()) out << YAML::Key << "root" << YAML::Value << c.data_root.string();
  for (const auto& [id, path] : c.datasets) out << YAML::Key << id << YAML::Value << path.string();
  out << YAML::EndMap;

  out << YAML::Key << "protocols" << YAML::Value << YAML::BeginSeq;
  for (const auto& p : c.protocols) {
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << p.name;
    out << YAML::Key << "train_sources" << YAML::Value << YAML::Flow << p.train_sources;
    out << YAML::Key << "test_sources" << YAML::Value << YAML::Flow << p.test_sources;
    if (p.unseen_attack) out << YAML::Key << "unseen_attack" << YAML::Value << *p.unseen_attack;
    out << YAML::Key << "repetitions" << YAML::Value << p.repetitions;
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace slip
