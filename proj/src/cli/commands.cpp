#include "shiftlab/cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "shiftlab/baselines/baselines.hpp"
#include "shiftlab/cli/checkpoint.hpp"
#include "shiftlab/core/error.hpp"
#include "shiftlab/metrics/metrics.hpp"
#include "shiftlab/model/train.hpp"
#include "shiftlab/saccade/saccade.hpp"
#include "shiftlab/scene/generate.hpp"
#include "shiftlab/scene/io.hpp"
#include "shiftlab/scene/stat_kernels.hpp"

namespace shiftlab::cli {

using nlohmann::json;

nlohmann::json read_experiment_config(const std::optional<fs::path>& path) {
  if (!path) return json::object();
  json j = scene::read_json_file(*path);
  if (!j.is_object()) throw ConfigError(path->string() + ": experiment config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "generate" && key != "model" && key != "train") {
      throw ConfigError(path->string() + ": unknown section '" + key + "' (expected generate, model, train)");
    }
    if (!value.is_object()) throw ConfigError(path->string() + ": section '" + key + "' must be an object");
  }
  return j;
}

const std::vector<scene::Scene>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw ConfigError("unknown split '" + name + "' (expected train, val or test)");
}

Dataset load_data(const fs::path& dir) {
  Dataset d;
  d.config = scene::config_from_json(scene::read_json_file(dir / "config.json").at("generate"));
  d.train = scene::load_dataset(dir / "train", d.config.vocab);
  d.val = scene::load_dataset(dir / "val", d.config.vocab);
  d.test = scene::load_dataset(dir / "test", d.config.vocab);
  return d;
}

namespace {

json section(const json& cfg, const char* key) { return cfg.contains(key) ? cfg.at(key) : json::object(); }

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

const scene::Scene& find_scene(const Dataset& d, const std::string& id) {
  for (const auto* split : {&d.train, &d.val, &d.test}) {
    for (const auto& s : *split) {
      if (s.id == id) return s;
    }
  }
  throw ConfigError("scene '" + id + "' not found in any split");
}

void require_vocab(const scene::Vocabulary& a, const scene::Vocabulary& b) {
  if (!(a == b)) throw ConfigError("checkpoint vocabulary differs from the dataset vocabulary");
}

void require_geometry(const model::ModelConfig& mc, const scene::GenConfig& gc) {
  if (mc.encoder.image_size != gc.image_size || mc.encoder.grid != gc.grid) {
    throw ConfigError("model expects " + std::to_string(mc.encoder.image_size) + "px images on a " +
                      std::to_string(mc.encoder.grid) + " grid; dataset has " + std::to_string(gc.image_size) +
                      "px on " + std::to_string(gc.grid));
  }
}

json map_stats(const Tensor& m) {
  const auto [lo, hi] = std::minmax_element(m.values().begin(), m.values().end());
  double s = 0;
  for (float v : m.values()) s += v;
  const auto [r, c] = saccade::argmax_cell(m);
  return {{"min", *lo}, {"max", *hi}, {"mean", s / static_cast<double>(m.size())}, {"argmax", {r, c}}};
}

void write_map(const fs::path& dir, const std::string& name, const Tensor& m, json& sidecar) {
  scene::write_pgm(dir / (name + ".pgm"), m);
  json st = map_stats(m);
  st["file"] = name + ".pgm";
  sidecar["maps"][name] = st;
}

void write_json(const fs::path& path, const json& j) { scene::write_text_file(path, j.dump(2) + "\n"); }

json aggregate_json(const metrics::Aggregate& a) {
  auto num = [](double v) { return std::isnan(v) ? json(nullptr) : json(v); };
  return {{"n", a.n},           {"n_subject", a.n_subject}, {"n_object", a.n_object}, {"s_iou", num(a.s_iou)},
          {"o_iou", num(a.o_iou)}, {"s_kl", num(a.s_kl)},     {"o_kl", num(a.o_kl)}};
}

scene::Query parse_query(const std::string& text, const scene::Vocabulary& vocab) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(' '), e = item.find_last_not_of(' ');
    parts.push_back(b == std::string::npos ? "" : item.substr(b, e - b + 1));
  }
  if (parts.size() != 3) throw ConfigError("query must look like \"subject,predicate,object\", got \"" + text + "\"");
  auto slot = [&](const std::string& s) { return s == "_" ? scene::kMasked : vocab.category(s); };
  return {slot(parts[0]), vocab.predicate(parts[1]), slot(parts[2])};
}

struct Loaded {
  Checkpoint ckpt;
  std::unique_ptr<model::Model<float>> model;
  scene::Vocabulary vocab;
};

Loaded load_model(const fs::path& path) {
  Loaded l;
  l.ckpt = load_checkpoint(path);
  l.model = restore_model(l.ckpt);
  l.vocab = checkpoint_vocab(l.ckpt);
  return l;
}

}  // namespace

void cmd_generate(const GenerateOptions& o, std::ostream& log) {
  const json cfg = read_experiment_config(o.config);
  scene::GenConfig gc = scene::config_from_json(section(cfg, "generate"));
  if (o.count) {
    const std::size_t total = gc.train + gc.val + gc.test;
    if (*o.count < 3 || total == 0) throw ConfigError("--count must be at least 3");
    const double n = static_cast<double>(*o.count);
    gc.val = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * gc.val / total)));
    gc.test = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(n * gc.test / total)));
    gc.train = *o.count - gc.val - gc.test;
  }
  gc.validate();
  fs::create_directories(o.out);
  write_json(o.out / "config.json", {{"generate", scene::config_to_json(gc)}, {"seed", o.seed}});
  const std::pair<const char*, std::size_t> splits[] = {{"train", gc.train}, {"val", gc.val}, {"test", gc.test}};
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& [name, count] = splits[i];
    const auto scenes = scene::generate_split(gc, mix_seed(o.seed, i), count, name);
    scene::save_dataset(o.out / name, scenes, gc.vocab, o.rasters);
    const scene::Census c = scene::census(scenes, gc.vocab.predicates.size());
    log << name << ": " << c.scenes << " scenes, ambiguous fraction " << fixed(c.ambiguous_fraction(), 3);
    for (std::size_t p = 0; p < c.per_predicate.size(); ++p) {
      log << ", " << gc.vocab.predicates[p] << " " << c.per_predicate[p];
    }
    log << '\n';
  }
}

void cmd_train(const TrainOptions& o, std::ostream& log) {
  const json cfg = read_experiment_config(o.config);
  const Dataset data = load_data(o.data);
  const scene::Vocabulary& vocab = data.config.vocab;

  json mj = section(cfg, "model");
  if (!mj.contains("categories")) mj["categories"] = vocab.categories.size();
  if (!mj.contains("predicates")) mj["predicates"] = vocab.predicates.size();
  if (!mj.contains("encoder")) mj["encoder"] = json::object();
  if (!mj["encoder"].contains("image_size")) mj["encoder"]["image_size"] = data.config.image_size;
  if (!mj["encoder"].contains("grid")) mj["encoder"]["grid"] = data.config.grid;
  mj["kind"] = o.model;
  if (o.iterations) mj["iterations"] = *o.iterations;
  model::ModelConfig mc = model::model_config_from_json(mj);
  mc.validate();
  require_geometry(mc, data.config);
  if (mc.categories != vocab.categories.size() || mc.predicates != vocab.predicates.size()) {
    throw ConfigError("model vocabulary sizes do not match the dataset");
  }

  model::TrainConfig tc = model::train_config_from_json(section(cfg, "train"));
  tc.seed = o.seed;
  if (o.mask_rate) tc.mask_rate = *o.mask_rate;
  if (o.epochs) tc.epochs = *o.epochs;
  tc.validate();

  auto m = model::make_model<float>(mc, o.seed);
  if (mc.kind == model::Kind::kSpatialShift) {
    std::vector<std::string> warnings;
    const auto kernels =
        scene::estimate_spatial_shift_kernels(data.train, data.config.geometry(), vocab.predicates.size(), &warnings);
    for (const auto& w : warnings) log << "warning: " << w << '\n';
    static_cast<baselines::SpatialShiftModel<float>&>(*m).set_kernels(kernels);
  }

  const model::Split train_split = model::make_split(data.train, mc);
  const model::Split val_split = model::make_split(data.val, mc);
  log << "training " << o.model << " on " << train_split.queries.size() << " queries (" << data.train.size()
      << " scenes), " << m->params().scalar_count() << " parameters\n";
  model::TrainHooks hooks;
  hooks.on_epoch = [&](const model::EpochLog& e) {
    log << "epoch " << e.epoch << " train " << fixed(e.train_loss, 5) << " val " << fixed(e.val_loss, 5) << " lr "
        << e.learning_rate << '\n';
    log.flush();
  };
  const model::TrainResult r = model::train(*m, train_split, &val_split, tc, vocab, hooks);

  const json metrics = {{"train_loss", r.log.back().train_loss},
                        {"val_loss", r.log.back().val_loss},
                        {"steps", r.steps}};
  save_checkpoint(o.out, make_checkpoint(*m, vocab, model::to_json(tc), o.seed, r.log.back().epoch, metrics));
  model::write_train_log((o.log ? *o.log : fs::path(o.out.string() + ".log.csv")).string(), r.log);
  log << "wrote " << o.out.string() << '\n';
}

nlohmann::json cmd_eval(const EvalOptions& o, std::ostream& log) {
  const metrics::MaskMode mask = metrics::mask_mode_from_string(o.mask);
  const Loaded l = load_model(o.ckpt);
  const Dataset data = load_data(o.data);
  require_vocab(l.vocab, data.config.vocab);
  require_geometry(l.model->config(), data.config);
  const auto& target_scenes = data.split(o.split);

  metrics::EvalConfig ec;
  if (o.tau) {
    ec.tau = *o.tau;
  } else {
    const model::Split val = model::make_split(data.val, l.model->config());
    ec.tau = metrics::select_tau(val, metrics::predict_split(*l.model, val, l.vocab, mask));
  }
  ec.validate();
  const model::Split split = model::make_split(target_scenes, l.model->config());
  const auto preds = metrics::predict_split(*l.model, split, l.vocab, mask);
  const auto records = metrics::score(split, preds, ec);
  const metrics::Report report = metrics::build_report(records, l.vocab);

  const fs::path out = o.out ? *o.out : o.ckpt.parent_path() / ("eval_" + o.split + "_" + o.mask);
  metrics::write_report(out, records, report, l.vocab);
  const json summary = {{"split", o.split},
                        {"mask", o.mask},
                        {"tau", ec.tau},
                        {"kind", l.ckpt.meta.at("kind")},
                        {"overall", aggregate_json(report.overall)},
                        {"ambiguous", aggregate_json(report.ambiguous)}};
  write_json(out / "summary.json", summary);
  log << o.split << " (mask " << o.mask << ", tau " << ec.tau << "): " << records.size() << " queries, S-IoU "
      << fixed(report.overall.s_iou) << " O-IoU " << fixed(report.overall.o_iou) << " S-KL "
      << fixed(report.overall.s_kl) << " O-KL " << fixed(report.overall.o_kl) << "; ambiguous S-IoU "
      << fixed(report.ambiguous.s_iou) << " O-IoU " << fixed(report.ambiguous.o_iou) << '\n';
  return summary;
}

void cmd_visualize(const VisualizeOptions& o, std::ostream& log) {
  const Loaded l = load_model(o.ckpt);
  const Dataset data = load_data(o.data);
  require_vocab(l.vocab, data.config.vocab);
  require_geometry(l.model->config(), data.config);
  const scene::Scene& s = find_scene(data, o.scene);
  const scene::Query q = parse_query(o.query, l.vocab);
  const Tensor mu = l.model->encode(s, l.vocab);

  fs::create_directories(o.out);
  scene::write_ppm(o.out / "scene.ppm", scene::rasterize(s, l.vocab));
  json side = {{"scene", s.id}, {"query", o.query}, {"kind", l.ckpt.meta.at("kind")}, {"maps", json::object()}};

  if (const auto* ssas = dynamic_cast<const model::SsasModel<float>*>(l.model.get())) {
    const auto tr = ssas->infer_rollout(mu, q);
    for (std::size_t i = 0; i < tr.subject.size(); ++i) {
      write_map(o.out, "subject_iter" + std::to_string(i), tr.subject[i].logits, side);
      write_map(o.out, "object_iter" + std::to_string(i), tr.object[i].logits, side);
    }
    for (std::size_t i = 0; i < tr.subject_shift.size(); ++i) {
      write_map(o.out, "subject_shift_iter" + std::to_string(i + 1), tr.subject_shift[i].activated, side);
      write_map(o.out, "object_shift_iter" + std::to_string(i + 1), tr.object_shift[i].activated, side);
    }
    side["iterations"] = tr.subject.size() - 1;
  }
  const auto p = l.model->predict(mu, q);
  write_map(o.out, "subject_final", p.subject, side);
  write_map(o.out, "object_final", p.object, side);

  // Ground truth when the query occurs in the scene.
  const auto queries = scene::build_queries(s, 0, data.config.geometry());
  for (const auto& gq : queries) {
    const bool match = (q.subject == scene::kMasked || q.subject == gq.query.subject) &&
                       (q.object == scene::kMasked || q.object == gq.query.object) &&
                       q.predicate == gq.query.predicate;
    if (match && q.subject != scene::kMasked && q.object != scene::kMasked) {
      write_map(o.out, "subject_gt", gq.subject.grid, side);
      write_map(o.out, "object_gt", gq.object.grid, side);
      break;
    }
  }
  write_json(o.out / "visualize.json", side);
  log << "wrote " << side["maps"].size() << " maps to " << o.out.string() << '\n';
}

nlohmann::json cmd_render_shift_kernel(const RenderKernelOptions& o, std::ostream& log) {
  const Loaded l = load_model(o.ckpt);
  const int p = l.vocab.predicate(o.predicate);
  const int L = static_cast<int>(l.model->config().grid());
  const int c = L / 2;
  Tensor delta({static_cast<std::size_t>(L), static_cast<std::size_t>(L)});
  delta.at(c, c) = 1.0f;

  Tensor fwd, inv;
  if (const auto* ssas = dynamic_cast<const model::SsasModel<float>*>(l.model.get())) {
    fwd = model::shift(delta, ssas->stack(p, model::Direction::kForward)).activated;
    inv = model::shift(delta, ssas->stack(p, model::Direction::kInverse)).activated;
  } else if (const auto* ss = dynamic_cast<const baselines::SpatialShiftModel<float>*>(l.model.get())) {
    const scene::ShiftKernels k = ss->kernels();
    fwd = scene::apply_offset_kernel(delta, k.forward.at(static_cast<std::size_t>(p)));
    inv = scene::apply_offset_kernel(delta, k.inverse(static_cast<std::size_t>(p)));
  } else {
    throw ConfigError("model kind '" + l.ckpt.meta.at("kind").get<std::string>() + "' has no shift kernels");
  }

  fs::create_directories(o.out);
  json side = {{"predicate", o.predicate}, {"kind", l.ckpt.meta.at("kind")}, {"center", {c, c}}, {"maps", json::object()}};
  auto response = [&](const std::string& name, const Tensor& m) {
    write_map(o.out, name, m, side);
    double mass = 0;
    for (float v : m.values()) mass += v;
    json& entry = side["maps"][name];
    if (mass > 0) {
      const auto [r, col] = scene::center_of_mass(m);
      entry["center_of_mass"] = {r, col};
      entry["displacement"] = {r - c, col - c};
    } else {
      entry["center_of_mass"] = nullptr;
      entry["displacement"] = nullptr;
      log << "warning: " << name << " response is identically zero\n";
    }
  };
  response("sh", fwd);
  response("sh_inv", inv);
  write_json(o.out / "shift_kernel.json", side);
  auto show = [](const json& d) { return d.is_null() ? std::string("none") : fixed(d[0]) + ", " + fixed(d[1]); };
  log << o.predicate << ": Sh displacement (" << show(side["maps"]["sh"]["displacement"]) << "), Sh^-1 displacement ("
      << show(side["maps"]["sh_inv"]["displacement"]) << ")\n";
  return side;
}

nlohmann::json cmd_saccade(const SaccadeOptions& o, std::ostream& log) {
  const Loaded l = load_model(o.ckpt);
  const auto* ssas = dynamic_cast<const model::SsasModel<float>*>(l.model.get());
  if (!ssas) throw ConfigError("saccades need an ssas checkpoint");
  const saccade::SceneGraph graph = saccade::load_graph(o.graph, l.vocab);
  const Dataset data = load_data(o.data);
  require_vocab(l.vocab, data.config.vocab);
  require_geometry(l.model->config(), data.config);
  const scene::Scene& s = find_scene(data, o.scene);
  const auto t = saccade::traverse(*ssas, l.model->encode(s, l.vocab), graph, l.vocab);

  fs::create_directories(o.out);
  json side = {{"scene", s.id}, {"graph", saccade::graph_to_json(graph, l.vocab)}, {"maps", json::object()}};
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    const std::string name = "node" + std::to_string(n.node);
    write_map(o.out, name, n.map.logits, side);
    const auto [r, c] = saccade::argmax_cell(n.map.logits);
    nodes.push_back({{"node", n.node},
                     {"category", l.vocab.categories.at(static_cast<std::size_t>(graph.nodes[n.node]))},
                     {"argmax", {r, c}},
                     {"file", name + ".pgm"}});
  }
  json visits = json::array();
  for (const auto& v : t.visits) visits.push_back(v.node);
  side["nodes"] = nodes;
  side["visits"] = visits;
  write_json(o.out / "saccade.json", side);
  log << "localized " << nodes.size() << " nodes over " << visits.size() << " visits\n";
  return side;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"shiftlab: attention shifting for referring relationships"};
  app.require_subcommand(1);

  GenerateOptions gen;
  std::string gen_config;
  std::size_t gen_count = 0;
  auto* g = app.add_subcommand("generate", "generate a synthetic dataset");
  g->add_option("--config", gen_config, "experiment config JSON");
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--seed", gen.seed, "master seed");
  auto* count_opt = g->add_option("--count", gen_count, "total scene count across splits");
  g->add_flag("!--no-rasters", gen.rasters, "skip scene PPM rasters");

  TrainOptions tr;
  std::string tr_config, tr_log;
  int tr_iters = 0, tr_epochs = 0;
  double tr_mask = 0;
  auto* t = app.add_subcommand("train", "train a model");
  t->add_option("--model", tr.model, "ssas, cooccur, vrd or spatialshift")
      ->check(CLI::IsMember({"ssas", "cooccur", "vrd", "spatialshift"}));
  t->add_option("--data", tr.data, "dataset directory")->required();
  t->add_option("--config", tr_config, "experiment config JSON");
  t->add_option("--out", tr.out, "checkpoint path")->required();
  t->add_option("--seed", tr.seed, "initialization and training seed");
  auto* iters_opt = t->add_option("--iterations", tr_iters, "SSAS iterations t");
  auto* mask_opt = t->add_option("--mask-rate", tr_mask, "probability of masking each query slot");
  auto* epochs_opt = t->add_option("--epochs", tr_epochs, "override the configured epoch count");
  auto* log_opt = t->add_option("--log", tr_log, "training log CSV (default <out>.log.csv)");

  EvalOptions ev;
  std::string ev_out;
  double ev_tau = 0.5;
  auto* e = app.add_subcommand("eval", "score a checkpoint");
  e->add_option("--ckpt", ev.ckpt, "checkpoint")->required();
  e->add_option("--data", ev.data, "dataset directory")->required();
  e->add_option("--split", ev.split, "train, val or test")->check(CLI::IsMember({"train", "val", "test"}));
  e->add_option("--mask", ev.mask, "none, subject, object or both")
      ->check(CLI::IsMember({"none", "subject", "object", "both"}));
  auto* ev_out_opt = e->add_option("--out", ev_out, "report directory");
  auto* tau_opt = e->add_option("--tau", ev_tau, "fixed threshold instead of selecting on val");

  VisualizeOptions vi;
  auto* v = app.add_subcommand("visualize", "write per-iteration attention heatmaps");
  v->add_option("--ckpt", vi.ckpt, "checkpoint")->required();
  v->add_option("--data", vi.data, "dataset directory")->required();
  v->add_option("--scene", vi.scene, "scene id")->required();
  v->add_option("--query", vi.query, "\"subject,predicate,object\"")->required();
  v->add_option("--out", vi.out, "output directory")->required();

  RenderKernelOptions rk;
  auto* r = app.add_subcommand("render_shift_kernel", "render a predicate's shift response to a centered delta");
  r->alias("render-shift-kernel");
  r->add_option("--ckpt", rk.ckpt, "checkpoint")->required();
  r->add_option("--predicate", rk.predicate, "predicate name")->required();
  r->add_option("--out", rk.out, "output directory")->required();

  SaccadeOptions sa;
  auto* s = app.add_subcommand("saccade", "traverse a scene graph path");
  s->add_option("--ckpt", sa.ckpt, "ssas checkpoint")->required();
  s->add_option("--data", sa.data, "dataset directory")->required();
  s->add_option("--scene", sa.scene, "scene id")->required();
  s->add_option("--graph", sa.graph, "scene graph JSON")->required();
  s->add_option("--out", sa.out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*g) {
      if (!gen_config.empty()) gen.config = gen_config;
      if (*count_opt) gen.count = gen_count;
      cmd_generate(gen, out);
    } else if (*t) {
      if (!tr_config.empty()) tr.config = tr_config;
      if (*iters_opt) tr.iterations = tr_iters;
      if (*mask_opt) tr.mask_rate = tr_mask;
      if (*epochs_opt) tr.epochs = tr_epochs;
      if (*log_opt) tr.log = tr_log;
      cmd_train(tr, out);
    } else if (*e) {
      if (*ev_out_opt) ev.out = ev_out;
      if (*tau_opt) ev.tau = ev_tau;
      cmd_eval(ev, out);
    } else if (*v) {
      cmd_visualize(vi, out);
    } else if (*r) {
      cmd_render_shift_kernel(rk, out);
    } else if (*s) {
      cmd_saccade(sa, out);
    }
  } catch (const ConfigError& ex) {
    err << "config error: " << ex.what() << '\n';
    return 2;
  } catch (const ValidationError& ex) {
    err << "invalid input: " << ex.what() << '\n';
    return 2;
  } catch (const DimensionError& ex) {
    err << "shape mismatch: " << ex.what() << '\n';
    return 2;
  } catch (const GenerationError& ex) {
    err << "generation failed: " << ex.what() << '\n';
    return 2;
  } catch (const NumericError& ex) {
    err << "numeric failure: " << ex.what() << '\n';
    return 3;
  } catch (const IoError& ex) {
    err << "I/O error: " << ex.what() << '\n';
    return 4;
  } catch (const fs::filesystem_error& ex) {
    err << "I/O error: " << ex.what() << '\n';
    return 4;
  } catch (const nlohmann::json::exception& ex) {
    err << "invalid input: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace shiftlab::cli
