// mrsynth command line: dataset preparation, training, evaluation, Turing
// sessions and the inference server.

#include <torch/torch.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string_view>
#include <thread>

#include "CLI11.hpp"
#include "mrsynth/checkpoint.hpp"
#include "mrsynth/config.hpp"
#include "mrsynth/dataio.hpp"
#include "mrsynth/error.hpp"
#include "mrsynth/evaluation.hpp"
#include "mrsynth/image_io.hpp"
#include "mrsynth/infersvc.hpp"
#include "mrsynth/phantom.hpp"
#include "mrsynth/rng.hpp"
#include "mrsynth/training.hpp"
#include "mrsynth/turing.hpp"

namespace fs = std::filesystem;
using namespace mrsynth;

namespace {

// Minimal stderr logging; `{}` placeholders are filled left to right.
template <typename... Args>
void log_line(const char* level, std::string_view fmt, const Args&... args) {
  std::ostringstream out;
  std::vector<std::string> values;
  ((out.str(""), out << args, values.push_back(out.str())), ...);
  std::string text;
  std::size_t next = 0;
  for (std::size_t i = 0; i < fmt.size(); ++i) {
    if (fmt[i] == '{') {
      const auto close = fmt.find('}', i);
      text += next < values.size() ? values[next++] : "";
      i = close;
    } else {
      text += fmt[i];
    }
  }
  std::cerr << '[' << level << "] " << text << std::endl;
}

template <typename... Args>
void log_info(std::string_view fmt, const Args&... args) { log_line("info", fmt, args...); }
template <typename... Args>
void log_warn(std::string_view fmt, const Args&... args) { log_line("warn", fmt, args...); }
template <typename... Args>
void log_error(std::string_view fmt, const Args&... args) { log_line("error", fmt, args...); }

std::string fixed(double v, int decimals) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(decimals);
  out << v;
  return out.str();
}

RunConfig run_config(const std::string& path, const std::string& preset) {
  const auto base = preset == "paper" ? RunConfig::paper() : RunConfig::desk();
  return path.empty() ? base : load_run_config(path, base);
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << '\n'; }

std::vector<ConditionVector> labels_of(const std::vector<ImageRecord>& records) {
  std::vector<ConditionVector> out;
  for (const auto& r : records) out.push_back(r.condition());
  return out;
}

// ---------------------------------------------------------------------------

struct IngestArgs {
  std::string manifest, out;
  std::size_t val = 0, test = 0;
  std::uint64_t seed = 0;
  int side = 64;
  int central = 6;
  std::string vendor = "siemens";
};

int run_ingest(const IngestArgs& a) {
  auto records = parse_manifest(a.manifest);
  FilterConfig rules;
  rules.central_slices = a.central;
  rules.vendor = a.vendor;
  auto [kept, report] = filter_records(std::move(records), rules);
  log_info("kept {} of {} records", report.kept_count, report.input_count);
  std::map<std::string, int> by_rule;
  for (const auto& r : report.rejected) ++by_rule[r.rule];
  for (const auto& [rule, n] : by_rule) log_info("  rejected by {}: {}", rule, n);
  for (auto& r : kept) r.pixels = preprocess_image(r.pixels, a.side);
  auto split = split_by_study(kept, a.val, a.test, a.seed);
  write_dataset(a.out, split);
  log_info("wrote {} train / {} val / {} test images to {}", split.train.size(), split.val.size(),
               split.test.size(), a.out);
  return 0;
}

struct PhantomArgs {
  std::string out;
  std::size_t count = 3000, val = 300, test = 300;
  std::uint64_t seed = 0;
  int canvas = 64;
  double noise = 0.02;
  int slices_per_study = 3;
};

int run_phantom(const PhantomArgs& a) {
  auto spec = PhantomSpec::defaults(a.canvas);
  spec.noise_sigma = a.noise;
  ConditionSpace space;
  auto records = generate_phantom_dataset(spec, space, a.count, a.seed, a.slices_per_study);
  auto split = split_by_study(records, a.val, a.test, mix_seed(a.seed, 1));
  write_dataset(a.out, split);
  log_info("wrote {} phantom images ({} train / {} val / {} test) to {}", records.size(), split.train.size(),
               split.val.size(), split.test.size(), a.out);
  return 0;
}

struct TrainAcArgs {
  std::string data, config, preset = "desk", out;
  int epochs = -1;
  std::int64_t batch = -1;
  bool no_augment = false;
};

int run_train_ac(const TrainAcArgs& a) {
  auto cfg = run_config(a.config, a.preset);
  if (a.epochs >= 0) cfg.train.ac_epochs = a.epochs;
  if (a.batch > 0) cfg.train.ac_batch = a.batch;
  if (a.no_augment) cfg.augment = AugmentConfig::none();
  auto split = read_dataset(a.data);
  const int res = cfg.net.final_resolution;
  auto train = make_tensor_dataset(split.train, cfg.space, res);
  auto val = make_tensor_dataset(split.val, cfg.space, res);
  torch::manual_seed(cfg.train.seed);
  auto ac = build_ac(cfg.net);
  pretrain_ac(ac, train, val, cfg.space, cfg.train, cfg.loss, cfg.augment, [](const AcEpochMetrics& m) {
    log_info("epoch {} loss {} val loss {} acc {} tr mae {} ms te mae {} ms", m.epoch, fixed(m.train_loss, 4),
             fixed(m.val_loss, 4), fixed(m.val.orientation_accuracy, 3), fixed(m.val.tr_mae_ms, 1), fixed(m.val.te_mae_ms, 2));
  });
  auto g = build_generator(cfg.net);
  auto d = build_discriminator(cfg.net);
  CheckpointMeta meta{kCheckpointFormatVersion, cfg.net, cfg.space, cfg.train, cfg.loss, {}, std::nullopt};
  save_checkpoint(a.out, meta, g, d, ac);
  log_info("saved classifier checkpoint {}", a.out);
  return 0;
}

struct TrainGanArgs {
  std::string data, config, preset = "desk", ac, out, resume, telemetry;
  std::int64_t checkpoint_every = 0;
};

int run_train_gan(const TrainGanArgs& a) {
  auto cfg = run_config(a.config, a.preset);
  auto split = read_dataset(a.data);
  auto train = make_tensor_dataset(split.train, cfg.space, cfg.net.final_resolution);
  auto ac_model = load_checkpoint(a.ac);
  if (!(ac_model.meta.net == cfg.net))
    throw Error(ErrorCode::kConfig, "classifier checkpoint was built with a different network configuration", "ac");
  torch::manual_seed(cfg.train.seed);
  auto schedule = make_schedule(cfg.net.base_resolution, cfg.net.final_resolution, cfg.train.images_per_phase);
  GanTrainer trainer(build_generator(cfg.net), build_discriminator(cfg.net), ac_model.ac, std::move(train), schedule,
                     cfg.train, cfg.loss, cfg.space);
  if (!a.resume.empty()) {
    trainer.resume(a.resume);
    log_info("resumed at {} images", trainer.state().images_total);
  }
  if (!a.telemetry.empty()) trainer.set_telemetry(std::make_shared<TelemetryLog>(a.telemetry, !a.resume.empty()));
  std::int64_t next_save = a.checkpoint_every > 0 ? trainer.state().images_total + a.checkpoint_every : -1;
  trainer.run([&](const TelemetryRecord& r) {
    if (r.step % 50 == 0)
      log_info("step {} images {} res {} {} alpha {} D {} G {} gamma iop {} te {} tr {}", r.step, r.images_seen,
               r.resolution, r.mode, fixed(r.alpha, 2), fixed(r.critic_loss, 3), fixed(r.generator_total, 3),
               fixed(r.gamma.iop, 3), fixed(r.gamma.te, 3), fixed(r.gamma.tr, 3));
    if (next_save > 0 && r.images_seen >= next_save) {
      trainer.save(a.out);
      next_save += a.checkpoint_every;
    }
  });
  trainer.save(a.out);
  log_info("saved {}", a.out);
  return 0;
}

struct EvalArgs {
  std::string ckpt, data, ac, split = "test", out;
  std::int64_t synthetic_n = 0;
  std::uint64_t seed = 0;
};

int run_eval(const EvalArgs& a) {
  auto model = load_checkpoint(a.ckpt);
  auto ac = a.ac.empty() ? model.ac : load_checkpoint(a.ac).ac;
  auto split = read_dataset(a.data);
  const auto& records = a.split == "train" ? split.train : a.split == "val" ? split.val : split.test;
  auto ds = make_tensor_dataset(records, model.meta.space, model.meta.net.final_resolution);
  nlohmann::json out = {{"split", a.split}, {"real", eval_ac(ac, ds, model.meta.space)}};
  if (a.synthetic_n != 0) {
    const auto n = a.synthetic_n < 0 ? ds.size() : a.synthetic_n;
    out["synthetic"] = eval_ac_on_synthetic(ac, model.generator, ds.labels, n, model.meta.space, a.seed);
  }
  print_json(out);
  if (!a.out.empty()) write_json(a.out, out);
  return 0;
}

struct GridArgs {
  std::string ckpt, orientation = "coronal", out, sidecar;
  std::uint64_t z_seed = 0;
  std::vector<double> tr, te;
};

int run_grid(const GridArgs& a) {
  auto model = load_checkpoint(a.ckpt);
  auto z = latent_from_seed(a.z_seed, static_cast<std::size_t>(model.meta.net.latent_dim));
  auto g = render_interpolation_grid(model.generator, model.ac, z, a.tr, a.te, a.orientation, model.meta.space);
  write_bytes(a.out, encode_png_rgb8(g.montage));
  const auto sidecar = a.sidecar.empty() ? fs::path(a.out).replace_extension(".json") : fs::path(a.sidecar);
  write_json(sidecar, g.sidecar());
  log_info("wrote {} and {}", a.out, sidecar.string());
  return 0;
}

std::vector<TuringPoolItem> read_pool(const std::string& path) {
  if (fs::is_directory(path)) {
    std::vector<TuringPoolItem> out;
    for (const auto& r : read_dataset(path).test) out.push_back({r.pixels_path.empty() ? r.id() : r.pixels_path, r.condition()});
    return out;
  }
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::vector<TuringPoolItem> out;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back({line, std::nullopt});
  return out;
}

struct TuringBuildArgs {
  std::string real, synthetic, out;
  std::size_t n_per_class = 75, grid_size = 6;
  std::uint64_t seed = 0;
  std::vector<std::string> readers;
};

int run_turing_build(const TuringBuildArgs& a) {
  auto s = build_turing_session(read_pool(a.real), read_pool(a.synthetic), a.n_per_class, a.seed, a.grid_size);
  for (const auto& w : s.warnings) log_warn("{}", w);
  for (const auto& r : a.readers) s.register_reader(r);
  save_session(a.out, s);
  log_info("session {} with {} grids written to {}", s.id, s.grids.size(), a.out);
  return 0;
}

struct TuringSubmitArgs {
  std::string session, reader, labels;
  std::size_t grid = 0;
};

int run_turing_submit(const TuringSubmitArgs& a) {
  auto s = load_session(a.session);
  std::vector<TuringLabel> labels;
  std::stringstream in(a.labels);
  for (std::string tok; std::getline(in, tok, ',');) labels.push_back(turing_label_from_string(tok));
  s.register_reader(a.reader);
  auto outcome = submit_grid_labels(s, a.reader, a.grid, labels);
  if (!outcome.accepted) {
    log_error("rejected: {}", outcome.reason);
    return 3;
  }
  save_session(a.session, s);
  return 0;
}

int run_turing_report(const std::string& session, const std::string& out) {
  nlohmann::json report = turing_analytics(load_session(session));
  print_json(report);
  if (!out.empty()) write_json(out, report);
  return 0;
}

struct ServeArgs {
  std::string ckpt, host = "127.0.0.1", sessions;
  int port = 8080;
  std::size_t max_count = 16;
  int watch_seconds = 0;
};

HttpServer* g_server = nullptr;

int run_serve(const ServeArgs& a) {
  ServiceConfig cfg;
  cfg.max_count = a.max_count;
  if (!a.sessions.empty()) cfg.session_dir = a.sessions;
  InferenceService service(cfg);
  fs::file_time_type loaded_at{};
  if (!a.ckpt.empty()) {
    service.load_model(a.ckpt);
    loaded_at = fs::last_write_time(a.ckpt);
    log_info("model {}", model_version(*service.model()));
  } else {
    log_warn("no checkpoint given; model endpoints answer 503");
  }
  HttpServer server(service);
  const int port = server.bind(a.host, a.port);
  log_info("listening on {}:{}", a.host, port);
  g_server = &server;
  std::signal(SIGINT, [](int) { if (g_server) g_server->stop(); });
  std::signal(SIGTERM, [](int) { if (g_server) g_server->stop(); });
  std::jthread watcher;
  if (a.watch_seconds > 0 && !a.ckpt.empty()) {
    watcher = std::jthread([&](std::stop_token stop) {
      while (!stop.stop_requested()) {
        std::this_thread::sleep_for(std::chrono::seconds(a.watch_seconds));
        std::error_code ec;
        const auto t = fs::last_write_time(a.ckpt, ec);
        if (ec || t == loaded_at) continue;
        try {
          service.load_model(a.ckpt);
          loaded_at = t;
          log_info("reloaded model {}", model_version(*service.model()));
        } catch (const std::exception& e) {
          log_warn("reload failed: {}", e.what());
        }
      }
    });
  }
  server.listen();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conditional MR image synthesis: data, training, evaluation and serving"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "intra-op threads (0 = library default)");

  IngestArgs ingest;
  auto* c_ingest = app.add_subcommand("ingest", "filter a DICOM-derived manifest, preprocess and split by study");
  c_ingest->add_option("--manifest", ingest.manifest)->required()->check(CLI::ExistingFile);
  c_ingest->add_option("--out", ingest.out)->required();
  c_ingest->add_option("--val", ingest.val, "validation images");
  c_ingest->add_option("--test", ingest.test, "test images");
  c_ingest->add_option("--seed", ingest.seed);
  c_ingest->add_option("--side", ingest.side, "output image side");
  c_ingest->add_option("--central-slices", ingest.central);
  c_ingest->add_option("--vendor", ingest.vendor);

  PhantomArgs phantom;
  auto* c_phantom = app.add_subcommand("phantom", "write a spin-echo phantom dataset");
  c_phantom->add_option("--out", phantom.out)->required();
  c_phantom->add_option("--count", phantom.count);
  c_phantom->add_option("--val", phantom.val);
  c_phantom->add_option("--test", phantom.test);
  c_phantom->add_option("--seed", phantom.seed);
  c_phantom->add_option("--size,--canvas", phantom.canvas, "image side");
  c_phantom->add_option("--noise", phantom.noise);
  c_phantom->add_option("--slices-per-study", phantom.slices_per_study);

  TrainAcArgs tac;
  auto* c_tac = app.add_subcommand("train-ac", "pretrain the auxiliary classifier");
  c_tac->add_option("--data", tac.data)->required()->check(CLI::ExistingDirectory);
  c_tac->add_option("--config", tac.config)->check(CLI::ExistingFile);
  c_tac->add_option("--preset", tac.preset)->check(CLI::IsMember({"desk", "paper"}));
  c_tac->add_option("--epochs", tac.epochs);
  c_tac->add_option("--batch", tac.batch);
  c_tac->add_flag("--no-augment", tac.no_augment);
  c_tac->add_option("--out", tac.out)->required();

  TrainGanArgs tgan;
  auto* c_tgan = app.add_subcommand("train-gan", "progressive WGAN-GP training with adaptive conditioning");
  c_tgan->add_option("--data", tgan.data)->required()->check(CLI::ExistingDirectory);
  c_tgan->add_option("--config", tgan.config)->check(CLI::ExistingFile);
  c_tgan->add_option("--preset", tgan.preset)->check(CLI::IsMember({"desk", "paper"}));
  c_tgan->add_option("--ac", tgan.ac, "checkpoint holding the pretrained classifier")->required()->check(CLI::ExistingFile);
  c_tgan->add_option("--resume", tgan.resume)->check(CLI::ExistingFile);
  c_tgan->add_option("--out", tgan.out)->required();
  c_tgan->add_option("--telemetry", tgan.telemetry, "JSONL log, one line per generator step");
  c_tgan->add_option("--checkpoint-every", tgan.checkpoint_every, "images between checkpoints");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "classifier metrics on real and synthetic images");
  c_eval->add_option("--ckpt", ev.ckpt)->required()->check(CLI::ExistingFile);
  c_eval->add_option("--data", ev.data)->required()->check(CLI::ExistingDirectory);
  c_eval->add_option("--ac", ev.ac, "evaluate with the classifier of another checkpoint");
  c_eval->add_option("--split", ev.split)->check(CLI::IsMember({"train", "val", "test"}));
  c_eval->add_option("--synthetic", ev.synthetic_n, "synthetic images to score (-1: split size)");
  c_eval->add_option("--seed", ev.seed);
  c_eval->add_option("--out", ev.out);

  GridArgs grid;
  auto* c_grid = app.add_subcommand("grid", "TR x TE interpolation montage for one latent");
  c_grid->add_option("--ckpt", grid.ckpt)->required()->check(CLI::ExistingFile);
  c_grid->add_option("--z-seed", grid.z_seed);
  c_grid->add_option("--tr", grid.tr, "comma separated TR values")->required()->delimiter(',');
  c_grid->add_option("--te", grid.te, "comma separated TE values")->required()->delimiter(',');
  c_grid->add_option("--orientation", grid.orientation);
  c_grid->add_option("--out", grid.out)->required();
  c_grid->add_option("--sidecar", grid.sidecar);

  TuringBuildArgs tb;
  auto* c_tb = app.add_subcommand("turing-build", "pack real and synthetic images into balanced grids");
  c_tb->add_option("--real", tb.real, "dataset directory (test split) or list of refs")->required();
  c_tb->add_option("--synthetic", tb.synthetic)->required();
  c_tb->add_option("--n-per-class", tb.n_per_class);
  c_tb->add_option("--grid-size", tb.grid_size);
  c_tb->add_option("--seed", tb.seed);
  c_tb->add_option("--reader", tb.readers);
  c_tb->add_option("--out", tb.out)->required();

  TuringSubmitArgs ts;
  auto* c_ts = app.add_subcommand("turing-submit", "record one reader's labels for a grid");
  c_ts->add_option("--session", ts.session)->required()->check(CLI::ExistingFile);
  c_ts->add_option("--reader", ts.reader)->required();
  c_ts->add_option("--grid", ts.grid)->required();
  c_ts->add_option("--labels", ts.labels, "comma separated real/synthetic")->required();

  std::string report_session, report_out;
  auto* c_tr = app.add_subcommand("turing-report", "confusion matrices, accuracies and inter-reader agreement");
  c_tr->add_option("--session", report_session)->required()->check(CLI::ExistingFile);
  c_tr->add_option("--out", report_out);

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "HTTP/JSON inference service");
  c_serve->add_option("--ckpt", serve.ckpt)->check(CLI::ExistingFile);
  c_serve->add_option("--host", serve.host);
  c_serve->add_option("--port", serve.port);
  c_serve->add_option("--max-count", serve.max_count);
  c_serve->add_option("--sessions", serve.sessions, "directory for Turing session files");
  c_serve->add_option("--watch", serve.watch_seconds, "poll the checkpoint every N seconds and hot-reload");

  std::string cfg_path, cfg_preset = "desk";
  auto* c_cfg = app.add_subcommand("config", "print the effective configuration");
  c_cfg->add_option("--config", cfg_path)->check(CLI::ExistingFile);
  c_cfg->add_option("--preset", cfg_preset)->check(CLI::IsMember({"desk", "paper"}));

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) torch::set_num_threads(threads);

  try {
    if (*c_ingest) return run_ingest(ingest);
    if (*c_phantom) return run_phantom(phantom);
    if (*c_tac) return run_train_ac(tac);
    if (*c_tgan) return run_train_gan(tgan);
    if (*c_eval) return run_eval(ev);
    if (*c_grid) return run_grid(grid);
    if (*c_tb) return run_turing_build(tb);
    if (*c_ts) return run_turing_submit(ts);
    if (*c_tr) return run_turing_report(report_session, report_out);
    if (*c_serve) return run_serve(serve);
    if (*c_cfg) {
      std::cout << format_run_config(run_config(cfg_path, cfg_preset));
      return 0;
    }
  } catch (const Error& e) {
    log_error("{}{}: {}", to_string(e.code()), e.field().empty() ? "" : " (" + e.field() + ")", e.what());
    return 2;
  } catch (const std::exception& e) {
    log_error("{}", e.what());
    return 1;
  }
  return 0;
}
