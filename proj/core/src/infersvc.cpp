#include "mrsynth/infersvc.hpp"

#include <regex>

#include "httplib.h"
#include "mrsynth/evaluation.hpp"
#include "mrsynth/image_io.hpp"
#include "mrsynth/rng.hpp"

namespace mrsynth {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kRange:
    case ErrorCode::kEncoding:
    case ErrorCode::kSchema:
    case ErrorCode::kDomain:
    case ErrorCode::kShape:
    case ErrorCode::kBalance:
      return 422;
    case ErrorCode::kParse: return 400;
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kIncomplete: return 409;
    case ErrorCode::kUnavailable: return 503;
    default: return 500;
  }
}

nlohmann::json error_body(const Error& e) {
  return {{"error", to_string(e.code())},
          {"field", e.field().empty() ? nlohmann::json(nullptr) : nlohmann::json(e.field())},
          {"message", e.what()}};
}

std::string model_version(const LoadedModel& m) {
  return m.sha256.substr(0, 16) + "@" + std::to_string(m.meta.step());
}

// ---------------------------------------------------------------------------

TuringStore::TuringStore(std::optional<std::filesystem::path> dir) : dir_(std::move(dir)) {
  if (!dir_) return;
  std::filesystem::create_directories(*dir_);
  for (const auto& entry : std::filesystem::directory_iterator(*dir_))
    if (entry.path().extension() == ".json") {
      auto s = load_session(entry.path());
      sessions_[s.id] = std::move(s);
    }
}

void TuringStore::persist(const TuringSession& s) const {
  if (dir_) save_session(*dir_ / (s.id + ".json"), s);
}

std::string TuringStore::add(TuringSession session) {
  std::lock_guard lock(mu_);
  if (session.id.empty()) throw Error(ErrorCode::kSchema, "session id must not be empty", "id");
  // Keep ids unique when the same pools and seed are submitted twice.
  const auto base = session.id;
  for (int k = 2; sessions_.count(session.id); ++k) session.id = base + "-" + std::to_string(k);
  persist(session);
  const auto id = session.id;
  sessions_[id] = std::move(session);
  return id;
}

TuringSession TuringStore::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::kNotFound, "no Turing session " + id, "session");
  return it->second;
}

SubmitOutcome TuringStore::submit(const std::string& id, const std::string& reader, std::size_t grid,
                                  const std::vector<TuringLabel>& labels) {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::kNotFound, "no Turing session " + id, "session");
  auto outcome = submit_grid_labels(it->second, reader, grid, labels);
  if (outcome.accepted) persist(it->second);
  return outcome;
}

TuringReport TuringStore::report(const std::string& id) const { return turing_analytics(get(id)); }

// ---------------------------------------------------------------------------

namespace {

nlohmann::json png16_json(const Image& img) {
  return {{"format", "png-gray16"},
          {"width", img.cols()},
          {"height", img.rows()},
          {"data", base64_encode(encode_png_gray16(img))}};
}

Image to_image(const torch::Tensor& t) {
  auto c = t.to(torch::kFloat).contiguous();
  const auto rows = static_cast<int>(c.size(-2));
  const auto cols = static_cast<int>(c.size(-1));
  const float* p = c.data_ptr<float>();
  return Image(rows, cols, std::vector<float>(p, p + static_cast<std::size_t>(rows) * cols));
}

void require_object(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCode::kSchema, "request body must be a JSON object", "body");
}

std::uint64_t seed_of(const nlohmann::json& req) {
  if (!req.contains("seed") || req.at("seed").is_null()) return 0;
  const auto& s = req.at("seed");
  if (!s.is_number_integer() || (s.is_number_integer() && !s.is_number_unsigned() && s.get<std::int64_t>() < 0))
    throw Error(ErrorCode::kSchema, "seed must be a non-negative integer", "seed");
  return s.get<std::uint64_t>();
}

/// Explicit latent or one seeded latent per image; `count` rows.
std::vector<float> latents_of(const nlohmann::json& req, std::size_t dim, std::size_t count) {
  const bool has_latent = req.contains("latent") && !req.at("latent").is_null();
  const bool has_seed = req.contains("seed") && !req.at("seed").is_null();
  if (has_latent && has_seed) throw Error(ErrorCode::kSchema, "give either seed or latent, not both", "latent");
  if (!has_latent) return latent_from_seed(seed_of(req), dim, count);
  const auto& l = req.at("latent");
  if (!l.is_array() || l.size() != dim)
    throw Error(ErrorCode::kSchema, "latent must be an array of " + std::to_string(dim) + " numbers", "latent");
  if (count != 1) throw Error(ErrorCode::kSchema, "an explicit latent requires count 1", "count");
  std::vector<float> out;
  for (const auto& v : l) {
    if (!v.is_number()) throw Error(ErrorCode::kSchema, "latent entries must be numbers", "latent");
    const auto x = v.get<double>();
    if (!std::isfinite(x)) throw Error(ErrorCode::kRange, "latent entries must be finite", "latent");
    out.push_back(static_cast<float>(x));
  }
  return out;
}

ConditionVector condition_of(const nlohmann::json& req, const ConditionSpace& space) {
  if (!req.contains("condition")) throw Error(ErrorCode::kSchema, "missing condition", "condition");
  try {
    auto c = req.at("condition").get<ConditionVector>();
    normalize_condition(c, space);
    return c;
  } catch (const Error& e) {
    throw Error(e.code(), e.what(), e.field().empty() || e.field() == "condition" ? "condition" : "condition." + e.field());
  }
}

std::vector<double> axis_values(const nlohmann::json& req, const char* key, const Range& range, std::size_t max) {
  if (!req.contains(key) || !req.at(key).is_array())
    throw Error(ErrorCode::kSchema, std::string(key) + " must be an array of numbers", key);
  const auto& a = req.at(key);
  if (a.empty() || a.size() > max)
    throw Error(ErrorCode::kRange, std::string(key) + " must hold 1.." + std::to_string(max) + " values", key);
  std::vector<double> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto field = std::string(key) + "[" + std::to_string(i) + "]";
    if (!a[i].is_number()) throw Error(ErrorCode::kSchema, field + " is not a number", field);
    const auto v = a[i].get<double>();
    if (!range.contains(v)) throw Error(ErrorCode::kRange, field + " outside configured range", field);
    out.push_back(v);
  }
  return out;
}

std::vector<TuringPoolItem> pool_of(const nlohmann::json& req, const char* key) {
  if (!req.contains(key) || !req.at(key).is_array())
    throw Error(ErrorCode::kSchema, std::string(key) + " must be an array", key);
  std::vector<TuringPoolItem> out;
  for (const auto& item : req.at(key)) {
    if (item.is_string()) {
      out.push_back({item.get<std::string>(), std::nullopt});
    } else if (item.is_object() && item.contains("ref") && item.at("ref").is_string()) {
      TuringPoolItem p{item.at("ref").get<std::string>(), std::nullopt};
      if (item.contains("condition")) p.condition = item.at("condition").get<ConditionVector>();
      out.push_back(std::move(p));
    } else {
      throw Error(ErrorCode::kSchema, std::string(key) + " items must be refs or {ref, condition}", key);
    }
  }
  return out;
}

std::size_t size_field(const nlohmann::json& req, const char* key, std::size_t fallback) {
  if (!req.contains(key)) return fallback;
  const auto& v = req.at(key);
  if (!v.is_number_unsigned()) throw Error(ErrorCode::kSchema, std::string(key) + " must be a non-negative integer", key);
  return v.get<std::size_t>();
}

}  // namespace

InferenceService::InferenceService(ServiceConfig cfg) : cfg_(std::move(cfg)), store_(cfg_.session_dir) {}

void InferenceService::load_model(const std::filesystem::path& checkpoint) {
  set_model(std::make_shared<LoadedModel>(load_checkpoint(checkpoint)));
}

void InferenceService::set_model(std::shared_ptr<LoadedModel> model) {
  std::lock_guard lock(model_mu_);
  model_ = std::move(model);
}

std::shared_ptr<LoadedModel> InferenceService::model() const {
  std::lock_guard lock(model_mu_);
  return model_;
}

std::shared_ptr<LoadedModel> InferenceService::require_model() const {
  auto m = model();
  if (!m) throw Error(ErrorCode::kUnavailable, "no model loaded");
  return m;
}

nlohmann::json InferenceService::generate(const nlohmann::json& req) const {
  require_object(req);
  auto m = require_model();
  const auto& space = m->meta.space;
  const auto condition = condition_of(req, space);
  if (req.contains("count") && !req.at("count").is_number_integer())
    throw Error(ErrorCode::kSchema, "count must be an integer", "count");
  const auto count = req.value("count", std::int64_t{1});
  if (count < 1 || count > static_cast<std::int64_t>(cfg_.max_count))
    throw Error(ErrorCode::kRange, "count must be in 1.." + std::to_string(cfg_.max_count), "count");
  const auto dim = static_cast<std::size_t>(m->meta.net.latent_dim);
  auto z = latents_of(req, dim, static_cast<std::size_t>(count));
  auto latents = torch::from_blob(z.data(), {count, static_cast<std::int64_t>(dim)}, torch::kFloat).clone();
  auto images = generate_images(m->generator, latents, std::vector<ConditionVector>(count, condition), space);
  auto pred = predict(m->ac, images);
  auto probs = pred.orientation.to(torch::kDouble).contiguous();
  const auto k = probs.size(1);

  nlohmann::json out_images = nlohmann::json::array();
  nlohmann::json readback = nlohmann::json::array();
  for (std::int64_t i = 0; i < count; ++i) {
    out_images.push_back(png16_json(to_image(images[i][0])));
    const double* p = probs.data_ptr<double>() + i * k;
    readback.push_back(decode_prediction(pred.tr_unit[i].item<double>(), pred.te_unit[i].item<double>(),
                                         std::vector<double>(p, p + k), space));
  }
  return {{"model_version", model_version(*m)},
          {"condition", condition},
          {"count", count},
          {"images", out_images},
          {"readback", readback}};
}

nlohmann::json InferenceService::grid(const nlohmann::json& req) const {
  require_object(req);
  auto m = require_model();
  const auto& space = m->meta.space;
  const auto tr = axis_values(req, "tr_values", space.tr_range(), cfg_.max_grid_axis);
  const auto te = axis_values(req, "te_values", space.te_range(), cfg_.max_grid_axis);
  if (!req.contains("orientation") || !req.at("orientation").is_string())
    throw Error(ErrorCode::kSchema, "orientation must be a string", "orientation");
  const auto orientation = req.at("orientation").get<std::string>();
  if (!space.orientation_index(orientation))
    throw Error(ErrorCode::kRange, "unknown orientation '" + orientation + "'", "orientation");
  auto z = latents_of(req, static_cast<std::size_t>(m->meta.net.latent_dim), 1);
  auto g = render_interpolation_grid(m->generator, m->ac, z, tr, te, orientation, space);
  nlohmann::json tiles = nlohmann::json::array();
  for (const auto& t : g.tiles) tiles.push_back(png16_json(t));
  return {{"model_version", model_version(*m)},
          {"rows", tr.size()},
          {"cols", te.size()},
          {"montage",
           {{"format", "png-rgb8"},
            {"width", g.montage.cols},
            {"height", g.montage.rows},
            {"data", base64_encode(encode_png_rgb8(g.montage))}}},
          {"tiles", tiles},
          {"sidecar", g.sidecar()}};
}

nlohmann::json InferenceService::model_info() const {
  auto m = require_model();
  const auto& net = m->meta.net;
  const auto final_state = FadeState::stable(net.final_resolution);
  return {{"model_version", model_version(*m)},
          {"checkpoint_sha256", m->sha256},
          {"format_version", m->meta.format_version},
          {"step", m->meta.step()},
          {"images_seen", m->meta.trainer ? m->meta.trainer->images_total : 0},
          {"net",
           {{"latent_dim", net.latent_dim},
            {"base_resolution", net.base_resolution},
            {"final_resolution", net.final_resolution},
            {"condition_dim", net.condition_dim},
            {"ac_backbone", to_string(net.ac_backbone)},
            {"generator_parameters", m->generator->active_parameter_count(final_state)}}},
          {"space", m->meta.space},
          {"limits", {{"max_count", cfg_.max_count}, {"max_grid_axis", cfg_.max_grid_axis}}}};
}

nlohmann::json InferenceService::create_session(const nlohmann::json& req) {
  require_object(req);
  TuringSession session;
  if (req.contains("session")) {
    session = req.at("session").get<TuringSession>();
  } else {
    const auto real = pool_of(req, "real");
    const auto synth = pool_of(req, "synthetic");
    const auto n = size_field(req, "n_per_class", std::min(real.size(), synth.size()));
    session = build_turing_session(real, synth, n, seed_of(req), size_field(req, "grid_size", 6));
  }
  if (req.contains("readers")) {
    if (!req.at("readers").is_array()) throw Error(ErrorCode::kSchema, "readers must be an array of ids", "readers");
    for (const auto& r : req.at("readers")) {
      if (!r.is_string()) throw Error(ErrorCode::kSchema, "readers must be an array of ids", "readers");
      session.register_reader(r.get<std::string>());
    }
  }
  const auto id = store_.add(session);
  return {{"id", id},
          {"grid_count", session.grids.size()},
          {"grid_size", session.grid_size},
          {"readers", session.readers},
          {"warnings", session.warnings}};
}

nlohmann::json InferenceService::session_grid(const std::string& id, std::size_t grid) const {
  const auto s = store_.get(id);
  if (grid >= s.grids.size()) throw Error(ErrorCode::kNotFound, "grid " + std::to_string(grid) + " does not exist", "grid");
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : s.grids[grid].items) {
    nlohmann::json item = {{"ref", it.ref}};
    if (it.condition) item["condition"] = *it.condition;
    items.push_back(item);
  }
  return {{"session", id}, {"grid", grid}, {"grid_count", s.grids.size()}, {"items", items}};
}

nlohmann::json InferenceService::submit_labels(const std::string& id, std::size_t grid, const nlohmann::json& req) {
  require_object(req);
  if (!req.contains("reader") || !req.at("reader").is_string())
    throw Error(ErrorCode::kSchema, "reader must be a string", "reader");
  if (!req.contains("labels") || !req.at("labels").is_array())
    throw Error(ErrorCode::kSchema, "labels must be an array", "labels");
  std::vector<TuringLabel> labels;
  for (const auto& l : req.at("labels")) {
    if (!l.is_string()) throw Error(ErrorCode::kSchema, "labels must be 'real' or 'synthetic'", "labels");
    labels.push_back(turing_label_from_string(l.get<std::string>()));
  }
  const auto outcome = store_.submit(id, req.at("reader").get<std::string>(), grid, labels);
  if (!outcome.accepted) throw Error(ErrorCode::kBalance, outcome.reason, "labels");
  return {{"accepted", true}, {"session", id}, {"grid", grid}};
}

nlohmann::json InferenceService::session_report(const std::string& id) const {
  nlohmann::json out = store_.report(id);
  out["session"] = id;
  return out;
}

HttpResponse InferenceService::handle(const std::string& method, const std::string& path, const std::string& body) {
  static const std::regex grid_re(R"(^/turing/sessions/([A-Za-z0-9_.-]+)/grids/([0-9]+)$)");
  static const std::regex labels_re(R"(^/turing/sessions/([A-Za-z0-9_.-]+)/grids/([0-9]+)/labels$)");
  static const std::regex report_re(R"(^/turing/sessions/([A-Za-z0-9_.-]+)/report$)");
  auto parse = [&] {
    try {
      return body.empty() ? nlohmann::json::object() : nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParse, std::string("request body is not valid JSON: ") + e.what(), "body");
    }
  };
  auto index = [](const std::string& s) {
    try {
      return static_cast<std::size_t>(std::stoull(s));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kNotFound, "grid index out of range", "grid");
    }
  };
  try {
    std::smatch m;
    nlohmann::json out;
    if (method == "POST" && path == "/generate") {
      out = generate(parse());
    } else if (method == "POST" && path == "/grid") {
      out = grid(parse());
    } else if (method == "GET" && path == "/model/info") {
      out = model_info();
    } else if (method == "POST" && path == "/turing/sessions") {
      out = create_session(parse());
    } else if (method == "GET" && std::regex_match(path, m, grid_re)) {
      out = session_grid(m[1], index(m[2]));
    } else if (method == "POST" && std::regex_match(path, m, labels_re)) {
      out = submit_labels(m[1], index(m[2]), parse());
    } else if (method == "GET" && std::regex_match(path, m, report_re)) {
      out = session_report(m[1]);
    } else {
      throw Error(ErrorCode::kNotFound, "no route for " + method + " " + path);
    }
    return {200, out.dump()};
  } catch (const Error& e) {
    return {http_status(e.code()), error_body(e).dump()};
  } catch (const nlohmann::json::exception& e) {
    return {422, error_body(Error(ErrorCode::kSchema, e.what())).dump()};
  } catch (const std::exception& e) {
    return {500, nlohmann::json{{"error", "internal_error"}, {"field", nullptr}, {"message", e.what()}}.dump()};
  }
}

// ---------------------------------------------------------------------------

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(InferenceService& service) : impl_(std::make_unique<Impl>()) {
  auto dispatch = [&service](const httplib::Request& req, httplib::Response& res) {
    auto out = service.handle(req.method, req.path, req.body);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  // The explorer UI is usually served from another origin.
  impl_->server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  impl_->server.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  impl_->server.Get(R"(/.*)", dispatch);
  impl_->server.Post(R"(/.*)", dispatch);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace mrsynth
