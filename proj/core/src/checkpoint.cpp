#include "mrsynth/checkpoint.hpp"

#include "mrsynth/config.hpp"
#include "mrsynth/error.hpp"
#include "mrsynth/image_io.hpp"

namespace mrsynth {

void to_json(nlohmann::json& j, const CheckpointMeta& m) {
  j = {{"net", m.net}, {"space", m.space}, {"train", m.train}, {"loss", m.loss}, {"schedule", m.schedule}};
  j["trainer"] = m.trainer ? nlohmann::json(*m.trainer) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, CheckpointMeta& m) {
  m.net = j.at("net").get<NetConfig>();
  m.space = j.at("space").get<ConditionSpace>();
  m.train = j.at("train").get<TrainConfig>();
  m.loss = j.at("loss").get<GanLossConfig>();
  m.schedule = j.at("schedule").get<std::vector<ProgressivePhase>>();
  if (j.contains("trainer") && !j.at("trainer").is_null())
    m.trainer = j.at("trainer").get<TrainerState>();
  else
    m.trainer.reset();
}

void save_checkpoint(const std::filesystem::path& path, const CheckpointMeta& meta, Generator& generator,
                     Critic& critic, AuxClassifier& ac, const TrainingBlobs* blobs) {
  torch::serialize::OutputArchive archive;
  archive.write("format", c10::IValue(std::string(kCheckpointFormat)));
  archive.write("format_version", c10::IValue(meta.format_version));
  archive.write("meta", c10::IValue(nlohmann::json(meta).dump()));
  auto nested = [&](const char* key, auto&& saver) {
    torch::serialize::OutputArchive sub;
    saver(sub);
    archive.write(key, sub);
  };
  nested("generator", [&](auto& a) { generator->save(a); });
  nested("critic", [&](auto& a) { critic->save(a); });
  nested("ac", [&](auto& a) { ac->save(a); });
  if (blobs) {
    if (blobs->generator_opt) nested("generator_opt", [&](auto& a) { blobs->generator_opt->save(a); });
    if (blobs->critic_opt) nested("critic_opt", [&](auto& a) { blobs->critic_opt->save(a); });
    if (blobs->rng_state.defined()) archive.write("rng_state", blobs->rng_state);
    if (blobs->data_order.defined()) archive.write("data_order", blobs->data_order);
  }
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  try {
    archive.save_to(tmp.string());
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::kIo, "cannot write checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

CheckpointMeta read_header(torch::serialize::InputArchive& archive, const std::filesystem::path& path) {
  c10::IValue format;
  c10::IValue version;
  c10::IValue meta;
  if (!archive.try_read("format", format) || !format.isString() || format.toStringRef() != kCheckpointFormat)
    throw Error(ErrorCode::kCorrupt, path.string() + " is not an mrsynth checkpoint");
  if (!archive.try_read("format_version", version) || !version.isInt())
    throw Error(ErrorCode::kCorrupt, path.string() + " lacks a format version");
  if (version.toInt() != kCheckpointFormatVersion)
    throw Error(ErrorCode::kVersion, "checkpoint format version " + std::to_string(version.toInt()) +
                                         " is not supported (expected " + std::to_string(kCheckpointFormatVersion) + ")",
                "format_version");
  if (!archive.try_read("meta", meta) || !meta.isString())
    throw Error(ErrorCode::kCorrupt, path.string() + " lacks metadata");
  try {
    auto m = nlohmann::json::parse(meta.toStringRef()).get<CheckpointMeta>();
    m.format_version = version.toInt();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kCorrupt, "checkpoint metadata unreadable: " + std::string(e.what()));
  }
}

void open_archive(torch::serialize::InputArchive& archive, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::kNotFound, "no checkpoint at " + path.string());
  try {
    archive.load_from(path.string());
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::kCorrupt, "cannot read checkpoint " + path.string() + ": " + e.what_without_backtrace());
  }
}

template <typename Loader>
void read_nested(torch::serialize::InputArchive& archive, const char* key, Loader&& loader) {
  torch::serialize::InputArchive sub;
  try {
    if (!archive.try_read(key, sub)) throw Error(ErrorCode::kCorrupt, std::string("checkpoint lacks ") + key);
    loader(sub);
  } catch (const c10::Error& e) {
    throw Error(ErrorCode::kCorrupt, std::string("checkpoint entry ") + key + ": " + e.what_without_backtrace());
  }
}

CheckpointMeta restore_into(torch::serialize::InputArchive& archive, const std::filesystem::path& path,
                            Generator& generator, Critic& critic, AuxClassifier& ac, TrainingBlobs* blobs) {
  auto meta = read_header(archive, path);
  if (!(meta.net == generator->config()) || !(meta.net == critic->config()) || !(meta.net == ac->config()))
    throw Error(ErrorCode::kConfig, "checkpoint network configuration differs from the target networks", "net");
  read_nested(archive, "generator", [&](auto& a) { generator->load(a); });
  read_nested(archive, "critic", [&](auto& a) { critic->load(a); });
  read_nested(archive, "ac", [&](auto& a) { ac->load(a); });
  if (blobs) {
    if (blobs->generator_opt) read_nested(archive, "generator_opt", [&](auto& a) { blobs->generator_opt->load(a); });
    if (blobs->critic_opt) read_nested(archive, "critic_opt", [&](auto& a) { blobs->critic_opt->load(a); });
    try {
      torch::Tensor t;
      if (archive.try_read("rng_state", t)) blobs->rng_state = t;
      torch::Tensor o;
      if (archive.try_read("data_order", o)) blobs->data_order = o;
    } catch (const c10::Error& e) {
      throw Error(ErrorCode::kCorrupt, std::string("checkpoint sampling state: ") + e.what_without_backtrace());
    }
  }
  return meta;
}

}  // namespace

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
  torch::serialize::InputArchive archive;
  open_archive(archive, path);
  return read_header(archive, path);
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  torch::serialize::InputArchive archive;
  open_archive(archive, path);
  auto header = read_header(archive, path);
  header.net.validate();
  LoadedModel out;
  out.generator = build_generator(header.net);
  out.critic = build_discriminator(header.net);
  out.ac = build_ac(header.net);
  out.meta = restore_into(archive, path, out.generator, out.critic, out.ac, nullptr);
  out.generator->eval();
  out.critic->eval();
  out.ac->eval();
  out.sha256 = sha256_hex(read_bytes(path));
  return out;
}

CheckpointMeta restore_checkpoint(const std::filesystem::path& path, Generator& generator, Critic& critic,
                                  AuxClassifier& ac, TrainingBlobs* blobs) {
  torch::serialize::InputArchive archive;
  open_archive(archive, path);
  return restore_into(archive, path, generator, critic, ac, blobs);
}

}  // namespace mrsynth
