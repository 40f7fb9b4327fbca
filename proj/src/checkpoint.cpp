#include "hsnd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

namespace hsnd {

namespace {

using nlohmann::json;

json target_to_json(const TargetNetworkSpec& t) {
  return json{{"kind", to_string(t.kind)},
              {"embedding_l", t.embedding_l},
              {"hidden_widths", t.hidden_widths},
              {"omega0", t.omega0},
              {"omega_i", t.omega_i},
              {"variant", to_string(t.variant)},
              {"shared_layer_count", t.shared_layer_count}};
}

TargetNetworkSpec target_from_json(const json& j) {
  TargetNetworkSpec t;
  t.kind = network_kind_from_string(j.at("kind").get<std::string>());
  t.embedding_l = j.at("embedding_l").get<std::size_t>();
  t.hidden_widths = j.at("hidden_widths").get<std::vector<std::size_t>>();
  t.omega0 = j.at("omega0").get<double>();
  t.omega_i = j.at("omega_i").get<double>();
  t.variant = variant_from_string(j.at("variant").get<std::string>());
  t.shared_layer_count = j.at("shared_layer_count").get<std::size_t>();
  return t;
}

json hyper_to_json(const HypernetworkSpec& h) {
  return json{{"input_len", h.input_len},
              {"encoder_strides", h.encoder_strides},
              {"encoder_channels", h.encoder_channels},
              {"head_hidden", h.head_hidden},
              {"target", target_to_json(h.target)}};
}

HypernetworkSpec hyper_from_json(const json& j) {
  HypernetworkSpec h;
  h.input_len = j.at("input_len").get<std::size_t>();
  h.encoder_strides = j.at("encoder_strides").get<std::vector<std::size_t>>();
  h.encoder_channels = j.at("encoder_channels").get<std::vector<std::size_t>>();
  h.head_hidden = j.at("head_hidden").get<std::vector<std::size_t>>();
  h.target = target_from_json(j.at("target"));
  return h;
}

json header_json(const CheckpointMeta& meta, const ParamStore<float>& params) {
  json header{{"version", 1},
              {"kind", meta.kind},
              {"epoch", meta.epoch},
              {"seed", meta.seed},
              {"sample_rate", meta.sample_rate},
              {"train_len", meta.train_len},
              {"target", target_to_json(meta.target)}};
  if (meta.is_hypernetwork()) header["hyper"] = hyper_to_json(meta.hyper);
  json plist = json::array();
  for (const auto& p : params)
    plist.push_back(json{{"name", p.name}, {"shape", p.value.shape()}});
  header["params"] = plist;
  return header;
}

struct ParsedHeader {
  CheckpointMeta meta;
  std::vector<std::pair<std::string, std::vector<std::size_t>>> params;
  std::uint64_t payload_floats = 0;
};

ParsedHeader read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[5];
  if (!in.read(magic, 5) || std::memcmp(magic, kCheckpointMagic, 5) != 0)
    throw FormatError("checkpoint: bad magic in " + path.string());
  std::uint8_t len_bytes[4];
  if (!in.read(reinterpret_cast<char*>(len_bytes), 4))
    throw FormatError("checkpoint: truncated header length in " + path.string());
  const std::uint32_t len = static_cast<std::uint32_t>(len_bytes[0]) |
                            (static_cast<std::uint32_t>(len_bytes[1]) << 8) |
                            (static_cast<std::uint32_t>(len_bytes[2]) << 16) |
                            (static_cast<std::uint32_t>(len_bytes[3]) << 24);
  std::string text(len, '\0');
  if (!in.read(text.data(), len))
    throw FormatError("checkpoint: truncated header in " + path.string());

  json header;
  try {
    header = json::parse(text);
  } catch (const json::exception& e) {
    throw FormatError("checkpoint: invalid header json: " + std::string(e.what()));
  }
  if (header.at("version").get<int>() != 1)
    throw FormatError("checkpoint: unsupported version in " + path.string());

  ParsedHeader parsed;
  parsed.meta.kind = header.at("kind").get<std::string>();
  if (parsed.meta.kind != "hypernetwork" && parsed.meta.kind != "inr")
    throw FormatError("checkpoint: unknown kind '" + parsed.meta.kind + "'");
  parsed.meta.epoch = header.at("epoch").get<std::uint64_t>();
  parsed.meta.seed = header.at("seed").get<std::uint64_t>();
  parsed.meta.sample_rate = header.at("sample_rate").get<int>();
  parsed.meta.train_len = header.at("train_len").get<std::uint64_t>();
  parsed.meta.target = target_from_json(header.at("target"));
  if (parsed.meta.is_hypernetwork())
    parsed.meta.hyper = hyper_from_json(header.at("hyper"));

  for (const auto& p : header.at("params")) {
    auto name = p.at("name").get<std::string>();
    auto shape = p.at("shape").get<std::vector<std::size_t>>();
    parsed.payload_floats += Tensor<float>::numel_of(shape);
    parsed.params.emplace_back(std::move(name), std::move(shape));
  }
  return parsed;
}

}  // namespace

void save_checkpoint(const CheckpointMeta& meta, const ParamStore<float>& params,
                     const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path.string());

  const std::string header = header_json(meta, params).dump();
  out.write(kCheckpointMagic, 5);
  const auto len = static_cast<std::uint32_t>(header.size());
  const char len_bytes[4] = {
      static_cast<char>(len & 0xFF), static_cast<char>((len >> 8) & 0xFF),
      static_cast<char>((len >> 16) & 0xFF), static_cast<char>((len >> 24) & 0xFF)};
  out.write(len_bytes, 4);
  out.write(header.data(), static_cast<std::streamsize>(header.size()));

  static_assert(sizeof(float) == 4);
  for (const auto& p : params)
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.numel() * 4));
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

CheckpointMeta load_checkpoint_meta(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  return read_header(in, path).meta;
}

CheckpointMeta load_checkpoint_into(const std::filesystem::path& path,
                                    ParamStore<float>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  ParsedHeader parsed = read_header(in, path);

  if (parsed.params.size() != params.size())
    throw FormatError("checkpoint: parameter count mismatch (header declares " +
                      std::to_string(parsed.params.size()) + ", expected " +
                      std::to_string(params.size()) + ")");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (parsed.params[i].first != params[i].name ||
        parsed.params[i].second != params[i].value.shape())
      throw FormatError("checkpoint: parameter mismatch at '" + params[i].name + "'");
  }

  for (auto& p : params) {
    if (!in.read(reinterpret_cast<char*>(p.value.data()),
                 static_cast<std::streamsize>(p.value.numel() * 4)))
      throw FormatError("checkpoint: payload truncated in " + path.string());
  }
  char extra;
  if (in.read(&extra, 1))
    throw FormatError("checkpoint: trailing bytes in " + path.string());
  return parsed.meta;
}

ParamStore<float> make_inr_param_store(const TargetNetworkSpec& spec) {
  ParamStore<float> store;
  store.add("theta", Tensor<float>({make_layout(spec).total}));
  const std::size_t n_shared = shared_tensor_layers(spec);
  const auto dims = spec.layer_dims();
  for (std::size_t l = 0; l < n_shared; ++l) {
    store.add("shared" + std::to_string(l) + ".W",
              Tensor<float>({dims[l].second, dims[l].first}));
    store.add("shared" + std::to_string(l) + ".b", Tensor<float>({dims[l].second}));
  }
  return store;
}

}  // namespace hsnd
