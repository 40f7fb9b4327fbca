#include "hsnd/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "hsnd/error.hpp"

namespace hsnd {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: bad numeric value for " + key + ": '" + v + "'");
  }
}

long long parse_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config: bad integer value for " + key + ": '" + v + "'");
  return out;
}

std::size_t parse_size(const std::string& key, const std::string& v) {
  const long long i = parse_int(key, v);
  if (i < 0) throw ConfigError("config: " + key + " must be >= 0");
  return static_cast<std::size_t>(i);
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: bad boolean value for " + key + ": '" + v + "'");
}

std::vector<std::size_t> parse_size_list(const std::string& key,
                                         const std::string& v) {
  std::vector<std::size_t> out;
  std::istringstream in(v);
  std::string tok;
  while (in >> tok) out.push_back(parse_size(key, tok));
  if (out.empty()) throw ConfigError("config: " + key + " needs at least one value");
  return out;
}

using Handler = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Handler>& schema() {
  static const std::map<std::string, Handler> table = {
      {"target.kind",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.target.kind = network_kind_from_string(v);
       }},
      {"target.embedding_l",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.target.embedding_l = parse_size(k, v);
       }},
      {"target.hidden_widths",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.target.hidden_widths = parse_size_list(k, v);
       }},
      {"target.omega0",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.target.omega0 = parse_real(k, v);
       }},
      {"target.omega_i",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.target.omega_i = parse_real(k, v);
       }},
      {"target.variant",
       [](RunConfig& c, const std::string&, const std::string& v) {
         c.target.variant = variant_from_string(v);
       }},
      {"target.shared_layers",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.target.shared_layer_count = parse_size(k, v);
       }},

      {"hyper.input_len",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.hyper.input_len = parse_size(k, v);
       }},
      {"hyper.encoder_strides",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.hyper.encoder_strides = parse_size_list(k, v);
       }},
      {"hyper.encoder_channels",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.hyper.encoder_channels = parse_size_list(k, v);
       }},
      {"hyper.head_hidden",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.hyper.head_hidden = parse_size_list(k, v);
       }},

      {"loss.lambda_t",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.loss.lambda_t = parse_real(k, v);
       }},
      {"loss.lambda_f",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.loss.lambda_f = parse_real(k, v);
       }},
      {"loss.fft_sizes",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.loss.stft.fft_sizes = parse_size_list(k, v);
       }},
      {"loss.n_mels",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.loss.stft.n_mels = parse_size(k, v);
       }},
      {"loss.weight_p",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.loss.weighting.p = parse_real(k, v);
       }},
      {"loss.anneal_epochs",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.loss.weighting.anneal_epochs = parse_size(k, v);
       }},
      {"loss.epsilon",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.loss.epsilon = parse_real(k, v);
       }},

      {"train.batch_size",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.batch_size = parse_size(k, v);
       }},
      {"train.epochs",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.epochs = parse_size(k, v);
       }},
      {"train.samples_per_epoch",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.samples_per_epoch = parse_size(k, v);
       }},
      {"train.max_lr",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.max_lr = parse_real(k, v);
       }},
      {"train.pct_warmup",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.schedule.pct_warmup = parse_real(k, v);
       }},
      {"train.div_initial",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.schedule.div_initial = parse_real(k, v);
       }},
      {"train.div_final",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.schedule.div_final = parse_real(k, v);
       }},
      {"train.weight_decay",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.weight_decay = parse_real(k, v);
       }},
      {"train.seed",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.seed = static_cast<std::uint64_t>(parse_int(k, v));
       }},
      {"train.checkpoint_every",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.checkpoint_every = parse_size(k, v);
       }},
      {"train.fit_steps",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.fit_steps = parse_size(k, v);
       }},
      {"train.fit_loss",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         if (v == "mse")
           c.train.fit_use_combined_loss = false;
         else if (v == "combined")
           c.train.fit_use_combined_loss = true;
         else
           throw ConfigError("config: " + k + " must be 'mse' or 'combined'");
       }},
      {"train.divergence_factor",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.divergence_factor = parse_real(k, v);
       }},

      {"augment.crop_length",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.augment.crop_length = parse_size(k, v);
       }},
      {"augment.dequantize_bits",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.augment.dequantize_bits = static_cast<int>(parse_int(k, v));
       }},
      {"augment.phase_mangle",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.augment.phase_mangle_enabled = parse_bool(k, v);
       }},
      {"augment.allpass_min",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.augment.allpass_min = parse_real(k, v);
       }},
      {"augment.allpass_max",
       [](RunConfig& c, const std::string& k, const std::string& v) {
         c.train.augment.allpass_max = parse_real(k, v);
       }},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config_text(const std::string& text) {
  RunConfig cfg;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = schema().find(key);
    if (it == schema().end())
      throw ConfigError("config: unknown key '" + key + "' on line " +
                        std::to_string(lineno));
    if (!seen.insert(key).second)
      throw ConfigError("config: duplicate key '" + key + "' on line " +
                        std::to_string(lineno));
    it->second(cfg, key, value);
  }

  cfg.hyper.target = cfg.target;
  cfg.target.validate();
  cfg.hyper.validate();
  cfg.train.validate();
  return cfg;
}

RunConfig parse_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config_text(buf.str());
}

std::string default_config_text() {
  return
      "# target network\n"
      "target.kind = fmlp\n"
      "target.embedding_l = 10\n"
      "target.hidden_widths = 64 64 64 64 64\n"
      "target.omega0 = 2000\n"
      "target.omega_i = 30\n"
      "target.variant = standard\n"
      "target.shared_layers = 0\n"
      "\n"
      "# hypernetwork\n"
      "hyper.input_len = 32768\n"
      "hyper.encoder_strides = 2 4 5 8\n"
      "hyper.encoder_channels = 32 32 32 32\n"
      "hyper.head_hidden = 400 768 768 768 768 768 400\n"
      "\n"
      "# loss\n"
      "loss.lambda_t = 1\n"
      "loss.lambda_f = 1\n"
      "loss.fft_sizes = 2048 1024 512 256 128\n"
      "loss.n_mels = 128\n"
      "loss.weight_p = 0\n"
      "loss.anneal_epochs = 500\n"
      "loss.epsilon = 1e-5\n"
      "\n"
      "# training\n"
      "train.batch_size = 16\n"
      "train.epochs = 2500\n"
      "train.samples_per_epoch = 10000\n"
      "train.max_lr = 0\n"
      "train.pct_warmup = 0.3\n"
      "train.div_initial = 25\n"
      "train.div_final = 1e4\n"
      "train.weight_decay = 0.01\n"
      "train.seed = 0\n"
      "train.checkpoint_every = 50\n"
      "train.fit_steps = 5000\n"
      "train.fit_loss = mse\n"
      "train.divergence_factor = 1000\n"
      "\n"
      "# augmentation\n"
      "augment.crop_length = 0\n"
      "augment.dequantize_bits = 16\n"
      "augment.phase_mangle = true\n"
      "augment.allpass_min = -0.9\n"
      "augment.allpass_max = 0.9\n";
}

}  // namespace hsnd
