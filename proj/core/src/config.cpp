#include "graphda/config.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <sstream>

#include "graphda/errors.hpp"
#include "graphda/io.hpp"

namespace graphda {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config: key '" + key + "' has malformed number '" +
                          value + "'");
  }
}

std::uint64_t parse_uint(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size() || v < 0) throw std::invalid_argument(value);
    return static_cast<std::uint64_t>(v);
  } catch (const std::exception&) {
    throw ValidationError("config: key '" + key +
                          "' has malformed nonnegative integer '" + value +
                          "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ValidationError("config: key '" + key + "' has malformed bool '" +
                        value + "'");
}

const char* const kKnownKeys[] = {
    "lambda1",       "lambda2_max",    "lambda3",          "eta0",
    "epochs",        "iters_per_epoch", "batch_size",      "weight_decay",
    "temperature",   "sample_sizes",   "layer_dims",       "alpha",
    "topk",          "n",              "seed",             "lambda2_clamp",
    "checkpoint_every", "diag_cap",
    "ablate_cl",     "ablate_gv",      "ablate_lv",        "ablate_da",
};

}  // namespace

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ValidationError("cannot open file: " + path.string());
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": expected 'key = value'");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": empty key");
    kv[key] = value;
  }
  return kv;
}

void write_key_values(const std::filesystem::path& path, const KeyValues& kv,
                      const std::string& header_comment) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  if (!header_comment.empty()) os << "# " << header_comment << "\n";
  for (const auto& [key, value] : kv) os << key << " = " << value << "\n";
}

std::vector<std::size_t> parse_size_list(const std::string& text) {
  const char delim = text.find('/') != std::string::npos ? '/' : ',';
  std::vector<std::size_t> out;
  std::string token;
  std::istringstream is(text);
  while (std::getline(is, token, delim)) {
    token = trim(token);
    if (token.empty())
      throw ValidationError("config: empty entry in list '" + text + "'");
    out.push_back(parse_uint("list", token));
  }
  if (out.empty())
    throw ValidationError("config: empty list '" + text + "'");
  return out;
}

TrainConfig config_from_kv(const KeyValues& kv, bool allow_unknown) {
  if (!allow_unknown) {
    for (const auto& [key, value] : kv) {
      (void)value;
      if (std::find_if(std::begin(kKnownKeys), std::end(kKnownKeys),
                       [&key](const char* k) { return key == k; }) ==
          std::end(kKnownKeys))
        throw ValidationError("config: unknown key '" + key + "'");
    }
  }
  TrainConfig c;
  auto get = [&kv](const char* key) -> const std::string* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto* v = get("lambda1")) c.lambda1 = parse_double("lambda1", *v);
  if (auto* v = get("lambda2_max"))
    c.lambda2_max = parse_double("lambda2_max", *v);
  if (auto* v = get("lambda3")) c.lambda3 = parse_double("lambda3", *v);
  if (auto* v = get("eta0")) c.eta0 = parse_double("eta0", *v);
  if (auto* v = get("epochs")) c.epochs = parse_uint("epochs", *v);
  if (auto* v = get("iters_per_epoch"))
    c.iters_per_epoch = parse_uint("iters_per_epoch", *v);
  if (auto* v = get("batch_size")) c.batch_size = parse_uint("batch_size", *v);
  if (auto* v = get("weight_decay"))
    c.weight_decay = parse_double("weight_decay", *v);
  if (auto* v = get("temperature"))
    c.temperature = parse_double("temperature", *v);
  if (auto* v = get("sample_sizes")) c.sample_sizes = parse_size_list(*v);
  if (auto* v = get("layer_dims")) c.layer_dims = parse_size_list(*v);
  if (auto* v = get("alpha")) c.alpha = parse_double("alpha", *v);
  if (auto* v = get("topk")) c.topk = parse_uint("topk", *v);
  if (auto* v = get("n")) c.n_labeled = parse_uint("n", *v);
  if (auto* v = get("seed")) c.seed = parse_uint("seed", *v);
  if (auto* v = get("lambda2_clamp"))
    c.lambda2_clamp = parse_bool("lambda2_clamp", *v);
  if (auto* v = get("checkpoint_every"))
    c.checkpoint_every = parse_uint("checkpoint_every", *v);
  if (auto* v = get("diag_cap")) c.diag_cap = parse_uint("diag_cap", *v);
  return c;
}

AblationFlags flags_from_kv(const KeyValues& kv) {
  AblationFlags f;
  auto get_bool = [&kv](const char* key) {
    auto it = kv.find(key);
    return it != kv.end() && parse_bool(key, it->second);
  };
  f.disable_contrastive = get_bool("ablate_cl");
  f.disable_global_view = get_bool("ablate_gv");
  f.disable_local_view = get_bool("ablate_lv");
  f.disable_domain_adaptation = get_bool("ablate_da");
  // A single structural view leaves nothing to contrast.
  if (f.disable_global_view || f.disable_local_view)
    f.disable_contrastive = true;
  f.validate();
  return f;
}

namespace {

std::string join_sizes(const std::vector<std::size_t>& sizes) {
  std::string out;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (i > 0) out += ",";
    out += std::to_string(sizes[i]);
  }
  return out;
}

}  // namespace

KeyValues config_to_kv(const TrainConfig& config, const AblationFlags& flags) {
  KeyValues kv;
  kv["lambda1"] = format_double(config.lambda1);
  kv["lambda2_max"] = format_double(config.lambda2_max);
  kv["lambda3"] = format_double(config.lambda3);
  kv["eta0"] = format_double(config.eta0);
  kv["epochs"] = std::to_string(config.epochs);
  kv["iters_per_epoch"] = std::to_string(config.iters_per_epoch);
  kv["batch_size"] = std::to_string(config.batch_size);
  kv["weight_decay"] = format_double(config.weight_decay);
  kv["temperature"] = format_double(config.temperature);
  kv["sample_sizes"] = join_sizes(config.sample_sizes);
  kv["layer_dims"] = join_sizes(config.layer_dims);
  kv["alpha"] = format_double(config.alpha);
  kv["topk"] = std::to_string(config.topk);
  kv["n"] = std::to_string(config.n_labeled);
  kv["seed"] = std::to_string(config.seed);
  kv["lambda2_clamp"] = config.lambda2_clamp ? "true" : "false";
  kv["checkpoint_every"] = std::to_string(config.checkpoint_every);
  kv["diag_cap"] = std::to_string(config.diag_cap);
  kv["ablate_cl"] = flags.disable_contrastive ? "true" : "false";
  kv["ablate_gv"] = flags.disable_global_view ? "true" : "false";
  kv["ablate_lv"] = flags.disable_local_view ? "true" : "false";
  kv["ablate_da"] = flags.disable_domain_adaptation ? "true" : "false";
  return kv;
}

void write_manifest(const std::filesystem::path& path, KeyValues kv) {
  kv["tool_version"] = kToolVersion;
  const auto now = std::chrono::system_clock::now();
  kv["timestamp_unix"] = std::to_string(
      std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch())
          .count());
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for write: " + path.string());
  os << "# run manifest\n";
  for (const auto& [key, value] : kv) os << key << " = " << value << "\n";
}

}  // namespace graphda
