// Copyright 2026 The FXDA Authors
// SPDX-License-Identifier: Apache-2.0

#include "fxda/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace fxda::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) out.push_back(trim(item));
  if (out.size() == 1 && out.front().empty()) out.clear();
  return out;
}

template <class T>
T parse_number(const std::string& text) {
  const std::string s = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("'" + text + "' is not a valid number");
  }
  return value;
}

template <class T>
std::string show_number(T value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

// Codecs for each field type.
template <class T>
struct Codec {
  static T parse(const std::string& s) { return parse_number<T>(s); }
  static std::string show(const T& v) { return show_number(v); }
};

template <>
struct Codec<bool> {
  static bool parse(const std::string& text) {
    const std::string s = trim(text);
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw ConfigError("'" + text + "' is not a boolean (true or false)");
  }
  static std::string show(bool v) { return v ? "true" : "false"; }
};

template <>
struct Codec<std::string> {
  static std::string parse(const std::string& s) { return trim(s); }
  static std::string show(const std::string& v) { return v; }
};

template <>
struct Codec<data::Split> {
  static data::Split parse(const std::string& s) { return data::parse_split(trim(s)); }
  static std::string show(data::Split v) { return data::split_name(v); }
};

template <class T>
struct Codec<std::vector<T>> {
  static std::vector<T> parse(const std::string& s) {
    std::vector<T> out;
    for (const auto& item : split_list(s)) out.push_back(Codec<T>::parse(item));
    return out;
  }
  static std::string show(const std::vector<T>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ", ";
      out += Codec<T>::show(v[i]);
    }
    return out;
  }
};

template <class T, std::size_t N>
struct Codec<std::array<T, N>> {
  static std::array<T, N> parse(const std::string& s) {
    const auto v = Codec<std::vector<T>>::parse(s);
    if (v.size() != N) {
      throw ConfigError("expected " + std::to_string(N) + " values, got " +
                        std::to_string(v.size()));
    }
    std::array<T, N> out{};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
  }
  static std::string show(const std::array<T, N>& v) {
    return Codec<std::vector<T>>::show(std::vector<T>(v.begin(), v.end()));
  }
};

struct Field {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class Ref>
Field field(std::string section, std::string key, Ref ref) {
  using T = std::remove_cvref_t<decltype(ref(std::declval<RunConfig&>()))>;
  return Field{std::move(section), std::move(key),
               [ref](RunConfig& c, const std::string& v) { ref(c) = Codec<T>::parse(v); },
               [ref](const RunConfig& c) {
                 return Codec<T>::show(ref(const_cast<RunConfig&>(c)));
               }};
}

/// A per-channel property stored as one list; the channel count follows the
/// list length.
template <class Member>
Field channel_field(std::string key, Member member) {
  using T = std::remove_cvref_t<decltype(std::declval<obs::ChannelSpec&>().*member)>;
  return Field{"channels", std::move(key),
               [member](RunConfig& c, const std::string& v) {
                 const auto values = Codec<std::vector<T>>::parse(v);
                 auto& ch = c.dataset.obs.channels;
                 ch.resize(values.size());
                 for (std::size_t i = 0; i < values.size(); ++i) ch[i].*member = values[i];
               },
               [member](const RunConfig& c) {
                 std::vector<T> values;
                 for (const auto& ch : c.dataset.obs.channels) values.push_back(ch.*member);
                 return Codec<std::vector<T>>::show(values);
               }};
}

void add_model(std::vector<Field>& f, const std::string& section,
               atm::ModelConfig& (*model)(RunConfig&)) {
  f.push_back(field(section, "wind", [model](RunConfig& c) -> auto& { return model(c).wind; }));
  f.push_back(
      field(section, "diffusion", [model](RunConfig& c) -> auto& { return model(c).diffusion; }));
  f.push_back(
      field(section, "coupling", [model](RunConfig& c) -> auto& { return model(c).coupling; }));
  f.push_back(field(section, "relaxation",
                    [model](RunConfig& c) -> auto& { return model(c).relaxation; }));
  f.push_back(
      field(section, "source_t", [model](RunConfig& c) -> auto& { return model(c).source_t; }));
  f.push_back(
      field(section, "source_q", [model](RunConfig& c) -> auto& { return model(c).source_q; }));
  f.push_back(field(section, "seed", [model](RunConfig& c) -> auto& { return model(c).seed; }));
}

std::string show_date(const data::DatasetConfig& d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", d.start_year, d.start_month, d.start_day);
  return buf;
}

void parse_date(data::DatasetConfig& d, const std::string& text) {
  const auto parts = [&] {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(trim(text));
    while (std::getline(in, item, '-')) out.push_back(item);
    return out;
  }();
  if (parts.size() != 3) throw ConfigError("'" + text + "' is not a date (YYYY-MM-DD)");
  d.start_year = parse_number<int>(parts[0]);
  d.start_month = parse_number<unsigned>(parts[1]);
  d.start_day = parse_number<unsigned>(parts[2]);
}

const std::vector<Field>& registry() {
  static const std::vector<Field> fields = [] {
    std::vector<Field> f;
    const auto add = [&f](Field x) { f.push_back(std::move(x)); };
    add(field("grid", "height", [](RunConfig& c) -> auto& { return c.dataset.grid.height; }));
    add(field("grid", "width", [](RunConfig& c) -> auto& { return c.dataset.grid.width; }));
    add(field("grid", "levels", [](RunConfig& c) -> auto& { return c.dataset.grid.levels; }));
    add_model(f, "model", [](RunConfig& c) -> atm::ModelConfig& { return c.dataset.forecast; });
    add_model(f, "truth",
              [](RunConfig& c) -> atm::ModelConfig& { return c.dataset.truth.dynamics; });
    add(field("truth", "forcing_t", [](RunConfig& c) -> auto& { return c.dataset.truth.forcing_t; }));
    add(field("truth", "forcing_q", [](RunConfig& c) -> auto& { return c.dataset.truth.forcing_q; }));
    add(field("truth", "forcing_length",
              [](RunConfig& c) -> auto& { return c.dataset.truth.forcing_length; }));
    add(field("truth", "perfect_model",
              [](RunConfig& c) -> auto& { return c.dataset.truth.perfect_model; }));
    add(field("background", "amplitude",
              [](RunConfig& c) -> auto& { return c.dataset.background.amplitude; }));
    add(field("background", "t_std", [](RunConfig& c) -> auto& { return c.dataset.background.t_std; }));
    add(field("background", "q_std", [](RunConfig& c) -> auto& { return c.dataset.background.q_std; }));
    add(field("background", "length_scale",
              [](RunConfig& c) -> auto& { return c.dataset.background.length_scale; }));
    add(field("background", "vertical_rho",
              [](RunConfig& c) -> auto& { return c.dataset.background.vertical_rho; }));
    add(channel_field("ids", &obs::ChannelSpec::id));
    add(channel_field("peak_pressure", &obs::ChannelSpec::peak_pressure));
    add(channel_field("gamma", &obs::ChannelSpec::gamma));
    add(channel_field("gain_t", &obs::ChannelSpec::gain_t));
    add(channel_field("gain_q", &obs::ChannelSpec::gain_q));
    add(field("obs", "crop_row0", [](RunConfig& c) -> auto& { return c.dataset.obs.crop.row0; }));
    add(field("obs", "crop_col0", [](RunConfig& c) -> auto& { return c.dataset.obs.crop.col0; }));
    add(field("obs", "crop_height", [](RunConfig& c) -> auto& { return c.dataset.obs.crop.height; }));
    add(field("obs", "crop_width", [](RunConfig& c) -> auto& { return c.dataset.obs.crop.width; }));
    add(field("obs", "frames", [](RunConfig& c) -> auto& { return c.dataset.obs.frames; }));
    add(field("obs", "density", [](RunConfig& c) -> auto& { return c.dataset.obs.density; }));
    add(field("obs", "cloud_fraction",
              [](RunConfig& c) -> auto& { return c.dataset.obs.cloud_fraction; }));
    add(field("obs", "cloud_length", [](RunConfig& c) -> auto& { return c.dataset.obs.cloud_length; }));
    add(field("obs", "noise_std", [](RunConfig& c) -> auto& { return c.dataset.obs.noise_std; }));
    add(field("dataset", "dir", [](RunConfig& c) -> auto& { return c.dataset_dir; }));
    add(field("dataset", "n_train", [](RunConfig& c) -> auto& { return c.dataset.n_train; }));
    add(field("dataset", "n_valid", [](RunConfig& c) -> auto& { return c.dataset.n_valid; }));
    add(field("dataset", "n_test", [](RunConfig& c) -> auto& { return c.dataset.n_test; }));
    add(field("dataset", "spinup", [](RunConfig& c) -> auto& { return c.dataset.spinup; }));
    add(field("dataset", "gap", [](RunConfig& c) -> auto& { return c.dataset.gap; }));
    add(field("dataset", "max_lead", [](RunConfig& c) -> auto& { return c.dataset.max_lead; }));
    add(field("dataset", "seed", [](RunConfig& c) -> auto& { return c.dataset.seed; }));
    add(Field{"dataset", "start_date",
              [](RunConfig& c, const std::string& v) { parse_date(c.dataset, v); },
              [](const RunConfig& c) { return show_date(c.dataset); }});
    add(field("net", "widths", [](RunConfig& c) -> auto& { return c.widths; }));
    add(field("net", "margin", [](RunConfig& c) -> auto& { return c.margin; }));
    add(field("net", "seed", [](RunConfig& c) -> auto& { return c.net_seed; }));
    add(field("train", "warmup_steps",
              [](RunConfig& c) -> auto& { return c.train.schedule.warmup_steps; }));
    add(field("train", "start_lrate",
              [](RunConfig& c) -> auto& { return c.train.schedule.start_lrate; }));
    add(field("train", "stop_lrate", [](RunConfig& c) -> auto& { return c.train.schedule.stop_lrate; }));
    add(field("train", "eta_min", [](RunConfig& c) -> auto& { return c.train.schedule.eta_min; }));
    add(field("train", "total_iterations",
              [](RunConfig& c) -> auto& { return c.train.schedule.total_iterations; }));
    add(field("train", "beta1", [](RunConfig& c) -> auto& { return c.train.adam.beta1; }));
    add(field("train", "beta2", [](RunConfig& c) -> auto& { return c.train.adam.beta2; }));
    add(field("train", "epsilon", [](RunConfig& c) -> auto& { return c.train.adam.epsilon; }));
    add(field("train", "weight_decay", [](RunConfig& c) -> auto& { return c.train.adam.weight_decay; }));
    add(field("train", "rollout", [](RunConfig& c) -> auto& { return c.train.rollout; }));
    add(field("train", "backprop_steps", [](RunConfig& c) -> auto& { return c.train.backprop_steps; }));
    add(field("train", "batch", [](RunConfig& c) -> auto& { return c.train.batch; }));
    add(field("train", "seed", [](RunConfig& c) -> auto& { return c.train.seed; }));
    add(field("train", "checkpoint_every",
              [](RunConfig& c) -> auto& { return c.train.checkpoint_every; }));
    add(field("eval", "max_lead", [](RunConfig& c) -> auto& { return c.eval.max_lead; }));
    add(field("eval", "split", [](RunConfig& c) -> auto& { return c.eval.split; }));
    add(field("eval", "block", [](RunConfig& c) -> auto& { return c.eval.block; }));
    add(field("eval", "bootstrap", [](RunConfig& c) -> auto& { return c.eval.bootstrap; }));
    add(field("eval", "level", [](RunConfig& c) -> auto& { return c.eval.level; }));
    add(field("eval", "seed", [](RunConfig& c) -> auto& { return c.eval.seed; }));
    add(field("oracle", "obs_variance", [](RunConfig& c) -> auto& { return c.oracle.obs_variance; }));
    add(field("oracle", "tile", [](RunConfig& c) -> auto& { return c.oracle.tile; }));
    add(field("oracle", "halo", [](RunConfig& c) -> auto& { return c.oracle.halo; }));
    add(field("oracle", "skip_cloudy", [](RunConfig& c) -> auto& { return c.oracle.skip_cloudy; }));
    add(field("perturb", "sample", [](RunConfig& c) -> auto& { return c.perturb.sample; }));
    add(field("perturb", "channels",
              [](RunConfig& c) -> auto& { return c.perturb.battery.channel_ids; }));
    add(field("perturb", "magnitude",
              [](RunConfig& c) -> auto& { return c.perturb.battery.magnitude; }));
    add(field("perturb", "scale", [](RunConfig& c) -> auto& { return c.perturb.battery.scale; }));
    add(field("perturb", "cloudy_ratio",
              [](RunConfig& c) -> auto& { return c.perturb.battery.cloudy_ratio; }));
    add(field("perturb", "linearity_tolerance",
              [](RunConfig& c) -> auto& { return c.perturb.battery.linearity_tolerance; }));
    add(field("perturb", "antisymmetry_tolerance",
              [](RunConfig& c) -> auto& { return c.perturb.battery.antisymmetry_tolerance; }));
    add(field("perturb", "ring_radius",
              [](RunConfig& c) -> auto& { return c.perturb.battery.ring_radius; }));
    add(field("perturb", "edge", [](RunConfig& c) -> auto& { return c.perturb.battery.edge; }));
    return f;
  }();
  return fields;
}

}  // namespace

net::NetConfig RunConfig::net() const {
  net::NetConfig n;
  n.widths = widths;
  n.channels = dataset.grid.channels();
  n.frames = dataset.obs.frames;
  n.obs_channels = dataset.obs.channels.size();
  n.crop = dataset.obs.crop;
  n.margin = margin;
  n.seed = net_seed;
  return n;
}

void RunConfig::validate() const {
  dataset.validate();
  net().validate(dataset.grid);
  train.validate();
  if (eval.max_lead > dataset.max_lead) {
    throw ConfigError("eval.max_lead " + std::to_string(eval.max_lead) +
                      " exceeds dataset.max_lead " + std::to_string(dataset.max_lead));
  }
  if (!(eval.level > 0.0 && eval.level < 1.0)) throw ConfigError("eval.level must lie in (0, 1)");
  if (eval.block == 0) throw ConfigError("eval.block must be positive");
  if (!(oracle.obs_variance > 0.0)) throw ConfigError("oracle.obs_variance must be positive");
  for (int id : perturb.battery.channel_ids) {
    bool found = false;
    for (const auto& c : dataset.obs.channels) found = found || c.id == id;
    if (!found) throw ConfigError("perturb.channels: channel " + std::to_string(id) + " is not defined");
  }
}

RunConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  std::map<std::string, const Field*> index;
  for (const auto& f : registry()) index[f.section + "." + f.key] = &f;
  RunConfig config;
  std::map<std::string, std::size_t> channel_lengths;
  for (const auto& [section, body] : tree) {
    if (!body.data().empty()) {
      throw ConfigError("config: key '" + section + "' outside a section");
    }
    for (const auto& [key, value] : body) {
      const std::string name = section + "." + key;
      const auto it = index.find(name);
      if (it == index.end()) throw ConfigError("config: unknown key '" + name + "'");
      const std::string raw = value.get_value<std::string>();
      try {
        it->second->set(config, raw);
      } catch (const std::exception& e) {
        throw ConfigError("config: " + name + ": " + e.what());
      }
      if (section == "channels") channel_lengths[key] = split_list(raw).size();
    }
  }
  for (const auto& [key, n] : channel_lengths) {
    if (n != config.dataset.obs.channels.size()) {
      throw ConfigError("config: channels." + key + " lists " + std::to_string(n) +
                        " values for " + std::to_string(config.dataset.obs.channels.size()) +
                        " channels");
    }
  }
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

std::string to_ini(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : registry()) {
    if (f.section != section) {
      if (!section.empty()) out += '\n';
      section = f.section;
      out += "[" + section + "]\n";
    }
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

void write_config(const RunConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << to_ini(config);
}

std::vector<std::pair<std::string, std::string>> config_keys() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : registry()) out.emplace_back(f.section, f.key);
  return out;
}

}  // namespace fxda::cli
