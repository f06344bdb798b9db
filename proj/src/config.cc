// Copyright 2026 The SD-Net Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sdnet/config.h"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace sdnet {

namespace {

using Setter = std::function<void(RunConfig&, const std::string&)>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const char* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) throw ConfigError(key, "cannot parse '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true|false, got '" + v + "'");
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& v) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, trim(item)));
  return out;
}

CorruptionConfig& corruption(RunConfig& c) {
  if (!c.dataset.corruption) {
    c.dataset.corruption = CorruptionConfig::tool_like(c.dataset.num_classes, 0);
  }
  return *c.dataset.corruption;
}

void add_train_keys(std::map<std::string, Setter>& m, const std::string& prefix,
                    TrainConfig RunConfig::*member) {
  auto field = [&](const std::string& name, auto apply) {
    m[prefix + "." + name] = [member, apply, key = prefix + "." + name](RunConfig& c,
                                                                        const std::string& v) {
      apply(c.*member, key, v);
    };
  };
  field("initial_lr", [](TrainConfig& t, auto& k, auto& v) { t.initial_lr = parse_number<double>(k, v); });
  field("lr_decay_factor", [](TrainConfig& t, auto& k, auto& v) { t.lr_decay_factor = parse_number<double>(k, v); });
  field("lr_step", [](TrainConfig& t, auto& k, auto& v) { t.lr_step = parse_number<int>(k, v); });
  field("weight_decay", [](TrainConfig& t, auto& k, auto& v) { t.weight_decay = parse_number<double>(k, v); });
  field("momentum", [](TrainConfig& t, auto& k, auto& v) { t.momentum = parse_number<double>(k, v); });
  field("batch_size", [](TrainConfig& t, auto& k, auto& v) { t.batch_size = parse_number<int>(k, v); });
  field("max_epochs", [](TrainConfig& t, auto& k, auto& v) { t.max_epochs = parse_number<int>(k, v); });
  field("patience", [](TrainConfig& t, auto& k, auto& v) { t.patience = parse_number<int>(k, v); });
  field("use_dice", [](TrainConfig& t, auto& k, auto& v) { t.use_dice = parse_bool(k, v); });
  field("omega0", [](TrainConfig& t, auto& k, auto& v) { t.omega0 = parse_number<double>(k, v); });
  field("dice_epsilon", [](TrainConfig& t, auto& k, auto& v) { t.dice_epsilon = parse_number<double>(k, v); });
  field("ecb_q", [](TrainConfig& t, auto& k, auto& v) { t.ecb_q = parse_number<double>(k, v); });
  field("ecb_boundary", [](TrainConfig& t, auto& k, auto& v) { t.ecb_boundary = parse_bool(k, v); });
  field("augment", [](TrainConfig& t, auto& k, auto& v) { t.augment = parse_bool(k, v); });
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> m;
    m["seed"] = [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("seed", v); };
    m["data.dir"] = [](RunConfig& c, const std::string& v) {
      if (v.empty()) throw ConfigError("data.dir", "empty path");
      c.data_dir = v;
    };
    auto data_int = [&](const std::string& name, int DatasetSpec::*f) {
      m["data." + name] = [f, key = "data." + name](RunConfig& c, const std::string& v) {
        c.dataset.*f = parse_number<int>(key, v);
      };
    };
    auto data_size = [&](const std::string& name, std::size_t DatasetSpec::*f) {
      m["data." + name] = [f, key = "data." + name](RunConfig& c, const std::string& v) {
        c.dataset.*f = parse_number<std::size_t>(key, v);
      };
    };
    data_int("num_classes", &DatasetSpec::num_classes);
    data_size("depth", &DatasetSpec::depth);
    data_size("height", &DatasetSpec::height);
    data_size("width", &DatasetSpec::width);
    data_int("num_aux", &DatasetSpec::num_aux);
    data_int("num_aux_val", &DatasetSpec::num_aux_val);
    data_int("num_train", &DatasetSpec::num_train);
    data_int("num_val", &DatasetSpec::num_val);
    data_int("num_test", &DatasetSpec::num_test);
    m["model.channels"] = [](RunConfig& c, const std::string& v) { c.model.channels = parse_number<int>("model.channels", v); };
    m["model.kernel_size"] = [](RunConfig& c, const std::string& v) { c.model.kernel_size = parse_number<int>("model.kernel_size", v); };
    add_train_keys(m, "pretrain", &RunConfig::pretrain);
    add_train_keys(m, "finetune", &RunConfig::finetune);
    m["augment.max_translation"] = [](RunConfig& c, const std::string& v) {
      c.pretrain.augmentation.max_translation = c.finetune.augmentation.max_translation =
          parse_number<int>("augment.max_translation", v);
    };
    m["augment.max_rotation"] = [](RunConfig& c, const std::string& v) {
      c.pretrain.augmentation.max_rotation = c.finetune.augmentation.max_rotation =
          parse_number<double>("augment.max_rotation", v);
    };
    m["corrupt.erode"] = [](RunConfig& c, const std::string& v) { corruption(c).erode_radius = parse_list<int>("corrupt.erode", v); };
    m["corrupt.dilate"] = [](RunConfig& c, const std::string& v) { corruption(c).dilate_radius = parse_list<int>("corrupt.dilate", v); };
    m["corrupt.jitter"] = [](RunConfig& c, const std::string& v) { corruption(c).boundary_jitter = parse_number<double>("corrupt.jitter", v); };
    m["corrupt.mislabel"] = [](RunConfig& c, const std::string& v) { corruption(c).mislabel_rate = parse_list<double>("corrupt.mislabel", v); };
    return m;
  }();
  return table;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw ConfigError(key, "unknown key");
  it->second(*this, trim(value));
}

void RunConfig::validate() const {
  auto wrap = [](const std::string& section, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(section, e.what());
    }
  };
  wrap("data", [&] { dataset.validate(); });
  wrap("model", [&] { model.validate(); });
  wrap("pretrain", [&] { pretrain.validate(); });
  wrap("finetune", [&] { finetune.validate(); });
  if (model.num_classes != dataset.num_classes) {
    throw ConfigError("data.num_classes", "model and dataset disagree");
  }
}

std::vector<std::string> RunConfig::keys() {
  std::vector<std::string> out;
  for (const auto& [k, v] : setters()) out.push_back(k);
  return out;
}

std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin) {
  std::map<std::string, std::string> kv;
  std::stringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(t, origin + ":" + std::to_string(lineno) + ": expected key=value");
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::string>>& overrides) {
  RunConfig c;
  std::vector<std::pair<std::string, std::string>> entries;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    for (auto& kv : parse_key_values(ss.str(), path.string())) entries.push_back(kv);
  }
  entries.insert(entries.end(), overrides.begin(), overrides.end());
  // Class count first so a corruption override starts from the right defaults.
  for (const auto& [k, v] : entries) {
    if (k == "data.num_classes") c.set(k, v);
  }
  for (const auto& [k, v] : entries) c.set(k, v);
  c.model.num_classes = c.dataset.num_classes;
  c.dataset.seed = c.pretrain.seed = c.finetune.seed = c.seed;
  c.validate();
  return c;
}

}  // namespace sdnet
