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

#ifndef SDNET_CONFIG_H_
#define SDNET_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdnet/data.h"
#include "sdnet/model.h"
#include "sdnet/trainer.h"

namespace sdnet {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& key, const std::string& message)
      : std::invalid_argument("config key '" + key + "': " + message), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Everything a CLI run needs. `seed` is the single root seed; load_run_config
// copies it into the dataset and training configs.
struct RunConfig {
  std::uint64_t seed = 1;
  std::filesystem::path data_dir = "data";
  DatasetSpec dataset;
  ModelConfig model;
  TrainConfig pretrain;
  TrainConfig finetune;

  // Applies `key=value`. Throws ConfigError for unknown keys and bad values.
  void set(const std::string& key, const std::string& value);
  void validate() const;
  // Every recognised key, sorted.
  static std::vector<std::string> keys();
};

// Parses `key=value` lines ('#' starts a comment line). Later lines win.
std::map<std::string, std::string> parse_key_values(const std::string& text,
                                                    const std::string& origin);

// Defaults, then the file (if any), then `overrides` in order.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::string>>& overrides);

}  // namespace sdnet

#endif  // SDNET_CONFIG_H_
