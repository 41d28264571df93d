/* Copyright 2026 The Matrix Attention Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "mattn/run_config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "mattn/errors.hpp"

namespace mattn {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto res = std::from_chars(v.data(), end, out);
  if (res.ec != std::errc() || res.ptr != end) {
    throw ConfigError("cannot parse " + key + "='" + v + "' as an integer", key);
  }
  return out;
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("cannot parse " + key + "='" + v + "' as a number", key);
  }
}

std::string fmt_double(double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

struct Field {
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> f = [] {
    std::map<std::string, Field> m;
    auto sz = [&](const char* k, std::size_t RunConfig::*p) {
      m[k] = {[p, k](RunConfig& c, const std::string& v) {
                c.*p = parse_int<std::size_t>(k, v);
              },
              [p](const RunConfig& c) { return std::to_string(c.*p); }};
    };
    auto dbl = [&](const char* k, double RunConfig::*p) {
      m[k] = {[p, k](RunConfig& c, const std::string& v) { c.*p = parse_double(k, v); },
              [p](const RunConfig& c) { return fmt_double(c.*p); }};
    };
    auto str = [&](const char* k, std::string RunConfig::*p) {
      m[k] = {[p](RunConfig& c, const std::string& v) { c.*p = v; },
              [p](const RunConfig& c) { return c.*p; }};
    };
    str("preset", &RunConfig::preset);
    str("variant", &RunConfig::variant);
    sz("depth", &RunConfig::depth);
    sz("D", &RunConfig::D);
    sz("T", &RunConfig::T);
    sz("N", &RunConfig::N);
    sz("N_qk", &RunConfig::N_qk);
    sz("N_v", &RunConfig::N_v);
    sz("D_qk", &RunConfig::D_qk);
    sz("D_v", &RunConfig::D_v);
    sz("heads_m", &RunConfig::heads_m);
    sz("heads_n", &RunConfig::heads_n);
    sz("mlp_hidden", &RunConfig::mlp_hidden);
    str("u_norm", &RunConfig::u_norm);
    str("fusion", &RunConfig::fusion);
    dbl("eta", &RunConfig::eta);
    sz("steps", &RunConfig::steps);
    sz("K", &RunConfig::K);
    dbl("lr", &RunConfig::lr);
    sz("batch", &RunConfig::batch);
    sz("train_steps", &RunConfig::train_steps);
    dbl("ema_decay", &RunConfig::ema_decay);
    dbl("grad_clip", &RunConfig::grad_clip);
    sz("clip_start", &RunConfig::clip_start);
    m["seed"] = {[](RunConfig& c, const std::string& v) {
                   c.seed = parse_int<std::uint64_t>("seed", v);
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }};
    str("out_dir", &RunConfig::out_dir);
    str("dataset", &RunConfig::dataset);
    sz("image_size", &RunConfig::image_size);
    sz("patch", &RunConfig::patch);
    sz("dataset_clips", &RunConfig::dataset_clips);
    m["max_velocity"] = {[](RunConfig& c, const std::string& v) {
                           c.max_velocity = parse_int<int>("max_velocity", v);
                         },
                         [](const RunConfig& c) { return std::to_string(c.max_velocity); }};
    m["T_list"] = {[](RunConfig& c, const std::string& v) {
                     c.T_list.clear();
                     std::stringstream ss(v);
                     std::string item;
                     while (std::getline(ss, item, ',')) {
                       c.T_list.push_back(parse_int<std::size_t>("T_list", trim(item)));
                     }
                   },
                   [](const RunConfig& c) {
                     std::string s;
                     for (std::size_t i = 0; i < c.T_list.size(); ++i) {
                       s += (i ? "," : "") + std::to_string(c.T_list[i]);
                     }
                     return s;
                   }};
    sz("repeats", &RunConfig::repeats);
    sz("num_samples", &RunConfig::num_samples);
    return m;
  }();
  return f;
}

}  // namespace

std::vector<std::string> config_keys() {
  std::vector<std::string> k;
  for (const auto& [name, f] : fields()) k.push_back(name);
  return k;
}

void set_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) throw ConfigError("unknown config key '" + key + "'", key);
  it->second.set(cfg, value);
}

void apply_preset(RunConfig& c, const std::string& name) {
  const BlockConfig b = preset_block_config(name);
  c.preset = name;
  c.variant = to_string(b.variant);
  c.fusion = to_string(b.fusion);
  c.depth = b.depth;
  c.D = b.D;
  c.N = b.N;
  c.N_qk = b.matrix.N_qk;
  c.N_v = b.matrix.N_v;
  c.D_qk = b.matrix.D_qk;
  c.D_v = b.matrix.D_v;
  c.heads_m = b.matrix.heads_m;
  c.heads_n = b.matrix.heads_n;
  c.u_norm = to_string(b.matrix.norm_q);
  c.mlp_hidden = 0;
  c.K = 1000;
  c.ema_decay = 0.999;
  c.grad_clip = 1.0;
  c.eta = 1.0;
  if (name == "toy") {
    c.T = 8;
    c.image_size = 16;
    c.patch = 4;
    c.batch = 4;
    c.train_steps = 2000;
    c.clip_start = 0;
    c.lr = 3e-3;
    c.steps = 50;
    c.T_list = {16, 32, 64, 128};
  } else {
    c.T = 16;
    c.image_size = name == "p128" ? 16 : 32;
    c.patch = 2;
    c.batch = 16;
    c.train_steps = name == "p128" ? 150000 : 200000;
    c.clip_start = 100000;
    c.lr = 1e-4;
    c.steps = 250;
    c.T_list = {16, 32, 64, 128};
  }
}

BlockConfig RunConfig::block_config() const {
  BlockConfig b;
  b.preset = preset;
  b.depth = depth;
  b.D = D;
  b.N = N;
  b.mlp_hidden = mlp_hidden;
  b.variant = parse_block_variant(variant);
  b.fusion = parse_fusion(fusion);
  b.matrix.N = N;
  b.matrix.D = D;
  b.matrix.N_qk = N_qk;
  b.matrix.D_qk = D_qk;
  b.matrix.N_v = N_v;
  b.matrix.D_v = D_v;
  b.matrix.heads_m = heads_m;
  b.matrix.heads_n = heads_n;
  b.matrix.set_all_norms(parse_unorm(u_norm));
  return b;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.lr = lr;
  t.batch = batch;
  t.steps = train_steps;
  t.ema_decay = ema_decay;
  t.grad_clip = grad_clip;
  t.clip_start = clip_start;
  t.seed = seed;
  return t;
}

SamplerConfig RunConfig::sampler_config() const {
  SamplerConfig s;
  s.eta = eta;
  s.steps = steps;
  s.seed = seed;
  return s;
}

DatasetConfig RunConfig::dataset_config() const {
  DatasetConfig d;
  d.base.kind = parse_synth_kind(dataset);
  d.base.T = T;
  d.base.P = image_size;
  d.base.s = std::max<std::size_t>(1, image_size / 4);
  d.tokenizer.p = patch;
  d.tokenizer.D = D;
  d.tokenizer.seed = seed;
  d.clips = dataset_clips;
  d.max_velocity = max_velocity;
  d.seed = seed;
  return d;
}

void RunConfig::validate() const {
  block_config().validate();
  if (T == 0) throw ConfigError("T must be positive", "T");
  if (depth > 64) throw ConfigError("depth must be <= 64", "depth");
  train_config().validate();
  if (K < 1) throw ConfigError("K must be >= 1", "K");
  sampler_config().validate(K);
  if (steps == 0) throw ConfigError("steps must be positive", "steps");
  if (T_list.empty()) throw ConfigError("T_list must not be empty", "T_list");
  for (auto t : T_list)
    if (t == 0) throw ConfigError("T_list entries must be positive", "T_list");
  if (repeats < 5) throw ConfigError("repeats must be >= 5", "repeats");
  if (max_velocity < 0) throw ConfigError("max_velocity must be >= 0", "max_velocity");
  if (out_dir.empty()) throw ConfigError("out_dir must not be empty", "out_dir");
  parse_synth_kind(dataset);
}

void RunConfig::validate_data() const {
  validate();
  if (patch == 0 || image_size % patch != 0) {
    throw ConfigError("patch must divide image_size", "patch");
  }
  const std::size_t g = image_size / patch;
  if (g * g != N) {
    throw ConfigError("N=" + std::to_string(N) + " must equal (image_size/patch)^2 = " +
                          std::to_string(g * g),
                      "N");
  }
  dataset_config().base.validate();
  if (dataset_clips == 0) throw ConfigError("dataset_clips must be positive", "dataset_clips");
  if (num_samples == 0) throw ConfigError("num_samples must be positive", "num_samples");
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, f] : fields()) out += k + "=" + f.get(*this) + "\n";
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_kv_text(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    }
    out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return out;
}

RunConfig resolve_config(const std::vector<std::pair<std::string, std::string>>& file_entries,
                         const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::string preset = "toy";
  for (const auto* list : {&file_entries, &overrides})
    for (const auto& [k, v] : *list)
      if (k == "preset") preset = v;
  RunConfig cfg;
  apply_preset(cfg, preset);
  for (const auto* list : {&file_entries, &overrides})
    for (const auto& [k, v] : *list) set_key(cfg, k, v);
  return cfg;
}

RunConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file '" + path + "'", "config");
  std::stringstream ss;
  ss << is.rdbuf();
  return resolve_config(parse_kv_text(ss.str()), overrides);
}

}  // namespace mattn
