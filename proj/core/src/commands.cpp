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

#include "mattn/commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "mattn/checkpoint.hpp"
#include "mattn/costmodel.hpp"
#include "mattn/diffusion.hpp"
#include "mattn/errors.hpp"
#include "mattn/verify.hpp"

namespace fs = std::filesystem;

namespace mattn {

namespace {

const BlockVariant kAllVariants[] = {BlockVariant::kLocal, BlockVariant::kGlobal,
                                     BlockVariant::kHybrid, BlockVariant::kFull3D};

fs::path prepare_out(const RunConfig& cfg, const std::string& command) {
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir);
  std::ofstream os(dir / ("resolved_" + command + ".cfg"), std::ios::binary);
  os << cfg.to_text();
  if (!os) throw std::runtime_error("cannot write to " + dir.string());
  return dir;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + p.string());
}

EpsModel eps_model(const FrameDiT& model, std::size_t T) {
  return [&model, T](ParamBinder& b, const Var& x, std::size_t k) {
    return model.forward(b, x, T, static_cast<double>(k));
  };
}

}  // namespace

void save_checkpoint(const std::string& path, const TrainedModel& m) {
  std::vector<NamedTensor> entries;
  for (const auto& [name, p] : m.params) entries.push_back(to_named("param/" + name, p.value));
  for (const auto& [name, p] : m.ema) entries.push_back(to_named("ema/" + name, p.value));
  entries.push_back(
      to_named("meta/normalizer", Mat::from_rows({{m.normalizer.mean, m.normalizer.stddev}})));
  save_tensors(path, entries);
}

TrainedModel load_checkpoint(const std::string& path) {
  TrainedModel m;
  bool have_norm = false;
  for (const auto& t : load_tensors(path)) {
    const Mat v = to_mat(t);
    if (t.name.rfind("param/", 0) == 0) {
      m.params.add(t.name.substr(6), v);
    } else if (t.name.rfind("ema/", 0) == 0) {
      m.ema.add(t.name.substr(4), v);
    } else if (t.name == "meta/normalizer" && v.size() == 2) {
      m.normalizer.mean = v[0];
      m.normalizer.stddev = v[1];
      have_norm = true;
    } else {
      throw CheckpointError("unexpected checkpoint entry '" + t.name + "'");
    }
  }
  if (!have_norm || m.ema.size() == 0) throw CheckpointError("incomplete checkpoint " + path);
  return m;
}

int cmd_verify(const RunConfig& cfg, bool inject_fault, CommandIo io) {
  cfg.validate();
  const fs::path dir = prepare_out(cfg, "verify");
  VerifyOptions o;
  o.seed = cfg.seed;
  o.inject_fault = inject_fault;
  const auto results = run_all_checks(o);
  std::ostringstream report;
  write_report(report, results);
  io.out << report.str();
  write_file(dir / "verify.csv", "name,max_dev,status\n" + report.str());
  return all_pass(results) ? kExitOk : kExitCheckFailed;
}

int cmd_train(const RunConfig& cfg, CommandIo io) {
  cfg.validate_data();
  const fs::path dir = prepare_out(cfg, "train");
  const Dataset data = make_dataset(cfg.dataset_config());
  std::vector<Mat> clips;
  for (const auto& c : data.clips) clips.push_back(c.tokens);
  const FrameDiT model(cfg.block_config());
  const NoiseSchedule sched = make_schedule(cfg.K);
  const TrainConfig tc = cfg.train_config();
  const std::size_t every = std::max<std::size_t>(1, tc.steps / 10);
  TrainResult r = train(eps_model(model, cfg.T), model.init_params(cfg.seed), clips, tc, sched,
                        [&](const TraceRow& row) {
                          if ((row.step + 1) % every == 0) {
                            char buf[128];
                            std::snprintf(buf, sizeof buf, "step %zu loss %.6f\n", row.step + 1,
                                          row.loss);
                            io.err << buf;
                          }
                        });
  write_trace_csv((dir / kLossFile).string(), r.trace);
  save_checkpoint((dir / kCheckpointFile).string(),
                  TrainedModel{std::move(r.params), std::move(r.ema), data.normalizer});
  const std::size_t w = std::min<std::size_t>(100, r.trace.size());
  char buf[160];
  std::snprintf(buf, sizeof buf, "first%zu_mean=%.17g last%zu_mean=%.17g\n", w,
                mean_loss(r.trace, 0, w), w,
                mean_loss(r.trace, r.trace.size() - w, r.trace.size()));
  io.out << buf;
  return kExitOk;
}

int cmd_sample(const RunConfig& cfg, CommandIo io) {
  cfg.validate_data();
  const fs::path ckpt = fs::path(cfg.out_dir) / kCheckpointFile;
  if (!fs::exists(ckpt)) {
    throw CheckpointError("missing checkpoint " + ckpt.string() + " (run train first)");
  }
  const TrainedModel tm = load_checkpoint(ckpt.string());
  const fs::path dir = prepare_out(cfg, "sample");
  const FrameDiT model(cfg.block_config());
  const NoiseSchedule sched = make_schedule(cfg.K);
  const DatasetConfig dc = cfg.dataset_config();
  CounterRng seeds = CounterRng::derive(cfg.seed, "sample");
  for (std::size_t i = 0; i < cfg.num_samples; ++i) {
    SamplerConfig sc = cfg.sampler_config();
    sc.seed = seeds.next_u64();
    const NoisePredictor eps = [&](const Mat& x, std::size_t k) {
      return model.predict(tm.ema, VideoTokens(cfg.T, cfg.N, x), static_cast<double>(k)).tokens;
    };
    const Mat x = sample(eps, cfg.T * cfg.N, cfg.D, sc, sched);
    const VideoTokens tokens(cfg.T, cfg.N, tm.normalizer.invert(x));
    const PixelClip clip = detokenize(tokens, dc.tokenizer, cfg.image_size);
    const std::string stem = "sample_" + std::to_string(i);
    save_clip((dir / (stem + ".fdtc")).string(), clip);
    write_pgm_strip((dir / (stem + ".pgm")).string(), clip);
    io.out << (dir / (stem + ".fdtc")).string() << '\n';
  }
  return kExitOk;
}

int cmd_bench(const RunConfig& cfg, CommandIo io) {
  cfg.validate();
  const fs::path dir = prepare_out(cfg, "bench");
  BenchOptions o;
  o.variants.assign(std::begin(kAllVariants), std::end(kAllVariants));
  o.T_list = cfg.T_list;
  o.repeats = cfg.repeats;
  o.seed = cfg.seed;
  const auto recs = run_bench(cfg.block_config(), o);
  std::ostringstream csv;
  write_bench_csv(csv, recs);
  write_file(dir / "bench.csv", csv.str());
  io.out << csv.str();
  return kExitOk;
}

int cmd_flops(const RunConfig& cfg, CommandIo io) {
  cfg.validate();
  const fs::path dir = prepare_out(cfg, "flops");
  std::set<std::size_t> Ts(cfg.T_list.begin(), cfg.T_list.end());
  Ts.insert(cfg.T);
  std::vector<FlopsReport> reports;
  for (BlockVariant v : kAllVariants) {
    BlockConfig b = cfg.block_config();
    b.variant = v;
    for (std::size_t T : Ts) reports.push_back(flops_closed_form(b, T));
  }
  std::ostringstream csv;
  write_flops_csv(csv, reports);
  write_file(dir / "flops.csv", csv.str());
  io.out << csv.str();
  return kExitOk;
}

int run_command(const std::string& command, const std::string& config_path,
                const std::vector<std::pair<std::string, std::string>>& overrides,
                bool inject_fault, CommandIo io) {
  try {
    auto ov = overrides;
    if (const char* env = std::getenv("MATTN_OUT"); env && *env) ov.emplace_back("out_dir", env);
    const RunConfig cfg = load_config(config_path, ov);
    if (command == "verify") return cmd_verify(cfg, inject_fault, io);
    if (command == "train") return cmd_train(cfg, io);
    if (command == "sample") return cmd_sample(cfg, io);
    if (command == "bench") return cmd_bench(cfg, io);
    if (command == "flops") return cmd_flops(cfg, io);
    io.err << "unknown command '" << command << "'\n";
    return kExitConfig;
  } catch (const ConfigError& e) {
    io.err << "config error";
    if (!e.key().empty()) io.err << " [" << e.key() << "]";
    io.err << ": " << e.what() << '\n';
    return kExitConfig;
  } catch (const CheckpointError& e) {
    io.err << "checkpoint error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericError& e) {
    io.err << "numeric abort at step " << e.step() << ": " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}

}  // namespace mattn
