// Copyright 2026 The xtrans Authors
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

#include "xtrans/run.hpp"

#include <fcntl.h>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <signal.h>
#include <spdlog/spdlog.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <sstream>

#include "xtrans/error.hpp"
#include "xtrans/eval.hpp"
#include "xtrans/image_io.hpp"
#include "xtrans/trainer.hpp"

#ifndef XTRANS_VERSION
#define XTRANS_VERSION "0.0.0"
#endif
#ifndef XTRANS_SOURCE_ID
#define XTRANS_SOURCE_ID "unknown"
#endif

namespace xtrans::run {

using nlohmann::json;
namespace fs = std::filesystem;

std::string version() { return XTRANS_VERSION; }

namespace {

std::string utc_now()
{
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}", fmt::gmtime(std::chrono::system_clock::to_time_t(
                                                std::chrono::system_clock::now())));
}

void write_json(const fs::path& path, const json& j)
{
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out)
    throw IoError("failed writing " + path.string());
}

bool process_alive(long pid) { return pid > 0 && (::kill(static_cast<pid_t>(pid), 0) == 0 || errno == EPERM); }

struct TestSets
{
  std::vector<data::LabeledCanvas> a, b;
};

TestSets test_sets(const config::ExperimentConfig& cfg)
{
  if (!cfg.folder_a.empty())
    throw InvalidArgument("evaluation needs a synthesized dataset with ground-truth masks; image folders have none");
  TestSets t;
  if (!cfg.data_root.empty()) {
    const auto base = fs::path(cfg.data_root) / data::to_string(cfg.data.kind);
    t.a = data::read_split(base / "A" / "test");
    t.b = data::read_split(base / "B" / "test");
  } else {
    const auto ds = cfg.dataset();
    t.a = data::generate_split(ds, data::Domain::A, data::Split::Test);
    t.b = data::generate_split(ds, data::Domain::B, data::Split::Test);
  }
  return t;
}

} // namespace

TensorF read_input(const fs::path& path, int resolution)
{
  TensorF t = io::to_rgb(io::to_tensor(io::read_image(path)));
  if (t.dim(1) != resolution || t.dim(2) != resolution)
    t = io::resize_bilinear(t, resolution, resolution);
  return t.reshaped({1, 3, resolution, resolution});
}

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".xtrans.lock")
{
  fs::create_directories(dir);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      const auto written = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      if (written != static_cast<ssize_t>(pid.size()))
        throw IoError("cannot write lock file " + path_.string());
      return;
    }
    if (errno != EEXIST)
      throw IoError("cannot create lock file " + path_.string() + ": " + std::strerror(errno));
    long owner = 0;
    std::ifstream(path_) >> owner;
    if (process_alive(owner))
      throw StateError(fmt::format("{} is in use by process {} (lock file {})", dir.string(), owner, path_.string()));
    spdlog::warn("removing stale lock {} left by process {}", path_.string(), owner);
    fs::remove(path_);
  }
  throw StateError("cannot acquire " + path_.string());
}

DirectoryLock::~DirectoryLock()
{
  std::error_code ec;
  fs::remove(path_, ec);
}

fs::path write_manifest(const fs::path& dir, const std::string& command, const config::ExperimentConfig& cfg,
                        const json& extra)
{
  fs::create_directories(dir);
  fs::path path = dir / fmt::format("manifest-{}.json", command);
  for (int k = 2; fs::exists(path); ++k)
    path = dir / fmt::format("manifest-{}-{}.json", command, k);
  json m = {{"command", command},
            {"version", version()},
            {"source_id", XTRANS_SOURCE_ID},
            {"seed", cfg.seed},
            {"started_at", utc_now()},
            {"config", cfg.to_json()},
            {"design_decisions", config::design_register(cfg)}};
  if (!extra.is_null())
    m["arguments"] = extra;
  write_json(path, m);
  return path;
}

json synth(const config::ExperimentConfig& cfg, const fs::path& out)
{
  cfg.validate();
  DirectoryLock lock(out);
  write_manifest(out, "synth", cfg);
  const auto ds = cfg.dataset();
  json summary = json::object();
  for (auto domain : {data::Domain::A, data::Domain::B})
    for (auto split : {data::Split::Train, data::Split::Test}) {
      const auto canvases = data::generate_split(ds, domain, split);
      const auto dir = data::write_split(out, canvases, ds.kind, domain, split);
      summary[data::to_string(domain) + "/" + data::to_string(split)] = {{"count", canvases.size()},
                                                                          {"dir", dir.string()}};
      spdlog::info("wrote {} {} {} images to {}", canvases.size(), data::to_string(domain), data::to_string(split),
                   dir.string());
    }
  return summary;
}

fs::path pretrain(const config::ExperimentConfig& cfg, const fs::path& out)
{
  cfg.validate();
  DirectoryLock lock(out);
  write_manifest(out, "pretrain", cfg);
  train::Trainer trainer(cfg);
  trainer.set_data(train::build_pools(cfg));
  const auto result = trainer.pretrain_feature_nets(cfg.train.pretrain_iterations, out / "pretrain_metrics.csv");
  spdlog::info("held-out reconstruction L1: A {:.4f} -> {:.4f}, B {:.4f} -> {:.4f}", result.heldout_before[0],
               result.heldout_after[0], result.heldout_before[1], result.heldout_after[1]);
  const auto path = out / "pretrained.xtck";
  trainer.save_checkpoint(path);
  return path;
}

fs::path train(const config::ExperimentConfig& cfg, const fs::path& out, const fs::path& resume)
{
  cfg.validate();
  DirectoryLock lock(out);
  write_manifest(out, "train", cfg, {{"resume", resume.string()}});
  train::Trainer trainer(cfg);
  trainer.set_data(train::build_pools(cfg));
  if (!resume.empty()) {
    trainer.load_checkpoint(resume);
    spdlog::info("resumed from {} at step {}", resume.string(), trainer.step());
  }
  return trainer.run(out);
}

void translate(const fs::path& checkpoint, const fs::path& source, const fs::path& exemplar, nn::Direction dir,
               const fs::path& output)
{
  auto loaded = train::load_model(checkpoint);
  const int res = loaded.config.data.resolution;
  const TensorF src = read_input(source, res), ex = read_input(exemplar, res);
  const auto fn = eval::model_translator(*loaded.model);
  const TensorF y = fn(src, ex, dir);
  if (!output.parent_path().empty())
    fs::create_directories(output.parent_path());
  io::write_png(output, io::to_raster(y.reshaped({3, res, res})));
}

std::set<std::string> parse_metrics(const std::string& list)
{
  static const std::set<std::string> known{"ssim", "control", "tsne", "grid"};
  std::set<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty())
      continue;
    if (item == "all") {
      out = known;
      continue;
    }
    if (!known.count(item))
      throw ConfigError("unknown metric '" + item + "' (expected ssim, control, tsne, grid or all)");
    out.insert(item);
  }
  if (out.empty())
    throw ConfigError("no metrics requested");
  return out;
}

json evaluate(const fs::path& checkpoint, const std::set<std::string>& metrics, const fs::path& out,
              const config::EvalConfig& eval_cfg)
{
  auto loaded = train::load_model(checkpoint);
  auto cfg = loaded.config;
  cfg.eval = eval_cfg;
  cfg.validate();
  DirectoryLock lock(out);
  write_manifest(out, "eval", cfg, {{"checkpoint", checkpoint.string()}, {"metrics", metrics}});

  const auto tests = test_sets(cfg);
  const auto fn = eval::model_translator(*loaded.model);
  const auto& e = cfg.eval;
  json report = {{"checkpoint", checkpoint.string()}, {"step", loaded.step}};

  if (metrics.count("ssim")) {
    std::vector<eval::SSIMReport> reports;
    for (auto dir : {nn::Direction::AtoB, nn::Direction::BtoA, nn::Direction::AtoA, nn::Direction::BtoB})
      reports.push_back(eval::eval_ssim(fn, tests.a, tests.b, dir, e.seed, e.pairs));
    eval::write_ssim_csv(out / "ssim.csv", reports);
    eval::write_ssim_samples_csv(out / "ssim_samples.csv", reports);
    const auto table = eval::format_table(reports);
    std::ofstream(out / "ssim.txt") << table;
    spdlog::info("SSIM\n{}", table);
    for (const auto& r : reports)
      report["ssim"][r.direction] = {{"mean", r.mean}, {"std", r.std}, {"n", r.n}};
  }
  if (metrics.count("control")) {
    if (cfg.data.kind != data::DatasetKind::Single) {
      spdlog::warn("exemplar control is defined for single-digit data only; skipped");
    } else {
      for (auto dir : {nn::Direction::AtoB, nn::Direction::BtoA}) {
        const auto c = eval::exemplar_control_score(fn, tests.a, tests.b, dir, e.seed, e.pairs);
        report["control"][c.direction] = {{"score", c.score}, {"n", c.n}};
        spdlog::info("exemplar control {}: {:.4f} over {} pairs", c.direction, c.score, c.n);
      }
    }
  }
  if (metrics.count("tsne")) {
    const int64_t n = std::min<int64_t>({e.tsne_samples, static_cast<int64_t>(tests.a.size()),
                                         static_cast<int64_t>(tests.b.size())});
    const auto pairing = eval::evaluation_pairing(static_cast<int64_t>(tests.a.size()),
                                                  static_cast<int64_t>(tests.b.size()), nn::Direction::AtoB, e.seed, n);
    std::vector<const TensorF*> src, ex;
    std::vector<TensorF> real;
    for (int64_t i = 0; i < n; ++i) {
      src.push_back(&tests.a[static_cast<size_t>(i)].image);
      ex.push_back(&tests.b[static_cast<size_t>(pairing[static_cast<size_t>(i)])].image);
      real.push_back(tests.b[static_cast<size_t>(i)].image);
    }
    const TensorF batch = fn(data::stack(src), data::stack(ex), nn::Direction::AtoB);
    std::vector<TensorF> generated;
    for (int64_t i = 0; i < n; ++i)
      generated.push_back(data::unstack(batch, i));
    eval::TsneOptions opt;
    opt.pca_dims = e.pca_dims;
    opt.perplexity = e.perplexity;
    const auto emb = eval::embed_tsne(real, generated, e.seed, opt);
    eval::write_embedding_csv(out / "tsne.csv", emb);
    eval::render_scatter(out / "tsne.png", emb);
    const auto test = eval::permutation_test(emb, e.seed);
    report["tsne"] = json{{"samples_per_group", n},
                          {"energy_distance", test.statistic},
                          {"p_value", test.p_value},
                          {"permutations", test.permutations}};
    spdlog::info("t-SNE real vs generated: energy {:.4g}, p = {:.4g}", test.statistic, test.p_value);
  }
  if (metrics.count("grid")) {
    const int64_t rows = std::min<int64_t>(e.grid_rows, static_cast<int64_t>(tests.a.size()));
    const auto pairing = eval::evaluation_pairing(static_cast<int64_t>(tests.a.size()),
                                                  static_cast<int64_t>(tests.b.size()), nn::Direction::AtoB, e.seed,
                                                  rows);
    std::vector<std::vector<TensorF>> grid;
    for (int64_t i = 0; i < rows; ++i) {
      const auto& s = tests.a[static_cast<size_t>(i)];
      const auto& x = tests.b[static_cast<size_t>(pairing[static_cast<size_t>(i)])];
      const auto res = s.image.dim(1);
      const TensorF y = fn(s.image.reshaped({1, 3, res, res}), x.image.reshaped({1, 3, res, res}), nn::Direction::AtoB);
      grid.push_back({s.image, x.image, y.reshaped({3, res, res}), data::reference_translation(s, x).image});
    }
    eval::GridOptions opt;
    opt.col_labels = {"src", "ex", "out", "ref"};
    eval::render_grid(grid, out / "grid_A2B.png", opt);
  }
  write_json(out / "report.json", report);
  return report;
}

json ablate(config::ExperimentConfig cfg, config::Ablation variant, const fs::path& out)
{
  if (variant == config::Ablation::None)
    throw ConfigError("ablate needs a variant: no_mask, no_adain or no_perceptual");
  cfg.apply_ablation(variant);
  cfg.validate();
  const auto dir = out / config::to_string(variant);
  const auto final_checkpoint = train(cfg, dir);
  auto report = evaluate(final_checkpoint, {"ssim", "control"}, dir / "eval", cfg.eval);
  report["variant"] = config::to_string(variant);
  return report;
}

} // namespace xtrans::run
