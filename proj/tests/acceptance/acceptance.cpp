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

// Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
//   xtrans_acceptance --suite property   criteria 1-5, a few seconds
//   xtrans_acceptance --suite training   criteria 6-10, hours to days
//
// Criteria 7-10 train the full single-digit recipe with the pretrained
// perceptual extractor (XTRANS_VGG19_WEIGHTS or --vgg-weights).

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "support.hpp"
#include "xtrans/data.hpp"
#include "xtrans/error.hpp"
#include "xtrans/eval.hpp"
#include "xtrans/losses.hpp"
#include "xtrans/ops.hpp"
#include "xtrans/run.hpp"
#include "xtrans/trainer.hpp"

namespace fs = std::filesystem;
using namespace xtrans;
using nlohmann::json;
using testing::gaussian;
using testing::gradient_check;
using VarF = ag::Var<float>;
using VarD = ag::Var<double>;

namespace {

// Tolerances and thresholds.
constexpr double kAdainIdentityTol = 1e-6;
constexpr double kStatsTol = 1e-4;
constexpr double kGramMinEig = -1e-6;
constexpr double kGradRelTol = 1e-4;
constexpr int kMaskSamples = 100000;
constexpr int kDatasetSamples = 10000;
constexpr double kLrTol = 1e-9;
constexpr double kSmokeReconSsim = 0.7;
constexpr double kSsimAtoB = 0.40;
constexpr double kSsimBtoA = 0.18;
constexpr double kGapNoAdain = 0.15;
constexpr double kGapNoPerceptual = 0.10;
constexpr double kControlMin = 0.80;
constexpr double kControlRatio = 2.0;
constexpr double kTsneP = 0.001;

struct Outcome
{
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, const Outcome& o)
{
  fmt::print("{} criterion {:>2} {}: {}\n", o.pass ? "PASS" : "FAIL", id, title, o.detail);
  std::fflush(stdout);
  failures += o.pass ? 0 : 1;
}

template <class F>
void guarded(int id, const std::string& title, F&& body)
{
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  report(id, title, o);
}

// Checks accumulate into a single outcome.
struct Checks
{
  bool ok = true;
  std::vector<std::string> parts;

  void add(bool pass, std::string what)
  {
    ok = ok && pass;
    parts.push_back((pass ? "" : "!") + std::move(what));
  }
  Outcome outcome() const { return {ok, fmt::format("{}", fmt::join(parts, "; "))}; }
};

double max_abs(const TensorF& a, const TensorF& b)
{
  double m = 0;
  for (int64_t i = 0; i < a.numel(); ++i)
    m = std::max(m, static_cast<double>(std::abs(a[i] - b[i])));
  return m;
}

using Snapshot = std::map<std::string, TensorF>;

bool same(const Snapshot& a, const Snapshot& b)
{
  if (a.size() != b.size())
    return false;
  for (const auto& [k, v] : a)
    if (!(b.at(k) == v))
      return false;
  return true;
}

double median(std::vector<double> v)
{
  if (v.empty())
    return std::numeric_limits<double>::quiet_NaN();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1)
    return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

// ---------------------------------------------------------------- property

Outcome op_exactness()
{
  Checks c;
  ag::NoGradGuard guard;

  const VarF content(gaussian<float>({2, 8, 12, 12}, 1));
  const auto self = ops::instance_stats(content);
  c.add(max_abs(ops::adain(content, self).value(), content.value()) < kAdainIdentityTol,
        fmt::format("adain identity {:.2e}", max_abs(ops::adain(content, self).value(), content.value())));

  // Target statistics are reached up to the epsilon inside the scale.
  const auto target = ops::instance_stats(VarF(gaussian<float>({2, 8, 12, 12}, 2, 2.0)));
  const auto out_stats = ops::instance_stats(ops::adain(content, target));
  const double d_gamma = max_abs(out_stats.gamma.value(), target.gamma.value());
  const double d_beta = max_abs(out_stats.beta.value(), target.beta.value());
  c.add(d_gamma < kStatsTol && d_beta < kStatsTol, fmt::format("stats gamma {:.2e} beta {:.2e}", d_gamma, d_beta));

  const double eta = 0.5;
  const auto mask = ops::feature_mask(VarF(gaussian<float>({kMaskSamples}, 3, 30.0)), static_cast<float>(eta));
  float lo = 1, hi = 0;
  for (auto v : mask.value().values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  c.add(lo >= eta && hi < 1.0f, fmt::format("mask range [{}, {}] in [0.5, 1)", lo, hi));

  const auto g = ops::gram_matrix(VarF(gaussian<float>({3, 6, 5, 7}, 4))).value();
  double asym = 0, min_eig = std::numeric_limits<double>::infinity();
  for (int64_t n = 0; n < 3; ++n) {
    Eigen::MatrixXd m(6, 6);
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        m(i, j) = g[n * 36 + i * 6 + j];
    asym = std::max(asym, (m - m.transpose()).cwiseAbs().maxCoeff());
    min_eig = std::min(min_eig, Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff());
  }
  c.add(asym == 0.0 && min_eig >= kGramMinEig, fmt::format("gram asym {} min eig {:.2e}", asym, min_eig));

  TensorF img({3, 32, 32});
  Rng rng(5);
  for (auto& v : img.values())
    v = static_cast<float>(uniform01(rng));
  const double s = ops::ssim(img, img);
  c.add(s == 1.0, fmt::format("ssim(x,x) = {:.17g}", s));
  return c.outcome();
}

Outcome gradient_checks()
{
  Checks c;
  using Inputs = std::vector<VarD>;
  auto probe = [](const VarD& y, uint64_t seed) { return ag::mean(ag::mul(y, VarD(gaussian<double>(y.shape(), seed)))); };
  const auto content = gaussian<double>({1, 4, 6, 6}, 12);
  const auto feat = gaussian<double>({1, 4, 6, 6}, 13);
  const auto exemplar = gaussian<double>({1, 4, 6, 6}, 14, 1.5);

  const double e_adain = gradient_check(
    [&](const Inputs& v) { return probe(ops::adain(v[0], ops::instance_stats(v[1])), 21); }, {content, exemplar});
  c.add(e_adain < kGradRelTol, fmt::format("adain {:.2e}", e_adain));

  const double e_masked = gradient_check(
    [&](const Inputs& v) {
      return probe(ops::masked_adain(v[0], ops::feature_mask(v[1], 0.5), ops::instance_stats(v[2])), 22);
    },
    {content, feat, exemplar});
  c.add(e_masked < kGradRelTol, fmt::format("masked_adain {:.2e}", e_masked));

  // Style term over five 1x4x6x6 feature maps.
  nn::FeatureMapSet<double> src_maps, ex_maps;
  std::vector<TensorD> out_maps;
  for (uint64_t l = 0; l < 5; ++l) {
    src_maps.emplace_back(gaussian<double>({1, 4, 6, 6}, 30 + l));
    ex_maps.emplace_back(gaussian<double>({1, 4, 6, 6}, 40 + l));
    out_maps.emplace_back(gaussian<double>({1, 4, 6, 6}, 50 + l));
  }
  const double e_style = gradient_check(
    [&](const Inputs& v) { return losses::perceptual_loss(v, src_maps, ex_maps).style; }, out_maps);
  c.add(e_style < kGradRelTol, fmt::format("gram style loss {:.2e}", e_style));

  // Four 2x2 poolings need a 16-pixel input; the extractor is 4-32 channels wide.
  const auto extractor = nn::PerceptualExtractor<double>::random(5, 32);
  const auto src = extractor(VarD(gaussian<double>({1, 3, 16, 16}, 61, 0.3)));
  const auto ex = extractor(VarD(gaussian<double>({1, 3, 16, 16}, 62, 0.3)));
  auto x = gaussian<double>({1, 3, 16, 16}, 63, 0.3);
  for (auto& v : x.values())
    v += 0.5;
  const double e_perc = gradient_check(
    [&](const Inputs& v) {
      const auto t = losses::perceptual_loss(extractor(v[0]), src, ex);
      return ag::weighted_sum<double>({t.content, t.style}, {1e1, 1e3});
    },
    {x});
  c.add(e_perc < kGradRelTol, fmt::format("perceptual composition {:.2e}", e_perc));
  return c.outcome();
}

Outcome dataset_laws()
{
  using namespace data::palette;
  Checks c;
  data::DatasetConfig cfg;
  cfg.resolution = 32;
  cfg.train_size = kDatasetSamples;
  cfg.test_size = 1;
  cfg.glyphs_per_digit = 60;
  cfg.seed = 2026;
  const auto a = data::generate_split(cfg, data::Domain::A, data::Split::Train);
  const auto b = data::generate_split(cfg, data::Domain::B, data::Split::Train);
  auto bw = [](const data::Rgb& x) { return x == black || x == white; };
  auto primary = [](const data::Rgb& x) { return x == red || x == green || x == blue; };
  int a_ok = 0, b_rule_ok = 0, b_rule_n = 0, distinct_ok = 0;
  for (const auto& s : a) {
    const auto& cs = s.colors.at(0);
    a_ok += bw(cs.foreground) && bw(cs.background);
    distinct_ok += !(cs.foreground == cs.background);
  }
  for (const auto& s : b) {
    const auto& cs = s.colors.at(0);
    distinct_ok += primary(cs.foreground) && primary(cs.background) && !(cs.foreground == cs.background);
    if (s.digit_labels.at(0) >= 5) {
      ++b_rule_n;
      b_rule_ok += cs.foreground == red && cs.background == green;
    }
  }
  c.add(a_ok == kDatasetSamples, fmt::format("A black/white {}/{}", a_ok, kDatasetSamples));
  c.add(b_rule_ok == b_rule_n && b_rule_n > 0, fmt::format("B digits 5-9 red on green {}/{}", b_rule_ok, b_rule_n));
  c.add(distinct_ok == 2 * kDatasetSamples, fmt::format("fg != bg {}/{}", distinct_ok, 2 * kDatasetSamples));

  const auto a2 = data::generate_split(cfg, data::Domain::A, data::Split::Train);
  const auto b2 = data::generate_split(cfg, data::Domain::B, data::Split::Train);
  bool identical = a2.size() == a.size() && b2.size() == b.size();
  for (size_t i = 0; identical && i < a.size(); ++i)
    identical = a[i].image == a2[i].image && b[i].image == b2[i].image && a[i].fg_mask == a2[i].fg_mask &&
                b[i].fg_mask == b2[i].fg_mask;
  c.add(identical, "bit-deterministic regeneration");
  return c.outcome();
}

std::unique_ptr<train::Trainer> small_trainer(uint64_t seed, int64_t iterations)
{
  auto cfg = testing::tiny_config(seed);
  cfg.train.iterations = iterations;
  cfg.train.lr = 1e-3;
  auto t = std::make_unique<train::Trainer>(cfg);
  t->set_data(train::build_pools(cfg));
  t->pretrain_feature_nets(cfg.train.pretrain_iterations);
  return t;
}

Outcome schedule_laws()
{
  Checks c;
  auto t = small_trainer(41, 200);
  const int per_d = t->config().train.updates_per_d;
  const auto frozen = nn::snapshot(t->model().feature_parameters());
  auto d_prev = nn::snapshot(t->model().discriminator_parameters());
  int d_changes = 0;
  double lr_err = 0;
  for (int s = 0; s < 100; ++s) {
    const auto info = t->step_on_next_batch();
    lr_err = std::max(lr_err, std::abs(info.lr - ops::poly_lr(s, 200, 1e-3)));
    if (s < 25) {
      auto d_now = nn::snapshot(t->model().discriminator_parameters());
      d_changes += !same(d_prev, d_now);
      d_prev = std::move(d_now);
    }
  }
  c.add(d_changes == 25 / per_d, fmt::format("D changed {} times in 25 steps", d_changes));
  c.add(lr_err <= kLrTol, fmt::format("lr error {:.1e}", lr_err));
  c.add(same(frozen, nn::snapshot(t->model().feature_parameters())), "F bit-identical after 100 steps");
  return c.outcome();
}

Outcome round_trips()
{
  Checks c;
  const auto dir = testing::scratch_dir("acceptance_ckpt");
  auto t = small_trainer(42, 100);
  for (int s = 0; s < 5; ++s)
    t->step_on_next_batch();
  t->save_checkpoint(dir / "mid.xtck");
  const auto saved = nn::snapshot(t->model().all_parameters());

  std::vector<losses::LossReport> expected;
  for (int s = 0; s < 20; ++s)
    expected.push_back(t->step_on_next_batch().report);

  train::Trainer r(t->config());
  r.set_data(train::build_pools(t->config()));
  r.load_checkpoint(dir / "mid.xtck");
  c.add(same(saved, nn::snapshot(r.model().all_parameters())), "parameters bitwise equal after load");
  int equal = 0;
  for (int s = 0; s < 20; ++s)
    equal += r.step_on_next_batch().report == expected[static_cast<size_t>(s)];
  c.add(equal == 20, fmt::format("{}/20 resumed loss reports identical", equal));
  return c.outcome();
}

// ---------------------------------------------------------------- training

struct TrainingOptions
{
  fs::path out = fs::temp_directory_path() / "xtrans_acceptance";
  int64_t smoke_iterations = 10000;
  int smoke_width = 8;
  int smoke_width_divisor = 8;
  int64_t full_iterations = 60000;
  std::string vgg_weights;
};

config::ExperimentConfig with_extractor(config::ExperimentConfig cfg, const fs::path& weights)
{
  if (weights.empty()) {
    cfg.perceptual.mode = "random";
  } else {
    cfg.perceptual.mode = "pretrained";
    cfg.perceptual.weights = weights.string();
  }
  return cfg;
}

Outcome smoke_training(const TrainingOptions& opt, const fs::path& weights)
{
  Checks c;
  auto cfg = with_extractor(config::preset("single-digit"), weights);
  if (weights.empty())
    cfg.perceptual.width_divisor = opt.smoke_width_divisor;
  cfg.seed = 6;
  cfg.data.train_size = 5000;
  cfg.data.test_size = 1000;
  cfg.arch.base_width = opt.smoke_width;
  cfg.train.iterations = opt.smoke_iterations;
  cfg.train.pretrain_iterations = 1000;
  cfg.train.checkpoint_interval = 1000;
  cfg.validate();

  train::Trainer t(cfg);
  t.set_data(train::build_pools(cfg));
  std::vector<double> totals;
  t.run(opt.out / "smoke", [&](const train::StepInfo& info) { totals.push_back(info.report.total); });
  const size_t window = std::min<size_t>(500, totals.size() / 2);
  const double first = median({totals.begin(), totals.begin() + static_cast<std::ptrdiff_t>(window)});
  const double last = median({totals.end() - static_cast<std::ptrdiff_t>(window), totals.end()});
  c.add(last < first, fmt::format("median total loss {:.4g} (last {}) vs {:.4g} (first {})", last, window, first, window));

  const auto ds = cfg.dataset();
  const auto test_a = data::generate_split(ds, data::Domain::A, data::Split::Test);
  const auto test_b = data::generate_split(ds, data::Domain::B, data::Split::Test);
  const auto recon = eval::eval_ssim(eval::model_translator(t.model()), test_a, test_b, nn::Direction::AtoA,
                                     cfg.eval.seed);
  c.add(recon.mean > kSmokeReconSsim, fmt::format("held-out SSIM(x_A, x_AA) {:.4f} > {}", recon.mean, kSmokeReconSsim));
  return c.outcome();
}

struct FullRuns
{
  json full, no_adain, no_perceptual;
};

// Trains the full recipe and two ablations at the same budget, then evaluates
// each with every metric the criteria need.
FullRuns full_runs(const TrainingOptions& opt, const fs::path& weights)
{
  auto cfg = with_extractor(config::preset("single-digit"), weights);
  cfg.train.iterations = opt.full_iterations;
  cfg.validate();
  FullRuns r;
  auto train_and_eval = [&](config::ExperimentConfig variant_cfg, const std::string& name) {
    const auto dir = opt.out / name;
    const auto ckpt = run::train(variant_cfg, dir);
    return run::evaluate(ckpt, {"ssim", "control", "tsne"}, dir / "eval", variant_cfg.eval);
  };
  r.full = train_and_eval(cfg, "full");
  auto no_adain = cfg;
  no_adain.apply_ablation(config::Ablation::NoAdain);
  r.no_adain = train_and_eval(no_adain, "no_adain");
  auto no_perc = cfg;
  no_perc.apply_ablation(config::Ablation::NoPerceptual);
  r.no_perceptual = train_and_eval(no_perc, "no_perceptual");
  return r;
}

double ssim_of(const json& report, const char* dir) { return report.at("ssim").at(dir).at("mean").get<double>(); }

void training_suite(const TrainingOptions& opt)
{
  const auto weights = nn::resolve_vgg_weights(opt.vgg_weights);
  const bool have_weights = !weights.empty() && fs::exists(weights);
  guarded(6, "smoke training", [&] { return smoke_training(opt, have_weights ? weights : fs::path{}); });

  if (!have_weights) {
    const std::string why = "blocked: pretrained perceptual extractor unavailable (set XTRANS_VGG19_WEIGHTS; see "
                            "scripts/convert_vgg19.py)";
    report(7, "SSIM reproduction", {false, why});
    report(8, "ablation ordering", {false, why});
    report(9, "multimodality gate", {false, why});
    report(10, "distribution matching", {false, why});
    return;
  }

  std::optional<FullRuns> runs;
  std::string error;
  try {
    runs = full_runs(opt, weights);
  } catch (const std::exception& e) {
    error = std::string("error: ") + e.what();
  }
  auto gate = [&](int id, const std::string& title, auto&& body) {
    if (!runs)
      report(id, title, {false, error});
    else
      guarded(id, title, [&] { return body(*runs); });
  };
  gate(7, "SSIM reproduction", [](const FullRuns& r) {
    Checks c;
    const double ab = ssim_of(r.full, "A2B"), ba = ssim_of(r.full, "B2A");
    c.add(ab >= kSsimAtoB, fmt::format("A2B {:.4f} >= {}", ab, kSsimAtoB));
    c.add(ba >= kSsimBtoA, fmt::format("B2A {:.4f} >= {}", ba, kSsimBtoA));
    return c.outcome();
  });
  gate(8, "ablation ordering", [](const FullRuns& r) {
    Checks c;
    const double full = ssim_of(r.full, "A2B");
    const double gap_adain = full - ssim_of(r.no_adain, "A2B");
    const double gap_perc = full - ssim_of(r.no_perceptual, "A2B");
    c.add(gap_adain >= kGapNoAdain, fmt::format("full - no_adain {:.4f} >= {}", gap_adain, kGapNoAdain));
    c.add(gap_perc >= kGapNoPerceptual, fmt::format("full - no_perceptual {:.4f} >= {}", gap_perc, kGapNoPerceptual));
    return c.outcome();
  });
  gate(9, "multimodality gate", [](const FullRuns& r) {
    Checks c;
    const double full = r.full.at("control").at("A2B").at("score").get<double>();
    const double ablated = r.no_adain.at("control").at("A2B").at("score").get<double>();
    c.add(full >= kControlMin, fmt::format("control {:.4f} >= {}", full, kControlMin));
    c.add(full >= kControlRatio * ablated, fmt::format("control {:.4f} >= 2 x no_adain {:.4f}", full, ablated));
    return c.outcome();
  });
  gate(10, "distribution matching", [](const FullRuns& r) {
    Checks c;
    const double p_full = r.full.at("tsne").at("p_value").get<double>();
    const double p_ablated = r.no_adain.at("tsne").at("p_value").get<double>();
    c.add(p_full > kTsneP, fmt::format("full p = {:.4g} > {}", p_full, kTsneP));
    c.add(p_ablated <= kTsneP, fmt::format("no_adain p = {:.4g} <= {}", p_ablated, kTsneP));
    return c.outcome();
  });
}

void property_suite()
{
  guarded(1, "op exactness", op_exactness);
  guarded(2, "gradient checks", gradient_checks);
  guarded(3, "dataset laws", dataset_laws);
  guarded(4, "schedule laws", schedule_laws);
  guarded(5, "round trips", round_trips);
}

} // namespace

int main(int argc, char** argv)
{
  CLI::App app{"xtrans acceptance criteria"};
  std::string suite = "property";
  TrainingOptions opt;
  std::string out = opt.out.string();
  app.add_option("--suite", suite, "property, training or all")->check(CLI::IsMember({"property", "training", "all"}));
  app.add_option("--out", out, "Working directory for the training suite");
  app.add_option("--smoke-iterations", opt.smoke_iterations, "Main-phase iterations of the smoke run");
  app.add_option("--smoke-width", opt.smoke_width, "Base channel width of the smoke run");
  app.add_option("--smoke-extractor-divisor", opt.smoke_width_divisor,
                 "Width divisor of the random extractor in the smoke run");
  app.add_option("--full-iterations", opt.full_iterations, "Main-phase iterations of the full recipe");
  app.add_option("--vgg-weights", opt.vgg_weights, "Pretrained extractor (else XTRANS_VGG19_WEIGHTS)");
  CLI11_PARSE(app, argc, argv);
  opt.out = out;
  spdlog::set_level(suite == "property" ? spdlog::level::warn : spdlog::level::info);

  if (suite == "property" || suite == "all")
    property_suite();
  if (suite == "training" || suite == "all")
    training_suite(opt);
  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
