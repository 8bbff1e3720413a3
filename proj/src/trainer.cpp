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

#include "xtrans/trainer.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <cmath>
#include <fstream>
#include <limits>

#include "xtrans/ops.hpp"

namespace xtrans::train {

using ag::Var;
using data::Domain;
using nlohmann::json;

namespace {

bool finite(double v) { return std::isfinite(v); }

json arch_json(const nn::ArchConfig& a)
{
  return {{"n1", a.n1}, {"n2", a.n2}, {"n3", a.n3}, {"base_width", a.base_width}, {"resolution", a.resolution}};
}

nn::ArchConfig resolved_arch(const config::ExperimentConfig& cfg)
{
  nn::ArchConfig a = cfg.arch;
  a.resolution = cfg.data.resolution;
  return a;
}

Var<float> zero_scalar() { return Var<float>(TensorF(Shape{}, 0.0f)); }

} // namespace

TensorF take(const TensorF& batch, const std::vector<int64_t>& index)
{
  const int64_t each = batch.numel() / batch.dim(0);
  Shape shape = batch.shape();
  shape[0] = static_cast<int64_t>(index.size());
  TensorF out(shape);
  for (size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= batch.dim(0))
      throw InvalidArgument("take: index out of range");
    std::copy(batch.data() + index[i] * each, batch.data() + (index[i] + 1) * each,
              out.data() + static_cast<int64_t>(i) * each);
  }
  return out;
}

Adam::Adam(nn::ParamList<float> params, double beta1, double beta2, double eps)
  : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps)
{
  for (const auto& p : params_) {
    m_.emplace_back(p.var.shape());
    v_.emplace_back(p.var.shape());
  }
}

void Adam::step(double lr)
{
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  const float step_size = static_cast<float>(lr / c1);
  const float inv_c2 = static_cast<float>(1.0 / c2);
  const float eps = static_cast<float>(eps_);
  for (size_t i = 0; i < params_.size(); ++i) {
    auto var = params_[i].var;
    if (!var.has_grad())
      continue;
    const float* g = var.grad().data();
    float* w = var.mutable_value().data();
    float* m = m_[i].data();
    float* v = v_[i].data();
    for (int64_t k = 0; k < var.numel(); ++k) {
      m[k] = b1 * m[k] + (1.0f - b1) * g[k];
      v[k] = b2 * v[k] + (1.0f - b2) * g[k] * g[k];
      w[k] -= step_size * m[k] / (std::sqrt(v[k] * inv_c2) + eps);
    }
  }
  zero_grad();
}

void Adam::zero_grad()
{
  for (auto& p : params_) {
    auto var = p.var;
    var.zero_grad();
  }
}

void Adam::save(archive::Archive& ar, const std::string& prefix) const
{
  ar.meta[prefix + "t"] = t_;
  for (size_t i = 0; i < params_.size(); ++i) {
    ar.put(prefix + "m/" + params_[i].name, m_[i]);
    ar.put(prefix + "v/" + params_[i].name, v_[i]);
  }
}

void Adam::validate(const archive::Archive& ar, const std::string& prefix) const
{
  if (!ar.meta.contains(prefix + "t"))
    throw VersionError("checkpoint lacks optimizer state '" + prefix + "'");
  for (size_t i = 0; i < params_.size(); ++i)
    for (const char* kind : {"m/", "v/"}) {
      const auto& t = ar.get(prefix + kind + params_[i].name);
      if (t.shape() != params_[i].var.shape())
        throw ConfigError("optimizer state " + prefix + kind + params_[i].name + " has shape " + shape_str(t.shape()) +
                          ", model expects " + shape_str(params_[i].var.shape()));
    }
}

void Adam::load(const archive::Archive& ar, const std::string& prefix)
{
  validate(ar, prefix);
  t_ = ar.meta.at(prefix + "t").get<int64_t>();
  for (size_t i = 0; i < params_.size(); ++i) {
    m_[i] = ar.get(prefix + "m/" + params_[i].name);
    v_[i] = ar.get(prefix + "v/" + params_[i].name);
  }
  zero_grad();
}

DataPools build_pools(const config::ExperimentConfig& cfg)
{
  DataPools p;
  if (!cfg.folder_a.empty()) {
    p.train_a = data::load_image_folder(cfg.folder_a, cfg.data.resolution).images;
    p.train_b = data::load_image_folder(cfg.folder_b, cfg.data.resolution).images;
    p.test_a = p.train_a;
    p.test_b = p.train_b;
    return p;
  }
  const auto ds = cfg.dataset();
  if (!cfg.data_root.empty()) {
    const auto base = std::filesystem::path(cfg.data_root) / data::to_string(ds.kind);
    p.train_a = data::images_of(data::read_split(base / "A" / "train"));
    p.train_b = data::images_of(data::read_split(base / "B" / "train"));
    p.test_a = data::images_of(data::read_split(base / "A" / "test"));
    p.test_b = data::images_of(data::read_split(base / "B" / "test"));
    return p;
  }
  p.train_a = data::images_of(data::generate_split(ds, Domain::A, data::Split::Train));
  p.train_b = data::images_of(data::generate_split(ds, Domain::B, data::Split::Train));
  p.test_a = data::images_of(data::generate_split(ds, Domain::A, data::Split::Test));
  p.test_b = data::images_of(data::generate_split(ds, Domain::B, data::Split::Test));
  return p;
}

Trainer::Trainer(config::ExperimentConfig cfg) : cfg_(std::move(cfg))
{
  cfg_.validate();
  const auto arch = resolved_arch(cfg_);
  model_ = std::make_unique<Model>(arch, derive_seed(cfg_.seed, {0x6d6f64656cULL}));
  model_->guidance_options() = cfg_.guidance();
  rng_.seed(derive_seed(cfg_.seed, {0x747261696eULL}));

  if (cfg_.loss.lambda_c > 0 || cfg_.loss.lambda_s > 0) {
    if (cfg_.perceptual.mode == "pretrained")
      extractor_ = nn::PerceptualExtractor<float>::pretrained(nn::resolve_vgg_weights(cfg_.perceptual.weights));
    else
      extractor_ = nn::PerceptualExtractor<float>::random(derive_seed(cfg_.seed, {0x766767ULL}),
                                                          cfg_.perceptual.width_divisor);
  }

  g_params_ = model_->generator_parameters();
  d_params_ = model_->discriminator_parameters();
  g_opt_ = Adam(g_params_, cfg_.train.beta1, cfg_.train.beta2, cfg_.train.adam_eps);
  d_opt_ = Adam(d_params_, cfg_.train.beta1, cfg_.train.beta2, cfg_.train.adam_eps);
}

const nn::PerceptualExtractor<float>& Trainer::extractor() const
{
  if (!extractor_)
    throw StateError("no perceptual extractor: both perceptual weights are zero");
  return *extractor_;
}

void Trainer::set_data(DataPools pools)
{
  if (pools.train_a.empty() || pools.train_b.empty())
    throw InvalidArgument("both training pools must be non-empty");
  pools_ = std::move(pools);
  iterator_ = std::make_unique<data::UnpairedBatchIterator>(pools_.train_a, pools_.train_b, cfg_.train.batch_size,
                                                            derive_seed(cfg_.seed, {0x62617463ULL}),
                                                            cfg_.train.augment);
}

std::pair<TensorF, TensorF> Trainer::next_batch()
{
  if (!iterator_)
    throw StateError("no training data attached");
  return iterator_->next();
}

double Trainer::lr_at(int64_t step) const { return ops::poly_lr(step, cfg_.train.iterations, cfg_.train.lr); }

double Trainer::heldout_recon(Domain d, const nn::Encoder<float>& f, const nn::Decoder<float>& dec) const
{
  const auto& pool = d == Domain::A ? pools_.test_a : pools_.test_b;
  if (pool.empty())
    return std::numeric_limits<double>::quiet_NaN();
  ag::NoGradGuard guard;
  const size_t n = std::min<size_t>(pool.size(), 32);
  double acc = 0;
  for (size_t start = 0; start < n; start += 8) {
    std::vector<const TensorF*> picks;
    for (size_t i = start; i < std::min(n, start + 8); ++i)
      picks.push_back(&pool[i]);
    Var<float> x(data::stack(picks));
    acc += ag::l1_loss(x, dec(f(x))).item() * static_cast<double>(picks.size());
  }
  return acc / static_cast<double>(n);
}

PretrainResult Trainer::pretrain_feature_nets(int64_t iterations, const std::filesystem::path& log_csv)
{
  if (iterations < 0)
    throw InvalidArgument("pretrain iterations must be non-negative");
  if (pools_.train_a.empty())
    throw StateError("no training data attached");
  std::ofstream csv;
  if (!log_csv.empty()) {
    csv.open(log_csv);
    if (!csv)
      throw IoError("cannot write " + log_csv.string());
    csv << "step,domain,lr,vae,g_loss,d_loss,heldout_recon_l1\n";
  }

  PretrainResult result;
  const auto arch = resolved_arch(cfg_);
  const auto& w = cfg_.loss;
  const int64_t eval_every = std::max<int64_t>(1, iterations / 10);
  for (Domain d : {Domain::A, Domain::B}) {
    const auto di = static_cast<size_t>(d);
    auto& f = model_->feature_net(d);
    const auto f_params = model_->feature_parameters(d);
    nn::set_trainable(f_params, true);
    nn::Decoder<float> dec(arch, arch.n2, derive_seed(cfg_.seed, {0x70646563ULL, di}));
    nn::Discriminator<float> dis(arch, derive_seed(cfg_.seed, {0x70646973ULL, di}));
    nn::ParamList<float> eg = f_params, dp;
    dec.collect("dec", eg);
    dis.collect("dis", dp);
    Adam eg_opt(eg, cfg_.train.beta1, cfg_.train.beta2, cfg_.train.adam_eps);
    Adam d_opt(dp, cfg_.train.beta1, cfg_.train.beta2, cfg_.train.adam_eps);
    const auto& pool = d == Domain::A ? pools_.train_a : pools_.train_b;
    data::UnpairedBatchIterator it(pool, pool, cfg_.train.batch_size, derive_seed(cfg_.seed, {0x70726574ULL, di}),
                                   cfg_.train.augment);

    result.heldout_before[di] = heldout_recon(d, f, dec);
    for (int64_t s = 0; s < iterations; ++s) {
      const double lr = ops::poly_lr(s, iterations, cfg_.train.lr);
      Var<float> x(it.next().first);

      nn::set_trainable(dp, false);
      auto z_mean = f(x);
      TensorF noise(z_mean.shape());
      for (auto& v : noise.values())
        v = static_cast<float>(normal(model_->noise_rng()));
      auto x_rec = dec(ag::add_constant(z_mean, noise));
      auto vae = losses::vae_loss(x, x_rec, z_mean, w);
      auto g = losses::generator_loss(dis(x_rec));
      auto loss = ag::weighted_sum<float>({vae, g}, {1.0f, static_cast<float>(w.gan)});
      if (!finite(loss.item()))
        throw DivergenceError("feature-net pretraining diverged (domain " + data::to_string(d) + ", step " +
                                std::to_string(s) + ")",
                              last_checkpoint_.string());
      loss.backward();
      eg_opt.step(lr);

      nn::set_trainable(dp, true);
      auto dl = losses::discriminator_loss(dis(x), dis(x_rec.detach()));
      if (!finite(dl.item()))
        throw DivergenceError("feature-net discriminator diverged (domain " + data::to_string(d) + ")",
                              last_checkpoint_.string());
      dl.backward();
      d_opt.step(lr);

      PretrainRecord rec{s, d, lr, vae.item(), g.item(), dl.item(), std::numeric_limits<double>::quiet_NaN()};
      if ((s + 1) % eval_every == 0 || s + 1 == iterations)
        rec.heldout_recon_l1 = heldout_recon(d, f, dec);
      if (csv)
        csv << fmt::format("{},{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", rec.step, data::to_string(d), rec.lr,
                           rec.vae, rec.g_loss, rec.d_loss, rec.heldout_recon_l1);
      if ((s + 1) % eval_every == 0)
        spdlog::info("pretrain {} step {}/{} vae {:.4f} heldout L1 {:.4f}", data::to_string(d), s + 1, iterations,
                     rec.vae, rec.heldout_recon_l1);
      result.log.push_back(rec);
    }
    result.heldout_after[di] = heldout_recon(d, f, dec);
  }
  model_->freeze_feature_nets();
  return result;
}

StepInfo Trainer::train_step(const TensorF& batch_a, const TensorF& batch_b)
{
  if (!model_->feature_nets_frozen())
    throw StateError("feature nets must be pretrained and frozen before the main training phase");
  if (batch_a.rank() != 4 || batch_a.shape() != batch_b.shape())
    throw InvalidArgument("train_step expects equally shaped (N, 3, H, W) batches");

  auto& m = *model_;
  const auto& w = cfg_.loss;
  const double lr = lr_at(step_);
  const int64_t n = batch_a.dim(0);
  m.set_training(true);
  nn::set_trainable(d_params_, false);

  std::vector<int64_t> ex_b(static_cast<size_t>(n)), ex_a(static_cast<size_t>(n));
  for (auto& i : ex_b)
    i = uniform_index(rng_, n);
  for (auto& i : ex_a)
    i = uniform_index(rng_, n);

  const Var<float> xa(batch_a), xb(batch_b);
  const Var<float> xa_ex(take(batch_a, ex_a)), xb_ex(take(batch_b, ex_b));
  Var<float> fa, fb, fa_ex, fb_ex;
  {
    ag::NoGradGuard guard;
    fa = m.feature_maps(xa, Domain::A);
    fb = m.feature_maps(xb, Domain::B);
    fa_ex = Var<float>(take(fa.value(), ex_a));
    fb_ex = Var<float>(take(fb.value(), ex_b));
  }

  const auto la = m.encode(xa, Domain::A);
  const auto lb = m.encode(xb, Domain::B);
  auto decode = [&](const Var<float>& content, const nn::Guidance<float>& g, Domain target) {
    return m.generate(ops::masked_adain(content, g.mask, g.affine), target);
  };
  const auto x_aa = decode(la.content, m.guidance_from_features(fa, fa), Domain::A);
  const auto x_bb = decode(lb.content, m.guidance_from_features(fb, fb), Domain::B);
  const auto x_ab = decode(la.content, m.guidance_from_features(fa, fb_ex), Domain::B);
  const auto x_ba = decode(lb.content, m.guidance_from_features(fb, fa_ex), Domain::A);

  // Cycles: the translation is re-encoded in its new domain and sent back
  // with the original image's own style.
  const auto lab = m.encode(x_ab, Domain::B);
  const auto x_aba = decode(lab.content, m.guidance_from_features(m.feature_maps(x_ab, Domain::B), fa), Domain::A);
  const auto lba = m.encode(x_ba, Domain::A);
  const auto x_bab = decode(lba.content, m.guidance_from_features(m.feature_maps(x_ba, Domain::A), fb), Domain::B);

  losses::FlowTerms<float> t;
  t.vae_A = losses::vae_loss(xa, x_aa, la.z_mean, w);
  t.vae_B = losses::vae_loss(xb, x_bb, lb.z_mean, w);
  t.gan_A = losses::generator_loss(m.discriminate(x_ba, Domain::A));
  t.gan_B = losses::generator_loss(m.discriminate(x_ab, Domain::B));
  t.cc_A = losses::cycle_consistency_loss(xa, x_aba, lab.z_mean, w);
  t.cc_B = losses::cycle_consistency_loss(xb, x_bab, lba.z_mean, w);
  if (extractor_) {
    const auto& vgg = *extractor_;
    nn::FeatureMapSet<float> phi_a, phi_b, phi_a_ex, phi_b_ex;
    {
      ag::NoGradGuard guard;
      phi_a = vgg(xa);
      phi_b = vgg(xb);
      phi_a_ex = vgg(xa_ex);
      phi_b_ex = vgg(xb_ex);
    }
    const auto pa = losses::perceptual_loss(vgg(x_ab), phi_a, phi_b_ex);
    const auto pb = losses::perceptual_loss(vgg(x_ba), phi_b, phi_a_ex);
    t.content_A = pa.content;
    t.style_A = pa.style;
    t.content_B = pb.content;
    t.style_B = pb.style;
  } else {
    t.content_A = t.style_A = t.content_B = t.style_B = zero_scalar();
  }

  auto total = losses::total_loss(t, w);
  if (!finite(total.report.total))
    throw DivergenceError(fmt::format("training diverged at step {} (total loss {})", step_, total.report.total),
                          last_checkpoint_.string());
  total.total.backward();
  g_opt_.step(lr);

  StepInfo info;
  info.step = step_;
  info.lr = lr;
  info.report = total.report;
  if ((step_ + 1) % cfg_.train.updates_per_d == 0) {
    nn::set_trainable(d_params_, true);
    const auto ab = x_ab.detach(), ba = x_ba.detach();
    auto dl = ag::add(losses::discriminator_loss(m.discriminate(xa, Domain::A), m.discriminate(ba, Domain::A)),
                      losses::discriminator_loss(m.discriminate(xb, Domain::B), m.discriminate(ab, Domain::B)));
    if (!finite(dl.item()))
      throw DivergenceError(fmt::format("discriminator diverged at step {}", step_), last_checkpoint_.string());
    dl.backward();
    d_opt_.step(lr);
    nn::set_trainable(d_params_, false);
    last_d_loss_ = dl.item();
    ++d_updates_;
    info.d_updated = true;
  }
  info.d_loss = last_d_loss_;
  ++step_;
  return info;
}

StepInfo Trainer::step_on_next_batch()
{
  auto [a, b] = next_batch();
  return train_step(a, b);
}

void Trainer::save_checkpoint(const std::filesystem::path& path) const
{
  archive::Archive ar;
  ar.kind = "xtrans-checkpoint";
  ar.meta = {{"checkpoint_version", kCheckpointVersion},
             {"step", step_},
             {"d_updates", d_updates_},
             {"last_d_loss", last_d_loss_},
             {"config", cfg_.to_json()},
             {"arch", arch_json(model_->arch())},
             {"feature_nets_frozen", model_->feature_nets_frozen()},
             {"rng", rng_state(rng_)},
             {"noise_rng", rng_state(model_->noise_rng())},
             {"iterator", iterator_ ? json(iterator_->state()) : json(nullptr)}};
  for (const auto& p : model_->all_parameters())
    ar.put("param/" + p.name, p.var.value());
  g_opt_.save(ar, "adam_g/");
  d_opt_.save(ar, "adam_d/");
  archive::save(path, ar);
  const_cast<Trainer*>(this)->last_checkpoint_ = path;
}

namespace {

void check_checkpoint_header(const archive::Archive& ar, const std::filesystem::path& path)
{
  const int version = ar.meta.value("checkpoint_version", -1);
  if (version != kCheckpointVersion)
    throw VersionError(path.string() + " is checkpoint version " + std::to_string(version) + ", this build reads " +
                       std::to_string(kCheckpointVersion));
}

void check_params(const archive::Archive& ar, const nn::ParamList<float>& params)
{
  for (const auto& p : params) {
    const std::string key = "param/" + p.name;
    if (!ar.has(key))
      throw ConfigError("checkpoint lacks parameter " + p.name + " (architecture mismatch)");
    if (ar.get(key).shape() != p.var.shape())
      throw ConfigError("checkpoint parameter " + p.name + " has shape " + shape_str(ar.get(key).shape()) +
                        ", model expects " + shape_str(p.var.shape()));
  }
}

void assign_params(const archive::Archive& ar, const nn::ParamList<float>& params)
{
  for (const auto& p : params) {
    auto var = p.var;
    var.mutable_value() = ar.get("param/" + p.name);
  }
}

} // namespace

void Trainer::load_checkpoint(const std::filesystem::path& path)
{
  const auto ar = archive::load(path, "xtrans-checkpoint");
  check_checkpoint_header(ar, path);
  if (ar.meta.at("arch") != arch_json(model_->arch()))
    throw ConfigError("checkpoint architecture " + ar.meta.at("arch").dump() + " does not match configured " +
                      arch_json(model_->arch()).dump());
  const auto params = model_->all_parameters();
  check_params(ar, params);
  g_opt_.validate(ar, "adam_g/");
  d_opt_.validate(ar, "adam_d/");

  assign_params(ar, params);
  g_opt_.load(ar, "adam_g/");
  d_opt_.load(ar, "adam_d/");
  step_ = ar.meta.at("step").get<int64_t>();
  d_updates_ = ar.meta.at("d_updates").get<int64_t>();
  last_d_loss_ = ar.meta.value("last_d_loss", 0.0);
  set_rng_state(rng_, ar.meta.at("rng").get<std::string>());
  set_rng_state(model_->noise_rng(), ar.meta.at("noise_rng").get<std::string>());
  if (iterator_ && ar.meta.at("iterator").is_string())
    iterator_->set_state(ar.meta.at("iterator").get<std::string>());
  if (ar.meta.value("feature_nets_frozen", false))
    model_->freeze_feature_nets();
  nn::set_trainable(d_params_, false);
  last_checkpoint_ = path;
}

std::filesystem::path Trainer::run(const std::filesystem::path& dir, const std::function<void(const StepInfo&)>& on_step)
{
  std::filesystem::create_directories(dir);
  if (!model_->feature_nets_frozen()) {
    spdlog::info("pretraining feature nets for {} iterations per domain", cfg_.train.pretrain_iterations);
    const auto pre = pretrain_feature_nets(cfg_.train.pretrain_iterations, dir / "pretrain_metrics.csv");
    spdlog::info("held-out reconstruction L1: A {:.4f} -> {:.4f}, B {:.4f} -> {:.4f}", pre.heldout_before[0],
                 pre.heldout_after[0], pre.heldout_before[1], pre.heldout_after[1]);
    save_checkpoint(dir / "pretrained.xtck");
  }
  losses::MetricsCsv metrics(dir / "metrics.csv", step_ > 0);
  const auto& tc = cfg_.train;
  while (step_ < tc.iterations) {
    const auto info = step_on_next_batch();
    if (info.step % tc.log_interval == 0 || step_ == tc.iterations) {
      metrics.write(info.step, info.lr, info.report, info.d_loss);
      spdlog::info("step {}/{} lr {:.3g} total {:.4f} d {:.4f}", info.step + 1, tc.iterations, info.lr,
                   info.report.total, info.d_loss);
    }
    if (on_step)
      on_step(info);
    if (tc.checkpoint_interval > 0 && step_ % tc.checkpoint_interval == 0 && step_ < tc.iterations) {
      save_checkpoint(dir / fmt::format("checkpoint_{:07d}.xtck", step_));
      save_checkpoint(dir / "last.xtck");
    }
  }
  const auto final_path = dir / "final.xtck";
  save_checkpoint(final_path);
  return final_path;
}

LoadedModel load_model(const std::filesystem::path& checkpoint)
{
  const auto ar = archive::load(checkpoint, "xtrans-checkpoint");
  check_checkpoint_header(ar, checkpoint);
  LoadedModel out;
  out.config = config::from_json(ar.meta.at("config"));
  out.step = ar.meta.at("step").get<int64_t>();
  out.model = std::make_unique<Model>(resolved_arch(out.config), 0);
  out.model->guidance_options() = out.config.guidance();
  const auto params = out.model->all_parameters();
  check_params(ar, params);
  assign_params(ar, params);
  if (!ar.meta.value("feature_nets_frozen", false))
    throw StateError(checkpoint.string() + " was written before feature-net pretraining finished");
  out.model->freeze_feature_nets();
  nn::set_trainable(out.model->generator_parameters(), false);
  nn::set_trainable(out.model->discriminator_parameters(), false);
  out.model->set_training(false);
  return out;
}

} // namespace xtrans::train
