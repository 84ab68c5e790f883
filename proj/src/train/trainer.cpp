#include "train/trainer.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>

#include "losses/losses.h"

namespace dgad {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// epoch scheduling
// ---------------------------------------------------------------------------

std::vector<int64_t> epoch_permutation(uint64_t seed, int64_t epoch, int64_t n) {
  std::vector<int64_t> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), int64_t{0});
  RngStream r(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(epoch + 1)));
  r.shuffle(perm);
  return perm;
}

std::vector<std::vector<int64_t>> epoch_batches(const std::vector<int64_t>& perm, int64_t batch_size) {
  int64_t n = static_cast<int64_t>(perm.size());
  if (n < 2) fail("training needs at least 2 samples");
  if (batch_size < 2) fail("batch_size must be >= 2");
  std::vector<std::vector<int64_t>> batches;
  for (int64_t start = 0; start < n; start += batch_size) {
    int64_t count = std::min(batch_size, n - start);
    batches.emplace_back(perm.begin() + start, perm.begin() + start + count);
  }
  if (batches.size() > 1 && batches.back().size() == 1) {
    auto& prev = batches[batches.size() - 2];
    if (prev.size() > 2) {
      // borrow one image so the tail becomes a pair
      batches.back().insert(batches.back().begin(), prev.back());
      prev.pop_back();
    } else {
      // a pair cannot spare one; fold the straggler in instead
      prev.push_back(batches.back().front());
      batches.pop_back();
    }
  }
  return batches;
}

// Batches per epoch depends only on (n, batch_size): ceil(n/batch)
// minus any fold of a trailing singleton into its neighbor.
static int64_t batches_per_epoch(int64_t n, int64_t batch_size) {
  std::vector<int64_t> flat(static_cast<size_t>(n));
  std::iota(flat.begin(), flat.end(), int64_t{0});
  return static_cast<int64_t>(epoch_batches(flat, batch_size).size());
}

int64_t Trainer::total_iterations(int64_t dataset_size) const {
  return cfg.epochs > 0 ? cfg.epochs * batches_per_epoch(dataset_size, cfg.batch_size) : cfg.iterations;
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

Trainer::Trainer(const TrainConfig& c)
    : cfg(c),
      protocol(Protocol::from_int(c.protocol_id)),
      rng(c.seed ^ 0xd1b54a32d192ed03ULL) {
  cfg.validate();
  RngStream init(cfg.seed);
  en = std::make_unique<Encoder>(cfg.net, init);
  de = std::make_unique<Decoder>(cfg.net, init);
  disc = std::make_unique<Discriminator>(cfg.net, init);

  ParamMap g_params = en->params();
  for (const ParamEntry& p : de->params()) g_params.push_back(p);
  set_requires_grad(g_params, true);
  ParamMap d_params = disc->params();
  set_requires_grad(d_params, true);
  opt_g = Adam(g_params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);
  opt_d = Adam(d_params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2);
}

// ---------------------------------------------------------------------------
// one step
// ---------------------------------------------------------------------------

namespace {

Tensor transform_per_image(const Tensor& batch, const std::vector<TransformSpec>& specs, ProtocolKind kind) {
  int64_t N = batch.dim(0), C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
  Tensor out({N, C, H, W});
  int64_t elems = C * H * W;
  Tensor img({C, H, W});
  for (int64_t i = 0; i < N; ++i) {
    std::copy(batch.data() + i * elems, batch.data() + (i + 1) * elems, img.data());
    Tensor t = apply_transform(img, specs[static_cast<size_t>(i)], kind);
    std::copy(t.data(), t.data() + elems, out.data() + i * elems);
  }
  return out;
}

Tensor labels_for(const Protocol& p, const std::vector<TransformSpec>& specs) {
  int64_t N = static_cast<int64_t>(specs.size()), L = p.label_dim();
  Tensor out({N, L});
  for (int64_t i = 0; i < N; ++i) {
    Tensor row = p.encode_label(specs[static_cast<size_t>(i)]);
    std::copy(row.data(), row.data() + L, out.data() + i * L);
  }
  return out;
}

Tensor identity_labels(const Protocol& p, int64_t n) {
  return labels_for(p, std::vector<TransformSpec>(static_cast<size_t>(n), Protocol::identity()));
}

void check_finite(const LossReport& r) {
  auto bad = [](double v) { return !std::isfinite(v); };
  std::string term;
  if (bad(r.rec)) term = "rec";
  else if (bad(r.cls_d)) term = "cls_d";
  else if (bad(r.cls_g)) term = "cls_g";
  else if (bad(r.cmp)) term = "cmp";
  else if (bad(r.adv_d)) term = "adv_d";
  else if (bad(r.adv_g)) term = "adv_g";
  else if (bad(r.total_d)) term = "total_d";
  else if (bad(r.total_g)) term = "total_g";
  if (term.empty()) return;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "non-finite loss term '%s' at iteration %lld (rec=%g cls_d=%g cls_g=%g cmp=%g adv_d=%g adv_g=%g)",
                term.c_str(), static_cast<long long>(r.iteration), r.rec, r.cls_d, r.cls_g, r.cmp, r.adv_d, r.adv_g);
  fail(buf);
}

}  // namespace

LossReport Trainer::train_step(const Tensor& batch) {
  int64_t N = batch.dim(0);
  std::vector<TransformSpec> specs(static_cast<size_t>(N));
  for (auto& s : specs) s = protocol.sample(rng);
  return train_step(batch, specs);
}

LossReport Trainer::train_step(const Tensor& batch, const std::vector<TransformSpec>& specs) {
  if (batch.rank() != 4) fail("train_step expects [N,C,H,W]");
  int64_t N = batch.dim(0);
  if (N < 2) fail("train_step needs batch size >= 2");
  if (static_cast<int64_t>(specs.size()) != N) fail("one transform spec per image required");
  bool use_cls = cfg.weights.cls > 0.0;

  Tensor xt_tensor = transform_per_image(batch, specs, protocol.kind);
  Tensor c_t = labels_for(protocol, specs);
  Tensor c_r = identity_labels(protocol, N);
  std::vector<int64_t> blocks = protocol.label_blocks();

  // Generator-side tape, built once and shared by both phases.
  Var x_r = Var::leaf(batch, false);
  Var x_t = Var::leaf(std::move(xt_tensor), false);
  Var z_r = en->forward(x_r);
  Var z_t = en->forward(x_t);
  Var x_hat_r = de->forward(z_r);
  Var x_hat_t = de->forward(z_t);
  Var z_hat_t = en->forward(x_hat_t);

  LossReport rep;
  rep.iteration = iteration + 1;

  // --- discriminator phase: generator outputs detached ---------------------
  {
    Var real = detach(z_r), fake_x = detach(x_hat_t), fake_z = detach(z_hat_t);
    DiscOut d_real = disc->forward(x_r, real);
    DiscOut d_fake = disc->forward(fake_x, fake_z);
    Var adv_d = adversarial_loss_d(d_real.adv, d_fake.adv);
    Var total_d = adv_d;
    if (use_cls) {
      DiscOut d_cls = disc->forward(x_t, detach(z_t));
      Var cls_d = classification_loss(d_cls.cls, c_t, blocks);
      rep.cls_d = cls_d.value().item();
      total_d = add(total_d, scale(cls_d, cfg.weights.cls));
    }
    rep.adv_d = adv_d.value().item();
    rep.total_d = total_d.value().item();
    backward(total_d);
    opt_d.step();
    opt_d.zero_grad();
  }

  // --- generator phase: discriminator frozen, fresh critic forwards --------
  {
    ParamMap d_params = disc->params();
    set_requires_grad(d_params, false);

    DiscOut d_fake = disc->forward(x_hat_t, z_hat_t);
    Var adv_g = adversarial_loss_g(d_fake.adv);
    Var rec = reconstruction_loss(x_r, x_hat_r);
    if (cfg.pixel_restoration) rec = scale(add(rec, reconstruction_loss(x_r, x_hat_t)), 0.5);
    Var total_g = add(adv_g, scale(rec, cfg.weights.rec));
    if (use_cls) {
      DiscOut d_cls = disc->forward(x_t, z_t);
      Var cls_g = add(classification_loss(d_cls.cls, c_t, blocks), classification_loss(d_fake.cls, c_r, blocks));
      rep.cls_g = cls_g.value().item();
      total_g = add(total_g, scale(cls_g, cfg.weights.cls));
    }
    if (cfg.compactness_enabled) {
      Var cmp = compactness_loss(z_r);
      rep.cmp = cmp.value().item();
      total_g = add(total_g, scale(cmp, cfg.weights.cmp));
    }
    rep.adv_g = adv_g.value().item();
    rep.rec = rec.value().item();
    rep.total_g = total_g.value().item();
    backward(total_g);
    opt_g.step();
    opt_g.zero_grad();

    set_requires_grad(d_params, true);
  }

  check_finite(rep);
  return rep;
}

// ---------------------------------------------------------------------------
// full loop
// ---------------------------------------------------------------------------

namespace {

Tensor assemble_batch(const Dataset& data, const std::vector<int64_t>& idx, bool augment, RngStream& rng) {
  if (!augment) return stack_batch(data.samples, idx);
  int64_t N = static_cast<int64_t>(idx.size());
  const Tensor& first = data.samples[static_cast<size_t>(idx[0])].image;
  Tensor out({N, first.dim(0), first.dim(1), first.dim(2)});
  int64_t elems = first.numel();
  for (int64_t i = 0; i < N; ++i) {
    double factor = 1.0 + 0.2 * rng.uniform();
    Tensor img = zoom_augment(data.samples[static_cast<size_t>(idx[static_cast<size_t>(i)])].image, factor);
    std::copy(img.data(), img.data() + elems, out.data() + i * elems);
  }
  return out;
}

}  // namespace

std::string Trainer::train(const Dataset& data) {
  if (data.samples.empty()) fail("training dataset is empty");
  int64_t n = static_cast<int64_t>(data.samples.size());
  if (n < 2) fail("training needs at least 2 samples");
  for (const Sample& s : data.samples) {
    if (s.image.dim(0) != cfg.net.image_channels || s.image.dim(1) != cfg.net.image_size) {
      fail("sample " + s.id + " does not match configured image size/channels");
    }
  }
  int64_t total = total_iterations(n);
  int64_t per_epoch = batches_per_epoch(n, cfg.batch_size);

  std::error_code ec;
  fs::create_directories(cfg.run_dir, ec);
  if (ec) fail("cannot create run directory " + cfg.run_dir + ": " + ec.message());
  std::string metrics_path = cfg.run_dir + "/metrics.csv";
  bool fresh = iteration == 0 || !fs::exists(metrics_path);
  std::ofstream metrics(metrics_path, fresh ? std::ios::trunc : std::ios::app);
  if (!metrics) fail("cannot write " + metrics_path);
  if (fresh) metrics << "iteration,rec,cls_d,cls_g,cmp,adv_d,adv_g,total_d,total_g\n";

  std::vector<std::vector<int64_t>> batches;
  int64_t batches_epoch = -1;
  std::string last_ckpt;
  while (iteration < total) {
    int64_t epoch = iteration / per_epoch;
    if (epoch != batches_epoch) {
      batches = epoch_batches(epoch_permutation(cfg.seed, epoch, n), cfg.batch_size);
      batches_epoch = epoch;
    }
    const std::vector<int64_t>& idx = batches[static_cast<size_t>(iteration % per_epoch)];
    Tensor batch = assemble_batch(data, idx, cfg.augment_zoom, rng);
    LossReport rep = train_step(batch);
    ++iteration;

    char row[320];
    std::snprintf(row, sizeof(row), "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                  static_cast<long long>(iteration), rep.rec, rep.cls_d, rep.cls_g, rep.cmp, rep.adv_d, rep.adv_g,
                  rep.total_d, rep.total_g);
    metrics << row;
    metrics.flush();
    if (iteration % 50 == 0 || iteration == total) {
      std::cerr << "[train] iter " << iteration << "/" << total << " total_d=" << rep.total_d
                << " total_g=" << rep.total_g << " rec=" << rep.rec << "\n";
    }
    if ((cfg.checkpoint_every > 0 && iteration % cfg.checkpoint_every == 0) || iteration == total) {
      last_ckpt = cfg.run_dir + "/ckpt-" + std::to_string(iteration);
      save(last_ckpt);
    }
  }
  if (last_ckpt.empty()) {
    last_ckpt = cfg.run_dir + "/ckpt-" + std::to_string(iteration);
    save(last_ckpt);
  }
  return last_ckpt;
}

// ---------------------------------------------------------------------------
// checkpointing
// ---------------------------------------------------------------------------

CheckpointData Trainer::snapshot() const {
  CheckpointData data;
  data.iteration = iteration;
  data.steps_g = opt_g.steps();
  data.steps_d = opt_d.steps();
  data.rng_state = rng.serialize();
  data.cfg = cfg;
  auto put = [&](const std::string& name, const Tensor& t) {
    if (!data.tensors.emplace(name, t).second) fail("duplicate checkpoint tensor name: " + name);
  };
  for (const ParamEntry& p : en->params()) put(p.name, p.var.value());
  for (const ParamEntry& p : de->params()) put(p.name, p.var.value());
  for (const ParamEntry& p : disc->params()) put(p.name, p.var.value());
  for (const BufferEntry& b : disc->buffers()) put(b.name, *b.tensor);
  std::vector<std::pair<std::string, Tensor*>> moments;
  const_cast<Adam&>(opt_g).collect_state(moments, "opt_g");
  const_cast<Adam&>(opt_d).collect_state(moments, "opt_d");
  for (auto& [name, t] : moments) put(name, *t);
  return data;
}

void Trainer::restore(const CheckpointData& data) {
  iteration = data.iteration;
  opt_g.set_steps(data.steps_g);
  opt_d.set_steps(data.steps_d);
  rng.deserialize(data.rng_state);

  std::vector<std::pair<std::string, Tensor*>> slots;
  for (const ParamEntry& p : en->params()) slots.emplace_back(p.name, &p.var.node()->value);
  for (const ParamEntry& p : de->params()) slots.emplace_back(p.name, &p.var.node()->value);
  for (const ParamEntry& p : disc->params()) slots.emplace_back(p.name, &p.var.node()->value);
  for (const BufferEntry& b : disc->buffers()) slots.emplace_back(b.name, b.tensor);
  opt_g.collect_state(slots, "opt_g");
  opt_d.collect_state(slots, "opt_d");

  std::set<std::string> used;
  for (auto& [name, dst] : slots) {
    auto it = data.tensors.find(name);
    if (it == data.tensors.end()) fail("checkpoint missing tensor '" + name + "'");
    if (it->second.shape() != dst->shape()) fail("checkpoint tensor '" + name + "' has shape " + it->second.shape_str());
    *dst = it->second;
    used.insert(name);
  }
  for (const auto& [name, t] : data.tensors) {
    if (!used.count(name)) fail("checkpoint has unexpected tensor '" + name + "'");
  }
}

void Trainer::save(const std::string& dir) const { save_checkpoint(dir, snapshot()); }

std::unique_ptr<Trainer> Trainer::load(const std::string& ckpt_dir) {
  CheckpointData data = load_checkpoint(ckpt_dir);
  auto trainer = std::make_unique<Trainer>(data.cfg);
  trainer->restore(data);
  return trainer;
}

}  // namespace dgad
