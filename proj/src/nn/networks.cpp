#include "nn/networks.h"

#include <algorithm>

namespace dgad {

void NetConfig::validate() const {
  if (image_size < 4 || image_size % 4 != 0) fail("image_size must be a positive multiple of 4, got " + std::to_string(image_size));
  if (image_channels != 1 && image_channels != 3) fail("image_channels must be 1 (gray) or 3 (rgb), got " + std::to_string(image_channels));
  if (latent_channels < 1 || base_width < 1) fail("latent_channels and base_width must be >= 1");
  if (label_dim < 2) fail("label_dim must be >= 2");
}

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

Encoder::Encoder(const NetConfig& c, RngStream& rng) : cfg(c) {
  cfg.validate();
  int64_t w = cfg.base_width;
  conv_in = Conv2d(cfg.image_channels, w, 7, 1, cfg.padding, cfg.use_coord, false, rng);
  norm_in = InstanceNorm2d(w);
  down1 = Conv2d(w, 2 * w, 4, 2, cfg.padding, cfg.use_coord, false, rng);
  norm1 = InstanceNorm2d(2 * w);
  down2 = Conv2d(2 * w, 4 * w, 4, 2, cfg.padding, cfg.use_coord, false, rng);
  norm2 = InstanceNorm2d(4 * w);
  for (int i = 0; i < 3; ++i) blocks.emplace_back(4 * w, cfg.padding, cfg.use_coord, rng);
  conv_out = Conv2d(4 * w, cfg.latent_channels, 3, 1, cfg.padding, cfg.use_coord, false, rng);
}

Var Encoder::forward(const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 4 || xv.dim(1) != cfg.image_channels || xv.dim(2) != cfg.image_size || xv.dim(3) != cfg.image_size) {
    fail("encoder input shape " + xv.shape_str() + " does not match configured " + std::to_string(cfg.image_channels) + "x" +
         std::to_string(cfg.image_size) + "x" + std::to_string(cfg.image_size));
  }
  Var h = relu(norm_in.forward(conv_in.forward(x)));
  h = relu(norm1.forward(down1.forward(h)));
  h = relu(norm2.forward(down2.forward(h)));
  for (auto& b : blocks) h = b.forward(h);
  return tanh_op(conv_out.forward(h));
}

ParamMap Encoder::params() {
  ParamMap out;
  conv_in.collect(out, "en.conv_in");
  norm_in.collect(out, "en.norm_in");
  down1.collect(out, "en.down1");
  norm1.collect(out, "en.norm1");
  down2.collect(out, "en.down2");
  norm2.collect(out, "en.norm2");
  for (size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(out, "en.res" + std::to_string(i));
  conv_out.collect(out, "en.conv_out");
  return out;
}

int64_t Encoder::param_count() {
  auto p = params();
  return total_param_count(p);
}

// ---------------------------------------------------------------------------
// Decoder
// ---------------------------------------------------------------------------

Decoder::Decoder(const NetConfig& c, RngStream& rng) : cfg(c) {
  cfg.validate();
  int64_t w = cfg.base_width;
  conv_in = Conv2d(cfg.latent_channels, 4 * w, 3, 1, cfg.padding, cfg.use_coord, false, rng);
  norm_in = InstanceNorm2d(4 * w);
  for (int i = 0; i < 3; ++i) blocks.emplace_back(4 * w, cfg.padding, cfg.use_coord, rng);
  up1 = Conv2d(4 * w, 2 * w, 5, 1, cfg.padding, cfg.use_coord, false, rng);
  norm1 = InstanceNorm2d(2 * w);
  up2 = Conv2d(2 * w, w, 5, 1, cfg.padding, cfg.use_coord, false, rng);
  norm2 = InstanceNorm2d(w);
  conv_out = Conv2d(w, cfg.image_channels, 7, 1, cfg.padding, cfg.use_coord, false, rng);
}

Var Decoder::forward(const Var& z) {
  const Tensor& zv = z.value();
  int64_t side = cfg.image_size / 4;
  if (zv.rank() != 4 || zv.dim(1) != cfg.latent_channels || zv.dim(2) != side || zv.dim(3) != side) {
    fail("decoder input shape " + zv.shape_str() + " does not match latent " + std::to_string(cfg.latent_channels) + "x" +
         std::to_string(side) + "x" + std::to_string(side));
  }
  Var h = relu(norm_in.forward(conv_in.forward(z)));
  for (auto& b : blocks) h = b.forward(h);
  h = relu(norm1.forward(up1.forward(bilinear_upsample2(h))));
  h = relu(norm2.forward(up2.forward(bilinear_upsample2(h))));
  return tanh_op(conv_out.forward(h));
}

ParamMap Decoder::params() {
  ParamMap out;
  conv_in.collect(out, "de.conv_in");
  norm_in.collect(out, "de.norm_in");
  for (size_t i = 0; i < blocks.size(); ++i) blocks[i].collect(out, "de.res" + std::to_string(i));
  up1.collect(out, "de.up1");
  norm1.collect(out, "de.norm1");
  up2.collect(out, "de.up2");
  norm2.collect(out, "de.norm2");
  conv_out.collect(out, "de.conv_out");
  return out;
}

int64_t Decoder::param_count() {
  auto p = params();
  return total_param_count(p);
}

// ---------------------------------------------------------------------------
// Discriminator
// ---------------------------------------------------------------------------

Discriminator::Discriminator(const NetConfig& c, RngStream& rng) : cfg(c) {
  cfg.validate();
  int64_t w = cfg.base_width;
  conv_x1 = Conv2d(cfg.image_channels, w, 4, 2, cfg.padding, cfg.use_coord, true, rng);
  conv_x2 = Conv2d(w, 2 * w, 4, 2, cfg.padding, cfg.use_coord, true, rng);
  joint1 = Conv2d(2 * w + cfg.latent_channels, 4 * w, 3, 1, cfg.padding, cfg.use_coord, true, rng);
  joint2 = Conv2d(4 * w, 6 * w, 3, 1, cfg.padding, cfg.use_coord, true, rng);
  joint3 = Conv2d(6 * w, 8 * w, 3, 1, cfg.padding, cfg.use_coord, true, rng);
  head_adv = Dense(8 * w, 1, true, rng);
  head_cls = Dense(8 * w, cfg.label_dim, true, rng);
}

DiscOut Discriminator::forward(const Var& x, const Var& z) {
  const Tensor& xv = x.value();
  const Tensor& zv = z.value();
  if (xv.rank() != 4 || zv.rank() != 4) fail("discriminator expects 4-d image and latent");
  if (xv.dim(0) != zv.dim(0)) fail("discriminator batch mismatch");
  constexpr double kSlope = 0.01;
  Var h = leaky_relu(conv_x1.forward(x), kSlope);
  h = leaky_relu(conv_x2.forward(h), kSlope);
  if (h.value().dim(2) != zv.dim(2) || h.value().dim(3) != zv.dim(3)) {
    fail("latent spatial size " + zv.shape_str() + " does not match image features " + h.value().shape_str());
  }
  if (zv.dim(1) != cfg.latent_channels) fail("latent channel mismatch: " + zv.shape_str());
  h = concat_channels(h, z);
  h = leaky_relu(joint1.forward(h), kSlope);
  h = leaky_relu(joint2.forward(h), kSlope);
  h = leaky_relu(joint3.forward(h), kSlope);
  Var pooled = global_avg_pool(h);
  return {head_adv.forward(pooled), head_cls.forward(pooled)};
}

ParamMap Discriminator::params() {
  ParamMap out;
  conv_x1.collect(out, "d.conv_x1");
  conv_x2.collect(out, "d.conv_x2");
  joint1.collect(out, "d.joint1");
  joint2.collect(out, "d.joint2");
  joint3.collect(out, "d.joint3");
  head_adv.collect(out, "d.head_adv");
  head_cls.collect(out, "d.head_cls");
  return out;
}

BufferMap Discriminator::buffers() {
  BufferMap out;
  conv_x1.collect_buffers(out, "d.conv_x1");
  conv_x2.collect_buffers(out, "d.conv_x2");
  joint1.collect_buffers(out, "d.joint1");
  joint2.collect_buffers(out, "d.joint2");
  joint3.collect_buffers(out, "d.joint3");
  head_adv.collect_buffers(out, "d.head_adv");
  head_cls.collect_buffers(out, "d.head_cls");
  return out;
}

int64_t Discriminator::param_count() {
  auto p = params();
  return total_param_count(p);
}

double Discriminator::max_sigma() {
  double s = 0.0;
  s = std::max(s, conv_x1.sigma_estimate());
  s = std::max(s, conv_x2.sigma_estimate());
  s = std::max(s, joint1.sigma_estimate());
  s = std::max(s, joint2.sigma_estimate());
  s = std::max(s, joint3.sigma_estimate());
  s = std::max(s, head_adv.sigma_estimate());
  s = std::max(s, head_cls.sigma_estimate());
  return s;
}

}  // namespace dgad
