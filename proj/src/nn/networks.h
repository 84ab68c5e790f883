#pragma once

#include "nn/layers.h"

namespace dgad {

struct NetConfig {
  int64_t image_size = 32;
  int64_t image_channels = 3;
  int64_t latent_channels = 128;
  int64_t base_width = 64;  // channel widths scale as {1,2,4,6,8} x base
  PadMode padding = PadMode::kSymmetric;
  bool use_coord = false;
  int64_t label_dim = 4;

  void validate() const;
};

// Image -> spatial latent [N, latent, H/4, W/4] in (-1, 1).
struct Encoder {
  NetConfig cfg;
  Conv2d conv_in, down1, down2, conv_out;
  InstanceNorm2d norm_in, norm1, norm2;
  std::vector<ResBlock> blocks;

  Encoder(const NetConfig& cfg, RngStream& rng);
  Var forward(const Var& x);
  ParamMap params();
  BufferMap buffers() { return {}; }
  int64_t param_count();
};

// Latent -> image [N, C, H, W] in (-1, 1); mirrors the encoder with
// bilinear x2 + conv upsampling stages after the residual blocks.
struct Decoder {
  NetConfig cfg;
  Conv2d conv_in, up1, up2, conv_out;
  InstanceNorm2d norm_in, norm1, norm2;
  std::vector<ResBlock> blocks;

  Decoder(const NetConfig& cfg, RngStream& rng);
  Var forward(const Var& z);
  ParamMap params();
  BufferMap buffers() { return {}; }
  int64_t param_count();
};

struct DiscOut {
  Var adv;  // [N, 1] raw critic score
  Var cls;  // [N, label_dim] logits
};

// Joint (x, z) critic: two strided convs bring x to the latent
// resolution, the latent is concatenated channelwise, and shared conv
// trunk + pooled dense heads produce the critic score and transform
// logits.  All weights spectrally normalized, leaky relu, no norm layers.
struct Discriminator {
  NetConfig cfg;
  Conv2d conv_x1, conv_x2, joint1, joint2, joint3;
  Dense head_adv, head_cls;

  Discriminator(const NetConfig& cfg, RngStream& rng);
  DiscOut forward(const Var& x, const Var& z);
  ParamMap params();
  BufferMap buffers();
  int64_t param_count();
  // Largest current sigma estimate across spectrally normalized weights.
  double max_sigma();
};

}  // namespace dgad
