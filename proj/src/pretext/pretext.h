#pragma once

#include <array>

#include "core/rng.h"
#include "core/tensor.h"

namespace dgad {

// Geometric pretext transforms.  Protocol 1 rotates the whole image by
// multiples of 90 degrees (4 classes).  Protocol 2 permutes the three
// movable quadrants of a 2x2 jigsaw -- top-left stays fixed so absolute
// position cues survive -- giving 6 permutation classes.  Protocol 3
// additionally rotates each movable quadrant, giving 6*4^3 = 384
// combinations encoded as a multi-hot label over blocks {6,4,4,4}.

enum class ProtocolKind { kRotation = 1, kJigsaw = 2, kJigsawRotation = 3 };

struct TransformSpec {
  int rotation = 0;                  // whole-image CCW quarter turns (protocol 1)
  int perm = 0;                      // quadrant permutation index (protocols 2, 3)
  std::array<int, 3> rots{0, 0, 0};  // per-quadrant CCW quarter turns (protocol 3)

  bool operator==(const TransformSpec& o) const { return rotation == o.rotation && perm == o.perm && rots == o.rots; }
};

// Movable quadrants in row-major order: 0=top-right, 1=bottom-left,
// 2=bottom-right.  kPerms[p][j] = which source quadrant lands at slot j.
extern const int kPerms[6][3];

struct Protocol {
  ProtocolKind kind = ProtocolKind::kRotation;

  explicit Protocol(ProtocolKind k = ProtocolKind::kRotation) : kind(k) {}
  static Protocol from_int(int id);

  int64_t label_dim() const;
  std::vector<int64_t> label_blocks() const;
  int64_t num_transforms() const;

  TransformSpec transform_by_index(int64_t idx) const;
  int64_t index_of(const TransformSpec& t) const;
  TransformSpec sample(RngStream& rng) const;
  static TransformSpec identity() { return {}; }
  static bool is_identity(const TransformSpec& t) { return t == TransformSpec{}; }

  // Multi-hot bit vector [label_dim]; exactly one bit per block.
  Tensor encode_label(const TransformSpec& t) const;
  TransformSpec decode_label(const Tensor& bits) const;

  void validate_spec(const TransformSpec& t) const;
};

// CCW quarter-turn rotation of a square [C,H,W] image, k in 0..3.
Tensor rotate90(const Tensor& img, int k);

// Apply a transform to one [C,H,W] image or a [N,C,H,W] batch.
Tensor apply_transform(const Tensor& img, const TransformSpec& t, ProtocolKind kind);
Tensor apply_transform_batch(const Tensor& batch, const TransformSpec& t, ProtocolKind kind);

}  // namespace dgad
