#include "pretext/pretext.h"

#include <cstring>

namespace dgad {

// Lexicographic over the images of (TR, BL, BR); index 0 is identity.
const int kPerms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};

Protocol Protocol::from_int(int id) {
  switch (id) {
    case 1: return Protocol(ProtocolKind::kRotation);
    case 2: return Protocol(ProtocolKind::kJigsaw);
    case 3: return Protocol(ProtocolKind::kJigsawRotation);
    default: fail("protocol must be 1, 2 or 3, got " + std::to_string(id));
  }
}

int64_t Protocol::label_dim() const {
  switch (kind) {
    case ProtocolKind::kRotation: return 4;
    case ProtocolKind::kJigsaw: return 6;
    case ProtocolKind::kJigsawRotation: return 18;
  }
  fail("bad protocol kind");
}

std::vector<int64_t> Protocol::label_blocks() const {
  switch (kind) {
    case ProtocolKind::kRotation: return {4};
    case ProtocolKind::kJigsaw: return {6};
    case ProtocolKind::kJigsawRotation: return {6, 4, 4, 4};
  }
  fail("bad protocol kind");
}

int64_t Protocol::num_transforms() const {
  switch (kind) {
    case ProtocolKind::kRotation: return 4;
    case ProtocolKind::kJigsaw: return 6;
    case ProtocolKind::kJigsawRotation: return 6 * 64;
  }
  fail("bad protocol kind");
}

void Protocol::validate_spec(const TransformSpec& t) const {
  auto in_range = [](int v, int hi) { return v >= 0 && v < hi; };
  switch (kind) {
    case ProtocolKind::kRotation:
      if (!in_range(t.rotation, 4) || t.perm != 0 || t.rots != std::array<int, 3>{0, 0, 0}) fail("invalid rotation transform spec");
      return;
    case ProtocolKind::kJigsaw:
      if (!in_range(t.perm, 6) || t.rotation != 0 || t.rots != std::array<int, 3>{0, 0, 0}) fail("invalid jigsaw transform spec");
      return;
    case ProtocolKind::kJigsawRotation:
      if (!in_range(t.perm, 6) || t.rotation != 0) fail("invalid jigsaw-rotation transform spec");
      for (int r : t.rots) {
        if (!in_range(r, 4)) fail("invalid quadrant rotation in transform spec");
      }
      return;
  }
}

TransformSpec Protocol::transform_by_index(int64_t idx) const {
  if (idx < 0 || idx >= num_transforms()) fail("transform index out of range");
  TransformSpec t;
  switch (kind) {
    case ProtocolKind::kRotation:
      t.rotation = static_cast<int>(idx);
      break;
    case ProtocolKind::kJigsaw:
      t.perm = static_cast<int>(idx);
      break;
    case ProtocolKind::kJigsawRotation:
      t.perm = static_cast<int>(idx / 64);
      t.rots[0] = static_cast<int>((idx / 16) % 4);
      t.rots[1] = static_cast<int>((idx / 4) % 4);
      t.rots[2] = static_cast<int>(idx % 4);
      break;
  }
  return t;
}

int64_t Protocol::index_of(const TransformSpec& t) const {
  validate_spec(t);
  switch (kind) {
    case ProtocolKind::kRotation: return t.rotation;
    case ProtocolKind::kJigsaw: return t.perm;
    case ProtocolKind::kJigsawRotation: return ((t.perm * 4 + t.rots[0]) * 4 + t.rots[1]) * 4 + t.rots[2];
  }
  fail("bad protocol kind");
}

TransformSpec Protocol::sample(RngStream& rng) const { return transform_by_index(rng.uniform_int(0, num_transforms() - 1)); }

Tensor Protocol::encode_label(const TransformSpec& t) const {
  validate_spec(t);
  Tensor bits({label_dim()});
  switch (kind) {
    case ProtocolKind::kRotation:
      bits[t.rotation] = 1.0;
      break;
    case ProtocolKind::kJigsaw:
      bits[t.perm] = 1.0;
      break;
    case ProtocolKind::kJigsawRotation:
      bits[t.perm] = 1.0;
      for (int j = 0; j < 3; ++j) bits[6 + 4 * j + t.rots[j]] = 1.0;
      break;
  }
  return bits;
}

TransformSpec Protocol::decode_label(const Tensor& bits) const {
  if (bits.numel() != label_dim()) fail("label width mismatch");
  auto read_block = [&](int64_t off, int64_t len) {
    int hit = -1;
    for (int64_t i = 0; i < len; ++i) {
      if (bits[off + i] == 1.0) {
        if (hit >= 0) fail("label block has multiple bits set");
        hit = static_cast<int>(i);
      } else if (bits[off + i] != 0.0) {
        fail("label bits must be exactly 0 or 1");
      }
    }
    if (hit < 0) fail("label block has no bit set");
    return hit;
  };
  TransformSpec t;
  switch (kind) {
    case ProtocolKind::kRotation:
      t.rotation = read_block(0, 4);
      break;
    case ProtocolKind::kJigsaw:
      t.perm = read_block(0, 6);
      break;
    case ProtocolKind::kJigsawRotation:
      t.perm = read_block(0, 6);
      for (int j = 0; j < 3; ++j) t.rots[j] = read_block(6 + 4 * j, 4);
      break;
  }
  return t;
}

// ---------------------------------------------------------------------------
// image ops
// ---------------------------------------------------------------------------

Tensor rotate90(const Tensor& img, int k) {
  if (img.rank() != 3) fail("rotate90 expects [C,H,W]");
  if (img.dim(1) != img.dim(2)) fail("rotate90 requires a square image, got " + img.shape_str());
  k = ((k % 4) + 4) % 4;
  if (k == 0) return img;
  int64_t C = img.dim(0), S = img.dim(1);
  Tensor out({C, S, S});
  for (int64_t c = 0; c < C; ++c) {
    const double* src = img.data() + c * S * S;
    double* dst = out.data() + c * S * S;
    for (int64_t r = 0; r < S; ++r) {
      for (int64_t col = 0; col < S; ++col) {
        // One CCW quarter turn: out(r, c) = in(c, S-1-r); apply k times.
        int64_t sr = r, sc = col;
        for (int rep = 0; rep < k; ++rep) {
          int64_t nr = sc, nc = S - 1 - sr;
          sr = nr;
          sc = nc;
        }
        dst[r * S + col] = src[sr * S + sc];
      }
    }
  }
  return out;
}

namespace {

// Quadrant row/col origin; slot -1 is top-left (fixed), 0..2 movable.
void quadrant_origin(int slot, int64_t half, int64_t& r0, int64_t& c0) {
  switch (slot) {
    case -1: r0 = 0; c0 = 0; return;
    case 0: r0 = 0; c0 = half; return;
    case 1: r0 = half; c0 = 0; return;
    case 2: r0 = half; c0 = half; return;
  }
  fail("bad quadrant slot");
}

Tensor extract_quadrant(const Tensor& img, int slot) {
  int64_t C = img.dim(0), S = img.dim(1), half = S / 2;
  int64_t r0, c0;
  quadrant_origin(slot, half, r0, c0);
  Tensor q({C, half, half});
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t r = 0; r < half; ++r) {
      std::memcpy(q.data() + (c * half + r) * half, img.data() + (c * S + r0 + r) * S + c0, static_cast<size_t>(half) * sizeof(double));
    }
  }
  return q;
}

void insert_quadrant(Tensor& img, int slot, const Tensor& q) {
  int64_t C = img.dim(0), S = img.dim(1), half = S / 2;
  int64_t r0, c0;
  quadrant_origin(slot, half, r0, c0);
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t r = 0; r < half; ++r) {
      std::memcpy(img.data() + (c * S + r0 + r) * S + c0, q.data() + (c * half + r) * half, static_cast<size_t>(half) * sizeof(double));
    }
  }
}

}  // namespace

Tensor apply_transform(const Tensor& img, const TransformSpec& t, ProtocolKind kind) {
  Protocol(kind).validate_spec(t);
  if (img.rank() != 3) fail("apply_transform expects [C,H,W]");
  if (img.dim(1) != img.dim(2)) fail("apply_transform requires a square image");
  if (kind == ProtocolKind::kRotation) return rotate90(img, t.rotation);

  if (img.dim(1) % 2 != 0) fail("jigsaw transforms require an even image size, got " + img.shape_str());
  Tensor out = img;
  for (int j = 0; j < 3; ++j) {
    Tensor q = extract_quadrant(img, kPerms[t.perm][j]);
    if (kind == ProtocolKind::kJigsawRotation && t.rots[j] != 0) q = rotate90(q, t.rots[j]);
    insert_quadrant(out, j, q);
  }
  return out;
}

Tensor apply_transform_batch(const Tensor& batch, const TransformSpec& t, ProtocolKind kind) {
  if (batch.rank() != 4) fail("apply_transform_batch expects [N,C,H,W]");
  int64_t N = batch.dim(0), C = batch.dim(1), H = batch.dim(2), W = batch.dim(3);
  Tensor out({N, C, H, W});
  int64_t stride = C * H * W;
  for (int64_t n = 0; n < N; ++n) {
    Tensor img({C, H, W}, std::vector<double>(batch.data() + n * stride, batch.data() + (n + 1) * stride));
    Tensor timg = apply_transform(img, t, kind);
    std::memcpy(out.data() + n * stride, timg.data(), static_cast<size_t>(stride) * sizeof(double));
  }
  return out;
}

}  // namespace dgad
