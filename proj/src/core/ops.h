#pragma once

#include <vector>

#include "core/graph.h"

namespace dgad {

enum class PadMode { kZero, kSymmetric };

// ---------------------------------------------------------------------------
// Differentiable ops.  All take/return Var and tape a backward closure.
// ---------------------------------------------------------------------------

// Edge padding of [N,C,H,W] by p on all four sides.  Symmetric mode
// mirrors including the border pixel: row [a,b,c], p=1 -> [a,a,b,c,c].
Var pad2d(const Var& x, int64_t p, PadMode mode);

// Valid cross-correlation.  x [N,Cin,H,W], w [Cout,Cin,KH,KW], optional
// b [Cout].  Runs as im2col + dgemm with a batched column matrix.
Var conv2d_valid(const Var& x, const Var& w, const Var& b, int64_t stride);

// Per-sample, per-channel normalization with affine.  gamma/beta [C].
Var instance_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);

Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope);
Var tanh_op(const Var& x);

// y = a*x + b elementwise (scalars a, b).
Var affine(const Var& x, double a, double b);
Var add(const Var& a, const Var& b);  // same shape
inline Var scale(const Var& x, double s) { return affine(x, s, 0.0); }

// x [N,F] -> [N,O] with w [O,F], optional b [O].
Var dense(const Var& x, const Var& w, const Var& b);

Var global_avg_pool(const Var& x);           // [N,C,H,W] -> [N,C]
Var flatten2(const Var& x);                  // [N,C,1,1]-free reshape to [N, rest]
Var bilinear_upsample2(const Var& x);        // [N,C,H,W] -> [N,C,2H,2W], half-pixel
Var concat_channels(const Var& a, const Var& b);

Var mean_all(const Var& x);                  // -> scalar
Var l1_mean(const Var& a, const Var& b);     // mean |a - b| -> scalar

// Mean over batch of softmax cross-entropy computed independently per
// label block.  targets: one bit set per block.  blocks: sizes summing
// to the label width, e.g. {6,4,4,4}.
Var softmax_cross_entropy_blocks(const Var& logits, const Tensor& targets, const std::vector<int64_t>& blocks);

enum class CompactnessPool { kChannelMean, kSpatialMap };

// sqrt of the mean squared deviation between per-sample pooled
// encodings and their batch mean (population variance, mean over the
// pooled axis).  kChannelMean pools H,W away; kSpatialMap pools C away.
Var compactness(const Var& z, CompactnessPool pool);

// Spectrally normalized weight view: w / (u^T W_mat v) with u, v taken
// as constants of the current power iteration.
Var spectral_scale(const Var& w, const Tensor& u, const Tensor& v);

// Copy of x severed from the tape.
Var detach(const Var& x);

// ---------------------------------------------------------------------------
// Plain tensor helpers (no autodiff).
// ---------------------------------------------------------------------------

// One power-iteration step over W viewed as [rows, numel/rows];
// u [rows], v [cols] updated in place, returns the sigma estimate.
double power_iteration_step(const Tensor& w, Tensor& u, Tensor& v);

// Coordinate feature pair for an HxW grid: channel 0 ramps -1..1 along
// x (width), channel 1 along y. Size-1 axes degenerate to -1.
Tensor coord_channels(int64_t h, int64_t w);

// Row-major C = A*B with optional transposes, via BLAS.
void gemm(bool ta, bool tb, int64_t m, int64_t n, int64_t k, double alpha, const double* a, const double* b, double beta, double* c);

// Blockwise softmax of logits [N,L] (inference path for scoring).
Tensor softmax_blocks(const Tensor& logits, const std::vector<int64_t>& blocks);
// Blockwise log-softmax, numerically stable.
Tensor log_softmax_blocks(const Tensor& logits, const std::vector<int64_t>& blocks);

}  // namespace dgad
