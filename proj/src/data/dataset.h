#pragma once

#include "core/rng.h"
#include "core/tensor.h"
#include "data/image_io.h"

namespace dgad {

enum class DatasetKind { kSynthetic, kMnist, kCifar10, kFolder };
enum class Split { kTrain, kTest };

DatasetKind dataset_kind_from_string(const std::string& s);
std::string dataset_kind_to_string(DatasetKind k);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kSynthetic;
  std::string root;         // on-disk datasets
  int64_t image_size = 32;  // images are resized to size x size
  int64_t channels = 1;     // 1 or 3; converted as needed
  // Synthetic shapes:
  int64_t train_count = 2000;
  int64_t test_count = 500;  // per class
  uint64_t seed = 1;
};

struct Sample {
  Tensor image;  // [C,H,W] in [-1,1]
  int class_id = 0;
  std::string id;  // stable identifier for score files
};

struct Dataset {
  std::vector<Sample> samples;
  std::vector<std::string> class_names;  // index == class_id
};

// Loads a split.  The train split keeps only the normal class (one-class
// training); the test split keeps everything.  normal_class indexes
// class_names and must exist for train loads.
Dataset load_dataset(const DatasetSpec& spec, Split split, int normal_class);

// Deterministic renderer for the synthetic shape classes (0=rectangle,
// 1=ellipse).  Shapes are off-center and anisotropic so geometric
// transforms are distinguishable; both classes draw area, fill and
// background from the same distributions so mean brightness carries no
// class signal.
std::vector<Sample> synthetic_shapes(int64_t n, int64_t image_size, int shape_class, uint64_t seed);

// [C,H,W] -> [C,out_h,out_w], half-pixel bilinear.
Tensor bilinear_resize_chw(const Tensor& img, int64_t out_h, int64_t out_w);

// 8-bit HWC -> [-1,1] CHW with channel conversion (replicate gray to 3,
// or RGB to luma for 1).
Tensor decode_to_chw(const ImageU8& img, int64_t target_channels);

// Zoom-in by the given factor >= 1: center-crop 1/factor of the extent
// and resize back to the original size.
Tensor zoom_augment(const Tensor& img, double factor);

// [N,C,H,W] batch from a list of sample indices.
Tensor stack_batch(const std::vector<Sample>& samples, const std::vector<int64_t>& indices);

}  // namespace dgad
