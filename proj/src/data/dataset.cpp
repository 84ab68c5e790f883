#include "data/dataset.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>

namespace fs = std::filesystem;

namespace dgad {

DatasetKind dataset_kind_from_string(const std::string& s) {
  if (s == "synthetic") return DatasetKind::kSynthetic;
  if (s == "mnist") return DatasetKind::kMnist;
  if (s == "cifar10") return DatasetKind::kCifar10;
  if (s == "folder") return DatasetKind::kFolder;
  fail("unknown dataset kind: " + s);
}

std::string dataset_kind_to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::kSynthetic: return "synthetic";
    case DatasetKind::kMnist: return "mnist";
    case DatasetKind::kCifar10: return "cifar10";
    case DatasetKind::kFolder: return "folder";
  }
  fail("bad dataset kind");
}

// ---------------------------------------------------------------------------
// pixel helpers
// ---------------------------------------------------------------------------

namespace {

// Preprocessing contract: nothing leaves the loaders outside [-1,1].
Tensor clamp_unit(Tensor t) {
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = std::clamp(t[i], -1.0, 1.0);
  return t;
}

}  // namespace

Tensor bilinear_resize_chw(const Tensor& img, int64_t out_h, int64_t out_w) {
  if (img.rank() != 3) fail("bilinear_resize_chw expects [C,H,W]");
  int64_t C = img.dim(0), H = img.dim(1), W = img.dim(2);
  if (H == out_h && W == out_w) return img;
  Tensor out({C, out_h, out_w});
  double sy = static_cast<double>(H) / static_cast<double>(out_h);
  double sx = static_cast<double>(W) / static_cast<double>(out_w);
  for (int64_t c = 0; c < C; ++c) {
    const double* src = img.data() + c * H * W;
    double* dst = out.data() + c * out_h * out_w;
    for (int64_t oy = 0; oy < out_h; ++oy) {
      double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
      int64_t y0 = static_cast<int64_t>(std::floor(fy));
      double wy = fy - static_cast<double>(y0);
      int64_t y0c = std::clamp<int64_t>(y0, 0, H - 1), y1c = std::clamp<int64_t>(y0 + 1, 0, H - 1);
      for (int64_t ox = 0; ox < out_w; ++ox) {
        double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
        int64_t x0 = static_cast<int64_t>(std::floor(fx));
        double wx = fx - static_cast<double>(x0);
        int64_t x0c = std::clamp<int64_t>(x0, 0, W - 1), x1c = std::clamp<int64_t>(x0 + 1, 0, W - 1);
        double top = src[y0c * W + x0c] * (1.0 - wx) + src[y0c * W + x1c] * wx;
        double bot = src[y1c * W + x0c] * (1.0 - wx) + src[y1c * W + x1c] * wx;
        dst[oy * out_w + ox] = top * (1.0 - wy) + bot * wy;
      }
    }
  }
  return out;
}

Tensor decode_to_chw(const ImageU8& img, int64_t target_channels) {
  if (target_channels != 1 && target_channels != 3) fail("target_channels must be 1 or 3");
  Tensor out({target_channels, img.h, img.w});
  int64_t hw = img.h * img.w;
  for (int64_t p = 0; p < hw; ++p) {
    if (img.c == 1) {
      double v = img.pixels[static_cast<size_t>(p)] / 255.0 * 2.0 - 1.0;
      for (int64_t c = 0; c < target_channels; ++c) out[c * hw + p] = v;
    } else {
      double r = img.pixels[static_cast<size_t>(3 * p)] / 255.0;
      double g = img.pixels[static_cast<size_t>(3 * p + 1)] / 255.0;
      double b = img.pixels[static_cast<size_t>(3 * p + 2)] / 255.0;
      if (target_channels == 3) {
        out[0 * hw + p] = r * 2.0 - 1.0;
        out[1 * hw + p] = g * 2.0 - 1.0;
        out[2 * hw + p] = b * 2.0 - 1.0;
      } else {
        out[p] = (0.299 * r + 0.587 * g + 0.114 * b) * 2.0 - 1.0;
      }
    }
  }
  return out;
}

Tensor zoom_augment(const Tensor& img, double factor) {
  if (factor < 1.0) fail("zoom factor must be >= 1");
  if (img.rank() != 3) fail("zoom_augment expects [C,H,W]");
  int64_t C = img.dim(0), H = img.dim(1), W = img.dim(2);
  int64_t ch = std::max<int64_t>(1, static_cast<int64_t>(std::llround(static_cast<double>(H) / factor)));
  int64_t cw = std::max<int64_t>(1, static_cast<int64_t>(std::llround(static_cast<double>(W) / factor)));
  if (ch == H && cw == W) return img;
  int64_t r0 = (H - ch) / 2, c0 = (W - cw) / 2;
  Tensor crop({C, ch, cw});
  for (int64_t c = 0; c < C; ++c) {
    for (int64_t r = 0; r < ch; ++r) {
      std::memcpy(crop.data() + (c * ch + r) * cw, img.data() + (c * H + r0 + r) * W + c0, static_cast<size_t>(cw) * sizeof(double));
    }
  }
  return bilinear_resize_chw(crop, H, W);
}

Tensor stack_batch(const std::vector<Sample>& samples, const std::vector<int64_t>& indices) {
  if (indices.empty()) fail("stack_batch with no indices");
  const Tensor& first = samples[static_cast<size_t>(indices[0])].image;
  int64_t C = first.dim(0), H = first.dim(1), W = first.dim(2), stride = C * H * W;
  Tensor out({static_cast<int64_t>(indices.size()), C, H, W});
  for (size_t i = 0; i < indices.size(); ++i) {
    const Tensor& img = samples[static_cast<size_t>(indices[i])].image;
    if (img.numel() != stride) fail("inconsistent sample shapes in batch");
    std::memcpy(out.data() + static_cast<int64_t>(i) * stride, img.data(), static_cast<size_t>(stride) * sizeof(double));
  }
  return out;
}

// ---------------------------------------------------------------------------
// synthetic shapes
// ---------------------------------------------------------------------------

std::vector<Sample> synthetic_shapes(int64_t n, int64_t image_size, int shape_class, uint64_t seed) {
  if (shape_class != 0 && shape_class != 1) fail("synthetic shape class must be 0 (rectangle) or 1 (ellipse)");
  if (image_size < 8) fail("synthetic images need size >= 8");
  RngStream rng(seed ^ (0x9e3779b97f4a7c15ULL * static_cast<uint64_t>(shape_class + 1)));
  double S = static_cast<double>(image_size);
  std::vector<Sample> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    double bg = rng.uniform(-0.95, -0.75);
    double fill = rng.uniform(0.1, 0.9);
    double area = rng.uniform(0.10, 0.30) * S * S;
    double aspect = rng.uniform(1.4, 2.6);
    bool vertical = rng.uniform() < 0.5;
    // Extents with the requested area for either shape.
    double we, he;
    if (shape_class == 0) {
      we = std::sqrt(area * aspect);
      he = std::sqrt(area / aspect);
    } else {
      // ellipse area = pi * (we/2) * (he/2)
      we = 2.0 * std::sqrt(area * aspect / 3.14159265358979323846);
      he = 2.0 * std::sqrt(area / (aspect * 3.14159265358979323846));
    }
    if (vertical) std::swap(we, he);
    auto center = [&](double extent) {
      double lo = 1.0 + extent / 2.0, hi = S - 1.0 - extent / 2.0;
      return (lo < hi) ? rng.uniform(lo, hi) : S / 2.0;
    };
    double cx = center(we), cy = center(he);

    Tensor img({1, image_size, image_size});
    for (int64_t y = 0; y < image_size; ++y) {
      for (int64_t x = 0; x < image_size; ++x) {
        // 2x2 supersampled coverage for soft edges.
        int hits = 0;
        for (double sy : {0.25, 0.75}) {
          for (double sx : {0.25, 0.75}) {
            double px = static_cast<double>(x) + sx, py = static_cast<double>(y) + sy;
            bool inside;
            if (shape_class == 0) {
              inside = std::fabs(px - cx) <= we / 2.0 && std::fabs(py - cy) <= he / 2.0;
            } else {
              double dx = (px - cx) / (we / 2.0), dy = (py - cy) / (he / 2.0);
              inside = dx * dx + dy * dy <= 1.0;
            }
            if (inside) ++hits;
          }
        }
        img[y * image_size + x] = bg + (fill - bg) * (static_cast<double>(hits) / 4.0);
      }
    }
    Sample s;
    s.image = std::move(img);
    s.class_id = shape_class;
    char buf[64];
    std::snprintf(buf, sizeof(buf), "syn_%s_%05lld", shape_class == 0 ? "rect" : "ellipse", static_cast<long long>(i));
    s.id = buf;
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// MNIST (idx files, optionally gzipped)
// ---------------------------------------------------------------------------

namespace {

uint32_t read_be32(const uint8_t* p) {
  return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) | (static_cast<uint32_t>(p[2]) << 8) | p[3];
}

std::vector<uint8_t> read_maybe_gz(const std::string& base) {
  if (fs::exists(base)) return read_file_bytes(base);
  if (fs::exists(base + ".gz")) return gunzip_bytes(read_file_bytes(base + ".gz"));
  fail("dataset file not found: " + base + "[.gz]");
}

std::string find_mnist_dir(const std::string& root) {
  for (const char* sub : {"", "/MNIST/raw", "/raw"}) {
    std::string dir = root + sub;
    if (fs::exists(dir + "/train-images-idx3-ubyte") || fs::exists(dir + "/train-images-idx3-ubyte.gz")) return dir;
  }
  fail("mnist files not found under " + root);
}

struct RawSet {
  std::vector<Tensor> images;  // [C,H,W] in [-1,1], already resized
  std::vector<int> labels;
};

RawSet load_mnist_split(const std::string& root, Split split, const DatasetSpec& spec) {
  std::string dir = find_mnist_dir(root);
  std::string prefix = (split == Split::kTrain) ? "train" : "t10k";
  std::vector<uint8_t> imgs = read_maybe_gz(dir + "/" + prefix + "-images-idx3-ubyte");
  std::vector<uint8_t> labs = read_maybe_gz(dir + "/" + prefix + "-labels-idx1-ubyte");
  if (imgs.size() < 16 || read_be32(imgs.data()) != 2051) fail("bad mnist image file magic");
  if (labs.size() < 8 || read_be32(labs.data()) != 2049) fail("bad mnist label file magic");
  int64_t n = read_be32(imgs.data() + 4);
  int64_t h = read_be32(imgs.data() + 8), w = read_be32(imgs.data() + 12);
  if (static_cast<int64_t>(read_be32(labs.data() + 4)) != n) fail("mnist image/label count mismatch");
  if (imgs.size() < 16 + static_cast<size_t>(n * h * w)) fail("truncated mnist image file");

  RawSet out;
  out.images.reserve(static_cast<size_t>(n));
  out.labels.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    ImageU8 raw;
    raw.h = h;
    raw.w = w;
    raw.c = 1;
    raw.pixels.assign(imgs.begin() + 16 + static_cast<std::ptrdiff_t>(i * h * w), imgs.begin() + 16 + static_cast<std::ptrdiff_t>((i + 1) * h * w));
    Tensor t = decode_to_chw(raw, spec.channels);
    out.images.push_back(clamp_unit(bilinear_resize_chw(t, spec.image_size, spec.image_size)));
    out.labels.push_back(labs[8 + static_cast<size_t>(i)]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// CIFAR-10 (binary batches)
// ---------------------------------------------------------------------------

std::string find_cifar_dir(const std::string& root) {
  for (const char* sub : {"", "/cifar-10-batches-bin"}) {
    std::string dir = root + sub;
    if (fs::exists(dir + "/data_batch_1.bin")) return dir;
  }
  fail("cifar-10 files not found under " + root);
}

RawSet load_cifar_split(const std::string& root, Split split, const DatasetSpec& spec) {
  std::string dir = find_cifar_dir(root);
  std::vector<std::string> files;
  if (split == Split::kTrain) {
    for (int i = 1; i <= 5; ++i) files.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
  } else {
    files.push_back(dir + "/test_batch.bin");
  }
  RawSet out;
  constexpr int64_t kRec = 1 + 3072, kSide = 32;
  for (const auto& f : files) {
    std::vector<uint8_t> bytes = read_file_bytes(f);
    if (bytes.size() % kRec != 0) fail("corrupt cifar batch: " + f);
    int64_t n = static_cast<int64_t>(bytes.size()) / kRec;
    for (int64_t i = 0; i < n; ++i) {
      const uint8_t* rec = bytes.data() + i * kRec;
      out.labels.push_back(rec[0]);
      // Stored planar RGB; build [3,32,32] directly.
      Tensor t({3, kSide, kSide});
      for (int64_t j = 0; j < 3072; ++j) t[j] = rec[1 + j] / 255.0 * 2.0 - 1.0;
      if (spec.channels == 1) {
        Tensor gray({1, kSide, kSide});
        for (int64_t p = 0; p < kSide * kSide; ++p) {
          gray[p] = 0.299 * t[p] + 0.587 * t[1024 + p] + 0.114 * t[2048 + p];
        }
        t = std::move(gray);
      }
      out.images.push_back(clamp_unit(bilinear_resize_chw(t, spec.image_size, spec.image_size)));
    }
  }
  return out;
}

const char* kCifarNames[10] = {"airplane", "automobile", "bird", "cat", "deer", "dog", "frog", "horse", "ship", "truck"};

// ---------------------------------------------------------------------------
// FOLDER: root/{train,test}/<class_name>/<images>
// ---------------------------------------------------------------------------

// Flat layout: root/<class_name>/<images>.  When root has train/ and
// test/ subdirectories, each split uses its own subtree instead.
bool folder_has_split_dirs(const std::string& root) { return fs::exists(fs::path(root) / "train") && fs::exists(fs::path(root) / "test"); }

std::string folder_split_root(const std::string& root, Split split) {
  if (folder_has_split_dirs(root)) return (fs::path(root) / (split == Split::kTrain ? "train" : "test")).string();
  return root;
}

std::vector<std::string> folder_class_names(const std::string& root) {
  std::vector<std::string> names;
  std::vector<std::string> roots;
  if (folder_has_split_dirs(root)) {
    roots = {(fs::path(root) / "train").string(), (fs::path(root) / "test").string()};
  } else {
    roots = {root};
  }
  for (const auto& r : roots) {
    for (const auto& e : fs::directory_iterator(r)) {
      if (e.is_directory()) names.push_back(e.path().filename().string());
    }
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  if (names.empty()) fail("no class directories under " + root);
  return names;
}

}  // namespace

// ---------------------------------------------------------------------------
// load_dataset
// ---------------------------------------------------------------------------

Dataset load_dataset(const DatasetSpec& spec, Split split, int normal_class) {
  if (spec.image_size < 4 || spec.image_size % 4 != 0) fail("image_size must be a positive multiple of 4");
  Dataset ds;

  auto keep = [&](int cls) { return split == Split::kTest || cls == normal_class; };
  auto check_normal = [&](int64_t num_classes) {
    if (split == Split::kTrain && (normal_class < 0 || normal_class >= num_classes)) {
      fail("normal_class " + std::to_string(normal_class) + " out of range for " + std::to_string(num_classes) + " classes");
    }
  };

  switch (spec.kind) {
    case DatasetKind::kSynthetic: {
      ds.class_names = {"rectangle", "ellipse"};
      check_normal(2);
      if (split == Split::kTrain) {
        ds.samples = synthetic_shapes(spec.train_count, spec.image_size, normal_class, spec.seed);
      } else {
        // Distinct seed offset keeps test renders disjoint from training.
        for (int cls = 0; cls < 2; ++cls) {
          auto part = synthetic_shapes(spec.test_count, spec.image_size, cls, spec.seed + 7777);
          for (auto& s : part) {
            s.id = "test_" + s.id;
            ds.samples.push_back(std::move(s));
          }
        }
      }
      break;
    }
    case DatasetKind::kMnist: {
      ds.class_names = {"0", "1", "2", "3", "4", "5", "6", "7", "8", "9"};
      check_normal(10);
      RawSet raw = load_mnist_split(spec.root, split, spec);
      std::string tag = (split == Split::kTrain) ? "mnist_train_" : "mnist_test_";
      for (size_t i = 0; i < raw.images.size(); ++i) {
        if (!keep(raw.labels[i])) continue;
        Sample s;
        s.image = std::move(raw.images[i]);
        s.class_id = raw.labels[i];
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s%05zu", tag.c_str(), i);
        s.id = buf;
        ds.samples.push_back(std::move(s));
      }
      break;
    }
    case DatasetKind::kCifar10: {
      ds.class_names.assign(kCifarNames, kCifarNames + 10);
      check_normal(10);
      RawSet raw = load_cifar_split(spec.root, split, spec);
      std::string tag = (split == Split::kTrain) ? "cifar_train_" : "cifar_test_";
      for (size_t i = 0; i < raw.images.size(); ++i) {
        if (!keep(raw.labels[i])) continue;
        Sample s;
        s.image = std::move(raw.images[i]);
        s.class_id = raw.labels[i];
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%s%05zu", tag.c_str(), i);
        s.id = buf;
        ds.samples.push_back(std::move(s));
      }
      break;
    }
    case DatasetKind::kFolder: {
      if (spec.root.empty()) fail("folder dataset needs data_root");
      if (!fs::exists(spec.root)) fail("missing dataset root: " + spec.root);
      ds.class_names = folder_class_names(spec.root);
      check_normal(static_cast<int64_t>(ds.class_names.size()));
      fs::path dir = folder_split_root(spec.root, split);
      for (size_t cls = 0; cls < ds.class_names.size(); ++cls) {
        if (!keep(static_cast<int>(cls))) continue;
        fs::path cdir = dir / ds.class_names[cls];
        if (!fs::exists(cdir)) continue;
        std::vector<std::string> files;
        for (const auto& e : fs::directory_iterator(cdir)) {
          if (e.is_regular_file()) files.push_back(e.path().string());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
          Sample s;
          s.image = clamp_unit(bilinear_resize_chw(decode_to_chw(read_image(f), spec.channels), spec.image_size, spec.image_size));
          s.class_id = static_cast<int>(cls);
          s.id = ds.class_names[cls] + "/" + fs::path(f).filename().string();
          ds.samples.push_back(std::move(s));
        }
      }
      break;
    }
  }

  if (ds.samples.empty()) fail("dataset split is empty");
  return ds;
}

}  // namespace dgad
