#include "ues/taskgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

#include "json.hpp"
#include "ues/error.hpp"
#include "ues/io_util.hpp"

namespace ues {

namespace {

constexpr double kRenderSigma = 1.5;   // gaussian blob radius, pixels
constexpr double kKeypointMargin = 4.0;

struct AugmentStrength {
  double point_sigma;
  double rot_deg;
  double scale_lo;
  double scale_hi;
};

constexpr AugmentStrength kWeak{0.05, 5.0, 0.95, 1.05};
constexpr AugmentStrength kStrong{0.25, 30.0, 0.75, 1.25};

double bilinear(const std::vector<double>& img, std::size_t h, std::size_t w, double x,
                double y) {
  if (x < 0.0 || y < 0.0 || x > static_cast<double>(w - 1) || y > static_cast<double>(h - 1)) {
    return 0.0;
  }
  const std::size_t x0 = static_cast<std::size_t>(x);
  const std::size_t y0 = static_cast<std::size_t>(y);
  const std::size_t x1 = std::min(x0 + 1, w - 1);
  const std::size_t y1 = std::min(y0 + 1, h - 1);
  const double fx = x - static_cast<double>(x0);
  const double fy = y - static_cast<double>(y0);
  const double top = img[y0 * w + x0] * (1.0 - fx) + img[y0 * w + x1] * fx;
  const double bot = img[y1 * w + x0] * (1.0 - fx) + img[y1 * w + x1] * fx;
  return top * (1.0 - fy) + bot * fy;
}

Sample augment_with(const Sample& s, const DatasetSpec& spec, const AugmentStrength& a,
                    Rng& rng) {
  if (spec.is_classification()) {
    return jitter_point(s, rng.gaussian(0.0, a.point_sigma), rng.gaussian(0.0, a.point_sigma));
  }
  const double rot = rng.uniform(-a.rot_deg, a.rot_deg);
  const double scale = rng.uniform(a.scale_lo, a.scale_hi);
  return transform_image(s, spec.grid, rot, scale);
}

}  // namespace

std::string task_name(Task t) {
  switch (t) {
    case Task::kMoons: return "moons";
    case Task::kBlobs: return "blobs";
    case Task::kKeypoints: return "keypoints";
  }
  return "?";
}

Task parse_task(const std::string& name) {
  if (name == "moons") return Task::kMoons;
  if (name == "blobs") return Task::kBlobs;
  if (name == "keypoints") return Task::kKeypoints;
  throw ConfigError("task: unknown value '" + name + "'");
}

void DatasetSpec::validate() const {
  if (total == 0) throw ConfigError("total: must be >= 1");
  if (labeled == 0 || labeled > total) throw ConfigError("labeled: must lie in [1, total]");
  if (mu < 1) throw ConfigError("mu: must be >= 1");
  if (noise < 0.0) throw ConfigError("noise: must be >= 0");
  if (task == Task::kBlobs && classes < 2) throw ConfigError("classes: must be >= 2");
  if (task == Task::kKeypoints &&
      (grid.keypoints == 0 || grid.height < 8 || grid.width < 8)) {
    throw ConfigError("grid: keypoint grids must be at least 8x8");
  }
}

namespace {

Sample make_point_sample(const DatasetSpec& spec, std::size_t index, Rng& rng) {
  Sample s;
  s.features.resize(2);
  if (spec.task == Task::kMoons) {
    s.class_label = index % 2;
    const double t = rng.uniform(0.0, std::numbers::pi);
    if (s.class_label == 0) {
      s.features[0] = std::cos(t);
      s.features[1] = std::sin(t);
    } else {
      s.features[0] = 1.0 - std::cos(t);
      s.features[1] = 0.5 - std::sin(t);
    }
  } else {
    s.class_label = index % spec.classes;
    const double angle =
        2.0 * std::numbers::pi * static_cast<double>(s.class_label) / static_cast<double>(spec.classes);
    s.features[0] = 3.0 * std::cos(angle);
    s.features[1] = 3.0 * std::sin(angle);
  }
  s.features[0] += rng.gaussian(0.0, spec.noise);
  s.features[1] += rng.gaussian(0.0, spec.noise);
  return s;
}

Sample make_keypoint_sample(const DatasetSpec& spec, Rng& rng) {
  const auto& g = spec.grid;
  Sample s;
  s.features.assign(g.cells(), 0.0);
  s.keypoints.resize(g.keypoints);
  for (auto& kp : s.keypoints) {
    kp.x = rng.uniform(kKeypointMargin, static_cast<double>(g.width - 1) - kKeypointMargin);
    kp.y = rng.uniform(kKeypointMargin, static_cast<double>(g.height - 1) - kKeypointMargin);
  }
  // Fixed ordering keeps multi-keypoint ground truth identifiable.
  std::sort(s.keypoints.begin(), s.keypoints.end(), [](const Point2D& a, const Point2D& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  for (std::size_t r = 0; r < g.height; ++r) {
    for (std::size_t c = 0; c < g.width; ++c) {
      double v = 0.0;
      for (const auto& kp : s.keypoints) {
        const double dx = static_cast<double>(c) - kp.x;
        const double dy = static_cast<double>(r) - kp.y;
        v = std::max(v, std::exp(-(dx * dx + dy * dy) / (2.0 * kRenderSigma * kRenderSigma)));
      }
      v += rng.gaussian(0.0, spec.noise);
      s.features[r * g.width + c] = std::clamp(v, 0.0, 1.0);
    }
  }
  return s;
}

std::vector<Sample> make_samples(const DatasetSpec& spec, std::size_t count, Rng& rng) {
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(spec.task == Task::kKeypoints ? make_keypoint_sample(spec, rng)
                                                : make_point_sample(spec, i, rng));
  }
  return out;
}

}  // namespace

Dataset generate(const DatasetSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;

  Rng train_rng(mix_seed(spec.seed, 101));
  ds.train = make_samples(spec, spec.total, train_rng);

  Rng label_rng(mix_seed(spec.seed, 102));
  if (spec.is_classification()) {
    // Stratified pick: round-robin over per-class pools.
    const std::size_t classes = spec.task == Task::kMoons ? 2 : spec.classes;
    std::vector<std::vector<std::size_t>> pools(classes);
    for (std::size_t i = 0; i < ds.train.size(); ++i) {
      pools[ds.train[i].class_label].push_back(i);
    }
    for (auto& pool : pools) label_rng.shuffle(pool);
    std::size_t assigned = 0;
    for (std::size_t round = 0; assigned < spec.labeled; ++round) {
      bool any = false;
      for (auto& pool : pools) {
        if (round < pool.size() && assigned < spec.labeled) {
          ds.train[pool[round]].is_labeled = true;
          ++assigned;
          any = true;
        }
      }
      if (!any) break;
    }
  } else {
    std::vector<std::size_t> order(ds.train.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    label_rng.shuffle(order);
    for (std::size_t i = 0; i < spec.labeled; ++i) ds.train[order[i]].is_labeled = true;
  }

  Rng eval_rng(mix_seed(spec.seed, 103));
  ds.eval = make_samples(spec, spec.eval_count, eval_rng);
  for (auto& s : ds.eval) s.is_labeled = true;
  return ds;
}

Sample jitter_point(const Sample& s, double dx, double dy) {
  if (s.features.size() != 2) throw InvalidInput("jitter_point: not a 2-D point sample");
  Sample out = s;
  out.features[0] += dx;
  out.features[1] += dy;
  return out;
}

Sample transform_image(const Sample& s, const GridShape& grid, double rot_deg, double scale) {
  if (s.features.size() != grid.cells()) throw InvalidInput("transform_image: shape mismatch");
  if (!(scale > 0.0)) throw InvalidInput("transform_image: scale must be positive");
  const double theta = rot_deg * std::numbers::pi / 180.0;
  const double ct = std::cos(theta);
  const double st = std::sin(theta);
  const double cx = static_cast<double>(grid.width - 1) / 2.0;
  const double cy = static_cast<double>(grid.height - 1) / 2.0;

  Sample out = s;
  // Inverse mapping with bilinear sampling; outside pixels read as 0.
  for (std::size_t r = 0; r < grid.height; ++r) {
    for (std::size_t c = 0; c < grid.width; ++c) {
      const double qx = static_cast<double>(c) - cx;
      const double qy = static_cast<double>(r) - cy;
      const double px = (ct * qx + st * qy) / scale + cx;
      const double py = (-st * qx + ct * qy) / scale + cy;
      out.features[r * grid.width + c] = bilinear(s.features, grid.height, grid.width, px, py);
    }
  }
  for (std::size_t k = 0; k < out.keypoints.size(); ++k) {
    const double px = s.keypoints[k].x - cx;
    const double py = s.keypoints[k].y - cy;
    out.keypoints[k].x = scale * (ct * px - st * py) + cx;
    out.keypoints[k].y = scale * (st * px + ct * py) + cy;
  }
  return out;
}

Sample weak_augment(const Sample& s, const DatasetSpec& spec, Rng& rng) {
  return augment_with(s, spec, kWeak, rng);
}

Sample strong_augment(const Sample& s, const DatasetSpec& spec, Rng& rng) {
  return augment_with(s, spec, kStrong, rng);
}

BatchIterator::BatchIterator(const Dataset& ds, std::size_t batch_size, int mu,
                             std::uint64_t seed)
    : ds_(&ds), batch_size_(batch_size), mu_(mu), rng_(mix_seed(seed, 7)) {
  if (batch_size_ == 0) throw InvalidInput("batch_iterator: batch size must be >= 1");
  if (mu_ < 0) throw InvalidInput("batch_iterator: mu must be >= 0");
  for (std::size_t i = 0; i < ds.train.size(); ++i) {
    (ds.train[i].is_labeled ? labeled_ : unlabeled_).push_back(i);
  }
  if (labeled_.empty()) throw InvalidInput("batch_iterator: no labeled samples");
  if (batch_size_ > labeled_.size()) {
    throw InvalidInput("batch_iterator: insufficient labeled data for batch size");
  }
  reshuffle_labeled();
  rng_.shuffle(unlabeled_);
}

std::size_t BatchIterator::batches_per_epoch() const {
  return (labeled_.size() + batch_size_ - 1) / batch_size_;
}

void BatchIterator::reshuffle_labeled() {
  rng_.shuffle(labeled_);
  labeled_pos_ = 0;
}

std::size_t BatchIterator::next_unlabeled() {
  if (unlabeled_pos_ == unlabeled_.size()) {
    rng_.shuffle(unlabeled_);
    unlabeled_pos_ = 0;
  }
  return unlabeled_[unlabeled_pos_++];
}

BatchPair BatchIterator::next() {
  if (labeled_pos_ == labeled_.size()) reshuffle_labeled();
  BatchPair pair;
  const std::size_t take = std::min(batch_size_, labeled_.size() - labeled_pos_);
  pair.labeled.assign(labeled_.begin() + labeled_pos_, labeled_.begin() + labeled_pos_ + take);
  labeled_pos_ += take;
  if (!unlabeled_.empty()) {
    pair.unlabeled.resize(static_cast<std::size_t>(mu_) * batch_size_);
    for (auto& idx : pair.unlabeled) idx = next_unlabeled();
  }
  return pair;
}

void export_points_csv(std::span<const Sample> samples, const std::string& path) {
  std::ostringstream out;
  out << "x,y,label,is_labeled\n";
  for (const auto& s : samples) {
    if (s.features.size() != 2) throw InvalidInput("export_points_csv: not a point dataset");
    out << format_double(s.features[0]) << ',' << format_double(s.features[1]) << ','
        << s.class_label << ',' << (s.is_labeled ? 1 : 0) << '\n';
  }
  atomic_write_file(path, out.str());
}

std::vector<Sample> import_points_csv(const std::string& path) {
  std::istringstream in(read_file_text(path));
  std::string line;
  if (!std::getline(in, line) || line != "x,y,label,is_labeled") {
    throw CorruptStream("points csv: bad header in " + path);
  }
  std::vector<Sample> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    Sample s;
    s.features.resize(2);
    try {
      std::getline(row, cell, ',');
      s.features[0] = std::stod(cell);
      std::getline(row, cell, ',');
      s.features[1] = std::stod(cell);
      std::getline(row, cell, ',');
      s.class_label = static_cast<std::size_t>(std::stoul(cell));
      std::getline(row, cell, ',');
      s.is_labeled = cell == "1";
    } catch (const std::exception&) {
      throw CorruptStream("points csv: bad row '" + line + "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

void export_images(std::span<const Sample> samples, const GridShape& grid,
                   const std::string& base_path) {
  std::vector<std::uint8_t> bin;
  bin.reserve(samples.size() * grid.cells() * 8);
  for (const auto& s : samples) {
    if (s.features.size() != grid.cells()) throw InvalidInput("export_images: shape mismatch");
    for (double v : s.features) {
      std::uint64_t bits;
      std::memcpy(&bits, &v, sizeof bits);
      for (int i = 0; i < 8; ++i) bin.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
  }
  nlohmann::ordered_json side;
  side["shape"] = {samples.size(), grid.height, grid.width};
  side["dtype"] = "f64";
  side["order"] = "row-major";
  auto kps = nlohmann::ordered_json::array();
  auto flags = nlohmann::ordered_json::array();
  for (const auto& s : samples) {
    auto pts = nlohmann::ordered_json::array();
    for (const auto& kp : s.keypoints) pts.push_back({kp.x, kp.y});
    kps.push_back(pts);
    flags.push_back(s.is_labeled);
  }
  side["keypoints"] = kps;
  side["is_labeled"] = flags;
  atomic_write_file(base_path + ".bin", std::span<const std::uint8_t>(bin));
  atomic_write_file(base_path + ".json", side.dump(2) + "\n");
}

std::vector<Sample> import_images(const std::string& base_path) {
  const auto bin = read_file_bytes(base_path + ".bin");
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(read_file_text(base_path + ".json"));
  } catch (const nlohmann::json::exception& e) {
    throw CorruptStream("images sidecar: " + std::string(e.what()));
  }
  if (side.value("dtype", "") != "f64" || side.value("order", "") != "row-major") {
    throw CorruptStream("images sidecar: unsupported dtype/order");
  }
  const auto shape = side.at("shape");
  const std::size_t count = shape.at(0).get<std::size_t>();
  const std::size_t height = shape.at(1).get<std::size_t>();
  const std::size_t width = shape.at(2).get<std::size_t>();
  if (bin.size() != count * height * width * 8) {
    throw CorruptStream("images binary: size does not match sidecar shape");
  }
  std::vector<Sample> out(count);
  std::size_t pos = 0;
  for (auto& s : out) {
    s.features.resize(height * width);
    for (double& v : s.features) {
      std::uint64_t bits = 0;
      for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bin[pos++]) << (8 * i);
      std::memcpy(&v, &bits, sizeof v);
    }
  }
  const auto& kps = side.at("keypoints");
  const auto& flags = side.at("is_labeled");
  for (std::size_t i = 0; i < count; ++i) {
    for (const auto& pt : kps.at(i)) {
      out[i].keypoints.push_back(Point2D{pt.at(0).get<double>(), pt.at(1).get<double>()});
    }
    out[i].is_labeled = flags.at(i).get<bool>();
  }
  return out;
}

}  // namespace ues
