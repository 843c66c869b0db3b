#include "ues/net.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "ues/rng.hpp"

namespace ues {

namespace {

constexpr char kMagic[8] = {'U', 'E', 'S', 'N', 'E', 'T', '0', '1'};
constexpr std::uint32_t kVersion = 1;

constexpr double kLrClassification = 0.03;
constexpr double kLrRegression = 2.5e-4;

std::uint64_t fnv1a(std::span<const std::uint8_t> bytes, std::uint64_t state = 0xcbf29ce484222325ULL) {
  for (std::uint8_t b : bytes) {
    state ^= b;
    state *= 0x100000001b3ULL;
  }
  return state;
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof bits);
  put_u64(out, bits);
}

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
  }
  void raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) throw CorruptStream("checkpoint: truncated stream");
  }
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void serialize_spec(std::vector<std::uint8_t>& out, const NetSpec& spec) {
  out.push_back(spec.mode == Mode::kClassification ? 0 : 1);
  put_u64(out, spec.input_dim);
  put_u64(out, spec.hidden.size());
  for (std::size_t h : spec.hidden) put_u64(out, h);
  put_u64(out, spec.head_count);
  put_u64(out, spec.class_count);
  put_u64(out, spec.grid.keypoints);
  put_u64(out, spec.grid.height);
  put_u64(out, spec.grid.width);
  put_u64(out, spec.seed);
}

inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

void NetSpec::validate() const {
  if (input_dim == 0) throw ConfigError("net.input_dim: must be >= 1");
  if (head_count < 2) throw ConfigError("net.heads: M >= 2 required");
  for (std::size_t h : hidden) {
    if (h == 0) throw ConfigError("net.hidden: layer sizes must be >= 1");
  }
  if (mode == Mode::kClassification) {
    if (class_count < 2) throw ConfigError("net.classes: must be >= 2");
  } else if (grid.keypoints == 0 || grid.height == 0 || grid.width == 0) {
    throw ConfigError("net.grid: dimensions must be >= 1");
  }
}

std::uint64_t NetSpec::hash() const {
  std::vector<std::uint8_t> bytes;
  serialize_spec(bytes, *this);
  return fnv1a(bytes);
}

MultiHeadNet::MultiHeadNet(const NetSpec& spec) : spec_(spec) {
  spec_.validate();
  learning_rate_ = spec_.mode == Mode::kClassification ? kLrClassification : kLrRegression;

  auto init_linear = [](Linear& l, std::size_t in, std::size_t out, Rng& rng) {
    l.in = in;
    l.out = out;
    l.w.resize(in * out);
    l.b.assign(out, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& w : l.w) w = rng.uniform(-limit, limit);
  };

  Rng trunk_rng(mix_seed(spec_.seed, 0));
  std::size_t width = spec_.input_dim;
  trunk_.resize(spec_.hidden.size());
  for (std::size_t i = 0; i < spec_.hidden.size(); ++i) {
    init_linear(trunk_[i], width, spec_.hidden[i], trunk_rng);
    width = spec_.hidden[i];
  }
  heads_.resize(spec_.head_count);
  for (std::size_t m = 0; m < spec_.head_count; ++m) {
    // Distinct sub-seed per head: the ensemble's diversity source.
    Rng head_rng(mix_seed(spec_.seed, 1 + m));
    init_linear(heads_[m], width, spec_.output_size(), head_rng);
  }
  velocity_.resize(trunk_.size() + heads_.size());
  std::size_t v = 0;
  for (const Linear* l : std::as_const(*this).layers()) {
    velocity_[v].in = l->in;
    velocity_[v].out = l->out;
    velocity_[v].w.assign(l->w.size(), 0.0);
    velocity_[v].b.assign(l->b.size(), 0.0);
    ++v;
  }
}

void MultiHeadNet::set_learning_rate(double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning_rate: must be positive");
  learning_rate_ = lr;
}

void MultiHeadNet::set_momentum(double m) {
  if (!(m >= 0.0 && m < 1.0)) throw ConfigError("momentum: must lie in [0, 1)");
  momentum_ = m;
}

std::vector<MultiHeadNet::Linear*> MultiHeadNet::layers() {
  std::vector<Linear*> out;
  for (auto& l : trunk_) out.push_back(&l);
  for (auto& l : heads_) out.push_back(&l);
  return out;
}

std::vector<const MultiHeadNet::Linear*> MultiHeadNet::layers() const {
  std::vector<const Linear*> out;
  for (const auto& l : trunk_) out.push_back(&l);
  for (const auto& l : heads_) out.push_back(&l);
  return out;
}

HeadBatch MultiHeadNet::make_output_batch(std::size_t batch_size) const {
  if (spec_.mode == Mode::kClassification) {
    return HeadBatch::classification(batch_size, spec_.head_count, spec_.class_count);
  }
  return HeadBatch::regression(batch_size, spec_.head_count, spec_.grid);
}

MultiHeadNet::Forward MultiHeadNet::forward(std::span<const double> inputs,
                                            std::size_t batch_size) const {
  if (batch_size == 0 || inputs.size() != batch_size * spec_.input_dim) {
    throw InvalidInput("forward: input shape mismatch");
  }
  Forward f{make_output_batch(batch_size), {inputs.begin(), inputs.end()}, {}};
  f.activations.reserve(trunk_.size());

  const std::vector<double>* cur = &f.input;
  std::size_t width = spec_.input_dim;
  for (const Linear& l : trunk_) {
    std::vector<double> next(batch_size * l.out);
    for (std::size_t i = 0; i < batch_size; ++i) {
      const double* x = cur->data() + i * width;
      double* y = next.data() + i * l.out;
      for (std::size_t k = 0; k < l.out; ++k) {
        const double* row = l.w.data() + k * l.in;
        double acc = l.b[k];
        for (std::size_t j = 0; j < l.in; ++j) acc += row[j] * x[j];
        y[k] = relu(acc);
      }
    }
    f.activations.push_back(std::move(next));
    cur = &f.activations.back();
    width = l.out;
  }

  const std::size_t out_size = spec_.output_size();
  std::vector<double> z(out_size);
  for (std::size_t i = 0; i < batch_size; ++i) {
    const double* t = cur->data() + i * width;
    for (std::size_t m = 0; m < spec_.head_count; ++m) {
      const Linear& h = heads_[m];
      for (std::size_t k = 0; k < out_size; ++k) {
        const double* row = h.w.data() + k * h.in;
        double acc = h.b[k];
        for (std::size_t j = 0; j < h.in; ++j) acc += row[j] * t[j];
        z[k] = acc;
      }
      auto dst = f.outputs.entry(i, m);
      if (spec_.mode == Mode::kClassification) {
        const auto probs = softmax(z);
        std::copy(probs.values.begin(), probs.values.end(), dst.begin());
      } else {
        for (std::size_t k = 0; k < out_size; ++k) dst[k] = sigmoid(z[k]);
      }
    }
  }
  return f;
}

void MultiHeadNet::backward_and_step(const Forward& cache, std::span<const double> grad) {
  const std::size_t batch = cache.outputs.batch_size();
  const std::size_t out_size = spec_.output_size();
  if (grad.size() != batch * spec_.head_count * out_size) {
    throw InvalidInput("backward_and_step: gradient shape mismatch");
  }
  for (double g : grad) {
    if (!std::isfinite(g)) throw DivergenceError("backward_and_step: non-finite gradient");
  }

  std::vector<Linear> grads(trunk_.size() + heads_.size());
  {
    std::size_t v = 0;
    for (const Linear* l : std::as_const(*this).layers()) {
      grads[v].in = l->in;
      grads[v].out = l->out;
      grads[v].w.assign(l->w.size(), 0.0);
      grads[v].b.assign(l->b.size(), 0.0);
      ++v;
    }
  }

  const std::vector<double>& trunk_out =
      trunk_.empty() ? cache.input : cache.activations.back();
  const std::size_t trunk_width = trunk_.empty() ? spec_.input_dim : trunk_.back().out;

  // Heads: parameter grads plus the summed pull-back into the trunk output.
  std::vector<double> d_trunk(batch * trunk_width, 0.0);
  for (std::size_t m = 0; m < spec_.head_count; ++m) {
    const Linear& h = heads_[m];
    Linear& hg = grads[trunk_.size() + m];
    for (std::size_t i = 0; i < batch; ++i) {
      const double* t = trunk_out.data() + i * trunk_width;
      const double* g = grad.data() + (i * spec_.head_count + m) * out_size;
      double* dt = d_trunk.data() + i * trunk_width;
      for (std::size_t k = 0; k < out_size; ++k) {
        const double gk = g[k];
        if (gk == 0.0) continue;
        double* wrow = hg.w.data() + k * h.in;
        const double* row = h.w.data() + k * h.in;
        for (std::size_t j = 0; j < h.in; ++j) {
          wrow[j] += gk * t[j];
          dt[j] += gk * row[j];
        }
        hg.b[k] += gk;
      }
    }
  }

  // Trunk, back to front.
  std::vector<double> d_out = std::move(d_trunk);
  for (std::size_t li = trunk_.size(); li-- > 0;) {
    const Linear& l = trunk_[li];
    Linear& lg = grads[li];
    const std::vector<double>& act = cache.activations[li];
    const std::vector<double>& prev = li == 0 ? cache.input : cache.activations[li - 1];
    std::vector<double> d_prev(batch * l.in, 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
      const double* a = act.data() + i * l.out;
      const double* x = prev.data() + i * l.in;
      const double* dy = d_out.data() + i * l.out;
      double* dx = d_prev.data() + i * l.in;
      for (std::size_t k = 0; k < l.out; ++k) {
        if (a[k] <= 0.0) continue;  // ReLU gate
        const double gk = dy[k];
        if (gk == 0.0) continue;
        double* wrow = lg.w.data() + k * l.in;
        const double* row = l.w.data() + k * l.in;
        for (std::size_t j = 0; j < l.in; ++j) {
          wrow[j] += gk * x[j];
          dx[j] += gk * row[j];
        }
        lg.b[k] += gk;
      }
    }
    d_out = std::move(d_prev);
  }

  // SGD with momentum: v <- mu * v + g; p <- p - lr * v.
  auto ls = layers();
  for (std::size_t v = 0; v < ls.size(); ++v) {
    Linear& p = *ls[v];
    Linear& vel = velocity_[v];
    const Linear& g = grads[v];
    for (std::size_t j = 0; j < p.w.size(); ++j) {
      vel.w[j] = momentum_ * vel.w[j] + g.w[j];
      p.w[j] -= learning_rate_ * vel.w[j];
    }
    for (std::size_t j = 0; j < p.b.size(); ++j) {
      vel.b[j] = momentum_ * vel.b[j] + g.b[j];
      p.b[j] -= learning_rate_ * vel.b[j];
    }
  }
}

std::size_t MultiHeadNet::parameter_count() const {
  std::size_t n = 0;
  for (const Linear* l : layers()) n += l->w.size() + l->b.size();
  return n;
}

double MultiHeadNet::get_parameter(std::size_t index) const {
  for (const Linear* l : layers()) {
    if (index < l->w.size()) return l->w[index];
    index -= l->w.size();
    if (index < l->b.size()) return l->b[index];
    index -= l->b.size();
  }
  throw InvalidInput("get_parameter: index out of range");
}

void MultiHeadNet::set_parameter(std::size_t index, double value) {
  for (Linear* l : layers()) {
    if (index < l->w.size()) {
      l->w[index] = value;
      return;
    }
    index -= l->w.size();
    if (index < l->b.size()) {
      l->b[index] = value;
      return;
    }
    index -= l->b.size();
  }
  throw InvalidInput("set_parameter: index out of range");
}

std::vector<std::uint8_t> MultiHeadNet::checkpoint_bytes() const {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + sizeof kMagic);
  put_u32(out, kVersion);
  put_u64(out, spec_.hash());
  serialize_spec(out, spec_);
  put_f64(out, learning_rate_);
  put_f64(out, momentum_);
  put_u64(out, parameter_count());
  for (const Linear* l : layers()) {
    for (double w : l->w) put_f64(out, w);
    for (double b : l->b) put_f64(out, b);
  }
  put_u64(out, parameter_count());  // momentum buffers mirror the parameters
  for (const Linear& l : velocity_) {
    for (double w : l.w) put_f64(out, w);
    for (double b : l.b) put_f64(out, b);
  }
  put_u64(out, fnv1a(out));
  return out;
}

void MultiHeadNet::save_checkpoint(std::ostream& out) const {
  const auto bytes = checkpoint_bytes();
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("save_checkpoint: write failed");
}

MultiHeadNet MultiHeadNet::load_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof kMagic + 12 + 8) throw CorruptStream("checkpoint: truncated stream");
  const std::uint64_t stored_sum =
      ByteReader(bytes.subspan(bytes.size() - 8)).u64();
  if (fnv1a(bytes.first(bytes.size() - 8)) != stored_sum) {
    throw CorruptStream("checkpoint: checksum mismatch");
  }

  ByteReader r(bytes.first(bytes.size() - 8));
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CorruptStream("checkpoint: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw CorruptStream("checkpoint: unsupported version " + std::to_string(version));
  }
  const std::uint64_t stored_hash = r.u64();

  NetSpec spec;
  spec.mode = [&r] {
    std::uint8_t m;
    r.raw(&m, 1);
    if (m > 1) throw CorruptStream("checkpoint: bad mode byte");
    return m == 0 ? Mode::kClassification : Mode::kRegression;
  }();
  spec.input_dim = r.u64();
  spec.hidden.resize(r.u64());
  if (spec.hidden.size() > 1024) throw CorruptStream("checkpoint: implausible hidden count");
  for (auto& h : spec.hidden) h = r.u64();
  spec.head_count = r.u64();
  spec.class_count = r.u64();
  spec.grid.keypoints = r.u64();
  spec.grid.height = r.u64();
  spec.grid.width = r.u64();
  spec.seed = r.u64();
  if (spec.hash() != stored_hash) throw CorruptStream("checkpoint: spec hash mismatch");

  MultiHeadNet net(spec);
  net.learning_rate_ = r.f64();
  net.momentum_ = r.f64();
  if (r.u64() != net.parameter_count()) throw CorruptStream("checkpoint: parameter count mismatch");
  for (Linear* l : net.layers()) {
    for (double& w : l->w) w = r.f64();
    for (double& b : l->b) b = r.f64();
  }
  if (r.u64() != net.parameter_count()) throw CorruptStream("checkpoint: velocity count mismatch");
  for (Linear& l : net.velocity_) {
    for (double& w : l.w) w = r.f64();
    for (double& b : l.b) b = r.f64();
  }
  if (r.pos() != bytes.size() - 8) throw CorruptStream("checkpoint: trailing bytes");
  return net;
}

MultiHeadNet MultiHeadNet::load_checkpoint(std::istream& in) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return load_checkpoint(std::span<const std::uint8_t>(bytes));
}

}  // namespace ues
