#include "rlkit/approx.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace rlkit {

namespace {
constexpr char kMagic[4] = {'R', 'L', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(b), 4);
}
std::uint32_t read_u32(std::ifstream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}
void write_f64(std::ofstream& f, double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(b), 8);
}
double read_f64(std::ifstream& f) {
  unsigned char b[8];
  f.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double x;
  std::memcpy(&x, &bits, 8);
  return x;
}
}  // namespace

Approximator::Approximator(ArchDesc arch, std::uint64_t init_seed) : arch_(std::move(arch)) {
  if (arch_.input_dim < 1) throw std::invalid_argument("Approximator: input_dim must be positive");
  if (arch_.head == Head::Scalar && arch_.out_dim != 1)
    throw std::invalid_argument("Approximator: scalar head needs out_dim 1");
  build_layout();
  // uniform +-1/sqrt(fan_in), one derived stream per layer
  int fan_in = arch_.input_dim;
  std::size_t layer = 0;
  for (const ParamSlice& sl : slices_) {
    if (sl.cols == 0) continue;  // biases start at 0
    Rng rng = Rng::derive(init_seed, layer++, "init");
    const double bound = 1.0 / std::sqrt(static_cast<double>(sl.cols));
    for (int i = 0; i < sl.rows * sl.cols; ++i) params_[sl.offset + i] = rng.uniform(-bound, bound);
    fan_in = sl.rows;
  }
  (void)fan_in;
}

void Approximator::build_layout() {
  const int raw_out = arch_.head == Head::Gaussian ? 2 * arch_.out_dim : arch_.out_dim;
  int n = 0;
  int in = arch_.input_dim;
  auto add = [&](const std::string& name, int rows, int cols) {
    slices_.push_back(ParamSlice{name, n, rows, cols});
    n += rows * (cols == 0 ? 1 : cols);
  };
  for (std::size_t l = 0; l < arch_.hidden.size(); ++l) {
    add("w" + std::to_string(l), arch_.hidden[l], in);
    if (arch_.bias) add("b" + std::to_string(l), arch_.hidden[l], 0);
    in = arch_.hidden[l];
  }
  add("w_out", raw_out, in);
  if (arch_.bias) add("b_out", raw_out, 0);
  params_.assign(n, 0.0);
}

Approximator Approximator::linear(int input_dim, int out_dim, Head head, bool bias,
                                  std::uint64_t init_seed) {
  ArchDesc a;
  a.input_dim = input_dim;
  a.out_dim = out_dim;
  a.head = head;
  a.bias = bias;
  return Approximator(std::move(a), init_seed);
}

Approximator Approximator::mlp(int input_dim, std::vector<int> hidden, int out_dim, Head head,
                               Nonlin nonlin, std::uint64_t init_seed) {
  ArchDesc a;
  a.input_dim = input_dim;
  a.hidden = std::move(hidden);
  a.out_dim = out_dim;
  a.head = head;
  a.nonlin = nonlin;
  a.bias = true;
  return Approximator(std::move(a), init_seed);
}

std::vector<double> Approximator::value_with(std::span<const double> params,
                                             std::span<const double> x) const {
  if (static_cast<int>(x.size()) != arch_.input_dim)
    throw std::invalid_argument("Approximator: input shape mismatch");
  std::vector<double> cur(x.begin(), x.end());
  std::size_t si = 0;
  auto layer = [&](bool apply_nonlin) {
    const ParamSlice w = slices_[si++];
    const ParamSlice* b = nullptr;
    if (arch_.bias) b = &slices_[si++];
    std::vector<double> out(w.rows, 0.0);
    for (int r = 0; r < w.rows; ++r) {
      double acc = b ? params[b->offset + r] : 0.0;
      const double* wr = params.data() + w.offset + static_cast<std::size_t>(r) * w.cols;
      for (int c = 0; c < w.cols; ++c) acc += wr[c] * cur[c];
      out[r] = apply_nonlin
                   ? (arch_.nonlin == Nonlin::ReLU ? (acc > 0.0 ? acc : 0.0) : std::tanh(acc))
                   : acc;
    }
    cur = std::move(out);
  };
  for (std::size_t l = 0; l < arch_.hidden.size(); ++l) layer(true);
  layer(false);

  switch (arch_.head) {
    case Head::Scalar:
    case Head::PerAction:
      return cur;
    case Head::Softmax: {
      double top = cur[0];
      for (double v : cur) top = std::max(top, v);
      double total = 0.0;
      for (double& v : cur) {
        v = std::exp(v - top);
        total += v;
      }
      for (double& v : cur) v /= total;
      return cur;
    }
    case Head::Gaussian: {
      for (int i = arch_.out_dim; i < 2 * arch_.out_dim; ++i)
        cur[i] = std::min(kLogStdMax, std::max(kLogStdMin, cur[i]));
      return cur;
    }
  }
  throw std::logic_error("Approximator: unknown head");
}

std::vector<ad::Var> Approximator::forward(ad::Tape& tape, std::span<const ad::Var> params,
                                           std::span<const double> x) const {
  if (static_cast<int>(x.size()) != arch_.input_dim)
    throw std::invalid_argument("Approximator: input shape mismatch");
  if (static_cast<int>(params.size()) != n_params())
    throw std::invalid_argument("Approximator: param leaf count mismatch");

  // first layer consumes the raw input doubles, later layers consume Vars
  std::vector<ad::Var> cur;
  std::size_t si = 0;
  bool first = true;
  auto layer = [&](bool apply_nonlin) {
    const ParamSlice w = slices_[si++];
    const ParamSlice* b = nullptr;
    if (arch_.bias) b = &slices_[si++];
    std::vector<ad::Var> out;
    out.reserve(w.rows);
    for (int r = 0; r < w.rows; ++r) {
      const std::span<const ad::Var> wr(params.data() + w.offset + static_cast<std::size_t>(r) * w.cols,
                                        w.cols);
      ad::Var acc = first ? ad::dot(wr, x) : [&] {
        ad::Var s = wr[0] * cur[0];
        for (int c = 1; c < w.cols; ++c) s = s + wr[c] * cur[c];
        return s;
      }();
      if (b) acc = acc + params[b->offset + r];
      out.push_back(apply_nonlin ? (arch_.nonlin == Nonlin::ReLU ? ad::relu(acc) : ad::tanh(acc))
                                 : acc);
    }
    cur = std::move(out);
    first = false;
  };
  for (std::size_t l = 0; l < arch_.hidden.size(); ++l) layer(true);
  layer(false);

  switch (arch_.head) {
    case Head::Scalar:
    case Head::PerAction:
      return cur;
    case Head::Softmax:
      return ad::softmax(cur);
    case Head::Gaussian: {
      for (int i = arch_.out_dim; i < 2 * arch_.out_dim; ++i)
        cur[i] = ad::clamp(cur[i], kLogStdMin, kLogStdMax);
      return cur;
    }
  }
  throw std::logic_error("Approximator: unknown head");
}

void Approximator::save(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  f.write(kMagic, 4);
  write_u32(f, kVersion);
  write_u32(f, static_cast<std::uint32_t>(arch_.input_dim));
  write_u32(f, static_cast<std::uint32_t>(arch_.hidden.size()));
  for (int h : arch_.hidden) write_u32(f, static_cast<std::uint32_t>(h));
  write_u32(f, static_cast<std::uint32_t>(arch_.nonlin));
  write_u32(f, static_cast<std::uint32_t>(arch_.head));
  write_u32(f, static_cast<std::uint32_t>(arch_.out_dim));
  write_u32(f, arch_.bias ? 1 : 0);
  write_u32(f, static_cast<std::uint32_t>(params_.size()));
  for (double p : params_) write_f64(f, p);
}

Approximator Approximator::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("bad checkpoint magic");
  if (read_u32(f) != kVersion) throw std::runtime_error("bad checkpoint version");
  ArchDesc a;
  a.input_dim = static_cast<int>(read_u32(f));
  const std::uint32_t nh = read_u32(f);
  for (std::uint32_t i = 0; i < nh; ++i) a.hidden.push_back(static_cast<int>(read_u32(f)));
  a.nonlin = static_cast<Nonlin>(read_u32(f));
  a.head = static_cast<Head>(read_u32(f));
  a.out_dim = static_cast<int>(read_u32(f));
  a.bias = read_u32(f) != 0;
  const std::uint32_t np = read_u32(f);
  Approximator m(std::move(a), 0);
  if (np != static_cast<std::uint32_t>(m.n_params())) throw std::runtime_error("checkpoint size mismatch");
  for (std::uint32_t i = 0; i < np; ++i) m.params_[i] = read_f64(f);
  if (!f) throw std::runtime_error("truncated checkpoint");
  return m;
}

void ema_update(TargetCopy& target, std::span<const double> online) {
  if (target.params.size() != online.size()) throw std::invalid_argument("ema_update: shape mismatch");
  for (std::size_t i = 0; i < online.size(); ++i)
    target.params[i] = target.rho * target.params[i] + (1.0 - target.rho) * online[i];
}

bool sgd_step(std::vector<double>& params, std::span<const double> grad, double eta) {
  if (params.size() != grad.size()) throw std::invalid_argument("sgd_step: shape mismatch");
  for (double g : grad)
    if (!std::isfinite(g)) return false;
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= eta * grad[i];
  return true;
}

void RmsScaler::apply(std::vector<double>& grad) {
  if (ms.empty()) ms.assign(grad.size(), 0.0);
  for (std::size_t i = 0; i < grad.size(); ++i) {
    ms[i] = decay * ms[i] + (1.0 - decay) * grad[i] * grad[i];
    grad[i] /= std::sqrt(ms[i] + eps);
  }
}

double clip_grad_norm(std::vector<double>& grad, double max_norm) {
  double sq = 0.0;
  for (double g : grad) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (double& g : grad) g *= scale;
  }
  return norm;
}

}  // namespace rlkit
