#include "plr/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "plr/errors.hpp"
#include "plr/rng.hpp"

namespace plr {
namespace {

constexpr double kMinProb = std::numeric_limits<double>::min();
constexpr double kMaxProb = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;

double sigmoid(double z) {
  const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return std::clamp(s, kMinProb, kMaxProb);
}

void check_input(const ModelParams& p, const Matrix& x) {
  if (static_cast<std::size_t>(x.cols()) != p.feature_dim) {
    throw ValidationError("feature width " + std::to_string(x.cols()) +
                          " does not match model input " + std::to_string(p.feature_dim));
  }
}

Matrix hidden_activations(const ModelParams& p, const Matrix& x) {
  Matrix h = x * p.w1;
  h.rowwise() += p.b1.transpose();
  return h.array().tanh().matrix();
}

void fill_uniform(Matrix& m, double bound, Engine& eng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = u(eng);
  }
}

bool same(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

bool same(const Vector& a, const Vector& b) {
  return a.size() == b.size() && (a.size() == 0 || a == b);
}

}  // namespace

std::string to_string(const Arch& a) {
  if (a.kind == Arch::Kind::Linear) return "linear";
  return "hidden:" + std::to_string(a.hidden_dim);
}

Arch parse_arch(const std::string& s) {
  if (s == "linear") return Arch::linear();
  const std::string prefix = "hidden:";
  if (s.rfind(prefix, 0) == 0) {
    std::size_t pos = 0;
    const std::string digits = s.substr(prefix.size());
    unsigned long h = 0;
    try {
      h = std::stoul(digits, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == digits.size() && h >= 1) return Arch::one_hidden(h);
  }
  throw ValidationError("unknown architecture '" + s + "' (expected linear or hidden:<n>)");
}

bool ModelParams::all_finite() const {
  return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite();
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  z.w1.setZero();
  z.b1.setZero();
  z.w2.setZero();
  z.b2.setZero();
  return z;
}

bool ModelParams::operator==(const ModelParams& o) const {
  return arch == o.arch && feature_dim == o.feature_dim && n_classes == o.n_classes &&
         same(w1, o.w1) && same(b1, o.b1) && same(w2, o.w2) && same(b2, o.b2);
}

ModelParams init_model(Arch arch, std::size_t feature_dim, std::size_t n_classes,
                       std::uint64_t seed) {
  if (feature_dim == 0 || n_classes == 0) throw ValidationError("model dimensions must be >= 1");
  if (arch.kind == Arch::Kind::OneHidden && arch.hidden_dim == 0) {
    throw ValidationError("hidden layer width must be >= 1");
  }
  ModelParams p;
  p.arch = arch;
  p.feature_dim = feature_dim;
  p.n_classes = n_classes;
  auto eng = make_engine(seed, 0x4d4f44454cULL);
  const auto d = static_cast<Eigen::Index>(feature_dim);
  const auto c = static_cast<Eigen::Index>(n_classes);
  if (arch.kind == Arch::Kind::Linear) {
    p.w1.resize(d, c);
    fill_uniform(p.w1, 1.0 / std::sqrt(static_cast<double>(feature_dim)), eng);
    p.b1 = Vector::Zero(c);
    p.w2.resize(0, 0);
    p.b2.resize(0);
  } else {
    const auto h = static_cast<Eigen::Index>(arch.hidden_dim);
    p.w1.resize(d, h);
    fill_uniform(p.w1, 1.0 / std::sqrt(static_cast<double>(feature_dim)), eng);
    p.b1 = Vector::Zero(h);
    p.w2.resize(h, c);
    fill_uniform(p.w2, 1.0 / std::sqrt(static_cast<double>(arch.hidden_dim)), eng);
    p.b2 = Vector::Zero(c);
  }
  return p;
}

Matrix forward(const ModelParams& p, const Matrix& x) {
  check_input(p, x);
  Matrix z;
  if (p.arch.kind == Arch::Kind::Linear) {
    z = x * p.w1;
    z.rowwise() += p.b1.transpose();
  } else {
    z = hidden_activations(p, x) * p.w2;
    z.rowwise() += p.b2.transpose();
  }
  return z.unaryExpr([](double v) { return sigmoid(v); });
}

ModelParams backward(const ModelParams& p, const Matrix& x, const Matrix& dl_dpred) {
  check_input(p, x);
  if (dl_dpred.rows() != x.rows() ||
      static_cast<std::size_t>(dl_dpred.cols()) != p.n_classes) {
    throw ValidationError("loss gradient shape does not match the batch");
  }
  ModelParams g = p.zeros_like();
  const Matrix pred = forward(p, x);
  // d sigmoid / dz = s (1 - s)
  const Matrix dz = (dl_dpred.array() * pred.array() * (1.0 - pred.array())).matrix();
  if (p.arch.kind == Arch::Kind::Linear) {
    g.w1 = x.transpose() * dz;
    g.b1 = dz.colwise().sum().transpose();
  } else {
    const Matrix h = hidden_activations(p, x);
    g.w2 = h.transpose() * dz;
    g.b2 = dz.colwise().sum().transpose();
    const Matrix dh = ((dz * p.w2.transpose()).array() * (1.0 - h.array().square())).matrix();
    g.w1 = x.transpose() * dh;
    g.b1 = dh.colwise().sum().transpose();
  }
  return g;
}

ModelParams sgd_step(const ModelParams& p, const ModelParams& grads, double lr) {
  if (!(p.arch == grads.arch) || p.w1.rows() != grads.w1.rows() ||
      p.w1.cols() != grads.w1.cols() || p.w2.rows() != grads.w2.rows() ||
      p.w2.cols() != grads.w2.cols()) {
    throw ValidationError("gradient shapes do not match parameters");
  }
  if (!grads.all_finite()) throw TrainingDiverged("non-finite parameter gradient");
  ModelParams out = p;
  out.w1 -= lr * grads.w1;
  out.b1 -= lr * grads.b1;
  if (p.arch.kind == Arch::Kind::OneHidden) {
    out.w2 -= lr * grads.w2;
    out.b2 -= lr * grads.b2;
  }
  if (!out.all_finite()) throw TrainingDiverged("parameter update overflowed");
  return out;
}

}  // namespace plr
