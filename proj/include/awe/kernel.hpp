#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "awe/common.hpp"

namespace awe {

// Row-major dense matrix.
struct DenseMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) noexcept { return data[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const noexcept { return {data.data() + i * cols, cols}; }
};

struct KernelSpec {
  enum class Kind { Inner, Polynomial, Rbf };
  Kind kind = Kind::Inner;
  double c = 0.0;    // polynomial offset
  int degree = 2;    // polynomial degree
  double sigma = 1;  // rbf width

  static KernelSpec inner() { return {}; }
  static KernelSpec polynomial(double c, int degree) {
    if (degree < 1) throw ValidationError("polynomial degree must be at least 1");
    return {Kind::Polynomial, c, degree, 1.0};
  }
  static KernelSpec rbf(double sigma) {
    if (!(sigma > 0.0)) throw ValidationError("rbf sigma must be positive");
    return {Kind::Rbf, 0.0, 2, sigma};
  }

  // "inner", "poly", "poly:C:DEGREE", "rbf:SIGMA"
  static KernelSpec parse(const std::string& text) {
    auto parts = std::vector<std::string>{};
    std::size_t start = 0;
    while (true) {
      auto pos = text.find(':', start);
      parts.push_back(text.substr(start, pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    auto num = [&](const std::string& s) {
      try {
        std::size_t used = 0;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
      } catch (const std::exception&) {
        throw ValidationError("bad kernel parameter '" + s + "' in '" + text + "'");
      }
    };
    if (parts[0] == "inner" && parts.size() == 1) return inner();
    if (parts[0] == "poly" && parts.size() == 1) return polynomial(0.0, 2);
    if (parts[0] == "poly" && parts.size() == 3) return polynomial(num(parts[1]), static_cast<int>(num(parts[2])));
    if (parts[0] == "rbf" && parts.size() == 2) return rbf(num(parts[1]));
    throw ValidationError("unknown kernel '" + text + "' (expected inner, poly[:c:degree] or rbf:sigma)");
  }

  std::string to_string() const {
    auto fmt = [](double v) {
      char buf[32];
      auto r = std::to_chars(buf, buf + sizeof buf, v);
      return std::string(buf, r.ptr);
    };
    switch (kind) {
      case Kind::Inner: return "inner";
      case Kind::Polynomial: return "poly:" + fmt(c) + ":" + std::to_string(degree);
      case Kind::Rbf: return "rbf:" + fmt(sigma);
    }
    return {};
  }
};

inline double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

inline double kernel_value(std::span<const double> x, std::span<const double> y, const KernelSpec& spec) {
  if (x.size() != y.size())
    throw ValidationError("kernel on vectors of different dimension (" + std::to_string(x.size()) +
                          " vs " + std::to_string(y.size()) + ")");
  switch (spec.kind) {
    case KernelSpec::Kind::Inner: return dot(x, y);
    case KernelSpec::Kind::Polynomial: return std::pow(dot(x, y) + spec.c, spec.degree);
    case KernelSpec::Kind::Rbf: {
      double d2 = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - y[i]) * (x[i] - y[i]);
      return std::exp(-d2 / (2.0 * spec.sigma * spec.sigma));
    }
  }
  return 0.0;
}

// Kernel value from an inner product and the two squared norms.
inline double kernel_from_inner(double inner, double sq_norm_x, double sq_norm_y, const KernelSpec& spec) {
  switch (spec.kind) {
    case KernelSpec::Kind::Inner: return inner;
    case KernelSpec::Kind::Polynomial: return std::pow(inner + spec.c, spec.degree);
    case KernelSpec::Kind::Rbf: {
      const double d2 = std::max(0.0, sq_norm_x + sq_norm_y - 2.0 * inner);
      return std::exp(-d2 / (2.0 * spec.sigma * spec.sigma));
    }
  }
  return 0.0;
}

// Sparse vector with sorted indices.
struct SparseVector {
  std::vector<std::uint64_t> index;
  std::vector<double> value;

  static SparseVector from_dense(std::span<const double> dense) {
    SparseVector s;
    for (std::size_t i = 0; i < dense.size(); ++i)
      if (dense[i] != 0.0) {
        s.index.push_back(i);
        s.value.push_back(dense[i]);
      }
    return s;
  }
};

inline double dot(const SparseVector& x, const SparseVector& y) {
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.index.size() && j < y.index.size()) {
    if (x.index[i] < y.index[j]) ++i;
    else if (x.index[i] > y.index[j]) ++j;
    else s += x.value[i++] * y.value[j++];
  }
  return s;
}

// Pairwise inner products; symmetric to the bit.
inline DenseMatrix inner_products(std::span<const SparseVector> vectors, unsigned threads = 1) {
  const std::size_t n = vectors.size();
  DenseMatrix out(n, n);
  parallel_for(n, threads, [&](std::size_t i) {
    for (std::size_t j = i; j < n; ++j) out(i, j) = dot(vectors[i], vectors[j]);
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) out(i, j) = out(j, i);
  return out;
}

struct GramMatrix {
  DenseMatrix values;
  KernelSpec spec;
  std::string fingerprint;  // describes the embeddings: mode, walk length, dims

  std::size_t size() const noexcept { return values.rows; }
};

inline double min_eigenvalue_ratio(const DenseMatrix& m, double* min_out = nullptr, double* max_out = nullptr) {
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> view(
      m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(view, Eigen::EigenvaluesOnly);
  const double lo = solver.eigenvalues().minCoeff();
  const double hi = solver.eigenvalues().maxCoeff();
  if (min_out) *min_out = lo;
  if (max_out) *max_out = hi;
  return hi > 0.0 ? lo / hi : lo;
}

// Computes every unordered pair once and mirrors it. For inner and rbf
// kernels the result is checked to be positive semidefinite up to
// -1e-8 * largest eigenvalue.
inline GramMatrix gram(std::span<const std::vector<double>> embeddings, const KernelSpec& spec,
                       std::string fingerprint = {}, bool check_psd = true, unsigned threads = 1) {
  const std::size_t n = embeddings.size();
  for (const auto& e : embeddings)
    if (e.size() != embeddings.front().size()) throw ValidationError("embeddings have different dimensions");
  GramMatrix g{DenseMatrix(n, n), spec, std::move(fingerprint)};
  parallel_for(n, threads, [&](std::size_t i) {
    for (std::size_t j = i; j < n; ++j) g.values(i, j) = kernel_value(embeddings[i], embeddings[j], spec);
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) g.values(i, j) = g.values(j, i);
  if (check_psd && n > 0 && spec.kind != KernelSpec::Kind::Polynomial) {
    double lo = 0.0, hi = 0.0;
    min_eigenvalue_ratio(g.values, &lo, &hi);
    if (lo < -1e-8 * std::max(hi, 0.0))
      throw ComputeError("Gram matrix is not positive semidefinite (min eigenvalue " + std::to_string(lo) +
                         ", max " + std::to_string(hi) + ")");
  }
  return g;
}

inline GramMatrix gram_from_inner(const DenseMatrix& inner, const KernelSpec& spec, std::string fingerprint = {}) {
  const std::size_t n = inner.rows;
  GramMatrix g{DenseMatrix(n, n), spec, std::move(fingerprint)};
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      g.values(i, j) = g.values(j, i) = kernel_from_inner(inner(i, j), inner(i, i), inner(j, j), spec);
  return g;
}

// N x N CSV without header, plus a JSON sidecar describing the kernel.
inline void export_gram(const GramMatrix& g, const std::filesystem::path& csv_file) {
  std::ofstream out(csv_file);
  if (!out) throw ValidationError("cannot write " + csv_file.string());
  char buf[32];
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t j = 0; j < g.size(); ++j) {
      auto r = std::to_chars(buf, buf + sizeof buf, g.values(i, j));
      if (j) out << ',';
      out.write(buf, r.ptr - buf);
    }
    out << '\n';
  }
  nlohmann::json meta = {{"size", g.size()}, {"kernel", g.spec.to_string()}, {"embedding", g.fingerprint}};
  std::ofstream side(std::filesystem::path(csv_file).replace_extension(".json"));
  side << meta.dump(2) << '\n';
}

}  // namespace awe
