#pragma once

// Brute-force reference implementations. Nothing here calls into the library:
// operators are built from explicit Kronecker products of 2x2 Paulis and
// exponentials/logarithms come from Eigen's MatrixFunctions (Pade / Schur-Parlett).

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <complex>
#include <string>
#include <vector>

namespace oracle {

using cd = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline Mat pauli(char c) {
  Mat p(2, 2);
  switch (c) {
    case 'X': p << 0, 1, 1, 0; break;
    case 'Y': p << 0, cd(0, -1), cd(0, 1), 0; break;
    case 'Z': p << 1, 0, 0, -1; break;
    default: p << 1, 0, 0, 1; break;
  }
  return p;
}

// leftmost letter is the most significant qubit
inline Mat kron_string(const std::string& letters) {
  Mat out = Mat::Identity(1, 1);
  for (char c : letters) {
    Mat next = Eigen::kroneckerProduct(out, pauli(c)).eval();
    out = next;
  }
  return out;
}

struct Term {
  double c;
  std::string p;
};

inline Mat sum_terms(const std::vector<Term>& terms) {
  Mat out = Mat::Zero(std::size_t{1} << terms.front().p.size(), std::size_t{1} << terms.front().p.size());
  for (const auto& t : terms) out += t.c * kron_string(t.p);
  return out;
}

inline std::string place(int n, int site, char c) {
  std::string s(n, 'I');
  s[site] = c;
  return s;
}

inline std::string place2(int n, int a, char ca, int b, char cb) {
  std::string s(n, 'I');
  s[a] = ca;
  s[b] = cb;
  return s;
}

// H_i = -sum X, H_f = -sum Z - sum ZZ (open chain)
inline Mat tfim_initial(int n) {
  std::vector<Term> t;
  for (int j = 0; j < n; ++j) t.push_back({-1.0, place(n, j, 'X')});
  return sum_terms(t);
}

inline Mat tfim_final(int n) {
  std::vector<Term> t;
  for (int j = 0; j < n; ++j) t.push_back({-1.0, place(n, j, 'Z')});
  for (int j = 0; j + 1 < n; ++j) t.push_back({-1.0, place2(n, j, 'Z', j + 1, 'Z')});
  return sum_terms(t);
}

inline Mat expm_minus_i(const Mat& h, double t) {
  Mat a = (cd(0, -t) * h).eval();
  return a.exp();
}

inline Mat logm(const Mat& u) { return u.log(); }

inline double opnorm(const Mat& a) {
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

// ground state etc. from a fresh solver, no phase convention
inline Eigen::SelfAdjointEigenSolver<Mat> eig(const Mat& h) { return Eigen::SelfAdjointEigenSolver<Mat>(h); }

// product of layer exponentials, first layer applied first
inline Mat trotter_step(const std::vector<Mat>& layers, double dt) {
  Mat u = Mat::Identity(layers.front().rows(), layers.front().cols());
  for (const auto& l : layers) u = (expm_minus_i(l, dt) * u).eval();
  return u;
}

inline Mat das_discretized(const Mat& hi, const Mat& hf, double T, int M) {
  Mat a = Mat::Identity(hi.rows(), hi.cols());
  for (int k = 1; k <= M; ++k) {
    const double s = double(k) / M;
    a = (expm_minus_i((1 - s) * hi + s * hf, T / M) * a).eval();
  }
  return a;
}

inline Mat das_trotterized(const Mat& hi, const Mat& hf, double T, int M) {
  Mat a = Mat::Identity(hi.rows(), hi.cols());
  const double dt = T / M;
  for (int k = 1; k <= M; ++k) {
    const double s = double(k) / M;
    a = (expm_minus_i(hi, dt * (1 - s)) * expm_minus_i(hf, dt * s) * a).eval();
  }
  return a;
}

inline double proj_dist(const Vec& a, const Vec& b) {
  const double f = std::norm(a.dot(b));
  return std::sqrt(std::max(0.0, 1.0 - f));
}

}  // namespace oracle
