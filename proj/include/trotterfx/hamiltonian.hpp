#pragma once

// Layered spin Hamiltonians H = sum_n H_n built from weighted Pauli strings.
//
// Conventions:
//  * letters[q] acts on site q; site 0 is the most significant bit of the
//    computational-basis index (the leftmost Kronecker factor).
//  * layers() is stored in application order: layers()[0] acts first, so the
//    first-order step is exp(-i H_last dt) ... exp(-i H_0 dt).

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "trotterfx/linalg.hpp"

namespace trotterfx {

inline constexpr int default_site_cap = 12;

struct PauliTerm {
  double coefficient = 0.0;
  std::string letters;

  int weight() const {
    return static_cast<int>(std::count_if(letters.begin(), letters.end(), [](char c) { return c != 'I'; }));
  }
};

/// Two Pauli strings commute iff they anticommute on an even number of sites.
inline bool paulis_commute(const std::string& a, const std::string& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::dimension_mismatch, "paulis_commute: strings of different length");
  }
  int anticommuting = 0;
  for (std::size_t q = 0; q < a.size(); ++q) {
    if (a[q] != 'I' && b[q] != 'I' && a[q] != b[q]) ++anticommuting;
  }
  return anticommuting % 2 == 0;
}

struct Layer {
  std::vector<PauliTerm> terms;

  /// Symbolic check that all terms in the layer pairwise commute.
  bool terms_commute() const {
    for (std::size_t i = 0; i < terms.size(); ++i) {
      for (std::size_t j = i + 1; j < terms.size(); ++j) {
        if (!paulis_commute(terms[i].letters, terms[j].letters)) return false;
      }
    }
    return true;
  }
};

class LayeredHamiltonian {
 public:
  LayeredHamiltonian(int n_sites, std::vector<Layer> layers)
      : n_sites_(n_sites), layers_(std::move(layers)) {
    if (n_sites_ < 1) throw Error(ErrorKind::invalid_argument, "LayeredHamiltonian: n_sites must be >= 1");
    if (layers_.empty()) throw Error(ErrorKind::invalid_argument, "LayeredHamiltonian: needs at least one layer");
    for (const auto& layer : layers_) {
      for (const auto& term : layer.terms) {
        if (!std::isfinite(term.coefficient)) {
          throw Error(ErrorKind::invalid_argument, "LayeredHamiltonian: non-finite coefficient on " + term.letters);
        }
        if (static_cast<int>(term.letters.size()) != n_sites_) {
          throw Error(ErrorKind::invalid_argument,
                      "LayeredHamiltonian: term '" + term.letters + "' does not have " + std::to_string(n_sites_) +
                          " letters");
        }
        for (char c : term.letters) {
          if (c != 'I' && c != 'X' && c != 'Y' && c != 'Z') {
            throw Error(ErrorKind::invalid_argument,
                        "LayeredHamiltonian: letter '" + std::string(1, c) + "' in '" + term.letters + "'");
          }
          if (c == 'Y') complex_allowed_ = true;
        }
      }
    }
  }

  int n_sites() const { return n_sites_; }
  Eigen::Index dim() const { return Eigen::Index{1} << n_sites_; }
  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t layer_count() const { return layers_.size(); }
  /// True when some term uses Y, i.e. the dense matrix may be complex.
  bool complex_allowed() const { return complex_allowed_; }

  bool all_layers_commute_internally() const {
    return std::all_of(layers_.begin(), layers_.end(), [](const Layer& l) { return l.terms_commute(); });
  }

  std::size_t term_count() const {
    std::size_t count = 0;
    for (const auto& layer : layers_) count += layer.terms.size();
    return count;
  }

 private:
  int n_sites_;
  std::vector<Layer> layers_;
  bool complex_allowed_ = false;
};

struct HamiltonianPair {
  LayeredHamiltonian initial;
  LayeredHamiltonian final;
};

/// Adds coefficient * P to `out`. Each Pauli string is a signed permutation:
/// column x has a single entry at row x ^ flip_mask.
inline void accumulate_pauli(DenseOperator& out, const PauliTerm& term) {
  const int n = static_cast<int>(term.letters.size());
  std::uint64_t flip_mask = 0;
  std::uint64_t z_mask = 0;  // sites contributing (-1)^bit
  int y_count = 0;
  for (int q = 0; q < n; ++q) {
    const std::uint64_t bit = std::uint64_t{1} << (n - 1 - q);
    switch (term.letters[q]) {
      case 'X': flip_mask |= bit; break;
      case 'Y': flip_mask |= bit; z_mask |= bit; ++y_count; break;
      case 'Z': z_mask |= bit; break;
      default: break;
    }
  }
  // Y = i X Z on each site: Y|b> = i (-1)^b |b^1>.
  static constexpr std::array<complex, 4> i_powers{complex{1, 0}, complex{0, 1}, complex{-1, 0}, complex{0, -1}};
  const complex prefactor = term.coefficient * i_powers[y_count % 4];
  const std::uint64_t dim = std::uint64_t{1} << n;
  for (std::uint64_t x = 0; x < dim; ++x) {
    const double sign = (std::popcount(x & z_mask) % 2 == 0) ? 1.0 : -1.0;
    out(static_cast<Eigen::Index>(x ^ flip_mask), static_cast<Eigen::Index>(x)) += prefactor * sign;
  }
}

inline DenseOperator pauli_matrix(const PauliTerm& term) {
  const auto dim = Eigen::Index{1} << term.letters.size();
  DenseOperator out = DenseOperator::Zero(dim, dim);
  accumulate_pauli(out, term);
  return out;
}

struct DenseModel {
  DenseOperator total;
  std::vector<DenseOperator> per_layer;
};

inline DenseOperator dense_layer(const Layer& layer, int n_sites) {
  const auto dim = Eigen::Index{1} << n_sites;
  DenseOperator out = DenseOperator::Zero(dim, dim);
  for (const auto& term : layer.terms) accumulate_pauli(out, term);
  return out;
}

inline DenseModel build_dense(const LayeredHamiltonian& h, int site_cap = default_site_cap) {
  if (h.n_sites() > site_cap) {
    throw Error(ErrorKind::cap_exceeded,
                "build_dense: " + std::to_string(h.n_sites()) + " sites exceeds cap " + std::to_string(site_cap));
  }
  DenseModel model;
  model.total = DenseOperator::Zero(h.dim(), h.dim());
  model.per_layer.reserve(h.layer_count());
  for (const auto& layer : h.layers()) {
    model.per_layer.push_back(dense_layer(layer, h.n_sites()));
    model.total += model.per_layer.back();
  }
  return model;
}

inline DenseOperator dense_total(const LayeredHamiltonian& h, int site_cap = default_site_cap) {
  return build_dense(h, site_cap).total;
}

// ---------------------------------------------------------------------------
// Builders

namespace detail {

inline std::string letters_with(int n, std::initializer_list<std::pair<int, char>> sites) {
  std::string s(static_cast<std::size_t>(n), 'I');
  for (const auto& [q, c] : sites) s[static_cast<std::size_t>(q)] = c;
  return s;
}

// Uniform double in [lo, hi) from a 64-bit engine; spelled out so the stream
// is identical across standard library implementations.
inline double uniform(std::mt19937_64& engine, double lo, double hi) {
  const double unit = static_cast<double>(engine() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * unit;
}

}  // namespace detail

/// Linear-path endpoints for the transverse-field Ising benchmark on an open
/// chain: H_i = -sum X_j, H_f = -sum (Z_j + Z_j Z_{j+1}). Each is one layer.
inline HamiltonianPair tfim_pair(int n_sites) {
  if (n_sites < 2) throw Error(ErrorKind::invalid_argument, "tfim_pair: n_sites must be >= 2");
  Layer x_layer;
  Layer z_layer;
  for (int j = 0; j < n_sites; ++j) x_layer.terms.push_back({-1.0, detail::letters_with(n_sites, {{j, 'X'}})});
  for (int j = 0; j < n_sites; ++j) z_layer.terms.push_back({-1.0, detail::letters_with(n_sites, {{j, 'Z'}})});
  for (int j = 0; j + 1 < n_sites; ++j) {
    z_layer.terms.push_back({-1.0, detail::letters_with(n_sites, {{j, 'Z'}, {j + 1, 'Z'}})});
  }
  return {LayeredHamiltonian(n_sites, {x_layer}), LayeredHamiltonian(n_sites, {z_layer})};
}

/// Static Ising chain H = H_i + H_f with the X layer applied first and the
/// Z/ZZ layer second. Real, two commuting-term layers.
inline LayeredHamiltonian tfim_chain(int n_sites) {
  auto pair = tfim_pair(n_sites);
  return LayeredHamiltonian(n_sites, {pair.initial.layers()[0], pair.final.layers()[0]});
}

/// Ferromagnetic Heisenberg chain sum_j (I - SWAP_{j,j+1}) / 2 on open
/// boundaries, split into even and odd bonds. Every bond term annihilates the
/// all-up state, so the model is frustration-free.
inline LayeredHamiltonian heisenberg_ff(int n_sites) {
  if (n_sites < 3) throw Error(ErrorKind::invalid_argument, "heisenberg_ff: n_sites must be >= 3");
  Layer even;
  Layer odd;
  for (int j = 0; j + 1 < n_sites; ++j) {
    Layer& target = (j % 2 == 0) ? even : odd;
    // (I - SWAP)/2 = (II - XX - YY - ZZ)/4
    target.terms.push_back({0.25, std::string(static_cast<std::size_t>(n_sites), 'I')});
    for (char c : {'X', 'Y', 'Z'}) {
      target.terms.push_back({-0.25, detail::letters_with(n_sites, {{j, c}, {j + 1, c}})});
    }
  }
  return LayeredHamiltonian(n_sites, {even, odd});
}

inline const std::array<double, 4> default_counterexample_diagonal{0.7, -0.3, 1.9, -1.1};

/// Two-qubit decomposition H = H_1 + H_2 + H_3 = Lambda with H_1 = X(x)I,
/// H_2 = Y(x)I and H_3 = Lambda - H_1 - H_2, whose leading Trotter
/// correction is not off-diagonal in the eigenbasis of H. H_3 is not a
/// commuting-term layer; it is exponentiated as a whole.
inline LayeredHamiltonian counterexample_model(const std::array<double, 4>& diag = default_counterexample_diagonal) {
  for (std::size_t i = 0; i < diag.size(); ++i) {
    if (!std::isfinite(diag[i])) throw Error(ErrorKind::invalid_argument, "counterexample_model: non-finite entry");
    for (std::size_t j = i + 1; j < diag.size(); ++j) {
      if (std::abs(diag[i] - diag[j]) < 1e-8) {
        throw Error(ErrorKind::invalid_argument, "counterexample_model: Lambda must be nondegenerate");
      }
    }
  }
  // Lambda = sum_P c_P P over P in {II, IZ, ZI, ZZ}; basis order |q0 q1>.
  const auto [d0, d1, d2, d3] = diag;
  const double c_ii = (d0 + d1 + d2 + d3) / 4.0;
  const double c_iz = (d0 - d1 + d2 - d3) / 4.0;
  const double c_zi = (d0 + d1 - d2 - d3) / 4.0;
  const double c_zz = (d0 - d1 - d2 + d3) / 4.0;
  Layer h1{{{1.0, "XI"}}};
  Layer h2{{{1.0, "YI"}}};
  Layer h3{{{c_ii, "II"}, {c_iz, "IZ"}, {c_zi, "ZI"}, {c_zz, "ZZ"}, {-1.0, "XI"}, {-1.0, "YI"}}};
  return LayeredHamiltonian(2, {h1, h2, h3});
}

/// Random real nearest-neighbour model: one-site X, Z and two-site XX, ZZ,
/// XZ terms with coefficients uniform in [-1, 1]. Layers: Z-type, X-type,
/// even-bond XZ, odd-bond XZ (each internally commuting).
inline LayeredHamiltonian random_real_local(int n_sites, std::uint64_t seed) {
  if (n_sites < 2) throw Error(ErrorKind::invalid_argument, "random_real_local: n_sites must be >= 2");
  std::mt19937_64 engine(seed);
  Layer z_layer, x_layer, xz_even, xz_odd;
  for (int j = 0; j < n_sites; ++j) {
    z_layer.terms.push_back({detail::uniform(engine, -1, 1), detail::letters_with(n_sites, {{j, 'Z'}})});
    x_layer.terms.push_back({detail::uniform(engine, -1, 1), detail::letters_with(n_sites, {{j, 'X'}})});
  }
  for (int j = 0; j + 1 < n_sites; ++j) {
    z_layer.terms.push_back({detail::uniform(engine, -1, 1), detail::letters_with(n_sites, {{j, 'Z'}, {j + 1, 'Z'}})});
    x_layer.terms.push_back({detail::uniform(engine, -1, 1), detail::letters_with(n_sites, {{j, 'X'}, {j + 1, 'X'}})});
    Layer& xz = (j % 2 == 0) ? xz_even : xz_odd;
    xz.terms.push_back({detail::uniform(engine, -1, 1), detail::letters_with(n_sites, {{j, 'X'}, {j + 1, 'Z'}})});
  }
  std::vector<Layer> layers{z_layer, x_layer, xz_even};
  if (!xz_odd.terms.empty()) layers.push_back(xz_odd);
  return LayeredHamiltonian(n_sites, std::move(layers));
}

/// Random complex nearest-neighbour chain ordered by bond: layer j holds all
/// fifteen non-identity two-site Pauli strings on sites (j, j+1) with
/// coefficients in [-1, 1]. Layers further than one apart commute; terms inside
/// a layer generally do not.
inline LayeredHamiltonian random_nn_chain(int n_sites, std::uint64_t seed) {
  if (n_sites < 2) throw Error(ErrorKind::invalid_argument, "random_nn_chain: n_sites must be >= 2");
  std::mt19937_64 engine(seed);
  static constexpr std::array<char, 4> letters{'I', 'X', 'Y', 'Z'};
  std::vector<Layer> layers;
  for (int j = 0; j + 1 < n_sites; ++j) {
    Layer bond;
    for (char a : letters) {
      for (char b : letters) {
        if (a == 'I' && b == 'I') continue;
        bond.terms.push_back({detail::uniform(engine, -1, 1), detail::letters_with(n_sites, {{j, a}, {j + 1, b}})});
      }
    }
    layers.push_back(std::move(bond));
  }
  return LayeredHamiltonian(n_sites, std::move(layers));
}

/// One entry of an explicit model description.
struct TermSpec {
  double coefficient;
  std::string letters;
  std::size_t layer;
};

inline LayeredHamiltonian from_terms(int n_sites, const std::vector<TermSpec>& specs) {
  std::size_t layer_count = 0;
  for (const auto& s : specs) layer_count = std::max(layer_count, s.layer + 1);
  std::vector<Layer> layers(layer_count);
  for (const auto& s : specs) layers[s.layer].terms.push_back({s.coefficient, s.letters});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].terms.empty()) {
      throw Error(ErrorKind::invalid_argument, "from_terms: layer " + std::to_string(i) + " has no terms");
    }
  }
  return LayeredHamiltonian(n_sites, std::move(layers));
}

// ---------------------------------------------------------------------------
// Commutator constants

/// alpha, beta and ||H|| of a layered Hamiltonian, and the pair constants
/// C0 = ||A||, C1 = ||[A,B]||, C2 = ||[A,[A,B]]||, D = ||A - B|| when a second
/// Hamiltonian B is supplied (A = initial, B = final of an adiabatic path).
struct InteractionConstants {
  double alpha = 0.0;
  double beta = 0.0;
  double normH = 0.0;
  double C0 = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  double D = 0.0;
  bool has_pair = false;
};

inline InteractionConstants interaction_constants(const LayeredHamiltonian& a,
                                                  const std::optional<LayeredHamiltonian>& b = std::nullopt,
                                                  int site_cap = default_site_cap) {
  const DenseModel model = build_dense(a, site_cap);
  const auto& layers = model.per_layer;
  const std::size_t count = layers.size();

  InteractionConstants c;
  c.normH = operator_norm(model.total);
  for (std::size_t n = 0; n < count; ++n) {
    for (std::size_t m = 0; m < n; ++m) {
      const DenseOperator inner = commutator(layers[n], layers[m]);
      c.alpha += operator_norm(inner);
      for (std::size_t l = n; l < count; ++l) c.beta += operator_norm(commutator(layers[l], inner));
    }
  }

  if (b) {
    if (b->n_sites() != a.n_sites()) {
      throw Error(ErrorKind::dimension_mismatch, "interaction_constants: pair has different site counts");
    }
    const DenseOperator hb = dense_total(*b, site_cap);
    const DenseOperator& ha = model.total;
    const DenseOperator c1 = commutator(ha, hb);
    c.C0 = c.normH;
    c.C1 = operator_norm(c1);
    c.C2 = operator_norm(commutator(ha, c1));
    c.D = operator_norm(ha - hb);
    c.has_pair = true;
  }
  return c;
}

}  // namespace trotterfx
