#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "localrhat/error.hpp"
#include "localrhat/rng.hpp"
#include "localrhat/statdist.hpp"

namespace localrhat {

/// Draws from m chains of n iterations in d dimensions, stored chain-major:
/// draw (j, i, p) lives at ((j * n) + i) * d + p. Immutable after construction.
class ChainSet {
 public:
  ChainSet(std::size_t chains, std::size_t iterations, std::size_t dims, std::vector<double> draws,
           std::vector<std::string> labels = {})
      : m_(chains), n_(iterations), d_(dims), draws_(std::move(draws)), labels_(std::move(labels)) {
    if (m_ < 2) throw Error("at least two chains required");
    if (n_ < 1) throw Error("chains must hold at least one iteration");
    if (d_ < 1) throw Error("draws must have at least one coordinate");
    if (draws_.size() != m_ * n_ * d_) throw Error("draw count does not match m * n * d");
    for (std::size_t k = 0; k < draws_.size(); ++k) {
      if (!std::isfinite(draws_[k])) {
        const std::size_t j = k / (n_ * d_);
        const std::size_t i = (k / d_) % n_;
        throw Error("non-finite draw in chain " + std::to_string(j + 1) + " at iteration " +
                    std::to_string(i + 1));
      }
    }
    if (!labels_.empty() && labels_.size() != d_) throw Error("label count must equal d");
  }

  /// Univariate chain set from equal-length series.
  static ChainSet from_series(const std::vector<std::vector<double>>& series) {
    if (series.size() < 2) throw Error("at least two chains required");
    const std::size_t n = series.front().size();
    std::vector<double> draws;
    draws.reserve(series.size() * n);
    for (std::size_t j = 0; j < series.size(); ++j) {
      if (series[j].size() != n) {
        throw Error("ragged chains: chain " + std::to_string(j + 1) + " has " +
                    std::to_string(series[j].size()) + " iterations, expected " + std::to_string(n));
      }
      draws.insert(draws.end(), series[j].begin(), series[j].end());
    }
    return ChainSet(series.size(), n, 1, std::move(draws));
  }

  std::size_t chains() const noexcept { return m_; }
  std::size_t iterations() const noexcept { return n_; }
  std::size_t dims() const noexcept { return d_; }
  std::size_t total() const noexcept { return m_ * n_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  std::span<const double> raw() const noexcept { return draws_; }

  double operator()(std::size_t chain, std::size_t iter, std::size_t coord = 0) const noexcept {
    return draws_[(chain * n_ + iter) * d_ + coord];
  }

  /// Copy of one chain's series for one coordinate.
  std::vector<double> series(std::size_t chain, std::size_t coord = 0) const {
    std::vector<double> out(n_);
    for (std::size_t i = 0; i < n_; ++i) out[i] = (*this)(chain, i, coord);
    return out;
  }

  /// All m*n draws of one coordinate, chain-major order.
  std::vector<double> pooled(std::size_t coord = 0) const {
    std::vector<double> out(m_ * n_);
    for (std::size_t k = 0; k < m_ * n_; ++k) out[k] = draws_[k * d_ + coord];
    return out;
  }

  /// Univariate chain set holding coordinate `coord` only.
  ChainSet coordinate(std::size_t coord) const {
    if (coord >= d_) throw Error("coordinate index out of range");
    std::vector<std::string> lab;
    if (!labels_.empty()) lab.push_back(labels_[coord]);
    return ChainSet(m_, n_, 1, pooled(coord), std::move(lab));
  }

  /// Same chain set with every draw replaced by f(draw, coord).
  template <typename F>
  ChainSet transformed(F&& f) const {
    std::vector<double> out(draws_.size());
    for (std::size_t k = 0; k < draws_.size(); ++k) out[k] = f(draws_[k], k % d_);
    return ChainSet(m_, n_, d_, std::move(out), labels_);
  }

  /// Chain set with chains reordered: result chain k is this chain order[k].
  ChainSet permuted(std::span<const std::size_t> order) const {
    if (order.size() != m_) throw Error("permutation length must equal m");
    std::vector<double> out;
    out.reserve(draws_.size());
    for (std::size_t k : order) {
      auto first = draws_.begin() + static_cast<std::ptrdiff_t>(k * n_ * d_);
      out.insert(out.end(), first, first + static_cast<std::ptrdiff_t>(n_ * d_));
    }
    return ChainSet(m_, n_, d_, std::move(out), labels_);
  }

  bool operator==(const ChainSet&) const = default;

 private:
  std::size_t m_, n_, d_;
  std::vector<double> draws_;
  std::vector<std::string> labels_;
};

/// Halves every chain: 2m chains of floor(n/2) draws, first halves then second
/// halves of each original chain in order. The last draw is dropped when n is odd.
inline ChainSet split_chains(const ChainSet& cs) {
  if (cs.iterations() < 4) throw Error("split_chains requires n >= 4");
  const std::size_t m = cs.chains(), d = cs.dims(), half = cs.iterations() / 2;
  std::vector<double> out;
  out.reserve(2 * m * half * d);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t part = 0; part < 2; ++part) {
      for (std::size_t i = 0; i < half; ++i) {
        for (std::size_t p = 0; p < d; ++p) out.push_back(cs(j, part * half + i, p));
      }
    }
  }
  return ChainSet(2 * m, half, d, std::move(out), cs.labels());
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Chain j holds n i.i.d. draws from specs[j]; chain j's stream is derive_seed(seed, j).
inline ChainSet generate_iid(const std::vector<DistributionSpec>& specs, std::size_t n,
                             std::uint64_t seed) {
  if (specs.size() < 2) throw Error("at least two chains required");
  std::vector<double> draws(specs.size() * n);
  for (std::size_t j = 0; j < specs.size(); ++j) {
    Rng rng(derive_seed(seed, j));
    for (std::size_t i = 0; i < n; ++i) draws[j * n + i] = sample(specs[j], rng);
  }
  return ChainSet(specs.size(), n, 1, std::move(draws));
}

/// Gaussian AR(1) chains: theta(i+1) = rho * theta(i) + N(0, sigma_j^2), started
/// from the stationary law N(0, sigma_j^2 / (1 - rho^2)).
inline ChainSet generate_ar1(double rho, const std::vector<double>& sigmas, std::size_t n,
                             std::uint64_t seed) {
  if (!(rho > 0.0 && rho < 1.0)) throw Error("generate_ar1: rho must lie in (0,1)");
  if (sigmas.size() < 2) throw Error("at least two chains required");
  for (double s : sigmas) {
    if (!(s > 0.0 && std::isfinite(s))) throw Error("generate_ar1: every sigma must be > 0");
  }
  std::vector<double> draws(sigmas.size() * n);
  const double stationary = 1.0 / std::sqrt(1.0 - rho * rho);
  for (std::size_t j = 0; j < sigmas.size(); ++j) {
    Rng rng(derive_seed(seed, j));
    double state = sigmas[j] * stationary * std_normal_quantile(rng.uniform());
    for (std::size_t i = 0; i < n; ++i) {
      if (i > 0) state = rho * state + sigmas[j] * std_normal_quantile(rng.uniform());
      draws[j * n + i] = state;
    }
  }
  return ChainSet(sigmas.size(), n, 1, std::move(draws));
}

namespace detail {

// Lower-triangular factor L with L L^T = cov. Cholesky first; semi-definite inputs
// fall back to an eigen factorization with eigenvalues in [-1e-12, 0) clipped to 0.
inline Eigen::MatrixXd covariance_factor(const Eigen::MatrixXd& cov) {
  constexpr double tol = 1e-12;
  const auto d = cov.rows();
  if (cov.cols() != d || d < 1) throw Error("covariance must be a non-empty square matrix");
  for (Eigen::Index r = 0; r < d; ++r) {
    if (std::abs(cov(r, r) - 1.0) > tol) throw Error("covariance must have unit diagonal");
    for (Eigen::Index c = 0; c < r; ++c) {
      if (!std::isfinite(cov(r, c)) || std::abs(cov(r, c) - cov(c, r)) > tol) {
        throw Error("covariance must be symmetric");
      }
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("covariance eigen-decomposition failed");
  Eigen::VectorXd values = eig.eigenvalues();
  if (values.minCoeff() < -tol) throw Error("covariance is not positive semi-definite");
  values = values.cwiseMax(0.0);
  return eig.eigenvectors() * values.cwiseSqrt().asDiagonal();
}

}  // namespace detail

/// Chain j holds n i.i.d. N(0, covs[j]) vectors.
inline ChainSet generate_mvn(const std::vector<Eigen::MatrixXd>& covs, std::size_t n,
                             std::uint64_t seed) {
  if (covs.size() < 2) throw Error("at least two chains required");
  const auto d = static_cast<std::size_t>(covs.front().rows());
  std::vector<Eigen::MatrixXd> factors;
  for (const auto& cov : covs) {
    if (static_cast<std::size_t>(cov.rows()) != d) throw Error("covariances differ in dimension");
    factors.push_back(detail::covariance_factor(cov));
  }
  std::vector<double> draws(covs.size() * n * d);
  Eigen::VectorXd z(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < covs.size(); ++j) {
    Rng rng(derive_seed(seed, j));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t p = 0; p < d; ++p) z[static_cast<Eigen::Index>(p)] = std_normal_quantile(rng.uniform());
      const Eigen::VectorXd x = factors[j] * z;
      for (std::size_t p = 0; p < d; ++p) draws[(j * n + i) * d + p] = x[static_cast<Eigen::Index>(p)];
    }
  }
  return ChainSet(covs.size(), n, d, std::move(draws));
}

/// Wishart(d dof, identity scale) draw S rescaled to D^-1/2 S D^-1/2 with D = diag(S).
/// The diagonal is exactly 1.
inline Eigen::MatrixXd random_unitdiag_covariance(std::size_t d, std::uint64_t seed) {
  if (d < 2) throw Error("random_unitdiag_covariance requires d >= 2");
  const auto dd = static_cast<Eigen::Index>(d);
  Rng rng(seed);
  Eigen::MatrixXd z(dd, dd);
  for (Eigen::Index r = 0; r < dd; ++r) {
    for (Eigen::Index c = 0; c < dd; ++c) z(r, c) = std_normal_quantile(rng.uniform());
  }
  const Eigen::MatrixXd s = z.transpose() * z;
  Eigen::MatrixXd out(dd, dd);
  for (Eigen::Index r = 0; r < dd; ++r) {
    out(r, r) = 1.0;
    for (Eigen::Index c = 0; c < r; ++c) {
      out(r, c) = out(c, r) = s(r, c) / std::sqrt(s(r, r) * s(c, c));
    }
  }
  return out;
}

/// Identity except for off-diagonal element rho in the (0,1) position.
inline Eigen::MatrixXd bivariate_correlation(double rho) {
  Eigen::MatrixXd cov = Eigen::MatrixXd::Identity(2, 2);
  cov(0, 1) = cov(1, 0) = rho;
  return cov;
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

enum class Layout { wide, long_ };

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace detail {

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) cell.remove_suffix(1);
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
    cells.emplace_back(cell);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::vector<std::string> read_lines(std::istream& in) {
  std::vector<std::string> lines;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (first && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    first = false;
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline std::optional<double> parse_number(std::string_view cell) {
  if (cell.empty()) return std::nullopt;
  if (cell.front() == '+') cell.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) return std::nullopt;
  return v;
}

[[noreturn]] inline void bad_cell(std::size_t row, std::size_t col, const std::string& cell) {
  throw Error("non-numeric cell at row " + std::to_string(row) + ", column " + std::to_string(col) +
              ": \"" + cell + "\"");
}

inline void check_finite(double v, std::size_t row, std::size_t col) {
  if (!std::isfinite(v)) {
    throw Error("non-finite value at row " + std::to_string(row) + ", column " + std::to_string(col));
  }
}

}  // namespace detail

/// Header starting with `chain,iteration` means long layout, anything else wide.
inline Layout detect_layout(const std::string& header_line) {
  const auto cells = detail::split_csv_line(header_line);
  return cells.size() >= 3 && cells[0] == "chain" && cells[1] == "iteration" ? Layout::long_ : Layout::wide;
}

/// Parses CSV text. Rows are 1-based counting the header as row 1.
inline ChainSet parse_chains(std::istream& in, std::optional<Layout> layout = std::nullopt) {
  const auto lines = detail::read_lines(in);
  if (lines.empty()) throw Error("empty input: no header row");
  const Layout lay = layout.value_or(detect_layout(lines.front()));
  const auto header = detail::split_csv_line(lines.front());

  if (lay == Layout::wide) {
    const std::size_t m = header.size();
    if (m < 2) throw Error("at least two chains required");
    std::vector<std::vector<double>> cols(m);
    std::vector<bool> ended(m, false);
    for (std::size_t r = 1; r < lines.size(); ++r) {
      auto cells = detail::split_csv_line(lines[r]);
      if (cells.size() > m) throw Error("row " + std::to_string(r + 1) + " has more cells than the header");
      cells.resize(m);
      for (std::size_t c = 0; c < m; ++c) {
        if (cells[c].empty()) {
          ended[c] = true;
          continue;
        }
        const auto v = detail::parse_number(cells[c]);
        if (!v || ended[c]) detail::bad_cell(r + 1, c + 1, cells[c]);
        detail::check_finite(*v, r + 1, c + 1);
        cols[c].push_back(*v);
      }
    }
    const std::size_t n = std::max_element(cols.begin(), cols.end(), [](const auto& a, const auto& b) {
                            return a.size() < b.size();
                          })->size();
    for (std::size_t c = 0; c < m; ++c) {
      if (cols[c].size() != n) {
        throw Error("ragged chains: chain " + std::to_string(c + 1) + " has " +
                    std::to_string(cols[c].size()) + " iterations, expected " + std::to_string(n));
      }
    }
    if (n == 0) throw Error("no draws in input");
    return ChainSet::from_series(cols);
  }

  if (header.size() < 3) throw Error("long layout needs header chain,iteration,p_1,...");
  const std::size_t d = header.size() - 2;
  std::map<long long, std::vector<double>> by_chain;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const auto cells = detail::split_csv_line(lines[r]);
    if (cells.size() != header.size()) {
      throw Error("row " + std::to_string(r + 1) + " has " + std::to_string(cells.size()) +
                  " cells, expected " + std::to_string(header.size()));
    }
    long long chain_id = 0;
    {
      const auto& s = cells[0];
      const auto res = std::from_chars(s.data(), s.data() + s.size(), chain_id);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size() || chain_id < 1) {
        detail::bad_cell(r + 1, 1, s);
      }
    }
    {
      long long iter = 0;
      const auto& s = cells[1];
      const auto res = std::from_chars(s.data(), s.data() + s.size(), iter);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size() || iter < 1) detail::bad_cell(r + 1, 2, s);
    }
    auto& dst = by_chain[chain_id];
    for (std::size_t p = 0; p < d; ++p) {
      const auto v = detail::parse_number(cells[p + 2]);
      if (!v) detail::bad_cell(r + 1, p + 3, cells[p + 2]);
      detail::check_finite(*v, r + 1, p + 3);
      dst.push_back(*v);
    }
  }
  if (by_chain.size() < 2) throw Error("at least two chains required");
  const std::size_t n = by_chain.begin()->second.size() / d;
  std::vector<double> draws;
  for (const auto& [id, values] : by_chain) {
    if (values.size() != n * d) {
      throw Error("ragged chains: chain " + std::to_string(id) + " has " + std::to_string(values.size() / d) +
                  " iterations, expected " + std::to_string(n));
    }
    draws.insert(draws.end(), values.begin(), values.end());
  }
  std::vector<std::string> labels(header.begin() + 2, header.end());
  return ChainSet(by_chain.size(), n, d, std::move(draws), std::move(labels));
}

inline ChainSet load_chains(const std::string& path, std::optional<Layout> layout = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);
  return parse_chains(in, layout);
}

/// Writes CSV with shortest round-trip decimal formatting. Wide layout requires d = 1.
inline void write_chains(std::ostream& out, const ChainSet& cs, Layout layout) {
  if (layout == Layout::wide) {
    if (cs.dims() != 1) throw Error("wide layout requires d = 1");
    for (std::size_t j = 0; j < cs.chains(); ++j) out << (j ? "," : "") << "chain_" << j + 1;
    out << '\n';
    for (std::size_t i = 0; i < cs.iterations(); ++i) {
      for (std::size_t j = 0; j < cs.chains(); ++j) out << (j ? "," : "") << format_double(cs(j, i));
      out << '\n';
    }
    return;
  }
  out << "chain,iteration";
  for (std::size_t p = 0; p < cs.dims(); ++p) {
    out << ',' << (cs.labels().empty() ? "p_" + std::to_string(p + 1) : cs.labels()[p]);
  }
  out << '\n';
  for (std::size_t j = 0; j < cs.chains(); ++j) {
    for (std::size_t i = 0; i < cs.iterations(); ++i) {
      out << j + 1 << ',' << i + 1;
      for (std::size_t p = 0; p < cs.dims(); ++p) out << ',' << format_double(cs(j, i, p));
      out << '\n';
    }
  }
}

inline void save_chains(const std::string& path, const ChainSet& cs, Layout layout) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path);
  write_chains(out, cs, layout);
}

}  // namespace localrhat
