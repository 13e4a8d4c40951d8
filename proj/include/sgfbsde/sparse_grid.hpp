#pragma once

// Nested CGL sparse grids on boxes, the fast hierarchical transform from
// grid values to expansion coefficients, and evaluation of the resulting
// sparse Chebyshev interpolant.

#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sgfbsde/basis1d.hpp"
#include "sgfbsde/error.hpp"
#include "sgfbsde/index_set.hpp"

namespace sgfbsde {

struct DomainBox {
  std::vector<double> lower;
  std::vector<double> upper;

  DomainBox() = default;
  DomainBox(std::vector<double> a, std::vector<double> b) : lower(std::move(a)), upper(std::move(b)) {}

  static DomainBox cube(int q, double a, double b) {
    return {std::vector<double>(static_cast<std::size_t>(q), a),
            std::vector<double>(static_cast<std::size_t>(q), b)};
  }

  std::size_t dimension() const noexcept { return lower.size(); }
  DomainInterval interval(std::size_t m) const { return {lower[m], upper[m]}; }

  void validate() const {
    require(!lower.empty() && lower.size() == upper.size(), "domain box bounds have mismatched sizes");
    for (std::size_t m = 0; m < lower.size(); ++m) interval(m).validate();
  }

  bool operator==(const DomainBox&) const = default;
};

class SparseGrid {
 public:
  SparseGrid(int q, int p, DomainBox domain)
      : indices_(std::make_shared<const BasisIndexSet>(q, p)), domain_(std::move(domain)) {
    domain_.validate();
    require(static_cast<int>(domain_.dimension()) == q, "domain dimension differs from q");
    const auto uq = static_cast<std::size_t>(q);
    points_.resize(indices_->size() * uq);
    for (std::size_t f = 0; f < indices_->size(); ++f) {
      const auto e = indices_->entry(f);
      for (std::size_t m = 0; m < uq; ++m)
        points_[f * uq + m] = domain_.interval(m).from_reference(hier_node(e[m]));
    }
  }

  int dimension() const noexcept { return indices_->dimension(); }
  int sparseness() const noexcept { return indices_->sparseness(); }
  std::size_t size() const noexcept { return indices_->size(); }
  const DomainBox& domain() const noexcept { return domain_; }
  const BasisIndexSet& indices() const noexcept { return *indices_; }
  std::shared_ptr<const BasisIndexSet> shared_indices() const noexcept { return indices_; }

  std::span<const double> point(std::size_t f) const {
    const auto uq = static_cast<std::size_t>(dimension());
    return {points_.data() + f * uq, uq};
  }

 private:
  std::shared_ptr<const BasisIndexSet> indices_;
  DomainBox domain_;
  std::vector<double> points_;
};

inline SparseGrid build_grid(int q, int p, const DomainBox& domain) { return SparseGrid(q, p, domain); }

/// Scratch space for interpolant evaluation; one per thread.
struct EvalWorkspace {
  std::vector<double> basis;  // q x (kmax + 1) hierarchical values
  std::vector<double> prefix;
  std::vector<int> pos;
  std::size_t out_of_box = 0;
};

/// Sum over I_q^p of b_k * prod_m T~_{k_m}(x_m), with m-vector coefficients.
class SparseInterpolant {
 public:
  SparseInterpolant(std::shared_ptr<const BasisIndexSet> indices, DomainBox domain, int value_dim,
                    std::vector<double> coefficients)
      : indices_(std::move(indices)),
        domain_(std::move(domain)),
        value_dim_(value_dim),
        coefficients_(std::move(coefficients)) {
    require(indices_ != nullptr, "interpolant needs an index set");
    domain_.validate();
    require(static_cast<int>(domain_.dimension()) == indices_->dimension(), "domain dimension differs from q");
    require(value_dim_ >= 1, "value dimension must be >= 1");
    require(coefficients_.size() == indices_->size() * static_cast<std::size_t>(value_dim_),
            "coefficient array has the wrong size");
  }

  int dimension() const noexcept { return indices_->dimension(); }
  int sparseness() const noexcept { return indices_->sparseness(); }
  int value_dim() const noexcept { return value_dim_; }
  const DomainBox& domain() const noexcept { return domain_; }
  const BasisIndexSet& indices() const noexcept { return *indices_; }
  std::shared_ptr<const BasisIndexSet> shared_indices() const noexcept { return indices_; }

  /// Row-major (index, component) coefficient array in canonical index order.
  std::span<const double> coefficients() const noexcept { return coefficients_; }
  std::span<double> mutable_coefficients() noexcept { return coefficients_; }

  std::span<const double> coefficient(std::size_t f) const {
    const auto um = static_cast<std::size_t>(value_dim_);
    return {coefficients_.data() + f * um, um};
  }

  /// Evaluate at x; points outside the box use the polynomial extension and
  /// are tallied in ws.out_of_box.
  void evaluate(std::span<const double> x, std::span<double> out, EvalWorkspace& ws) const {
    const auto uq = static_cast<std::size_t>(dimension());
    const int kmax = indices_->max_1d_index();
    const auto stride = static_cast<std::size_t>(kmax) + 1;
    ws.basis.resize(uq * stride);
    bool outside = false;
    for (std::size_t m = 0; m < uq; ++m) {
      const double t = domain_.interval(m).to_reference(x[m]);
      if (std::abs(t) > 1.0 + 1e-9) outside = true;
      hierarchical_values(t, kmax, std::span<double>(ws.basis.data() + m * stride, stride));
    }
    if (outside) ++ws.out_of_box;

    const auto um = static_cast<std::size_t>(value_dim_);
    for (std::size_t c = 0; c < um; ++c) out[c] = 0.0;
    const double* coef = coefficients_.data();
    const std::size_t last = uq - 1;
    ws.prefix.resize(uq);
    ws.pos.resize(uq);

    // Each block is a tensor product laid out row-major, so products over
    // the leading dimensions are shared by a whole run of the last one.
    for (std::size_t b = 0; b < indices_->block_count(); ++b) {
      const auto& lv = indices_->block_level(b);
      const double* tail = ws.basis.data() + last * stride + hier::first_index(lv[last]);
      const int tail_count = hier::new_count(lv[last]);
      const double* c = coef + indices_->block_offset(b) * um;
      ws.prefix[0] = 1.0;
      for (std::size_t m = 0; m < last; ++m) {
        ws.pos[m] = 0;
        ws.prefix[m + 1] = ws.prefix[m] * ws.basis[m * stride + static_cast<std::size_t>(hier::first_index(lv[m]))];
      }
      while (true) {
        const double lead = ws.prefix[last];
        if (um == 1) {
          double acc = 0.0;
          for (int r = 0; r < tail_count; ++r) acc += tail[r] * c[r];
          out[0] += lead * acc;
          c += tail_count;
        } else {
          for (int r = 0; r < tail_count; ++r) {
            const double w = lead * tail[r];
            for (std::size_t k = 0; k < um; ++k) out[k] += w * c[k];
            c += um;
          }
        }
        std::size_t m = last;
        while (m-- > 0) {
          if (++ws.pos[m] < hier::new_count(lv[m])) break;
          ws.pos[m] = 0;
        }
        if (m == static_cast<std::size_t>(-1)) break;
        for (std::size_t j = m; j < last; ++j)
          ws.prefix[j + 1] =
              ws.prefix[j] * ws.basis[j * stride + static_cast<std::size_t>(hier::first_index(lv[j]) + ws.pos[j])];
      }
    }
  }

  std::vector<double> evaluate(std::span<const double> x) const {
    EvalWorkspace ws;
    std::vector<double> out(static_cast<std::size_t>(value_dim_));
    evaluate(x, out, ws);
    return out;
  }

 private:
  std::shared_ptr<const BasisIndexSet> indices_;
  DomainBox domain_;
  int value_dim_;
  std::vector<double> coefficients_;
};

/// Hierarchical transform sweeping one dimension at a time. For every
/// profile of levels in the other dimensions the pencil along the active
/// dimension covers the full set I^(p - |profile|), and is mapped through the
/// inverse collocation matrix of that level.
///
/// `values` is row-major (grid index, component) with value_dim components.
inline SparseInterpolant fast_transform(const SparseGrid& grid, std::span<const double> values, int value_dim) {
  require(value_dim >= 1, "value dimension must be >= 1");
  const auto& idx = grid.indices();
  const auto um = static_cast<std::size_t>(value_dim);
  require(values.size() == idx.size() * um, "values do not match the grid's index set");

  std::vector<double> b(values.begin(), values.end());
  const int q = idx.dimension();
  const int p = idx.sparseness();
  const auto uq = static_cast<std::size_t>(q);

  std::vector<double> pencil_in, pencil_out;
  std::vector<std::size_t> pencil_pos;
  std::vector<int> levels(uq);

  for (std::size_t d = 0; d < uq; ++d) {
    for (std::size_t blk = 0; blk < idx.block_count(); ++blk) {
      const auto& lv = idx.block_level(blk);
      if (lv[d] != 1) continue;  // each profile is visited through its level-1 block
      const int top = p - (lv.sum() - 1);
      const int len = hier::level_size(top);
      const auto& t = transform_matrix(top);

      // Blocks along the pencil, ordered by the level of dimension d.
      std::vector<std::size_t> pencil_blocks;
      levels.assign(lv.components().begin(), lv.components().end());
      for (int l = 1; l <= top; ++l) {
        levels[d] = l;
        const auto nb = idx.find_block(levels);
        if (!nb) throw NumericError("sparse index set is not downward closed");
        pencil_blocks.push_back(*nb);
      }

      const std::size_t stride_d = idx.block_stride(blk, d);
      const std::size_t bsize = idx.block_size(blk);
      pencil_in.resize(static_cast<std::size_t>(len) * um);
      pencil_out.resize(pencil_in.size());
      pencil_pos.resize(static_cast<std::size_t>(len));

      for (std::size_t local = 0; local < bsize; ++local) {
        // Representatives have local position 0 along dimension d.
        if ((local / stride_d) % 3 != 0) continue;
        // Local position in the other dimensions, as offsets per pencil block.
        std::size_t k = 0;
        for (std::size_t pb = 0; pb < pencil_blocks.size(); ++pb) {
          const std::size_t nbk = pencil_blocks[pb];
          std::size_t base = idx.block_offset(nbk);
          std::size_t rem = local;
          for (std::size_t m = 0; m < uq; ++m) {
            const std::size_t st = idx.block_stride(blk, m);
            const std::size_t r = rem / st;
            rem %= st;
            if (m != d) base += r * idx.block_stride(nbk, m);
          }
          const int count = hier::new_count(static_cast<int>(pb) + 1);
          for (int r = 0; r < count; ++r) pencil_pos[k++] = base + static_cast<std::size_t>(r) * idx.block_stride(nbk, d);
        }
        for (std::size_t j = 0; j < static_cast<std::size_t>(len); ++j)
          for (std::size_t c = 0; c < um; ++c) pencil_in[j * um + c] = b[pencil_pos[j] * um + c];
        for (std::size_t kk = 0; kk < static_cast<std::size_t>(len); ++kk) {
          for (std::size_t c = 0; c < um; ++c) {
            double s = 0.0;
            for (std::size_t j = 0; j < static_cast<std::size_t>(len); ++j)
              s += t(static_cast<Eigen::Index>(kk), static_cast<Eigen::Index>(j)) * pencil_in[j * um + c];
            pencil_out[kk * um + c] = s;
          }
        }
        for (std::size_t j = 0; j < static_cast<std::size_t>(len); ++j)
          for (std::size_t c = 0; c < um; ++c) b[pencil_pos[j] * um + c] = pencil_out[j * um + c];
      }
    }
  }
  return SparseInterpolant(grid.shared_indices(), grid.domain(), value_dim, std::move(b));
}

/// Sample f at every grid point and transform. f(x, out) writes value_dim values.
template <class F>
SparseInterpolant interpolate(const SparseGrid& grid, int value_dim, F&& f) {
  const auto um = static_cast<std::size_t>(value_dim);
  std::vector<double> values(grid.size() * um);
  for (std::size_t i = 0; i < grid.size(); ++i)
    f(grid.point(i), std::span<double>(values.data() + i * um, um));
  return fast_transform(grid, values, value_dim);
}

inline std::vector<double> interp_eval(const SparseInterpolant& s, std::span<const double> x) {
  return s.evaluate(x);
}

// ---------------------------------------------------------------------------
// Text dump: header "q,p,m,a_1..a_q,b_1..b_q", then one line per index with
// the q index components followed by the m coefficient values.

inline void write_interpolant_csv(std::ostream& os, const SparseInterpolant& s) {
  const auto& dom = s.domain();
  os << std::setprecision(17);
  os << s.dimension() << ',' << s.sparseness() << ',' << s.value_dim();
  for (double a : dom.lower) os << ',' << a;
  for (double b : dom.upper) os << ',' << b;
  os << '\n';
  for (std::size_t f = 0; f < s.indices().size(); ++f) {
    const auto e = s.indices().entry(f);
    for (std::size_t m = 0; m < e.size(); ++m) os << (m ? "," : "") << e[m];
    for (double c : s.coefficient(f)) os << ',' << c;
    os << '\n';
  }
}

inline SparseInterpolant read_interpolant_csv(std::istream& is) {
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  std::string line;
  if (!std::getline(is, line)) throw IoError("interpolant dump is empty");
  const auto head = split(line);
  if (head.size() < 5) throw IoError("malformed interpolant header");
  const int q = std::stoi(head[0]), p = std::stoi(head[1]), m = std::stoi(head[2]);
  if (head.size() != 3 + 2 * static_cast<std::size_t>(q)) throw IoError("interpolant header has wrong length");
  DomainBox dom;
  for (int i = 0; i < q; ++i) dom.lower.push_back(std::stod(head[3 + static_cast<std::size_t>(i)]));
  for (int i = 0; i < q; ++i) dom.upper.push_back(std::stod(head[3 + static_cast<std::size_t>(q + i)]));
  auto idx = std::make_shared<const BasisIndexSet>(q, p);
  std::vector<double> coef(idx->size() * static_cast<std::size_t>(m), 0.0);
  std::vector<bool> seen(idx->size(), false);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != static_cast<std::size_t>(q + m)) throw IoError("malformed interpolant row");
    std::vector<int> k;
    for (int i = 0; i < q; ++i) k.push_back(std::stoi(cells[static_cast<std::size_t>(i)]));
    const auto f = idx->position(BasisIndex(k));
    if (!f || seen[*f]) throw IoError("interpolant row has an unknown or repeated index");
    seen[*f] = true;
    for (int c = 0; c < m; ++c)
      coef[*f * static_cast<std::size_t>(m) + static_cast<std::size_t>(c)] =
          std::stod(cells[static_cast<std::size_t>(q + c)]);
  }
  return SparseInterpolant(std::move(idx), std::move(dom), m, std::move(coef));
}

}  // namespace sgfbsde
