#include "dyadlab/measure_tree.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>

namespace dyadlab {

namespace {

void check_mass(double m, const char* what) {
  if (!std::isfinite(m) || m < 0.0)
    throw Error(std::string(what) + ": masses must be finite and nonnegative");
}

// Linear index of the parent of cube `idx` at `level`.
std::uint64_t parent_index(const Grid& g, int level, std::uint64_t idx) {
  Coords c = g.coords_of(idx, level);
  for (auto& x : c) x >>= 1;
  return g.linear_index(c, level + 1);
}

}  // namespace

MeasureTree MeasureTree::build(const Grid& grid, std::span<const Atom> atoms) {
  MeasureTree t;
  t.grid_ = grid;
  t.dense_ = grid.dense_ok();
  const int J = grid.root_level();
  for (const auto& a : atoms) {
    check_mass(a.mass, "build_measure");
    if (!grid.contains_cell(a.cell))
      throw Error("build_measure: cell " + to_string(DyadicCube{0, a.cell}, grid.dim()) +
                  " is outside the root cube");
  }
  if (t.dense_) {
    t.dense_levels_.resize(J + 1);
    auto& base = t.dense_levels_[0];
    base.assign(grid.cell_count(), 0.0);
    for (const auto& a : atoms) base[grid.linear_index(a.cell)] += a.mass;
  } else {
    t.sparse_levels_.resize(J + 1);
    std::vector<std::pair<std::uint64_t, double>> cells;
    cells.reserve(atoms.size());
    for (const auto& a : atoms) cells.emplace_back(grid.linear_index(a.cell), a.mass);
    std::stable_sort(cells.begin(), cells.end(),
                     [](const auto& x, const auto& y) { return x.first < y.first; });
    auto& base = t.sparse_levels_[0];
    for (const auto& [idx, m] : cells) {
      if (!base.index.empty() && base.index.back() == idx) {
        base.mass.back() += m;
      } else {
        base.index.push_back(idx);
        base.mass.push_back(m);
      }
    }
  }
  t.aggregate();
  return t;
}

MeasureTree MeasureTree::from_cell_masses(const Grid& grid, std::vector<double> masses) {
  grid.require_dense("from_cell_masses");
  if (masses.size() != grid.cell_count())
    throw Error("from_cell_masses: expected " + std::to_string(grid.cell_count()) +
                " cell masses, got " + std::to_string(masses.size()));
  for (double m : masses) check_mass(m, "from_cell_masses");
  MeasureTree t;
  t.grid_ = grid;
  t.dense_ = true;
  t.dense_levels_.resize(grid.root_level() + 1);
  t.dense_levels_[0] = std::move(masses);
  t.aggregate();
  return t;
}

void MeasureTree::aggregate() {
  const int J = grid_.root_level();
  const int d = grid_.dim();
  const int nchild = 1 << d;
  for (int level = 1; level <= J; ++level) {
    if (dense_) {
      const auto& below = dense_levels_[level - 1];
      auto& here = dense_levels_[level];
      here.assign(grid_.cube_count(level), 0.0);
      const std::uint64_t side_below = grid_.side_at(level - 1);
      for (std::uint64_t p = 0; p < here.size(); ++p) {
        const Coords pc = grid_.coords_of(p, level);
        double sum = 0.0;
        for (int off = 0; off < nchild; ++off) {
          std::uint64_t idx = 0;
          for (int i = d - 1; i >= 0; --i)
            idx = idx * side_below + (2 * pc[i] + ((off >> i) & 1));
          sum += below[idx];
        }
        here[p] = sum;
      }
    } else {
      const auto& below = sparse_levels_[level - 1];
      std::vector<std::pair<std::uint64_t, std::uint64_t>> order;  // (parent, child)
      order.reserve(below.index.size());
      for (std::size_t i = 0; i < below.index.size(); ++i)
        order.emplace_back(parent_index(grid_, level - 1, below.index[i]), i);
      std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        return a.first != b.first ? a.first < b.first
                                  : below.index[a.second] < below.index[b.second];
      });
      auto& here = sparse_levels_[level];
      for (const auto& [parent, child] : order) {
        if (!here.index.empty() && here.index.back() == parent) {
          here.mass.back() += below.mass[child];
        } else {
          here.index.push_back(parent);
          here.mass.push_back(0.0 + below.mass[child]);
        }
      }
    }
  }
  if (!dense_) {
    for (auto& lv : sparse_levels_) {
      lv.lookup.reserve(lv.index.size());
      for (std::size_t i = 0; i < lv.index.size(); ++i) lv.lookup.emplace(lv.index[i], lv.mass[i]);
    }
  }
}

double MeasureTree::mass_at(int level, std::uint64_t idx) const {
  if (dense_) return dense_levels_[level][idx];
  const auto& lv = sparse_levels_[level].lookup;
  auto it = lv.find(idx);
  return it == lv.end() ? 0.0 : it->second;
}

double MeasureTree::mass(const DyadicCube& q) const {
  grid_.check_cube(q, "cube_mass");
  return mass_at(q.level, grid_.linear_index(q));
}

std::vector<Atom> MeasureTree::atoms() const {
  std::vector<Atom> out;
  if (dense_) {
    const auto& base = dense_levels_[0];
    for (std::uint64_t i = 0; i < base.size(); ++i)
      if (base[i] != 0.0) out.push_back({grid_.coords_of(i), base[i]});
  } else {
    const auto& base = sparse_levels_[0];
    for (std::size_t i = 0; i < base.index.size(); ++i)
      if (base.mass[i] != 0.0) out.push_back({grid_.coords_of(base.index[i]), base.mass[i]});
  }
  return out;
}

std::vector<double> MeasureTree::cell_masses() const {
  grid_.require_dense("cell_masses");
  if (dense_) return dense_levels_[0];
  std::vector<double> out(grid_.cell_count(), 0.0);
  const auto& base = sparse_levels_[0];
  for (std::size_t i = 0; i < base.index.size(); ++i) out[base.index[i]] = base.mass[i];
  return out;
}

std::size_t MeasureTree::nonzero_cells() const {
  if (dense_)
    return static_cast<std::size_t>(std::count_if(dense_levels_[0].begin(), dense_levels_[0].end(),
                                                  [](double m) { return m != 0.0; }));
  return sparse_levels_[0].index.size();
}

MeasureTree MeasureTree::scaled(double c) const {
  check_mass(c, "scaled");
  auto a = atoms();
  for (auto& x : a) x.mass *= c;
  return build(grid_, a);
}

MeasureTree MeasureTree::restricted(const CellSet& keep) const {
  if (!(keep.grid() == grid_)) throw Error("restricted: cell set lives on a different grid");
  auto a = atoms();
  std::erase_if(a, [&](const Atom& x) { return !keep.contains(x.cell); });
  return build(grid_, a);
}

// ---------------------------------------------------------------------------
// text format

namespace {

[[noreturn]] void parse_fail(const std::string& src, std::size_t line, const std::string& msg) {
  throw Error(src + ":" + std::to_string(line) + ": " + msg);
}

template <typename T>
bool parse_number(std::string_view tok, T& out) {
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc{} && p == e;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

}  // namespace

MeasureTree read_measure(std::istream& in, const std::string& src) {
  std::string line;
  std::size_t lineno = 0;
  int dim = -1, J = -1;
  std::vector<Atom> atoms;
  std::optional<Grid> grid;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty() || toks[0].front() == '#') continue;
    if (!grid) {
      for (auto t : toks) {
        auto eq = t.find('=');
        if (eq == std::string_view::npos) parse_fail(src, lineno, "expected header 'n=<dim> J=<root_level>'");
        auto key = t.substr(0, eq);
        int v = 0;
        if (!parse_number(t.substr(eq + 1), v)) parse_fail(src, lineno, "bad integer in header");
        if (key == "n") dim = v;
        else if (key == "J") J = v;
        else parse_fail(src, lineno, "unknown header key '" + std::string(key) + "'");
      }
      if (dim < 0 || J < 0) parse_fail(src, lineno, "header must give both n and J");
      try {
        grid = Grid(dim, J);
      } catch (const Error& e) {
        parse_fail(src, lineno, e.what());
      }
      continue;
    }
    if (static_cast<int>(toks.size()) != dim + 1)
      parse_fail(src, lineno, "expected " + std::to_string(dim) + " coordinates and a mass");
    Atom a;
    for (int i = 0; i < dim; ++i)
      if (!parse_number(toks[i], a.cell[i])) parse_fail(src, lineno, "bad cell coordinate");
    if (!parse_number(toks[dim], a.mass)) parse_fail(src, lineno, "bad mass value");
    if (!std::isfinite(a.mass) || a.mass < 0.0) parse_fail(src, lineno, "negative or non-finite mass");
    if (!grid->contains_cell(a.cell)) parse_fail(src, lineno, "cell outside the root cube");
    atoms.push_back(a);
  }
  if (!grid) throw Error(src + ": missing header 'n=<dim> J=<root_level>'");
  return MeasureTree::build(*grid, atoms);
}

MeasureTree read_measure_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error("cannot open measure file '" + path + "'");
  return read_measure(f, path);
}

void write_measure(std::ostream& out, const MeasureTree& tree) {
  out << "n=" << tree.dim() << " J=" << tree.root_level() << "\n";
  char buf[64];
  for (const auto& a : tree.atoms()) {
    for (int i = 0; i < tree.dim(); ++i) out << a.cell[i] << ' ';
    std::snprintf(buf, sizeof buf, "%.17g", a.mass);
    out << buf << "\n";
  }
}

}  // namespace dyadlab
