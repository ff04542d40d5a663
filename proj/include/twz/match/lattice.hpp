#pragma once

#include "twz/core/geometry.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace twz::match {

struct Site {
  double x = 0.0;
  double y = 0.0;
  int layer = 0;

  friend bool operator==(const Site&, const Site&) = default;
};

struct SiteLattice {
  std::vector<Site> sites;
  double spacing = 1.0;
  int layers = 1;

  /// Throws unless spacing > 0, layer indices lie in [0, layers) and sites
  /// are pairwise distinct.
  void validate() const;

  [[nodiscard]] std::size_t size() const noexcept { return sites.size(); }
  [[nodiscard]] std::vector<Vec2> positions() const;
  /// Indices of the sites on one layer, in lattice order.
  [[nodiscard]] std::vector<std::size_t> layer_indices(int layer) const;
};

/// One flag per site (1 = atom present).
using Occupancy = std::vector<std::uint8_t>;

/// n×n square lattice centred on `center`; site (i, j) sits at
/// center + spacing·(i - floor((n-1)/2), j - floor((n-1)/2)), row-major in j.
[[nodiscard]] SiteLattice square_lattice(std::size_t n, double spacing, Vec2 center, int layer = 0);

/// Lattice text format: one "x y layer" triple per line; blank lines and lines
/// starting with '#' are skipped.
[[nodiscard]] SiteLattice parse_lattice(const std::string& text, double spacing);
[[nodiscard]] std::string format_lattice(const SiteLattice& lattice);
[[nodiscard]] SiteLattice read_lattice_file(const std::string& path, double spacing);
void write_lattice_file(const std::string& path, const SiteLattice& lattice);

} // namespace twz::match
