#include "twz/match/lattice.hpp"

#include "twz/core/binary_io.hpp"
#include "twz/core/error.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <sstream>
#include <tuple>

namespace twz::match {

void SiteLattice::validate() const {
  if (!(spacing > 0.0)) {
    throw Error("lattice spacing must be positive");
  }
  if (layers < 1) {
    throw Error("lattice needs at least one layer");
  }
  std::vector<Site> sorted = sites;
  for (const Site& s : sorted) {
    if (s.layer < 0 || s.layer >= layers) {
      throw Error("site layer " + std::to_string(s.layer) + " out of range");
    }
  }
  std::sort(sorted.begin(), sorted.end(), [](const Site& a, const Site& b) {
    return std::tie(a.layer, a.x, a.y) < std::tie(b.layer, b.x, b.y);
  });
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw Error("lattice contains duplicate sites");
  }
}

std::vector<Vec2> SiteLattice::positions() const {
  std::vector<Vec2> p;
  p.reserve(sites.size());
  for (const Site& s : sites) {
    p.push_back({s.x, s.y});
  }
  return p;
}

std::vector<std::size_t> SiteLattice::layer_indices(int layer) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (sites[i].layer == layer) {
      idx.push_back(i);
    }
  }
  return idx;
}

SiteLattice square_lattice(std::size_t n, double spacing, Vec2 center, int layer) {
  SiteLattice lat;
  lat.spacing = spacing;
  lat.layers = layer + 1;
  lat.sites.reserve(n * n);
  const auto off = static_cast<double>((n == 0 ? 0 : n - 1) / 2);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      lat.sites.push_back({center.x + spacing * (static_cast<double>(i) - off),
                           center.y + spacing * (static_cast<double>(j) - off), layer});
    }
  }
  return lat;
}

SiteLattice parse_lattice(const std::string& text, double spacing) {
  SiteLattice lat;
  lat.spacing = spacing;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  int max_layer = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') {
      continue;
    }
    std::istringstream ls(line);
    Site s;
    if (!(ls >> s.x >> s.y >> s.layer)) {
      throw FormatError(FormatError::Kind::Malformed,
                        "lattice line " + std::to_string(line_no) + ": expected \"x y layer\"");
    }
    std::string rest;
    if (ls >> rest) {
      throw FormatError(FormatError::Kind::Malformed,
                        "lattice line " + std::to_string(line_no) + ": trailing fields");
    }
    max_layer = std::max(max_layer, s.layer);
    lat.sites.push_back(s);
  }
  lat.layers = max_layer + 1;
  lat.validate();
  return lat;
}

std::string format_lattice(const SiteLattice& lattice) {
  std::string out;
  for (const Site& s : lattice.sites) {
    out += fmt::format("{} {} {}\n", s.x, s.y, s.layer);
  }
  return out;
}

SiteLattice read_lattice_file(const std::string& path, double spacing) {
  const auto bytes = read_file(path);
  return parse_lattice(std::string(bytes.begin(), bytes.end()), spacing);
}

void write_lattice_file(const std::string& path, const SiteLattice& lattice) {
  const std::string text = format_lattice(lattice);
  write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

} // namespace twz::match
