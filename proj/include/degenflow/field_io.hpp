#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include <json.hpp>

#include "degenflow/errors.hpp"
#include "degenflow/grid.hpp"

namespace degenflow {

// Field files: one JSON header line {type, nx, ny, lx, ly, neumann}
// followed by the raw little-endian float64 payload, row-major.  Vector
// fields store the x-face block then the y-face block.  Round-trips are
// bit exact.

namespace detail {

inline void write_doubles(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline void read_doubles(std::istream& is, std::vector<double>& v) {
  is.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(v.size() * sizeof(double)));
  if (!is) throw Error("field file: truncated payload");
}

inline nlohmann::json read_header(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error("field file: missing header");
  return nlohmann::json::parse(line);
}

inline Grid2D grid_from_header(const nlohmann::json& h) {
  return Grid2D(h.at("nx").get<int>(), h.at("ny").get<int>(),
                h.at("lx").get<double>(), h.at("ly").get<double>());
}

}  // namespace detail

inline void save_field(const std::string& path, const ScalarField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("save_field: cannot open " + path);
  nlohmann::json h{{"type", "scalar"}, {"nx", f.grid.nx},     {"ny", f.grid.ny},
                   {"lx", f.grid.lx},  {"ly", f.grid.ly},     {"neumann", false}};
  os << h.dump() << "\n";
  detail::write_doubles(os, f.values);
}

inline void save_field(const std::string& path, const VectorField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("save_field: cannot open " + path);
  nlohmann::json h{{"type", "vector"},  {"nx", f.grid.nx},  {"ny", f.grid.ny},
                   {"lx", f.grid.lx},   {"ly", f.grid.ly},  {"neumann", f.neumann}};
  os << h.dump() << "\n";
  detail::write_doubles(os, f.x);
  detail::write_doubles(os, f.y);
}

inline ScalarField load_scalar_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("load_scalar_field: cannot open " + path);
  const nlohmann::json h = detail::read_header(is);
  if (h.at("type") != "scalar")
    throw Error("load_scalar_field: " + path + " is not a scalar field");
  ScalarField f(detail::grid_from_header(h));
  detail::read_doubles(is, f.values);
  if (!f.all_finite()) throw Error("load_scalar_field: non-finite values");
  return f;
}

inline VectorField load_vector_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("load_vector_field: cannot open " + path);
  const nlohmann::json h = detail::read_header(is);
  if (h.at("type") != "vector")
    throw Error("load_vector_field: " + path + " is not a vector field");
  VectorField f(detail::grid_from_header(h), h.value("neumann", false));
  detail::read_doubles(is, f.x);
  detail::read_doubles(is, f.y);
  if (f.neumann && !f.boundary_is_zero())
    throw Error("load_vector_field: neumann flag with nonzero boundary faces");
  return f;
}

// lossless CSV (%.17g) for plotting
inline void export_csv(const std::string& path, const ScalarField& f) {
  std::ofstream os(path);
  if (!os) throw Error("export_csv: cannot open " + path);
  os << "i,j,x,y,value\n";
  char buf[64];
  for (int j = 0; j < f.grid.ny; ++j)
    for (int i = 0; i < f.grid.nx; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", f(i, j));
      os << i << ',' << j << ',' << f.grid.cx(i) << ',' << f.grid.cy(j) << ','
         << buf << "\n";
    }
}

inline void export_csv(const std::string& path, const VectorField& f) {
  std::ofstream os(path);
  if (!os) throw Error("export_csv: cannot open " + path);
  os << "component,i,j,x,y,value\n";
  char buf[64];
  for (int j = 0; j < f.grid.ny; ++j)
    for (int i = 0; i <= f.grid.nx; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", f.fx(i, j));
      os << "x," << i << ',' << j << ',' << i * f.grid.hx << ','
         << f.grid.cy(j) << ',' << buf << "\n";
    }
  for (int j = 0; j <= f.grid.ny; ++j)
    for (int i = 0; i < f.grid.nx; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", f.fy(i, j));
      os << "y," << i << ',' << j << ',' << f.grid.cx(i) << ','
         << j * f.grid.hy << ',' << buf << "\n";
    }
}

}  // namespace degenflow
