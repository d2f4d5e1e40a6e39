#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <random>

#include "degenflow/field_io.hpp"
#include "degenflow/grid.hpp"
#include "degenflow/poisson.hpp"

using namespace degenflow;

namespace {

ScalarField fill(const Grid2D& g, double (*fn)(double, double)) {
  ScalarField f(g);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) f(i, j) = fn(g.cx(i), g.cy(j));
  return f;
}

ScalarField random_scalar(const Grid2D& g, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  ScalarField f(g);
  for (double& v : f.values) v = d(rng);
  return f;
}

VectorField random_neumann(const Grid2D& g, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  VectorField s(g, true);
  for (double& v : s.x) v = d(rng);
  for (double& v : s.y) v = d(rng);
  s.clamp_boundary();
  return s;
}

}  // namespace

TEST(Grid, Construction) {
  EXPECT_THROW(Grid2D(3, 8, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(Grid2D(8, 8, 0.0, 1.0), std::invalid_argument);
  const Grid2D g(8, 4, 2.0, 1.0);
  EXPECT_DOUBLE_EQ(g.hx, 0.25);
  EXPECT_DOUBLE_EQ(g.hy, 0.25);
}

TEST(Grid, GradientOnLinearAndConstant) {
  const Grid2D g(16, 16, 1.0, 1.0);
  const auto u = fill(g, [](double x, double) { return x; });
  const VectorField grad = gradient(g, u);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx; ++i) EXPECT_NEAR(grad.fx(i, j), 1.0, 1e-13);
  for (int j = 1; j < g.ny; ++j)
    for (int i = 0; i < g.nx; ++i) EXPECT_NEAR(grad.fy(i, j), 0.0, 1e-13);
  EXPECT_TRUE(grad.boundary_is_zero());

  const ScalarField c(g, 3.5);
  const VectorField gc = gradient(g, c);
  EXPECT_NEAR(gc.max_abs(), 0.0, 1e-14);
}

TEST(Grid, GradientQuadraticHandValue) {
  const Grid2D g(4, 4, 1.0, 1.0);  // hx = 0.25
  const auto u = fill(g, [](double x, double) { return x * x; });
  const VectorField grad = gradient(g, u);
  // face at x = 0.5: (0.625^2 - 0.375^2)/0.25 = 1.0
  EXPECT_NEAR(grad.fx(2, 1), 1.0, 1e-14);
}

TEST(Grid, DivergenceAdjointness) {
  const Grid2D g(24, 16, 1.3, 0.9);
  for (int k = 0; k < 100; ++k) {
    const ScalarField u = random_scalar(g, 100 + k);
    const VectorField s = random_neumann(g, 200 + k);
    const double a = dot_faces(gradient(g, u), s);
    const double b = dot_cells(u, divergence(g, s));
    EXPECT_LE(std::abs(a + b), 1e-12 * std::max(1.0, std::abs(a)));
  }
}

TEST(Grid, DivergenceOfQuadraticGradient) {
  const Grid2D g(32, 32, 1.0, 1.0);
  const auto u = fill(g, [](double x, double) { return 0.5 * x * x; });
  const VectorField s = gradient(g, u);
  const ScalarField div = divergence(g, s);
  // interior cells: exact Laplacian of a quadratic
  for (int j = 1; j < g.ny - 1; ++j)
    for (int i = 1; i < g.nx - 1; ++i) EXPECT_NEAR(div(i, j), 1.0, 1e-11);
}

TEST(Grid, ConstantFieldDivergence) {
  const Grid2D g(8, 8, 1.0, 1.0);
  VectorField s(g, true);
  for (double& v : s.x) v = 2.0;
  for (double& v : s.y) v = 0.0;
  s.clamp_boundary();
  const ScalarField div = divergence(g, s);
  for (int j = 0; j < g.ny; ++j)
    for (int i = 1; i < g.nx - 1; ++i) EXPECT_NEAR(div(i, j), 0.0, 1e-14);
  // boundary cells reflect the clamp
  EXPECT_NEAR(div(0, 0), 2.0 / g.hx, 1e-12);
  EXPECT_NEAR(div(g.nx - 1, 0), -2.0 / g.hx, 1e-12);
}

TEST(Grid, ProjectDivergence) {
  const Grid2D g(32, 24, 1.0, 1.0);
  const ScalarField zero(g);
  VectorField s0(g, true);
  const VectorField out0 = project_divergence(g, s0, zero);
  EXPECT_NEAR(out0.max_abs(), 0.0, 1e-13);

  // already feasible: unchanged
  const VectorField s1 = random_neumann(g, 5);
  const ScalarField f1 = divergence(g, s1);
  const VectorField out1 = project_divergence(g, s1, f1);
  double diff = 0.0;
  for (size_t k = 0; k < s1.x.size(); ++k)
    diff = std::max(diff, std::abs(out1.x[k] - s1.x[k]));
  for (size_t k = 0; k < s1.y.size(); ++k)
    diff = std::max(diff, std::abs(out1.y[k] - s1.y[k]));
  EXPECT_LE(diff, 1e-10);

  // dipole: divergence matched to 1e-10, checked via divergence()
  ScalarField dip(g);
  dip(8, 12) = 1.0 / g.cell_area();
  dip(24, 12) = -1.0 / g.cell_area();
  VectorField s2(g, true);
  const VectorField out2 = project_divergence(g, s2, dip);
  const ScalarField div2 = divergence(g, out2);
  double worst = 0.0;
  for (int c = 0; c < g.cells(); ++c)
    worst = std::max(worst, std::abs(div2.values[c] - dip.values[c]));
  EXPECT_LE(worst, 1e-10 * dip.max_abs());

  // idempotence
  const VectorField out3 = project_divergence(g, out2, dip);
  double change = 0.0;
  for (size_t k = 0; k < out2.x.size(); ++k)
    change = std::max(change, std::abs(out3.x[k] - out2.x[k]));
  EXPECT_LE(change, 1e-9);

  // incompatible source rejected
  ScalarField bad(g, 1.0);
  EXPECT_THROW(project_divergence(g, s0, bad), IncompatibleSource);
}

TEST(Grid, GridMismatchDetected) {
  const Grid2D a(8, 8, 1.0, 1.0), b(8, 8, 2.0, 1.0);
  const ScalarField u(b);
  EXPECT_THROW(gradient(a, u), GridMismatch);
  VectorField s(b, true);
  EXPECT_THROW(divergence(a, s), GridMismatch);
}

TEST(Grid, Regions) {
  const Grid2D g(64, 64, 1.0, 1.0);
  // tiny ball at a cell corner misses every center
  EXPECT_THROW(ball_region(g, {0.5, 0.5}, 0.004), EmptyRegion);
  // full-domain ball
  EXPECT_EQ(ball_region(g, {0.5, 0.5}, 1.0).size(),
            static_cast<size_t>(g.cells()));
  // area count oracle: |cells| / total is about pi r^2
  const auto ball = ball_region(g, {0.5, 0.5}, 0.25);
  const double frac = static_cast<double>(ball.size()) / g.cells();
  EXPECT_NEAR(frac, M_PI * 0.0625, 0.05 * M_PI * 0.0625);

  const auto ann = annulus_region(g, {0.5, 0.5}, 0.125, 0.25);
  const auto inner = ball_region(g, {0.5, 0.5}, 0.125);
  EXPECT_EQ(ann.size() + inner.size(), ball.size());

  EXPECT_THROW(ball_region(g, {1.5, 0.5}, 0.1), RegionOutOfDomain);
  EXPECT_THROW(annulus_region(g, {0.5, 0.5}, 0.2, 0.1),
               std::invalid_argument);
}

TEST(Grid, FieldIoRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "degenflow_io";
  std::filesystem::create_directories(dir);
  const Grid2D g(16, 12, 1.0, 0.75);
  const ScalarField f = random_scalar(g, 77);
  const std::string spath = (dir / "s.field").string();
  save_field(spath, f);
  const ScalarField f2 = load_scalar_field(spath);
  EXPECT_EQ(f.values, f2.values);
  EXPECT_EQ(f.grid, f2.grid);

  const VectorField v = random_neumann(g, 78);
  const std::string vpath = (dir / "v.field").string();
  save_field(vpath, v);
  const VectorField v2 = load_vector_field(vpath);
  EXPECT_EQ(v.x, v2.x);
  EXPECT_EQ(v.y, v2.y);
  EXPECT_TRUE(v2.neumann);

  EXPECT_THROW(load_vector_field(spath), Error);
  export_csv((dir / "s.csv").string(), f);
  export_csv((dir / "v.csv").string(), v);
  EXPECT_GT(std::filesystem::file_size(dir / "s.csv"), 0u);
}

TEST(Grid, PoissonSolveExactness) {
  const Grid2D g(48, 32, 2.0, 1.0);
  NeumannPoisson poisson(g);
  const ScalarField r = [&] {
    ScalarField f = random_scalar(g, 9);
    f.subtract_mean();
    return f;
  }();
  const ScalarField phi = poisson.solve(r);
  EXPECT_NEAR(phi.mean(), 0.0, 1e-12);
  const ScalarField lap = divergence(g, gradient(g, phi));
  for (int c = 0; c < g.cells(); ++c)
    EXPECT_NEAR(lap.values[c], r.values[c], 1e-10);
}
