#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <set>

#include "voxreg/dataset.hpp"
#include "voxreg/errors.hpp"
#include "voxreg/geometry.hpp"
#include "voxreg/rng.hpp"

using namespace vxr;

namespace {

Matrix random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.normal();
  return m;
}

VoxelGeometry line_geometry(int n, double spacing = 1.0) {
  Eigen::Matrix<int, Eigen::Dynamic, 3> coords(n, 3);
  for (int v = 0; v < n; ++v) {
    coords(v, 0) = v;
    coords(v, 1) = 0;
    coords(v, 2) = 0;
  }
  return VoxelGeometry::create(std::move(coords), Eigen::Vector3d(spacing, 1.0, 1.0));
}

VoxelGeometry cube_geometry(int side, const Eigen::Vector3d& spacing = Eigen::Vector3d::Ones()) {
  Eigen::Matrix<int, Eigen::Dynamic, 3> coords(side * side * side, 3);
  int v = 0;
  for (int x = 0; x < side; ++x)
    for (int y = 0; y < side; ++y)
      for (int z = 0; z < side; ++z, ++v) {
        coords(v, 0) = x;
        coords(v, 1) = y;
        coords(v, 2) = z;
      }
  return VoxelGeometry::create(std::move(coords), spacing);
}

}  // namespace

TEST_CASE("lag design width follows base features times lag") {
  const Matrix base = random_matrix(20, 2, 11);
  const LagDesign lagged = build_lag_design(base, 4);
  CHECK(lagged.design.cols() == 8);
  CHECK(lagged.design.rows() == 16);
  CHECK(lagged.dropped_rows == 4);
}

TEST_CASE("lag one is a pure shift") {
  Matrix base(6, 2);
  for (int t = 0; t < 6; ++t) {
    base(t, 0) = t;
    base(t, 1) = 10 * t;
  }
  const LagDesign lagged = build_lag_design(base, 1);
  REQUIRE(lagged.design.rows() == 5);
  for (int t = 0; t < 5; ++t) {
    CHECK(lagged.design(t, 0) == doctest::Approx(base(t, 0)));
    CHECK(lagged.design(t, 1) == doctest::Approx(base(t, 1)));
  }
}

TEST_CASE("lag design matches explicit index arithmetic") {
  const Matrix base = random_matrix(10, 2, 22);
  const int h = 3;
  const LagDesign lagged = build_lag_design(base, h);
  REQUIRE(lagged.design.rows() == 7);
  REQUIRE(lagged.design.cols() == 6);
  // output row for original time t holds base rows t-1, t-2, t-3 in order
  for (int t = h; t < 10; ++t)
    for (int k = 1; k <= h; ++k)
      for (int j = 0; j < 2; ++j)
        CHECK(lagged.design(t - h, (k - 1) * 2 + j) == doctest::Approx(base(t - k, j)));
}

TEST_CASE("lag design rejects too-short series") {
  const Matrix base = random_matrix(4, 2, 33);
  CHECK_THROWS_WITH_AS(build_lag_design(base, 4), doctest::Contains("insufficient-history"), Error);
  CHECK_THROWS_WITH_AS(build_lag_design(base, 5), doctest::Contains("insufficient-history"), Error);
  CHECK_NOTHROW(build_lag_design(base, 3));
}

TEST_CASE("lag design is shift-equivariant") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Matrix base = random_matrix(12, 3, seed);
    Matrix extended(13, 3);
    extended.row(0) = random_matrix(1, 3, seed + 100);
    extended.bottomRows(12) = base;
    const LagDesign a = build_lag_design(base, 4);
    const LagDesign b = build_lag_design(extended, 4);
    REQUIRE(b.design.rows() == a.design.rows() + 1);
    for (int r = 0; r < a.design.rows(); ++r)
      CHECK((b.design.row(r + 1) - a.design.row(r)).cwiseAbs().maxCoeff() == doctest::Approx(0.0));
  }
}

TEST_CASE("dynamic dataset drops the first h response rows") {
  const Matrix base = random_matrix(12, 2, 44);
  const Matrix responses = random_matrix(12, 3, 45);
  const Dataset d = make_dynamic_dataset(base, responses, line_geometry(3),
                                         RoiPartition::from_area_ids({"a", "a", "b"}), 4);
  CHECK(d.rows() == 8);
  CHECK(d.kind == DatasetKind::Dynamic);
  CHECK(d.base_features == 2);
  CHECK(d.lag == 4);
  for (int t = 0; t < 8; ++t)
    for (int v = 0; v < 3; ++v) CHECK(d.responses(t, v) == doctest::Approx(responses(t + 4, v)));
}

TEST_CASE("roi split: 450 collinear voxels at cap 200 gives 113/112/113/112") {
  const VoxelGeometry geometry = line_geometry(450);
  std::vector<RoiArea> areas{{"big", {}}};
  for (int v = 0; v < 450; ++v) areas[0].voxels.push_back(v);
  const RoiPartition partition = RoiPartition::from_areas(areas, 450);

  const RoiPartition split = split_large_rois(partition, geometry, 200);
  REQUIRE(split.area_count() == 4);
  CHECK(split.areas[0].voxels.size() == 113);
  CHECK(split.areas[1].voxels.size() == 112);
  CHECK(split.areas[2].voxels.size() == 113);
  CHECK(split.areas[3].voxels.size() == 112);
  // deterministic suffixes
  CHECK(split.areas[0].id == "big.0.0");
  CHECK(split.areas[3].id == "big.1.1");
}

TEST_CASE("roi split: no-op when all areas fit the cap") {
  const VoxelGeometry geometry = line_geometry(10);
  const RoiPartition partition = RoiPartition::from_area_ids({"a", "a", "a", "b", "b", "b", "b", "c", "c", "c"});
  const RoiPartition split = split_large_rois(partition, geometry, 4);
  REQUIRE(split.area_count() == 3);
  CHECK(split.areas[0].id == "a");
  CHECK(split.areas[1].voxels == partition.areas[1].voxels);
}

TEST_CASE("roi split: 201 collinear voxels at cap 200 gives 101/100") {
  const VoxelGeometry geometry = line_geometry(201);
  std::vector<RoiArea> areas{{"r", {}}};
  for (int v = 0; v < 201; ++v) areas[0].voxels.push_back(v);
  const RoiPartition split = split_large_rois(RoiPartition::from_areas(areas, 201), geometry, 200);
  REQUIRE(split.area_count() == 2);
  CHECK(split.areas[0].voxels.size() == 101);
  CHECK(split.areas[1].voxels.size() == 100);
}

TEST_CASE("roi split picks the axis with the largest physical extent") {
  // 2 x 8 grid in coordinates, but spacing stretches the short axis
  Eigen::Matrix<int, Eigen::Dynamic, 3> coords(16, 3);
  int v = 0;
  for (int x = 0; x < 2; ++x)
    for (int y = 0; y < 8; ++y, ++v) {
      coords(v, 0) = x;
      coords(v, 1) = y;
      coords(v, 2) = 0;
    }
  const VoxelGeometry geometry = VoxelGeometry::create(std::move(coords), Eigen::Vector3d(10.0, 1.0, 1.0));
  std::vector<RoiArea> areas{{"g", {}}};
  for (int i = 0; i < 16; ++i) areas[0].voxels.push_back(i);
  const RoiPartition split = split_large_rois(RoiPartition::from_areas(areas, 16), geometry, 8);
  REQUIRE(split.area_count() == 2);
  // x extent = 1*10 mm > y extent = 7*1 mm, so the split separates x = 0 from x = 1
  for (const int u : split.areas[0].voxels) CHECK(geometry.coords(u, 0) == 0);
  for (const int u : split.areas[1].voxels) CHECK(geometry.coords(u, 0) == 1);
}

TEST_CASE("roi split preserves the disjoint cover and total count") {
  Rng rng(77);
  Eigen::Matrix<int, Eigen::Dynamic, 3> coords(300, 3);
  std::set<std::tuple<int, int, int>> used;
  for (int v = 0; v < 300;) {
    const int x = static_cast<int>(rng.uniform_below(40));
    const int y = static_cast<int>(rng.uniform_below(40));
    const int z = static_cast<int>(rng.uniform_below(10));
    if (used.insert({x, y, z}).second) {
      coords(v, 0) = x;
      coords(v, 1) = y;
      coords(v, 2) = z;
      ++v;
    }
  }
  const VoxelGeometry geometry = VoxelGeometry::create(std::move(coords), Eigen::Vector3d(3.125, 3.125, 6.0));
  std::vector<std::string> ids(300);
  for (int v = 0; v < 300; ++v) ids[static_cast<std::size_t>(v)] = v < 220 ? "big" : "small";
  const RoiPartition split = split_large_rois(RoiPartition::from_area_ids(ids), geometry, 50);

  std::vector<int> seen(300, 0);
  int total = 0;
  for (const auto& area : split.areas) {
    CHECK(area.voxels.size() <= 50);
    CHECK(!area.voxels.empty());
    for (const int u : area.voxels) {
      seen[static_cast<std::size_t>(u)] += 1;
      ++total;
    }
  }
  CHECK(total == 300);
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

TEST_CASE("ball of radius zero is the center alone") {
  const VoxelGeometry geometry = cube_geometry(3);
  const auto ball = ball_neighbors(geometry, 13, 2, 0.0);
  REQUIRE(ball.size() == 1);
  CHECK(ball[0] == 13);
}

TEST_CASE("unit l1 ball on a cubic grid is the center plus six face neighbors") {
  const VoxelGeometry geometry = cube_geometry(3);
  const auto ball = ball_neighbors(geometry, 13, 1, 1.0);  // (1,1,1) is the middle voxel
  CHECK(ball.size() == 7);
}

TEST_CASE("l2 ball matches an exhaustive distance scan") {
  const VoxelGeometry geometry = cube_geometry(5, Eigen::Vector3d(1.3, 0.9, 2.0));
  const int center = 62;
  const double radius = 2.5;
  const auto ball = ball_neighbors(geometry, center, 2, radius);

  std::set<int> expected;
  for (int v = 0; v < geometry.voxel_count(); ++v)
    if ((geometry.position(v) - geometry.position(center)).norm() <= radius) expected.insert(v);
  CHECK(std::set<int>(ball.begin(), ball.end()) == expected);
}

TEST_CASE("l1 ball is contained in the l2 ball") {
  const VoxelGeometry geometry = cube_geometry(4, Eigen::Vector3d(3.125, 3.125, 6.0));
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int center = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(geometry.voxel_count())));
    const double radius = 8.0 * rng.uniform();
    const auto b1 = ball_neighbors(geometry, center, 1, radius);
    const auto b2 = ball_neighbors(geometry, center, 2, radius);
    const std::set<int> s2(b2.begin(), b2.end());
    for (const int u : b1) CHECK(s2.count(u) == 1);
  }
}

TEST_CASE("ball rejects an unknown voxel index") {
  const VoxelGeometry geometry = cube_geometry(2);
  CHECK_THROWS_WITH_AS(ball_neighbors(geometry, 8, 2, 1.0), doctest::Contains("out-of-range"), Error);
}

TEST_CASE("dataset invariants are validated") {
  const Matrix design = random_matrix(10, 2, 1);
  const Matrix responses = random_matrix(9, 3, 2);
  CHECK_THROWS_WITH_AS(Dataset::create(design, responses, line_geometry(3),
                                       RoiPartition::from_area_ids({"a", "a", "b"})),
                       doctest::Contains("shape-mismatch"), Error);
  CHECK_THROWS_WITH_AS(Dataset::create(design, random_matrix(10, 3, 3), line_geometry(4),
                                       RoiPartition::from_area_ids({"a", "a", "b"})),
                       doctest::Contains("shape-mismatch"), Error);
}

TEST_CASE("duplicate grid coordinates are rejected") {
  Eigen::Matrix<int, Eigen::Dynamic, 3> coords(2, 3);
  coords << 1, 2, 3, 1, 2, 3;
  CHECK_THROWS_WITH_AS(VoxelGeometry::create(std::move(coords), Eigen::Vector3d::Ones()),
                       doctest::Contains("duplicate-coordinates"), Error);
}
