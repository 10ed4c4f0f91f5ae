#include "voxreg/dataset.hpp"

#include <filesystem>
#include <json.hpp>
#include <set>

#include "voxreg/errors.hpp"

namespace vxr {

namespace fs = std::filesystem;
using nlohmann::json;

Dataset Dataset::create(Matrix design, Matrix responses, VoxelGeometry geometry, RoiPartition rois,
                        DatasetKind kind, int base_features, int lag) {
  require(design.rows() == responses.rows(), "shape-mismatch",
          "design and responses must share row count (got " + std::to_string(design.rows()) + " vs " +
              std::to_string(responses.rows()) + ")");
  require(geometry.voxel_count() == responses.cols(), "shape-mismatch",
          "geometry voxel count must equal response columns");
  rois.validate(static_cast<int>(responses.cols()));
  if (kind == DatasetKind::Dynamic) {
    require(lag >= 1, "invalid-parameter", "dynamic dataset needs lag >= 1");
    require(base_features >= 1, "invalid-parameter", "dynamic dataset needs base_features >= 1");
    require(design.cols() == static_cast<Eigen::Index>(base_features) * lag, "shape-mismatch",
            "dynamic design width must be base_features*lag");
  }
  Dataset d;
  d.design = std::move(design);
  d.responses = std::move(responses);
  d.geometry = std::move(geometry);
  d.rois = std::move(rois);
  d.kind = kind;
  d.base_features = base_features;
  d.lag = lag;
  return d;
}

Dataset Dataset::rows_subset(const std::vector<int>& row_indices) const {
  Matrix x(static_cast<Eigen::Index>(row_indices.size()), design.cols());
  Matrix y(static_cast<Eigen::Index>(row_indices.size()), responses.cols());
  for (std::size_t i = 0; i < row_indices.size(); ++i) {
    const int r = row_indices[i];
    require(r >= 0 && r < design.rows(), "out-of-range", "row index " + std::to_string(r));
    x.row(static_cast<Eigen::Index>(i)) = design.row(r);
    y.row(static_cast<Eigen::Index>(i)) = responses.row(r);
  }
  Dataset d = *this;
  d.design = std::move(x);
  d.responses = std::move(y);
  return d;
}

LagDesign build_lag_design(const Matrix& base, int lag) {
  const Eigen::Index t_total = base.rows();
  const Eigen::Index p0 = base.cols();
  require(lag >= 1, "invalid-parameter", "lag must be >= 1");
  if (t_total <= lag)
    fail_validation("insufficient-history",
                    "need more rows than lag (T=" + std::to_string(t_total) + ", h=" + std::to_string(lag) + ")");
  Matrix out(t_total - lag, p0 * lag);
  for (Eigen::Index t = lag; t < t_total; ++t)
    for (int k = 1; k <= lag; ++k) out.block(t - lag, static_cast<Eigen::Index>(k - 1) * p0, 1, p0) = base.row(t - k);
  return LagDesign{std::move(out), lag};
}

Dataset make_dynamic_dataset(const Matrix& base, const Matrix& responses, VoxelGeometry geometry,
                             RoiPartition rois, int lag) {
  require(base.rows() == responses.rows(), "shape-mismatch", "base series and responses must share row count");
  LagDesign lagged = build_lag_design(base, lag);
  Matrix trimmed = responses.bottomRows(responses.rows() - lag);
  return Dataset::create(std::move(lagged.design), std::move(trimmed), std::move(geometry), std::move(rois),
                         DatasetKind::Dynamic, static_cast<int>(base.cols()), lag);
}

namespace {

const json& field(const json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end()) fail_validation("bad-manifest", std::string("manifest missing field '") + name + "'");
  return *it;
}

std::string path_field(const json& j, const char* name, const fs::path& dir) {
  const json& f = field(j, name);
  if (!f.is_string()) fail_validation("bad-manifest", std::string("manifest field '") + name + "' must be a string");
  return (dir / f.get<std::string>()).string();
}

}  // namespace

Dataset load_dataset(const std::string& dir_str) {
  const fs::path dir(dir_str);
  const fs::path manifest_path = dir / "manifest.json";
  json manifest;
  try {
    manifest = json::parse(read_text_file(manifest_path.string()));
  } catch (const json::parse_error& e) {
    fail_validation("bad-manifest", "manifest.json is not valid JSON: " + std::string(e.what()));
  }

  const json& kind_field = field(manifest, "kind");
  if (!kind_field.is_string() || (kind_field != "static" && kind_field != "dynamic"))
    fail_validation("bad-manifest", "manifest field 'kind' must be \"static\" or \"dynamic\"");
  const bool dynamic = kind_field == "dynamic";

  const json& spacing_field = field(manifest, "spacing");
  if (!spacing_field.is_array() || spacing_field.size() != 3)
    fail_validation("bad-manifest", "manifest field 'spacing' must be a 3-element array");
  Eigen::Vector3d spacing;
  for (int k = 0; k < 3; ++k) {
    if (!spacing_field[k].is_number())
      fail_validation("bad-manifest", "manifest field 'spacing' must contain numbers");
    spacing[k] = spacing_field[k].get<double>();
  }

  const Matrix responses_raw = read_matrix_any(path_field(manifest, "responses", dir));

  // coords.csv: (voxel, x, y, z)
  const Matrix coords_raw = read_matrix_csv(path_field(manifest, "coords", dir));
  if (coords_raw.cols() != 4) fail_validation("bad-manifest", "coords file must have columns voxel,x,y,z");
  const int v_count = static_cast<int>(coords_raw.rows());
  Eigen::Matrix<int, Eigen::Dynamic, 3> coords(v_count, 3);
  std::vector<bool> seen(static_cast<std::size_t>(v_count), false);
  for (int r = 0; r < v_count; ++r) {
    const int v = static_cast<int>(coords_raw(r, 0));
    if (v < 0 || v >= v_count || seen[static_cast<std::size_t>(v)])
      fail_validation("bad-manifest", "coords file voxel column must enumerate 0..V-1 once");
    seen[static_cast<std::size_t>(v)] = true;
    for (int k = 0; k < 3; ++k) coords(v, k) = static_cast<int>(coords_raw(r, k + 1));
  }
  VoxelGeometry geometry = VoxelGeometry::create(std::move(coords), spacing);

  // rois.csv: (voxel, area); area ids are free-form strings without commas
  const std::string roi_text = read_text_file(path_field(manifest, "rois", dir));
  std::vector<std::string> area_of_voxel(static_cast<std::size_t>(v_count));
  std::vector<bool> roi_seen(static_cast<std::size_t>(v_count), false);
  {
    std::istringstream in(roi_text);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty() || line == "\r") continue;
      const auto fields = split_csv_line(line);
      if (fields.size() != 2) fail_validation("bad-manifest", "rois file must have columns voxel,area");
      const int v = std::stoi(fields[0]);
      if (v < 0 || v >= v_count || roi_seen[static_cast<std::size_t>(v)])
        fail_validation("bad-manifest", "rois file voxel column must enumerate 0..V-1 once");
      roi_seen[static_cast<std::size_t>(v)] = true;
      area_of_voxel[static_cast<std::size_t>(v)] = fields[1];
    }
  }
  for (int v = 0; v < v_count; ++v)
    if (!roi_seen[static_cast<std::size_t>(v)])
      fail_validation("bad-manifest", "rois file is missing voxel " + std::to_string(v));
  RoiPartition rois = RoiPartition::from_area_ids(area_of_voxel);

  if (!dynamic) {
    Matrix design = read_matrix_any(path_field(manifest, "design", dir));
    return Dataset::create(std::move(design), responses_raw, std::move(geometry), std::move(rois));
  }

  const json& lag_field = field(manifest, "lag");
  if (!lag_field.is_number_integer() || lag_field.get<int>() < 1)
    fail_validation("bad-manifest", "manifest field 'lag' must be a positive integer");
  const int lag = lag_field.get<int>();

  if (manifest.contains("base_design")) {
    // Base feature series: the lag design is constructed on load.
    Matrix base = read_matrix_any(path_field(manifest, "base_design", dir));
    return make_dynamic_dataset(base, responses_raw, std::move(geometry), std::move(rois), lag);
  }
  // Already-lagged design stored directly.
  Matrix design = read_matrix_any(path_field(manifest, "design", dir));
  const json& bf = field(manifest, "base_features");
  if (!bf.is_number_integer() || bf.get<int>() < 1)
    fail_validation("bad-manifest", "manifest field 'base_features' must be a positive integer");
  return Dataset::create(std::move(design), responses_raw, std::move(geometry), std::move(rois),
                         DatasetKind::Dynamic, bf.get<int>(), lag);
}

void save_dataset(const std::string& dir_str, const Dataset& dataset, bool binary_matrices) {
  const fs::path dir(dir_str);
  fs::create_directories(dir);

  const std::string design_name = binary_matrices ? "design.bin" : "design.csv";
  const std::string responses_name = binary_matrices ? "responses.bin" : "responses.csv";
  if (binary_matrices) {
    write_matrix_binary((dir / design_name).string(), dataset.design);
    write_matrix_binary((dir / responses_name).string(), dataset.responses);
  } else {
    std::vector<std::string> dh, rh;
    for (Eigen::Index c = 0; c < dataset.design.cols(); ++c) dh.push_back("f" + std::to_string(c));
    for (Eigen::Index c = 0; c < dataset.responses.cols(); ++c) rh.push_back("v" + std::to_string(c));
    write_matrix_csv((dir / design_name).string(), dataset.design, dh);
    write_matrix_csv((dir / responses_name).string(), dataset.responses, rh);
  }

  {
    std::string out = "voxel,x,y,z\n";
    for (int v = 0; v < dataset.geometry.voxel_count(); ++v)
      out += std::to_string(v) + "," + std::to_string(dataset.geometry.coords(v, 0)) + "," +
             std::to_string(dataset.geometry.coords(v, 1)) + "," + std::to_string(dataset.geometry.coords(v, 2)) +
             "\n";
    atomic_write_text((dir / "coords.csv").string(), out);
  }
  {
    std::string out = "voxel,area\n";
    for (int v = 0; v < dataset.rois.voxel_count(); ++v) {
      const auto& id = dataset.rois.areas[static_cast<std::size_t>(dataset.rois.assignment[static_cast<std::size_t>(v)])].id;
      require(id.find(',') == std::string::npos, "invalid-parameter", "area id must not contain commas: " + id);
      out += std::to_string(v) + "," + id + "\n";
    }
    atomic_write_text((dir / "rois.csv").string(), out);
  }

  json manifest;
  manifest["kind"] = dataset.kind == DatasetKind::Dynamic ? "dynamic" : "static";
  manifest["design"] = design_name;
  manifest["responses"] = responses_name;
  manifest["coords"] = "coords.csv";
  manifest["rois"] = "rois.csv";
  manifest["spacing"] = {dataset.geometry.spacing[0], dataset.geometry.spacing[1], dataset.geometry.spacing[2]};
  if (dataset.kind == DatasetKind::Dynamic) {
    manifest["lag"] = dataset.lag;
    manifest["base_features"] = dataset.base_features;
  }
  atomic_write_text((dir / "manifest.json").string(), manifest.dump(2) + "\n");
}

}  // namespace vxr
