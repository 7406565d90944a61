#pragma once

#include "poecal/ablations.hpp"
#include "poecal/em.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace poecal {

using Json = nlohmann::ordered_json;

/// Round-trip decimal formatting ("%.17g"); NaN prints as "nan".
std::string format_double(double v);

void write_text(const std::filesystem::path& path, const std::string& text);
void write_json(const std::filesystem::path& path, const Json& value);

/// One row per node: a1,a2,value[,stderr]. Masked nodes carry "nan".
void write_field_csv(const std::filesystem::path& path, const EvidenceField& field);
void write_gradient_csv(const std::filesystem::path& path, const GradientGrid& grid, int component);

/// Binary P5 heatmap; valid nodes map affinely from [min, max] to [0, 255],
/// masked nodes are 0. Image rows follow a1, columns follow a2.
void write_pgm(const std::filesystem::path& path, const EvidenceField& field);

/// Header x0..x{d-1}, one row per chain.
void write_samples_csv(const std::filesystem::path& path, const Matrix<double>& samples);

void write_weighting_csv(const std::filesystem::path& path, const std::vector<WeightingRow>& rows);

/// Dense matrix from CSV (comma separated, no header) or from a binary file:
/// int64 column count followed by row-major float64 entries.
RowMajorMatrix<double> load_matrix(const std::filesystem::path& path);
void save_matrix_binary(const std::filesystem::path& path, const RowMajorMatrix<double>& m);

Json to_json(const Vector<double>& v);
Json to_json(const GradientEstimate<double>& g);
Json to_json(const EMTrajectory<double>& traj);
Json to_json(const CollapseState& state);
Json to_json(const GridNode& node);

}  // namespace poecal
