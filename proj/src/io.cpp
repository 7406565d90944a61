#include "poecal/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace poecal {
namespace {

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode = std::ios::out) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, mode | std::ios::trunc);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

void write_json(const std::filesystem::path& path, const Json& value) { write_text(path, value.dump(2) + "\n"); }

void write_field_csv(const std::filesystem::path& path, const EvidenceField& field) {
  std::ostringstream s;
  s << "a1,a2,value\n";
  for (Index i = 0; i < field.phi.rows(); ++i)
    for (Index j = 0; j < field.phi.cols(); ++j)
      s << format_double(field.a1[i]) << ',' << format_double(field.a2[j]) << ','
        << format_double(field.mask(i, j) ? field.phi(i, j) : std::nan("")) << '\n';
  write_text(path, s.str());
}

void write_gradient_csv(const std::filesystem::path& path, const GradientGrid& grid, int component) {
  const Matrix<double>& g = component == 0 ? grid.g1 : grid.g2;
  const Matrix<double>& se = component == 0 ? grid.se1 : grid.se2;
  std::ostringstream s;
  s << "a1,a2,value,stderr\n";
  for (Index i = 0; i < grid.rows(); ++i)
    for (Index j = 0; j < grid.cols(); ++j)
      s << format_double(grid.a1[i]) << ',' << format_double(grid.a2[j]) << ',' << format_double(g(i, j)) << ','
        << format_double(se(i, j)) << '\n';
  write_text(path, s.str());
}

void write_pgm(const std::filesystem::path& path, const EvidenceField& field) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (Index i = 0; i < field.phi.rows(); ++i)
    for (Index j = 0; j < field.phi.cols(); ++j)
      if (field.mask(i, j) && std::isfinite(field.phi(i, j))) {
        lo = std::min(lo, field.phi(i, j));
        hi = std::max(hi, field.phi(i, j));
      }
  const double span = hi > lo ? hi - lo : 1.0;
  auto out = open_out(path, std::ios::out | std::ios::binary);
  out << "P5\n" << field.phi.cols() << ' ' << field.phi.rows() << "\n255\n";
  for (Index i = 0; i < field.phi.rows(); ++i) {
    for (Index j = 0; j < field.phi.cols(); ++j) {
      unsigned char px = 0;
      if (field.mask(i, j) && std::isfinite(field.phi(i, j))) {
        px = static_cast<unsigned char>(std::lround(255.0 * (field.phi(i, j) - lo) / span));
      }
      out.put(static_cast<char>(px));
    }
  }
}

void write_samples_csv(const std::filesystem::path& path, const Matrix<double>& samples) {
  std::ostringstream s;
  for (Index j = 0; j < samples.cols(); ++j) s << (j ? "," : "") << 'x' << j;
  s << '\n';
  for (Index r = 0; r < samples.rows(); ++r) {
    for (Index j = 0; j < samples.cols(); ++j) s << (j ? "," : "") << format_double(samples(r, j));
    s << '\n';
  }
  write_text(path, s.str());
}

void write_weighting_csv(const std::filesystem::path& path, const std::vector<WeightingRow>& rows) {
  std::ostringstream s;
  s << "p,nrmse,seed\n";
  for (const auto& r : rows) s << format_double(r.p) << ',' << format_double(r.nrmse) << ',' << r.seed << '\n';
  write_text(path, s.str());
}

RowMajorMatrix<double> load_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open matrix file '" + path.string() + "'");
  if (path.extension() == ".csv") {
    std::vector<double> values;
    Index cols = -1, rows = 0;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ls(line);
      std::string cell;
      Index n = 0;
      while (std::getline(ls, cell, ',')) {
        try {
          values.push_back(std::stod(cell));
        } catch (const std::exception&) {
          throw ConfigError("matrix file '" + path.string() + "' has a non-numeric entry on row " +
                            std::to_string(rows + 1));
        }
        ++n;
      }
      if (cols >= 0 && n != cols) throw ShapeError("matrix file '" + path.string() + "' has ragged rows");
      cols = n;
      ++rows;
    }
    if (rows == 0) throw ShapeError("matrix file '" + path.string() + "' is empty");
    return Eigen::Map<RowMajorMatrix<double>>(values.data(), rows, cols);
  }
  std::int64_t cols = 0;
  in.read(reinterpret_cast<char*>(&cols), sizeof cols);
  if (!in || cols <= 0) throw ShapeError("binary matrix '" + path.string() + "' has no valid column count");
  std::vector<double> values;
  double v;
  while (in.read(reinterpret_cast<char*>(&v), sizeof v)) values.push_back(v);
  if (values.empty() || values.size() % std::size_t(cols) != 0) {
    throw ShapeError("binary matrix '" + path.string() + "' size is not a multiple of its column count");
  }
  return Eigen::Map<RowMajorMatrix<double>>(values.data(), Index(values.size()) / cols, cols);
}

void save_matrix_binary(const std::filesystem::path& path, const RowMajorMatrix<double>& m) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  const std::int64_t cols = m.cols();
  out.write(reinterpret_cast<const char*>(&cols), sizeof cols);
  out.write(reinterpret_cast<const char*>(m.data()), std::streamsize(sizeof(double) * std::size_t(m.size())));
}

Json to_json(const Vector<double>& v) {
  Json arr = Json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Json to_json(const GradientEstimate<double>& g) {
  return Json{{"a", to_json(g.exponents)},
              {"mode", std::string(to_string(g.mode))},
              {"g", to_json(g.g)},
              {"stderr", to_json(g.standard_error)},
              {"n_samples", Json{{"posterior", g.n_posterior}, {"prior", g.n_prior}}},
              {"seeds", Json{{"master", g.seed}}}};
}

Json to_json(const EMTrajectory<double>& traj) {
  Json iterates = Json::array();
  for (std::size_t k = 0; k < traj.iterates.size(); ++k) {
    const auto& it = traj.iterates[k];
    Json rec{{"iteration", k}, {"a", to_json(it.a.values)}};
    if (it.gradient) {
      rec["g"] = to_json(it.gradient->g);
      rec["stderr"] = to_json(it.gradient->standard_error);
      rec["gradient_norm"] = it.gradient->g.norm();
    } else {
      rec["g"] = nullptr;
      rec["stderr"] = nullptr;
      rec["gradient_norm"] = nullptr;
    }
    rec["step"] = to_json(it.step);
    iterates.push_back(std::move(rec));
  }
  const auto& o = traj.options;
  return Json{{"config", Json{{"iterations", o.iterations},
                              {"eta", o.eta},
                              {"c", o.c},
                              {"eps_a", o.eps_a},
                              {"constraint_mode", std::string(to_string(traj.iterates.front().a.mode))},
                              {"seed", traj.seed}}},
              {"iterates", std::move(iterates)}};
}

Json to_json(const CollapseState& s) {
  Json comps = Json::array();
  for (Index k = 0; k < s.prior.components(); ++k) {
    const auto ks = std::size_t(k);
    const auto& c = s.prior.covs[ks];
    comps.push_back(Json{{"weight", s.prior.weights[k]},
                         {"mean", {s.prior.means[ks][0], s.prior.means[ks][1]}},
                         {"cov", {{c(0, 0), c(0, 1)}, {c(1, 0), c(1, 1)}}}});
  }
  return Json{{"k", s.k},
              {"truth_logdensity", s.truth_logdensity},
              {"row_residual", s.row_residual},
              {"row_std", s.row_std},
              {"null_std", s.null_std},
              {"components", std::move(comps)}};
}

Json to_json(const GridNode& node) { return Json{{"i", node.i}, {"j", node.j}, {"a1", node.a1}, {"a2", node.a2}}; }

}  // namespace poecal
