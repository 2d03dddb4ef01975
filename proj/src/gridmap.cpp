#include "ftp/gridmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>

#include "ftp/errors.hpp"

namespace ftp::gridmap {

using Eigen::Vector3d;

// --- lattice -------------------------------------------------------------

Index3 Lattice::index_of(const Vector3d& p) const {
  Index3 idx;
  for (int a = 0; a < 3; ++a) {
    idx[a] = static_cast<int>(std::floor((p[a] - origin[a]) / resolution));
  }
  return idx;
}

Vector3d Lattice::center(int i, int j, int k) const {
  return origin + resolution * Vector3d(i + 0.5, j + 0.5, k + 0.5);
}

Vector3d Lattice::upper_corner() const {
  return origin + resolution * Vector3d(dims[0], dims[1], dims[2]);
}

bool Lattice::contains(const Vector3d& p) const {
  const Vector3d hi = upper_corner();
  for (int a = 0; a < 3; ++a) {
    if (!(p[a] >= origin[a] && p[a] <= hi[a])) return false;
  }
  return true;
}

VoxelGrid VoxelGrid::empty(const Lattice& lattice) {
  if (!(lattice.resolution > 0.0)) throw ConfigError("voxel resolution must be positive");
  for (int d : lattice.dims) {
    if (d <= 0) throw ConfigError("voxel grid dims must be positive");
  }
  VoxelGrid g;
  g.lattice = lattice;
  g.occupancy.assign(lattice.cell_count(), 0);
  return g;
}

VoxelGrid VoxelGrid::default_workspace() {
  Lattice l;
  l.origin = Vector3d::Constant(-0.6);
  l.resolution = 0.02;
  l.dims = {60, 60, 60};
  return empty(l);
}

std::size_t VoxelGrid::occupied_count() const {
  return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), std::uint8_t{1}));
}

// --- cloud processing ----------------------------------------------------

PointCloud filter_above_table(const PointCloud& cloud, double table_z, double eps) {
  PointCloud out;
  for (const auto& p : cloud.points) {
    if (p.z() > table_z + eps) out.points.push_back(p);
  }
  return out;
}

PointCloud complete_occlusion(const PointCloud& cloud, double table_z, double resolution) {
  PointCloud out = cloud;
  std::map<std::pair<long, long>, double> column_top;
  for (const auto& p : cloud.points) {
    const std::pair<long, long> key{static_cast<long>(std::floor(p.x() / resolution)),
                                    static_cast<long>(std::floor(p.y() / resolution))};
    auto [it, inserted] = column_top.try_emplace(key, p.z());
    if (!inserted) it->second = std::max(it->second, p.z());
  }
  for (const auto& [key, top] : column_top) {
    const long n = static_cast<long>(std::ceil((top - table_z) / resolution));
    const double x = (key.first + 0.5) * resolution;
    const double y = (key.second + 0.5) * resolution;
    for (long m = 0; m < n; ++m) {
      out.points.emplace_back(x, y, table_z + (m + 0.5) * resolution);
    }
  }
  return out;
}

VoxelGrid voxelize(const PointCloud& cloud, const Lattice& lattice) {
  VoxelGrid g = VoxelGrid::empty(lattice);
  for (const auto& p : cloud.points) {
    const Index3 idx = lattice.index_of(p);
    if (lattice.in_range(idx[0], idx[1], idx[2])) {
      g.set(idx[0], idx[1], idx[2]);
    } else {
      ++g.out_of_bounds_points;
    }
  }
  return g;
}

void rasterize_spheres(VoxelGrid& grid, std::span<const geometry::ObstacleSphere> spheres) {
  const Lattice& l = grid.lattice;
  for (const auto& s : spheres) {
    const Index3 lo = l.index_of(s.center - Vector3d::Constant(s.radius));
    const Index3 hi = l.index_of(s.center + Vector3d::Constant(s.radius));
    for (int i = std::max(lo[0], 0); i <= std::min(hi[0], l.dims[0] - 1); ++i)
      for (int j = std::max(lo[1], 0); j <= std::min(hi[1], l.dims[1] - 1); ++j)
        for (int k = std::max(lo[2], 0); k <= std::min(hi[2], l.dims[2] - 1); ++k)
          if ((l.center(i, j, k) - s.center).squaredNorm() <= s.radius * s.radius) grid.set(i, j, k);
  }
}

void rasterize_box(VoxelGrid& grid, const Vector3d& lo, const Vector3d& hi) {
  const Lattice& l = grid.lattice;
  const Index3 a = l.index_of(lo);
  const Index3 b = l.index_of(hi);
  for (int i = std::max(a[0], 0); i <= std::min(b[0], l.dims[0] - 1); ++i)
    for (int j = std::max(a[1], 0); j <= std::min(b[1], l.dims[1] - 1); ++j)
      for (int k = std::max(a[2], 0); k <= std::min(b[2], l.dims[2] - 1); ++k) {
        const Vector3d c = l.center(i, j, k);
        if ((c.array() >= lo.array()).all() && (c.array() <= hi.array()).all()) grid.set(i, j, k);
      }
}

// --- distance transform --------------------------------------------------

namespace {

constexpr double kFar = 1e20;

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher), squared units.
void distance_1d(const double* f, int n, double* out, int* v, double* z) {
  int k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  auto intersect = [&](int q, int p) {
    return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
  };
  for (int q = 1; q < n; ++q) {
    double s = intersect(q, v[k]);
    while (s <= z[k]) {
      --k;
      s = intersect(q, v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = std::numeric_limits<double>::infinity();
  }
  k = 0;
  for (int q = 0; q < n; ++q) {
    while (z[k + 1] < q) ++k;
    const double dq = q - v[k];
    out[q] = dq * dq + f[v[k]];
  }
}

}  // namespace

DistanceField compute_edf(const VoxelGrid& grid) {
  const Lattice& l = grid.lattice;
  DistanceField field;
  field.lattice = l;
  const std::size_t n = l.cell_count();
  if (grid.occupied_count() == 0) {
    field.distance.assign(n, std::numeric_limits<double>::infinity());
    return field;
  }
  std::vector<double> sq(n);
  for (std::size_t c = 0; c < n; ++c) sq[c] = grid.occupancy[c] ? 0.0 : kFar;

  const int nmax = std::max({l.dims[0], l.dims[1], l.dims[2]});
  std::vector<double> f(nmax), d(nmax), z(nmax + 1);
  std::vector<int> v(nmax);

  auto pass = [&](int axis) {
    const int o1 = (axis + 1) % 3, o2 = (axis + 2) % 3;
    const int len = l.dims[axis];
    for (int a = 0; a < l.dims[o1]; ++a) {
      for (int b = 0; b < l.dims[o2]; ++b) {
        Index3 idx{};
        idx[o1] = a;
        idx[o2] = b;
        for (int t = 0; t < len; ++t) {
          idx[axis] = t;
          f[t] = sq[l.linear(idx[0], idx[1], idx[2])];
        }
        distance_1d(f.data(), len, d.data(), v.data(), z.data());
        for (int t = 0; t < len; ++t) {
          idx[axis] = t;
          sq[l.linear(idx[0], idx[1], idx[2])] = d[t];
        }
      }
    }
  };
  pass(2);
  pass(1);
  pass(0);

  field.distance.resize(n);
  for (std::size_t c = 0; c < n; ++c) field.distance[c] = std::sqrt(sq[c]) * l.resolution;
  return field;
}

namespace {

double trilinear(const DistanceField& field, const Vector3d& p, Vector3d* gradient) {
  const Lattice& l = field.lattice;
  if (!l.contains(p)) {
    std::ostringstream msg;
    msg << "query point (" << p.transpose() << ") outside distance field";
    throw OutOfBounds(msg.str());
  }
  int i0[3], i1[3];
  double frac[3];
  bool clamped[3];
  for (int a = 0; a < 3; ++a) {
    const double u = (p[a] - l.origin[a]) / l.resolution - 0.5;
    if (l.dims[a] == 1) {
      i0[a] = i1[a] = 0;
      frac[a] = 0.0;
      clamped[a] = true;
      continue;
    }
    int base = static_cast<int>(std::floor(u));
    base = std::clamp(base, 0, l.dims[a] - 2);
    double t = u - base;
    clamped[a] = t < 0.0 || t > 1.0;
    t = std::clamp(t, 0.0, 1.0);
    i0[a] = base;
    i1[a] = base + 1;
    frac[a] = t;
  }
  double c[2][2][2];
  for (int a = 0; a < 2; ++a)
    for (int b = 0; b < 2; ++b)
      for (int e = 0; e < 2; ++e)
        c[a][b][e] = field.at(a ? i1[0] : i0[0], b ? i1[1] : i0[1], e ? i1[2] : i0[2]);

  const double tx = frac[0], ty = frac[1], tz = frac[2];
  if (std::isinf(c[0][0][0])) {
    // Field without obstacles: uniform +inf.
    if (gradient) gradient->setZero();
    return std::numeric_limits<double>::infinity();
  }
  const double c00 = c[0][0][0] * (1 - tx) + c[1][0][0] * tx;
  const double c01 = c[0][0][1] * (1 - tx) + c[1][0][1] * tx;
  const double c10 = c[0][1][0] * (1 - tx) + c[1][1][0] * tx;
  const double c11 = c[0][1][1] * (1 - tx) + c[1][1][1] * tx;
  const double c0 = c00 * (1 - ty) + c10 * ty;
  const double c1 = c01 * (1 - ty) + c11 * ty;
  const double value = c0 * (1 - tz) + c1 * tz;

  if (gradient) {
    const double dz = c1 - c0;
    const double dy = (c10 - c00) * (1 - tz) + (c11 - c01) * tz;
    const double dx = ((c[1][0][0] - c[0][0][0]) * (1 - ty) + (c[1][1][0] - c[0][1][0]) * ty) * (1 - tz) +
                      ((c[1][0][1] - c[0][0][1]) * (1 - ty) + (c[1][1][1] - c[0][1][1]) * ty) * tz;
    *gradient = Vector3d(clamped[0] ? 0.0 : dx, clamped[1] ? 0.0 : dy, clamped[2] ? 0.0 : dz) /
                l.resolution;
  }
  return value;
}

}  // namespace

double query_distance(const DistanceField& field, const Vector3d& p) {
  return trilinear(field, p, nullptr);
}

double query_distance(const DistanceField& field, const Vector3d& p, Vector3d& gradient) {
  return trilinear(field, p, &gradient);
}

double query_clearance(const DistanceField& field, const Vector3d& p) {
  return trilinear(field, p, nullptr) - 0.5 * field.lattice.resolution;
}

double query_clearance(const DistanceField& field, const Vector3d& p, Vector3d& gradient) {
  return trilinear(field, p, &gradient) - 0.5 * field.lattice.resolution;
}

// --- files ---------------------------------------------------------------

namespace {

std::ifstream open_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return in;
}

}  // namespace

PointCloud read_ply(const std::filesystem::path& path) {
  std::ifstream in = open_text(path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("ply", 0) != 0) throw IoError(path.string() + ": not a PLY file");

  long vertex_count = -1;
  std::vector<std::string> vertex_props;
  bool in_vertex = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw IoError(path.string() + ": only ASCII PLY is supported");
    } else if (word == "element") {
      std::string name;
      long count = 0;
      ls >> name >> count;
      in_vertex = name == "vertex";
      if (in_vertex) vertex_count = count;
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      vertex_props.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  if (vertex_count < 0) throw IoError(path.string() + ": no vertex element");
  auto find = [&](const std::string& n) {
    auto it = std::find(vertex_props.begin(), vertex_props.end(), n);
    if (it == vertex_props.end()) throw IoError(path.string() + ": vertex has no '" + n + "' property");
    return static_cast<std::size_t>(it - vertex_props.begin());
  };
  const std::size_t ix = find("x"), iy = find("y"), iz = find("z");

  PointCloud cloud;
  cloud.points.reserve(vertex_count);
  std::vector<double> vals(vertex_props.size());
  for (long n = 0; n < vertex_count; ++n) {
    if (!std::getline(in, line)) throw IoError(path.string() + ": truncated vertex list");
    std::istringstream ls(line);
    for (auto& v : vals) {
      if (!(ls >> v)) throw IoError(path.string() + ": malformed vertex line");
    }
    cloud.points.emplace_back(vals[ix], vals[iy], vals[iz]);
  }
  return cloud;
}

PointCloud read_csv_cloud(const std::filesystem::path& path) {
  std::ifstream in = open_text(path);
  PointCloud cloud;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z)) {
      if (first) {
        first = false;
        continue;
      }
      throw IoError(path.string() + ": malformed row '" + line + "'");
    }
    first = false;
    cloud.points.emplace_back(x, y, z);
  }
  return cloud;
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  const std::string ext = path.extension().string();
  if (ext == ".ply") return read_ply(path);
  if (ext == ".csv") return read_csv_cloud(path);
  throw IoError("unsupported point cloud format: " + path.string());
}

namespace {
constexpr char kGridMagic[8] = {'F', 'T', 'P', 'G', 'R', 'I', 'D', '1'};
}

void write_occupancy_dump(const VoxelGrid& grid, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kGridMagic, sizeof kGridMagic);
  for (int d : grid.lattice.dims) {
    const std::int32_t v = d;
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  out.write(reinterpret_cast<const char*>(grid.lattice.origin.data()), 3 * sizeof(double));
  out.write(reinterpret_cast<const char*>(&grid.lattice.resolution), sizeof(double));
  out.write(reinterpret_cast<const char*>(grid.occupancy.data()),
            static_cast<std::streamsize>(grid.occupancy.size()));
}

VoxelGrid read_occupancy_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kGridMagic, sizeof magic) != 0) {
    throw IoError(path.string() + ": not an occupancy dump");
  }
  Lattice l;
  for (int& d : l.dims) {
    std::int32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    d = v;
  }
  in.read(reinterpret_cast<char*>(l.origin.data()), 3 * sizeof(double));
  in.read(reinterpret_cast<char*>(&l.resolution), sizeof(double));
  if (!in) throw IoError(path.string() + ": truncated header");
  VoxelGrid g = VoxelGrid::empty(l);
  in.read(reinterpret_cast<char*>(g.occupancy.data()), static_cast<std::streamsize>(g.occupancy.size()));
  if (!in) throw IoError(path.string() + ": truncated occupancy body");
  return g;
}

}  // namespace ftp::gridmap
