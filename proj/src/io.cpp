#include "epsrecon/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "epsrecon/errors.hpp"

static_assert(std::endian::native == std::endian::little, "containers are written in host byte order");

namespace epsrecon {

namespace {

constexpr char kMeshMagic[] = "WSMESH1\n";
constexpr char kRecordMagic[] = "WSBND1\n";
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  }
  template <class T>
  void put(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  template <class T>
  void put_all(std::span<const T> v) {
    out_.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
  }
  void bytes(const char* s, std::size_t n) { out_.write(s, static_cast<std::streamsize>(n)); }
  void box(const Box& b) {
    for (int a = 0; a < 3; ++a) put(b.lo[a]);
    for (int a = 0; a < 3; ++a) put(b.hi[a]);
  }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed: " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path.string());
  }
  template <class T>
  T get() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }
  template <class T>
  void get_all(std::span<T> v) {
    in_.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size_bytes()));
    check();
  }
  void expect_magic(const char* magic) {
    const std::size_t n = std::strlen(magic);
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (!in_ || s != magic) throw IoError(path_.string() + ": bad magic");
    if (get<std::uint32_t>() != kVersion) throw IoError(path_.string() + ": unsupported version");
  }
  Box box() {
    Box b;
    for (int a = 0; a < 3; ++a) b.lo[a] = get<double>();
    for (int a = 0; a < 3; ++a) b.hi[a] = get<double>();
    return b;
  }
  void expect_end() {
    in_.peek();
    if (!in_.eof()) throw IoError(path_.string() + ": trailing bytes");
  }

 private:
  void check() {
    if (!in_) throw IoError(path_.string() + ": truncated file");
  }
  std::filesystem::path path_;
  std::ifstream in_;
};

}  // namespace

void write_coefficient(const std::filesystem::path& path, const CoefficientField& eps) {
  const Mesh& mesh = *eps.mesh;
  Writer w(path);
  w.bytes(kMeshMagic, std::strlen(kMeshMagic));
  w.put(kVersion);
  w.box(mesh.box());
  w.box(mesh.omega());
  w.put(mesh.base_h());
  w.put(static_cast<std::uint64_t>(mesh.n_cells()));
  for (int c = 0; c < mesh.n_cells(); ++c) {
    const Cell& cell = mesh.cell(c);
    w.put(static_cast<std::int32_t>(cell.level));
    for (int a = 0; a < 3; ++a) w.put(cell.origin[a]);
    w.put(mesh.cell_h(c));
    w.put(eps.values[c]);
  }
  w.finish();
}

CoefficientField read_coefficient(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic(kMeshMagic);
  const Box box = r.box();
  const Box omega = r.box();
  const double base_h = r.get<double>();
  const auto n = r.get<std::uint64_t>();
  if (n > (1u << 30)) throw IoError(path.string() + ": implausible cell count");
  std::vector<Cell> cells(n);
  std::vector<double> values(n);
  for (std::uint64_t c = 0; c < n; ++c) {
    cells[c].level = r.get<std::int32_t>();
    for (int a = 0; a < 3; ++a) cells[c].origin[a] = r.get<std::int32_t>();
    if (cells[c].level < 0 || cells[c].level > kMaxLevel) throw IoError(path.string() + ": bad refinement level");
    const double size = r.get<double>();
    if (std::abs(size - base_h * cells[c].size() / kLatticePerBase) > 1e-9 * base_h)
      throw IoError(path.string() + ": cell size does not match its level");
    values[c] = r.get<double>();
  }
  r.expect_end();
  CoefficientField eps;
  try {
    eps.mesh = std::make_shared<const Mesh>(box, omega, base_h, std::move(cells));
    eps.values = std::move(values);
    check_coefficient_invariants(eps);
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return eps;
}

void write_record(const std::filesystem::path& path, const BoundaryRecord& record) {
  Writer w(path);
  w.bytes(kRecordMagic, std::strlen(kRecordMagic));
  w.put(kVersion);
  w.box(record.box());
  w.put(record.base_h());
  const TimeGrid& g = record.time_grid();
  w.put(g.t_final);
  w.put(g.dt);
  w.put(g.t1);
  w.put(static_cast<std::int64_t>(g.n_steps));
  w.put(static_cast<std::uint8_t>(record.has_dirichlet()));
  w.put(static_cast<std::uint8_t>(record.has_neumann()));
  w.put(static_cast<std::uint64_t>(record.n_nodes()));
  for (const auto& k : record.nodes())
    for (int a = 0; a < 3; ++a) w.put(k[a]);
  w.put_all(std::span<const double>(record.dirichlet_data()));
  w.put_all(std::span<const double>(record.neumann_data()));
  w.finish();
}

BoundaryRecord read_record(const std::filesystem::path& path) {
  Reader r(path);
  r.expect_magic(kRecordMagic);
  const Box box = r.box();
  const double base_h = r.get<double>();
  TimeGrid g;
  g.t_final = r.get<double>();
  g.dt = r.get<double>();
  g.t1 = r.get<double>();
  g.n_steps = static_cast<int>(r.get<std::int64_t>());
  try {
    g.validate();
  } catch (const Error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  const bool has_d = r.get<std::uint8_t>() != 0;
  const bool has_n = r.get<std::uint8_t>() != 0;
  const auto n = r.get<std::uint64_t>();
  if (n > (1u << 28)) throw IoError(path.string() + ": implausible node count");
  std::vector<LatticeKey> nodes(n);
  for (auto& k : nodes)
    for (int a = 0; a < 3; ++a) k[a] = r.get<std::int32_t>();
  BoundaryRecord rec(box, base_h, g, std::move(nodes), has_d, has_n);
  r.get_all(std::span<double>(rec.dirichlet_data()));
  r.get_all(std::span<double>(rec.neumann_data()));
  r.expect_end();
  return rec;
}

void write_plane_text(const std::filesystem::path& path, const MeasurementPlaneData& data) {
  data.validate();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  out << "# nx ny nt dx dt x0 y0 z\n";
  out << data.nx << ' ' << data.ny << ' ' << data.nt << ' ' << data.pitch << ' ' << data.dt << ' ' << data.x0 << ' '
      << data.y0 << ' ' << data.plane_z << '\n';
  for (int ix = 0; ix < data.nx; ++ix)
    for (int iy = 0; iy < data.ny; ++iy) {
      for (int it = 0; it < data.nt; ++it) out << (it ? " " : "") << data.at(ix, iy, it);
      out << '\n';
    }
  if (!out) throw IoError("write failed: " + path.string());
}

MeasurementPlaneData read_plane_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  do {
    if (!std::getline(in, line)) throw IoError(path.string() + ": missing header");
  } while (line.empty() || line[0] == '#');
  std::istringstream head(line);
  MeasurementPlaneData d;
  head >> d.nx >> d.ny >> d.nt >> d.pitch >> d.dt >> d.x0 >> d.y0 >> d.plane_z;
  if (!head || d.nx < 1 || d.ny < 1 || d.nt < 1) throw IoError(path.string() + ": malformed header");
  d.samples.resize(static_cast<std::size_t>(d.nx) * d.ny * d.nt);
  for (double& v : d.samples)
    if (!(in >> v)) throw IoError(path.string() + ": too few samples");
  double extra;
  if (in >> extra) throw IoError(path.string() + ": too many samples");
  d.validate();
  return d;
}

namespace {

// VTK hexahedron vertex order from the bit-coded local order.
constexpr int kVtkOrder[8] = {0, 1, 3, 2, 4, 5, 7, 6};

void write_vtk_mesh(std::ofstream& out, const Mesh& mesh) {
  out << "# vtk DataFile Version 3.0\nepsrecon\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << mesh.n_nodes() << " double\n";
  out << std::setprecision(10);
  for (int v = 0; v < mesh.n_nodes(); ++v) {
    const Vec3 p = mesh.node_position(v);
    out << p[0] << ' ' << p[1] << ' ' << p[2] << '\n';
  }
  out << "CELLS " << mesh.n_cells() << ' ' << 9 * mesh.n_cells() << '\n';
  for (int c = 0; c < mesh.n_cells(); ++c) {
    out << 8;
    for (int b : kVtkOrder) out << ' ' << mesh.cell_nodes(c)[b];
    out << '\n';
  }
  out << "CELL_TYPES " << mesh.n_cells() << '\n';
  for (int c = 0; c < mesh.n_cells(); ++c) out << "12\n";
}

std::ofstream open_text(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void write_vtk_cells(const std::filesystem::path& path, const Mesh& mesh,
                     const std::map<std::string, std::span<const double>>& cell_fields) {
  auto out = open_text(path);
  write_vtk_mesh(out, mesh);
  out << "CELL_DATA " << mesh.n_cells() << '\n';
  for (const auto& [name, values] : cell_fields) {
    if (static_cast<int>(values.size()) != mesh.n_cells()) throw ShapeError("cell field " + name + " has wrong size");
    out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
    for (double v : values) out << v << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void write_vtk_vectors(const std::filesystem::path& path, const Mesh& mesh, const std::string& name,
                       std::span<const double> node_vectors) {
  if (node_vectors.size() != 3 * static_cast<std::size_t>(mesh.n_nodes())) throw ShapeError("node field has wrong size");
  auto out = open_text(path);
  write_vtk_mesh(out, mesh);
  out << "POINT_DATA " << mesh.n_nodes() << "\nVECTORS " << name << " double\n";
  for (int v = 0; v < mesh.n_nodes(); ++v)
    out << node_vectors[3 * v] << ' ' << node_vectors[3 * v + 1] << ' ' << node_vectors[3 * v + 2] << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace epsrecon
