#include "sgan/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "sgan/errors.hpp"

namespace sgan {

static_assert(std::endian::native == std::endian::little,
              "serialization assumes a little-endian host");

namespace {

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string lower_ext(const std::filesystem::path& path) {
  std::string e = path.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

// strips comments and blank lines
bool next_content_line(std::istream& in, std::string& line, char comment) {
  while (std::getline(in, line)) {
    std::size_t pos = line.find_first_not_of(" \t\r");
    if (pos == std::string::npos) continue;
    if (line[pos] == comment) continue;
    return true;
  }
  return false;
}

int parse_face_vertex(const std::string& tok, std::size_t vertex_count,
                      const std::filesystem::path& path) {
  // obj face tokens may carry /texture/normal suffixes
  std::size_t slash = tok.find('/');
  int idx = 0;
  try {
    idx = std::stoi(slash == std::string::npos ? tok : tok.substr(0, slash));
  } catch (const std::exception&) {
    throw DataError("bad face index '" + tok + "' in " + path.string());
  }
  if (idx < 0) idx = int(vertex_count) + idx + 1;
  if (idx < 1 || std::size_t(idx) > vertex_count)
    throw DataError("face index out of range in " + path.string());
  return idx - 1;
}

void append_fan(TriangleMesh& mesh, const std::vector<int>& poly,
                const std::filesystem::path& path) {
  if (poly.size() < 3) throw DataError("degenerate face in " + path.string());
  for (std::size_t i = 1; i + 1 < poly.size(); ++i)
    mesh.faces.push_back({poly[0], poly[i], poly[i + 1]});
}

}  // namespace

void save_smv(const Smv& smv, const std::filesystem::path& path) {
  std::ofstream out = open_out(path, std::ios::binary);
  out.write("SMV1", 4);
  std::uint32_t deg = std::uint32_t(smv.max_degree);
  out.write(reinterpret_cast<const char*>(&deg), 4);
  out.write(reinterpret_cast<const char*>(smv.coeffs.data()),
            std::streamsize(smv.coeffs.size() * sizeof(double)));
  if (!out) throw DataError("short write to " + path.string());
}

void save_smv_text(const Smv& smv, const std::filesystem::path& path) {
  std::ofstream out = open_out(path, std::ios::out);
  out << "M=" << smv.max_degree << "\n";
  char buf[40];
  for (double c : smv.coeffs) {
    std::snprintf(buf, sizeof buf, "%.17g\n", c);
    out << buf;
  }
  if (!out) throw DataError("short write to " + path.string());
}

Smv load_smv(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, std::ios::binary);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::memcmp(magic, "SMV1", 4) == 0) {
    std::uint32_t deg = 0;
    in.read(reinterpret_cast<char*>(&deg), 4);
    if (!in || deg > 100000u) throw DataError("corrupt moment-vector header in " + path.string());
    Smv smv{int(deg)};
    in.read(reinterpret_cast<char*>(smv.coeffs.data()),
            std::streamsize(smv.coeffs.size() * sizeof(double)));
    if (std::size_t(in.gcount()) != smv.coeffs.size() * sizeof(double))
      throw DataError("truncated moment vector in " + path.string());
    return smv;
  }

  in.clear();
  in.seekg(0);
  std::string line;
  if (!next_content_line(in, line, '#')) throw DataError("empty moment-vector file " + path.string());
  std::size_t pos = line.find_first_not_of(" \t\r");
  if (line.compare(pos, 2, "M=") != 0)
    throw DataError("expected M=<degree> header in " + path.string());
  int deg = 0;
  try {
    deg = std::stoi(line.substr(pos + 2));
  } catch (const std::exception&) {
    throw DataError("bad degree in " + path.string());
  }
  if (deg < 0) throw DataError("negative degree in " + path.string());
  Smv smv(deg);
  for (double& c : smv.coeffs) {
    if (!next_content_line(in, line, '#'))
      throw DataError("truncated moment vector in " + path.string());
    try {
      c = std::stod(line);
    } catch (const std::exception&) {
      throw DataError("bad coefficient '" + line + "' in " + path.string());
    }
  }
  return smv;
}

void save_xyz(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out = open_out(path, std::ios::out);
  char buf[120];
  for (const Vec3& p : cloud) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", p.x, p.y, p.z);
    out << buf;
  }
  if (!out) throw DataError("short write to " + path.string());
}

PointCloud load_xyz(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, std::ios::in);
  PointCloud cloud;
  std::string line;
  while (next_content_line(in, line, '#')) {
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x >> p.y >> p.z)) throw DataError("bad point line in " + path.string());
    cloud.push_back(p);
  }
  return cloud;
}

void save_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out = open_out(path, std::ios::out);
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
      << "\nproperty float x\nproperty float y\nproperty float z\nend_header\n";
  char buf[120];
  for (const Vec3& p : cloud) {
    std::snprintf(buf, sizeof buf, "%.9g %.9g %.9g\n", p.x, p.y, p.z);
    out << buf;
  }
  if (!out) throw DataError("short write to " + path.string());
}

PointCloud load_ply(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, std::ios::in);
  std::string line;
  if (!std::getline(in, line) || line.substr(0, 3) != "ply")
    throw DataError("not a ply file: " + path.string());

  std::size_t vertex_count = 0;
  int xcol = -1, ycol = -1, zcol = -1;
  int prop = 0;
  bool in_vertex = false, seen_format = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "comment" || word.empty()) continue;
    if (word == "format") {
      std::string kind;
      ls >> kind;
      if (kind != "ascii") throw DataError("only ascii ply is supported: " + path.string());
      seen_format = true;
    } else if (word == "element") {
      std::string name;
      ls >> name >> vertex_count;
      in_vertex = (name == "vertex");
      if (!in_vertex && xcol < 0) vertex_count = 0;
      prop = 0;
    } else if (word == "property" && in_vertex) {
      std::string type, name;
      ls >> type >> name;
      if (name == "x") xcol = prop;
      if (name == "y") ycol = prop;
      if (name == "z") zcol = prop;
      ++prop;
    } else if (word == "end_header") {
      break;
    }
  }
  if (!seen_format || xcol < 0 || ycol < 0 || zcol < 0)
    throw DataError("ply header lacks x/y/z vertex properties: " + path.string());

  PointCloud cloud;
  cloud.reserve(vertex_count);
  for (std::size_t i = 0; i < vertex_count; ++i) {
    if (!next_content_line(in, line, '\0'))
      throw DataError("truncated ply vertex data in " + path.string());
    std::istringstream ls(line);
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (int(vals.size()) <= std::max({xcol, ycol, zcol}))
      throw DataError("short ply vertex line in " + path.string());
    cloud.push_back({vals[std::size_t(xcol)], vals[std::size_t(ycol)], vals[std::size_t(zcol)]});
  }
  return cloud;
}

TriangleMesh load_obj(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, std::ios::in);
  TriangleMesh mesh;
  std::string line;
  while (next_content_line(in, line, '#')) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "v") {
      Vec3 p;
      if (!(ls >> p.x >> p.y >> p.z)) throw DataError("bad vertex line in " + path.string());
      mesh.vertices.push_back(p);
    } else if (word == "f") {
      std::vector<int> poly;
      std::string tok;
      while (ls >> tok) poly.push_back(parse_face_vertex(tok, mesh.vertices.size(), path));
      append_fan(mesh, poly, path);
    }
  }
  if (mesh.vertices.empty()) throw DataError("no vertices in " + path.string());
  return mesh;
}

TriangleMesh load_off(const std::filesystem::path& path) {
  std::ifstream in = open_in(path, std::ios::in);
  std::string line;
  if (!next_content_line(in, line, '#')) throw DataError("empty off file " + path.string());
  std::size_t pos = line.find_first_not_of(" \t\r");
  std::size_t nv = 0, nf = 0;
  std::istringstream header(line.substr(pos));
  std::string tag;
  header >> tag;
  if (tag != "OFF") throw DataError("missing OFF header in " + path.string());
  // counts may share the header line or follow on their own
  if (!(header >> nv >> nf)) {
    if (!next_content_line(in, line, '#')) throw DataError("missing counts in " + path.string());
    std::istringstream counts(line);
    if (!(counts >> nv >> nf)) throw DataError("bad counts in " + path.string());
  }

  TriangleMesh mesh;
  mesh.vertices.reserve(nv);
  for (std::size_t i = 0; i < nv; ++i) {
    if (!next_content_line(in, line, '#')) throw DataError("truncated vertices in " + path.string());
    std::istringstream ls(line);
    Vec3 p;
    if (!(ls >> p.x >> p.y >> p.z)) throw DataError("bad vertex line in " + path.string());
    mesh.vertices.push_back(p);
  }
  for (std::size_t i = 0; i < nf; ++i) {
    if (!next_content_line(in, line, '#')) throw DataError("truncated faces in " + path.string());
    std::istringstream ls(line);
    std::size_t k = 0;
    if (!(ls >> k) || k < 3) throw DataError("bad face line in " + path.string());
    std::vector<int> poly(k);
    for (std::size_t j = 0; j < k; ++j) {
      int idx = -1;
      if (!(ls >> idx) || idx < 0 || std::size_t(idx) >= mesh.vertices.size())
        throw DataError("face index out of range in " + path.string());
      poly[j] = idx;
    }
    append_fan(mesh, poly, path);
  }
  if (mesh.vertices.empty()) throw DataError("no vertices in " + path.string());
  return mesh;
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  std::string ext = lower_ext(path);
  if (ext == ".obj") return load_obj(path);
  if (ext == ".off") return load_off(path);
  throw DataError("unsupported mesh format: " + path.string());
}

void save_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::ofstream out = open_out(path, std::ios::out);
  char buf[120];
  for (const Vec3& p : mesh.vertices) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", p.x, p.y, p.z);
    out << buf;
  }
  for (const auto& f : mesh.faces)
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << "\n";
  if (!out) throw DataError("short write to " + path.string());
}

}  // namespace sgan
