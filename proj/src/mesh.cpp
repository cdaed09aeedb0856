#include "facesculpt/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <json.hpp>

namespace facesculpt::mesh {

namespace {

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& msg) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + msg);
}

constexpr double kDegToRad = 3.14159265358979323846 / 180.0;

}  // namespace

void TriMesh::validate() const {
    const int n = num_vertices();
    if (n == 0) throw std::runtime_error("facesculpt: mesh has no vertices");
    if (uvs.size() != vertices.size())
        throw std::runtime_error("facesculpt: UV count does not match vertex count");
    for (const auto& f : faces) {
        for (int k = 0; k < 3; ++k)
            if (f[k] < 0 || f[k] >= n)
                throw std::runtime_error("facesculpt: face vertex index out of range");
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2])
            throw std::runtime_error("facesculpt: degenerate face (repeated vertex index)");
    }
    std::set<int> seen;
    for (int id : landmark_ids) {
        if (id < 0 || id >= n)
            throw std::runtime_error("facesculpt: landmark vertex index out of range");
        if (!seen.insert(id).second)
            throw std::runtime_error("facesculpt: duplicate landmark vertex index");
    }
}

namespace {

std::array<int, kNumLandmarks> load_landmark_ids(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("facesculpt: cannot open " + path);
    std::array<int, kNumLandmarks> ids{};
    int count = 0;
    int value;
    while (in >> value) {
        if (count >= kNumLandmarks)
            throw std::runtime_error(path + ": expected exactly 68 landmark indices, found more");
        ids[count++] = value;
    }
    if (!in.eof()) throw std::runtime_error(path + ": non-integer content in landmark index file");
    if (count != kNumLandmarks)
        throw std::runtime_error(path + ": expected 68 landmark indices, found " + std::to_string(count));
    return ids;
}

// Splits an OBJ face corner "v/vt" or "v/vt/vn" into 1-based v and vt indices.
void parse_corner(const std::string& path, int line, const std::string& tok, int& v, int& vt) {
    const auto s1 = tok.find('/');
    if (s1 == std::string::npos || s1 + 1 >= tok.size())
        parse_fail(path, line, "face corner '" + tok + "' lacks a vt index (v/vt required)");
    const auto s2 = tok.find('/', s1 + 1);
    const std::string vs = tok.substr(0, s1);
    const std::string ts = s2 == std::string::npos ? tok.substr(s1 + 1) : tok.substr(s1 + 1, s2 - s1 - 1);
    try {
        v = std::stoi(vs);
        vt = std::stoi(ts);
    } catch (const std::exception&) {
        parse_fail(path, line, "malformed face corner '" + tok + "'");
    }
    if (v <= 0 || vt <= 0) parse_fail(path, line, "face indices must be positive (1-based)");
}

}  // namespace

TriMesh load_obj(const std::string& obj_path, const std::string& landmark_path) {
    std::ifstream in(obj_path);
    if (!in) throw std::runtime_error("facesculpt: cannot open " + obj_path);

    std::vector<std::array<double, 3>> verts;
    std::vector<std::array<double, 2>> texcoords;
    // corner lists per face line: (v index, vt index), both zero-based
    std::vector<std::vector<std::pair<int, int>>> face_corners;

    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            std::array<double, 3> v{};
            if (!(ls >> v[0] >> v[1] >> v[2])) parse_fail(obj_path, lineno, "malformed vertex record");
            verts.push_back(v);
        } else if (tag == "vt") {
            std::array<double, 2> t{};
            if (!(ls >> t[0] >> t[1])) parse_fail(obj_path, lineno, "malformed texture-coordinate record");
            texcoords.push_back(t);
        } else if (tag == "f") {
            std::vector<std::pair<int, int>> corners;
            std::string tok;
            while (ls >> tok) {
                int v, vt;
                parse_corner(obj_path, lineno, tok, v, vt);
                if (v > static_cast<int>(verts.size()))
                    parse_fail(obj_path, lineno, "vertex index out of range");
                if (vt > static_cast<int>(texcoords.size()))
                    parse_fail(obj_path, lineno, "texture-coordinate index out of range");
                corners.emplace_back(v - 1, vt - 1);
            }
            if (corners.size() < 3) parse_fail(obj_path, lineno, "face with fewer than 3 corners");
            face_corners.push_back(std::move(corners));
        }
        // other tags (vn, o, g, s, usemtl, ...) are ignored
    }

    TriMesh mesh;
    mesh.vertices = std::move(verts);
    mesh.uvs.assign(mesh.vertices.size(), {0.0, 0.0});
    std::vector<int> uv_of(mesh.vertices.size(), -1);
    for (const auto& corners : face_corners) {
        for (const auto& [v, vt] : corners) {
            if (uv_of[v] == -1) {
                uv_of[v] = vt;
                mesh.uvs[v] = texcoords[vt];
            } else if (uv_of[v] != vt) {
                throw std::runtime_error(obj_path + ": vertex " + std::to_string(v + 1) +
                                         " is mapped to more than one texture coordinate");
            }
        }
        // fan triangulation preserving winding: (0,1,2), (0,2,3), ...
        for (std::size_t k = 2; k < corners.size(); ++k)
            mesh.faces.push_back({corners[0].first, corners[k - 1].first, corners[k].first});
    }
    for (std::size_t i = 0; i < uv_of.size(); ++i)
        if (uv_of[i] == -1)
            throw std::runtime_error(obj_path + ": vertex " + std::to_string(i + 1) +
                                     " has no texture coordinate (unreferenced by faces)");

    mesh.landmark_ids = load_landmark_ids(landmark_path);
    mesh.validate();
    return mesh;
}

void save_obj(const TriMesh& mesh, const std::string& obj_path, const std::string& landmark_path) {
    mesh.validate();
    std::ofstream out(obj_path);
    if (!out) throw std::runtime_error("facesculpt: cannot write " + obj_path);
    char buf[160];
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v[0], v[1], v[2]);
        out << buf;
    }
    for (const auto& t : mesh.uvs) {
        std::snprintf(buf, sizeof(buf), "vt %.9g %.9g\n", t[0], t[1]);
        out << buf;
    }
    for (const auto& f : mesh.faces) {
        // v and vt share indices on save: uvs are stored per vertex
        out << "f " << f[0] + 1 << "/" << f[0] + 1 << " " << f[1] + 1 << "/" << f[1] + 1 << " "
            << f[2] + 1 << "/" << f[2] + 1 << "\n";
    }
    if (!out) throw std::runtime_error("facesculpt: write failed for " + obj_path);

    std::ofstream lm(landmark_path);
    if (!lm) throw std::runtime_error("facesculpt: cannot write " + landmark_path);
    for (int id : mesh.landmark_ids) lm << id << "\n";
    if (!lm) throw std::runtime_error("facesculpt: write failed for " + landmark_path);
}

Projection load_projection(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("facesculpt: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw std::runtime_error(path + ": invalid JSON: " + e.what());
    }
    Projection proj;
    const auto& arr = j.at("p");
    if (!arr.is_array() || arr.size() != 12)
        throw std::runtime_error(path + ": \"p\" must hold 12 reals (row-major 3x4)");
    for (int i = 0; i < 12; ++i) proj.p[i] = arr[i].get<double>();
    proj.azimuth_deg = j.value("azimuth_deg", 0.0);
    proj.elevation_deg = j.value("elevation_deg", 0.0);
    return proj;
}

void save_projection(const Projection& proj, const std::string& path) {
    nlohmann::json j;
    j["p"] = proj.p;
    j["azimuth_deg"] = proj.azimuth_deg;
    j["elevation_deg"] = proj.elevation_deg;
    std::ofstream out(path);
    if (!out) throw std::runtime_error("facesculpt: cannot write " + path);
    out << j.dump(2) << "\n";
}

Eigen::SparseMatrix<double> graph_laplacian(const TriMesh& mesh) {
    mesh.validate();
    const int n = mesh.num_vertices();
    std::set<std::pair<int, int>> edges;
    for (const auto& f : mesh.faces) {
        for (int k = 0; k < 3; ++k) {
            int a = f[k], b = f[(k + 1) % 3];
            if (a > b) std::swap(a, b);
            edges.insert({a, b});
        }
    }
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(4 * edges.size());
    std::vector<double> degree(n, 0.0);
    for (const auto& [a, b] : edges) {
        trips.emplace_back(a, b, -1.0);
        trips.emplace_back(b, a, -1.0);
        degree[a] += 1.0;
        degree[b] += 1.0;
    }
    for (int i = 0; i < n; ++i)
        if (degree[i] > 0.0) trips.emplace_back(i, i, degree[i]);
    Eigen::SparseMatrix<double> lap(n, n);
    lap.setFromTriplets(trips.begin(), trips.end());
    return lap;
}

std::array<double, 3> centroid(const std::vector<std::array<double, 3>>& vertices) {
    if (vertices.empty()) throw std::runtime_error("facesculpt: centroid of empty vertex set");
    std::array<double, 3> c{0, 0, 0};
    for (const auto& v : vertices)
        for (int k = 0; k < 3; ++k) c[k] += v[k];
    for (int k = 0; k < 3; ++k) c[k] /= static_cast<double>(vertices.size());
    return c;
}

std::array<double, 3> centroid(const TriMesh& mesh) { return centroid(mesh.vertices); }

Eigen::Matrix3d view_rotation(double azimuth_deg, double elevation_deg) {
    const double a = azimuth_deg * kDegToRad;
    const double e = elevation_deg * kDegToRad;
    Eigen::Matrix3d ry;
    ry << std::cos(a), 0, std::sin(a),
          0, 1, 0,
          -std::sin(a), 0, std::cos(a);
    Eigen::Matrix3d rx;
    rx << 1, 0, 0,
          0, std::cos(e), -std::sin(e),
          0, std::sin(e), std::cos(e);
    return rx * ry;
}

namespace {

Eigen::Vector3d rotate_about(const std::array<double, 3>& v, const Projection& proj,
                             const std::array<double, 3>& pivot) {
    const Eigen::Vector3d p(v[0] - pivot[0], v[1] - pivot[1], v[2] - pivot[2]);
    const Eigen::Vector3d piv(pivot[0], pivot[1], pivot[2]);
    return piv + view_rotation(proj.azimuth_deg, proj.elevation_deg) * p;
}

}  // namespace

std::array<double, 2> project(const std::array<double, 3>& v, const Projection& proj,
                              const std::array<double, 3>& pivot) {
    const Eigen::Vector3d r = rotate_about(v, proj, pivot);
    const double* p = proj.p.data();
    const double hx = p[0] * r.x() + p[1] * r.y() + p[2] * r.z() + p[3];
    const double hy = p[4] * r.x() + p[5] * r.y() + p[6] * r.z() + p[7];
    if (proj.is_affine()) return {hx, hy};
    const double w = p[8] * r.x() + p[9] * r.y() + p[10] * r.z() + p[11];
    if (std::abs(w) < 1e-12)
        throw std::runtime_error("facesculpt: vertex projects behind the camera (w ~ 0)");
    return {hx / w, hy / w};
}

double projected_depth(const std::array<double, 3>& v, const Projection& proj,
                       const std::array<double, 3>& pivot) {
    const Eigen::Vector3d r = rotate_about(v, proj, pivot);
    if (proj.is_affine()) return -r.z();
    const double* p = proj.p.data();
    return p[8] * r.x() + p[9] * r.y() + p[10] * r.z() + p[11];
}

LandmarkSet project_landmarks(const TriMesh& mesh, const Projection& proj) {
    const std::array<double, 3> pivot = centroid(mesh);
    LandmarkSet out;
    for (int i = 0; i < kNumLandmarks; ++i) {
        const auto q = project(mesh.vertices[mesh.landmark_ids[i]], proj, pivot);
        out.pts[i] = {q[0], q[1]};
    }
    return out;
}

}  // namespace facesculpt::mesh
