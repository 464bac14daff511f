#include "surfpde/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>

namespace surfpde {

// ---------------------------------------------------------------------------
// quadrature rules (symmetric triangle rules, Strang/Dunavant)

const TriangleRule& triangle_rule(int order) {
    static const TriangleRule deg2 = [] {
        TriangleRule r;
        const double a = 2.0 / 3.0, b = 1.0 / 6.0;
        r.bary = {{a, b, b}, {b, a, b}, {b, b, a}};
        r.weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
        return r;
    }();
    static const TriangleRule deg4 = [] {
        TriangleRule r;
        const double a1 = 0.445948490915965, w1 = 0.223381589678011;
        const double a2 = 0.091576213509771, w2 = 0.109951743655322;
        for (const auto& [a, w] : {std::pair{a1, w1}, std::pair{a2, w2}}) {
            const double b = 1.0 - 2.0 * a;
            r.bary.push_back({b, a, a});
            r.bary.push_back({a, b, a});
            r.bary.push_back({a, a, b});
            r.weights.insert(r.weights.end(), 3, w);
        }
        return r;
    }();
    static const TriangleRule deg6 = [] {
        TriangleRule r;
        const double a1 = 0.249286745170910, w1 = 0.116786275726379;
        const double a2 = 0.063089014491502, w2 = 0.050844906370207;
        for (const auto& [a, w] : {std::pair{a1, w1}, std::pair{a2, w2}}) {
            const double b = 1.0 - 2.0 * a;
            r.bary.push_back({b, a, a});
            r.bary.push_back({a, b, a});
            r.bary.push_back({a, a, b});
            r.weights.insert(r.weights.end(), 3, w);
        }
        const double a = 0.310352451033785, b = 0.053145049844816;
        const double c = 1.0 - a - b, w3 = 0.082851075618374;
        r.bary.push_back({a, b, c});
        r.bary.push_back({b, c, a});
        r.bary.push_back({c, a, b});
        r.bary.push_back({a, c, b});
        r.bary.push_back({c, b, a});
        r.bary.push_back({b, a, c});
        r.weights.insert(r.weights.end(), 6, w3);
        return r;
    }();
    if (order <= 2) return deg2;
    if (order <= 4) return deg4;
    if (order <= 6) return deg6;
    throw ConfigError("quadrature order must be <= 6");
}

// ---------------------------------------------------------------------------
// TriMesh

TriMesh TriMesh::build(std::vector<Vec3> vertices, std::vector<std::array<Index, 3>> triangles,
                       std::shared_ptr<const Surface> surface, bool require_closed) {
    TriMesh m;
    m.vertices_ = std::move(vertices);
    m.triangles_ = std::move(triangles);
    m.surface_ = std::move(surface);
    m.build_edges();
    m.validate(require_closed);
    m.repair_orientation();
    return m;
}

void TriMesh::build_edges() {
    std::vector<std::array<Index, 2>> all;
    all.reserve(3 * triangles_.size());
    for (const auto& t : triangles_)
        for (int k = 0; k < 3; ++k) {
            Index a = t[(k + 1) % 3], b = t[(k + 2) % 3];
            if (a > b) std::swap(a, b);
            all.push_back({a, b});
        }
    std::sort(all.begin(), all.end());
    all.erase(std::unique(all.begin(), all.end()), all.end());
    edges_ = std::move(all);

    auto edge_index = [&](Index a, Index b) {
        if (a > b) std::swap(a, b);
        const std::array<Index, 2> key{a, b};
        const auto it = std::lower_bound(edges_.begin(), edges_.end(), key);
        return static_cast<Index>(it - edges_.begin());
    };
    tri_edges_.resize(triangles_.size());
    for (size_t t = 0; t < triangles_.size(); ++t)
        for (int k = 0; k < 3; ++k)
            tri_edges_[t][k] = edge_index(triangles_[t][(k + 1) % 3], triangles_[t][(k + 2) % 3]);
}

void TriMesh::validate(bool require_closed) {
    const Index nv = num_vertices();
    for (size_t t = 0; t < triangles_.size(); ++t) {
        for (int k = 0; k < 3; ++k)
            if (triangles_[t][k] < 0 || triangles_[t][k] >= nv)
                throw MeshError("triangle " + std::to_string(t) + " references vertex out of range");
        if (triangle_area(static_cast<Index>(t)) <= 0.0)
            throw MeshError("triangle " + std::to_string(t) + " is degenerate (zero area)");
    }
    std::vector<int> edge_count(edges_.size(), 0);
    for (size_t t = 0; t < triangles_.size(); ++t)
        for (int k = 0; k < 3; ++k) edge_count[tri_edges_[t][k]] += 1;
    closed_ = true;
    for (size_t e = 0; e < edges_.size(); ++e) {
        if (edge_count[e] > 2)
            throw MeshError("non-manifold edge " + std::to_string(e) + " (" +
                            std::to_string(edges_[e][0]) + "," + std::to_string(edges_[e][1]) +
                            ") shared by " + std::to_string(edge_count[e]) + " triangles");
        if (edge_count[e] == 1) {
            closed_ = false;
            if (require_closed)
                throw MeshError("open boundary at edge " + std::to_string(e) + " (" +
                                std::to_string(edges_[e][0]) + "," + std::to_string(edges_[e][1]) + ")");
        }
    }
    if (closed_ && surface_ && surface_->analytic()) {
        const int chi = euler_characteristic();
        const int expected = surface_->kind() == Surface::Kind::Torus ? 0 : 2;
        if (chi != expected)
            throw MeshError("Euler characteristic " + std::to_string(chi) + " does not match surface (" +
                            std::to_string(expected) + ")");
    }
}

void TriMesh::repair_orientation() {
    // adjacency through edges
    std::vector<std::array<Index, 2>> edge_tris(edges_.size(), {-1, -1});
    for (size_t t = 0; t < triangles_.size(); ++t)
        for (int k = 0; k < 3; ++k) {
            auto& et = edge_tris[tri_edges_[t][k]];
            (et[0] < 0 ? et[0] : et[1]) = static_cast<Index>(t);
        }
    auto traverses_forward = [&](Index t, Index e) {
        // true if triangle t walks edge e from its smaller to its larger vertex
        for (int k = 0; k < 3; ++k) {
            const Index a = triangles_[t][k], b = triangles_[t][(k + 1) % 3];
            if (a == edges_[e][0] && b == edges_[e][1]) return true;
            if (a == edges_[e][1] && b == edges_[e][0]) return false;
        }
        throw MeshError("internal: edge not on triangle");
    };

    std::vector<int> state(triangles_.size(), -1);  // -1 unvisited, 0 keep, 1 flip
    for (size_t seed = 0; seed < triangles_.size(); ++seed) {
        if (state[seed] >= 0) continue;
        state[seed] = 0;
        std::queue<Index> q;
        q.push(static_cast<Index>(seed));
        while (!q.empty()) {
            const Index t = q.front();
            q.pop();
            for (int k = 0; k < 3; ++k) {
                const Index e = tri_edges_[t][k];
                const auto& et = edge_tris[e];
                const Index other = (et[0] == t) ? et[1] : et[0];
                if (other < 0) continue;
                const bool ft = traverses_forward(t, e) != (state[t] == 1);
                const bool fo_required = !ft;  // neighbour must traverse opposite
                const bool fo_raw = traverses_forward(other, e);
                const int needed = (fo_raw == fo_required) ? 0 : 1;
                if (state[other] < 0) {
                    state[other] = needed;
                    q.push(other);
                } else if (state[other] != needed) {
                    throw MeshError("mesh is not orientable (conflict at edge " + std::to_string(e) + ")");
                }
            }
        }
    }
    for (size_t t = 0; t < triangles_.size(); ++t)
        if (state[t] == 1) std::swap(triangles_[t][1], triangles_[t][2]);
    build_edges();

    // fix the global sign: outward normals for analytic surfaces, positive
    // enclosed volume otherwise
    if (!closed_) return;
    bool flip_all = false;
    if (surface_ && surface_->analytic() && surface_->kind() != Surface::Kind::Plane) {
        const auto& t = triangles_[0];
        const Vec3 c = (vertices_[t[0]] + vertices_[t[1]] + vertices_[t[2]]) / 3.0;
        flip_all = triangle_normal(0).dot(surface_->normal(c)) < 0.0;
    } else {
        double vol6 = 0.0;
        for (const auto& t : triangles_)
            vol6 += vertices_[t[0]].dot(vertices_[t[1]].cross(vertices_[t[2]]));
        flip_all = vol6 < 0.0;
    }
    if (flip_all) {
        for (auto& t : triangles_) std::swap(t[1], t[2]);
        build_edges();
    }
}

double TriMesh::triangle_area(Index t) const {
    const auto& tr = triangles_[t];
    const Vec3 e1 = vertices_[tr[1]] - vertices_[tr[0]];
    const Vec3 e2 = vertices_[tr[2]] - vertices_[tr[0]];
    return 0.5 * e1.cross(e2).norm();
}

Vec3 TriMesh::triangle_normal(Index t) const {
    const auto& tr = triangles_[t];
    const Vec3 e1 = vertices_[tr[1]] - vertices_[tr[0]];
    const Vec3 e2 = vertices_[tr[2]] - vertices_[tr[0]];
    return e1.cross(e2).normalized();
}

MeshSize TriMesh::size() const {
    MeshSize s{0.0, std::numeric_limits<double>::max(), 0.0};
    for (const auto& e : edges_) {
        const double len = (vertices_[e[0]] - vertices_[e[1]]).norm();
        s.h_max = std::max(s.h_max, len);
        s.h_min = std::min(s.h_min, len);
    }
    for (Index t = 0; t < num_triangles(); ++t) s.area_total += triangle_area(t);
    return s;
}

TriMesh TriMesh::refine() const {
    std::vector<Vec3> verts = vertices_;
    verts.reserve(vertices_.size() + edges_.size());
    for (const auto& e : edges_) {
        Vec3 mid = 0.5 * (vertices_[e[0]] + vertices_[e[1]]);
        if (surface_ && surface_->analytic()) mid = surface_->closest_point(mid);
        verts.push_back(mid);
    }
    const Index nv = num_vertices();
    std::vector<std::array<Index, 3>> tris;
    tris.reserve(4 * triangles_.size());
    for (size_t t = 0; t < triangles_.size(); ++t) {
        const auto& tr = triangles_[t];
        const Index m0 = nv + tri_edges_[t][0];  // midpoint opposite vertex 0
        const Index m1 = nv + tri_edges_[t][1];
        const Index m2 = nv + tri_edges_[t][2];
        tris.push_back({tr[0], m2, m1});
        tris.push_back({tr[1], m0, m2});
        tris.push_back({tr[2], m1, m0});
        tris.push_back({m0, m1, m2});
    }
    TriMesh r = build(std::move(verts), std::move(tris), surface_, closed_);
    r.level_ = level_ + 1;
    return r;
}

const std::vector<std::vector<QuadPoint>>& TriMesh::quadrature(int order) const {
    std::lock_guard<std::mutex> lock(quad_cache_->mutex);
    auto it = quad_cache_->data.find(order);
    if (it != quad_cache_->data.end()) return it->second;

    const TriangleRule& rule = triangle_rule(order);
    std::vector<std::vector<QuadPoint>> cache(triangles_.size());
    const bool exact = surface_ && surface_->analytic();
    for (Index t = 0; t < num_triangles(); ++t) {
        const auto& tr = triangles_[t];
        const double area = triangle_area(t);
        const Vec3 n = triangle_normal(t);
        auto& pts = cache[t];
        pts.reserve(rule.bary.size());
        for (size_t q = 0; q < rule.bary.size(); ++q) {
            QuadPoint p;
            const auto& b = rule.bary[q];
            p.x = b[0] * vertices_[tr[0]] + b[1] * vertices_[tr[1]] + b[2] * vertices_[tr[2]];
            p.w = rule.weights[q] * area;
            if (exact) {
                p.x_lift = surface_->closest_point(p.x);
                const GeomSample s = surface_->sample(p.x_lift);
                p.nu = s.nu;
                p.B = s.B;
            } else {
                p.x_lift = p.x;
                p.nu = n;
                p.B.setZero();
            }
            pts.push_back(p);
        }
    }
    return quad_cache_->data.emplace(order, std::move(cache)).first->second;
}

// ---------------------------------------------------------------------------
// starting meshes

namespace {

std::vector<Vec3> maybe_project(std::vector<Vec3> v, const std::shared_ptr<const Surface>& s) {
    if (s && s->analytic())
        for (auto& x : v) x = s->closest_point(x);
    return v;
}

}  // namespace

TriMesh TriMesh::octahedron(std::shared_ptr<const Surface> surface) {
    std::vector<Vec3> v = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    std::vector<std::array<Index, 3>> f = {{0, 2, 4}, {2, 1, 4}, {1, 3, 4}, {3, 0, 4},
                                           {2, 0, 5}, {1, 2, 5}, {3, 1, 5}, {0, 3, 5}};
    return build(maybe_project(std::move(v), surface), std::move(f), surface);
}

TriMesh TriMesh::icosahedron(std::shared_ptr<const Surface> surface) {
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
                           {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
                           {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
    for (auto& x : v) x.normalize();
    std::vector<std::array<Index, 3>> f = {
        {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},  {5, 11, 4},
        {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6},  {3, 6, 8},
        {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
    return build(maybe_project(std::move(v), surface), std::move(f), surface);
}

TriMesh TriMesh::torus_grid(int n_tube, int n_ring, std::shared_ptr<const Surface> surface) {
    if (!surface || surface->kind() != Surface::Kind::Torus)
        throw ConfigError("torus_grid requires a torus surface");
    if (n_tube < 3 || n_ring < 3) throw ConfigError("torus grid needs at least 3x3 cells");
    const Chart& c = surface->chart(0);
    std::vector<Vec3> v;
    v.reserve(static_cast<size_t>(n_tube) * n_ring);
    for (int i = 0; i < n_tube; ++i)
        for (int j = 0; j < n_ring; ++j) {
            const double th = -M_PI + 2.0 * M_PI * i / n_tube;
            const double ph = -M_PI + 2.0 * M_PI * j / n_ring;
            v.push_back(c.map(Vec2(th, ph)));
        }
    auto id = [&](int i, int j) {
        return static_cast<Index>(((i % n_tube + n_tube) % n_tube) * n_ring +
                                  ((j % n_ring + n_ring) % n_ring));
    };
    std::vector<std::array<Index, 3>> f;
    f.reserve(2u * n_tube * n_ring);
    for (int i = 0; i < n_tube; ++i)
        for (int j = 0; j < n_ring; ++j) {
            f.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
            f.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
        }
    return build(std::move(v), std::move(f), surface);
}

TriMesh base_mesh(const std::shared_ptr<const Surface>& surface, int level, const std::string& base) {
    std::string b = base;
    if (b == "auto") {
        b = (surface && surface->kind() == Surface::Kind::Torus) ? "torus-grid" : "icosahedron";
    }
    TriMesh m = [&] {
        if (b == "icosahedron") return TriMesh::icosahedron(surface);
        if (b == "octahedron") return TriMesh::octahedron(surface);
        if (b == "torus-grid") return TriMesh::torus_grid(8, 16, surface);
        throw ConfigError("unknown base mesh '" + b + "'");
    }();
    for (int l = 0; l < level; ++l) m = m.refine();
    return m;
}

// ---------------------------------------------------------------------------
// file IO

namespace {

std::string next_content_line(std::istream& in) {
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (line.find_first_not_of(" \t\r\n") != std::string::npos) return line;
    }
    return {};
}

}  // namespace

TriMesh load_off(std::istream& in) {
    std::string header = next_content_line(in);
    if (header.empty()) throw MeshError("empty OFF stream");
    std::istringstream hs(header);
    std::string tag;
    hs >> tag;
    if (tag != "OFF") throw MeshError("missing OFF header");
    long nv = -1, nf = -1, ne = 0;
    if (!(hs >> nv >> nf >> ne)) {
        std::istringstream cs(next_content_line(in));
        if (!(cs >> nv >> nf >> ne)) throw MeshError("malformed OFF counts");
    }
    if (nv < 0 || nf < 0) throw MeshError("malformed OFF counts");
    std::vector<Vec3> verts(nv);
    for (long i = 0; i < nv; ++i) {
        std::istringstream ls(next_content_line(in));
        if (!(ls >> verts[i][0] >> verts[i][1] >> verts[i][2]))
            throw MeshError("malformed OFF vertex " + std::to_string(i));
    }
    std::vector<std::array<Index, 3>> tris(nf);
    for (long i = 0; i < nf; ++i) {
        std::istringstream ls(next_content_line(in));
        int k;
        if (!(ls >> k)) throw MeshError("malformed OFF face " + std::to_string(i));
        if (k != 3) throw MeshError("face " + std::to_string(i) + " is not a triangle");
        long a, b, c;
        if (!(ls >> a >> b >> c)) throw MeshError("malformed OFF face " + std::to_string(i));
        tris[i] = {static_cast<Index>(a), static_cast<Index>(b), static_cast<Index>(c)};
    }
    return TriMesh::build(std::move(verts), std::move(tris));
}

TriMesh load_obj(std::istream& in) {
    std::vector<Vec3> verts;
    std::vector<std::array<Index, 3>> tris;
    std::string line;
    auto parse_index = [&](const std::string& tok, long nvert) {
        const auto slash = tok.find('/');
        const long i = std::stol(slash == std::string::npos ? tok : tok.substr(0, slash));
        if (i < 1 || i > nvert) throw MeshError("OBJ face index " + std::to_string(i) + " out of range");
        return static_cast<Index>(i - 1);
    };
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p[0] >> p[1] >> p[2])) throw MeshError("malformed OBJ vertex at line " + std::to_string(lineno));
            verts.push_back(p);
        } else if (tag == "f") {
            std::vector<std::string> toks;
            std::string t;
            while (ls >> t) toks.push_back(t);
            if (toks.size() != 3)
                throw MeshError("OBJ face at line " + std::to_string(lineno) + " is not a triangle");
            tris.push_back({parse_index(toks[0], static_cast<long>(verts.size())),
                            parse_index(toks[1], static_cast<long>(verts.size())),
                            parse_index(toks[2], static_cast<long>(verts.size()))});
        }
        // vt / vn / materials / groups are ignored
    }
    if (verts.empty() || tris.empty()) throw MeshError("OBJ stream has no triangles");
    return TriMesh::build(std::move(verts), std::move(tris));
}

TriMesh load_mesh(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open '" + path + "'");
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".off") return load_off(in);
    if (path.size() >= 4 && path.substr(path.size() - 4) == ".obj") return load_obj(in);
    throw MeshError("unknown mesh format for '" + path + "' (expected .off or .obj)");
}

void TriMesh::write_off(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw MeshError("cannot write '" + path + "'");
    out << "OFF\n" << num_vertices() << " " << num_triangles() << " " << num_edges() << "\n";
    out.precision(17);
    for (const auto& v : vertices_) out << v[0] << " " << v[1] << " " << v[2] << "\n";
    for (const auto& t : triangles_) out << "3 " << t[0] << " " << t[1] << " " << t[2] << "\n";
}

}  // namespace surfpde
