#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "surfpde/geometry.hpp"
#include "surfpde/types.hpp"

namespace surfpde {

/// One quadrature point of a triangle: position on the affine element, its lift
/// to the exact surface (equal to x when no surface is attached), weight, and
/// the geometric data the assemblers consume.
struct QuadPoint {
    Vec3 x;       // point on the affine triangle
    Vec3 x_lift;  // closest point on the exact surface (x if mesh-only)
    double w;
    Vec3 nu;
    Mat3 B;

    Mat3 P() const { return Mat3::Identity() - nu * nu.transpose(); }
    Mat3 M() const {
        const double t = B.trace();
        return t * B - B * B;
    }
};

struct MeshSize {
    double h_max;
    double h_min;
    double area_total;
};

/// Triangulated surface mesh; immutable after construction. Closedness and
/// consistent orientation are validated (and orientation repaired) on build.
class TriMesh {
public:
    static TriMesh build(std::vector<Vec3> vertices,
                         std::vector<std::array<Index, 3>> triangles,
                         std::shared_ptr<const Surface> surface = nullptr,
                         bool require_closed = true);

    // platonic starting meshes, projected to the surface when given
    static TriMesh octahedron(std::shared_ptr<const Surface> surface = nullptr);
    static TriMesh icosahedron(std::shared_ptr<const Surface> surface = nullptr);
    /// Structured (n x m) parameter grid on a torus chart.
    static TriMesh torus_grid(int n_tube, int n_ring, std::shared_ptr<const Surface> surface);

    const std::vector<Vec3>& vertices() const { return vertices_; }
    const std::vector<std::array<Index, 3>>& triangles() const { return triangles_; }
    Index num_vertices() const { return static_cast<Index>(vertices_.size()); }
    Index num_triangles() const { return static_cast<Index>(triangles_.size()); }
    Index num_edges() const { return static_cast<Index>(edges_.size()); }
    int level() const { return level_; }
    bool closed() const { return closed_; }
    int euler_characteristic() const { return num_vertices() - num_edges() + num_triangles(); }
    const std::shared_ptr<const Surface>& surface() const { return surface_; }

    /// Edges as sorted vertex pairs in lexicographic order (deterministic).
    const std::vector<std::array<Index, 2>>& edges() const { return edges_; }
    /// Per-triangle edge indices; entry k is the edge opposite local vertex k.
    const std::vector<std::array<Index, 3>>& triangle_edges() const { return tri_edges_; }

    double triangle_area(Index t) const;
    Vec3 triangle_normal(Index t) const;  // unit, oriented per triangle winding

    MeshSize size() const;

    /// 4-way midpoint refinement; midpoints are projected by the surface's
    /// closest-point map when a surface is attached.
    TriMesh refine() const;

    /// Per-triangle quadrature (built lazily, cached per order). Orders 2, 4, 6.
    const std::vector<std::vector<QuadPoint>>& quadrature(int order = 4) const;

    void write_off(const std::string& path) const;

private:
    TriMesh() = default;
    void build_edges();
    void validate(bool require_closed);
    void repair_orientation();

    std::vector<Vec3> vertices_;
    std::vector<std::array<Index, 3>> triangles_;
    std::vector<std::array<Index, 2>> edges_;
    std::vector<std::array<Index, 3>> tri_edges_;
    std::shared_ptr<const Surface> surface_;
    int level_ = 0;
    bool closed_ = false;

    struct QuadCache {
        std::mutex mutex;
        std::map<int, std::vector<std::vector<QuadPoint>>> data;
    };
    mutable std::shared_ptr<QuadCache> quad_cache_{std::make_shared<QuadCache>()};
};

TriMesh load_mesh(const std::string& path);  // format from extension (.off/.obj)
TriMesh load_off(std::istream& in);
TriMesh load_obj(std::istream& in);

/// Default starting mesh of a surface at a refinement level: icosahedron
/// subdivisions for spheres/ellipsoids, a structured grid for tori.
TriMesh base_mesh(const std::shared_ptr<const Surface>& surface, int level,
                  const std::string& base = "auto");

/// Barycentric triangle rule exact to the given polynomial degree.
struct TriangleRule {
    std::vector<std::array<double, 3>> bary;
    std::vector<double> weights;  // sum to 1
};
const TriangleRule& triangle_rule(int order);

}  // namespace surfpde
