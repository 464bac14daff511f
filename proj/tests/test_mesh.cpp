#include <doctest.h>

#include <sstream>

#include "surfpde/mesh.hpp"

using namespace surfpde;

namespace {

std::shared_ptr<const Surface> unit_sphere() {
    return std::make_shared<Surface>(Surface::sphere());
}

const char* kOctahedronOff = R"(OFF
# regular octahedron
6 8 12
1 0 0
-1 0 0
0 1 0
0 -1 0
0 0 1
0 0 -1
3 0 2 4
3 2 1 4
3 1 3 4
3 3 0 4
3 2 0 5
3 1 2 5
3 3 1 5
3 0 3 5
)";

}  // namespace

TEST_CASE("load octahedron OFF and check Euler characteristic") {
    std::istringstream in(kOctahedronOff);
    const TriMesh m = load_off(in);
    CHECK(m.num_vertices() == 6);
    CHECK(m.num_triangles() == 8);
    CHECK(m.num_edges() == 12);
    CHECK(m.euler_characteristic() == 2);
    CHECK(m.closed());
}

TEST_CASE("load icosahedron OBJ") {
    const TriMesh ico = TriMesh::icosahedron();
    std::ostringstream obj;
    for (const auto& v : ico.vertices()) obj << "v " << v[0] << " " << v[1] << " " << v[2] << "\n";
    obj << "vn 0 0 1\nusemtl none\n";
    for (const auto& t : ico.triangles())
        obj << "f " << t[0] + 1 << "/1/1 " << t[1] + 1 << "/1/1 " << t[2] + 1 << "/1/1\n";
    std::istringstream in(obj.str());
    const TriMesh m = load_obj(in);
    CHECK(m.num_vertices() == 12);
    CHECK(m.num_triangles() == 20);
    CHECK(m.euler_characteristic() == 2);
}

TEST_CASE("OFF with a deleted triangle reports the boundary edge") {
    std::istringstream in(
        "OFF\n6 7 12\n1 0 0\n-1 0 0\n0 1 0\n0 -1 0\n0 0 1\n0 0 -1\n"
        "3 0 2 4\n3 2 1 4\n3 1 3 4\n3 3 0 4\n3 2 0 5\n3 1 2 5\n3 3 1 5\n");
    CHECK_THROWS_WITH_AS(load_off(in), doctest::Contains("open boundary at edge"), MeshError);
}

TEST_CASE("non-manifold edge is detected") {
    std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, -1, 0}};
    std::vector<std::array<Index, 3>> f = {{0, 1, 2}, {0, 1, 3}, {0, 1, 4}};
    CHECK_THROWS_WITH_AS(TriMesh::build(v, f, nullptr, false), doctest::Contains("non-manifold"),
                         MeshError);
}

TEST_CASE("orientation repair by flood fill") {
    // octahedron with a few faces deliberately reversed
    std::vector<Vec3> v = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    std::vector<std::array<Index, 3>> f = {{0, 2, 4}, {1, 2, 4}, {1, 3, 4}, {3, 0, 4},
                                           {2, 0, 5}, {2, 1, 5}, {3, 1, 5}, {0, 3, 5}};
    const TriMesh m = TriMesh::build(v, f, unit_sphere());
    // consistently oriented and outward: every triangle normal points away from the origin
    for (Index t = 0; t < m.num_triangles(); ++t) {
        const auto& tr = m.triangles()[t];
        const Vec3 c = (m.vertices()[tr[0]] + m.vertices()[tr[1]] + m.vertices()[tr[2]]) / 3.0;
        CHECK(m.triangle_normal(t).dot(c) > 0.0);
    }
}

TEST_CASE("refine counts and sphere projection") {
    auto sph = unit_sphere();
    const TriMesh m0 = TriMesh::octahedron(sph);
    const TriMesh m1 = m0.refine();
    CHECK(m1.num_vertices() == 18);  // V + E = 6 + 12
    CHECK(m1.num_triangles() == 32);
    CHECK(m1.level() == 1);
    const TriMesh m2 = m1.refine();
    CHECK(m2.num_vertices() == 66);
    CHECK(m2.num_triangles() == 128);
    for (const auto& v : m2.vertices()) CHECK(std::abs(v.norm() - 1.0) < 1e-12);
    CHECK(m2.euler_characteristic() == 2);
}

TEST_CASE("mesh-only refinement keeps chord midpoints") {
    const TriMesh m0 = TriMesh::octahedron();
    const TriMesh m1 = m0.refine();
    // midpoint of edge (1,0,0)-(0,1,0) stays on the chord
    bool found = false;
    for (const auto& v : m1.vertices())
        if ((v - Vec3(0.5, 0.5, 0.0)).norm() < 1e-14) found = true;
    CHECK(found);
}

TEST_CASE("mesh_size area converges to 4*pi at second order") {
    auto sph = unit_sphere();
    TriMesh m = TriMesh::octahedron(sph).refine();  // start past the coarsest level
    double prev_err = -1.0, prev_h = -1.0;
    for (int l = 0; l < 4; ++l) {
        m = m.refine();
        const MeshSize s = m.size();
        const double err = std::abs(s.area_total - 4.0 * M_PI);
        if (prev_err > 0) {
            const double rate = std::log(prev_err / err) / std::log(prev_h / s.h_max);
            CHECK(rate > 1.7);
            CHECK(s.h_max / prev_h > 0.45);
            CHECK(s.h_max / prev_h < 0.55);
        }
        prev_err = err;
        prev_h = s.h_max;
    }
    CHECK(prev_err < 2e-2);
    CHECK(prev_err / (prev_h * prev_h) < 3.0);  // genuinely O(h^2)
}

TEST_CASE("flat reference triangle area") {
    std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    std::vector<std::array<Index, 3>> f = {{0, 1, 2}};
    const TriMesh m = TriMesh::build(v, f, nullptr, false);
    CHECK(m.size().area_total == doctest::Approx(0.5));
    CHECK_FALSE(m.closed());
}

TEST_CASE("quadrature weights sum to the mesh area") {
    auto sph = unit_sphere();
    const TriMesh m = TriMesh::icosahedron(sph).refine();
    for (int order : {2, 4, 6}) {
        double sum = 0.0;
        for (const auto& tri : m.quadrature(order))
            for (const auto& qp : tri) sum += qp.w;
        CHECK(sum == doctest::Approx(m.size().area_total).epsilon(1e-13));
    }
    // exact geometric data at quadrature points on the sphere: B has trace 2
    for (const auto& qp : m.quadrature(4)[0]) {
        CHECK(std::abs(qp.x_lift.norm() - 1.0) < 1e-12);
        CHECK(qp.B.trace() == doctest::Approx(2.0));
    }
}

TEST_CASE("quadrature integrates quartics exactly on the reference triangle") {
    std::vector<Vec3> v = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    std::vector<std::array<Index, 3>> f = {{0, 1, 2}};
    const TriMesh m = TriMesh::build(v, f, nullptr, false);
    // int_T x^2 y^2 = 1/180, int_T x^4 = 1/30 over the unit reference triangle
    double i22 = 0.0, i40 = 0.0;
    for (const auto& qp : m.quadrature(4)[0]) {
        i22 += qp.w * qp.x[0] * qp.x[0] * qp.x[1] * qp.x[1];
        i40 += qp.w * qp.x[0] * qp.x[0] * qp.x[0] * qp.x[0];
    }
    CHECK(i22 == doctest::Approx(1.0 / 180.0).epsilon(1e-13));
    CHECK(i40 == doctest::Approx(1.0 / 30.0).epsilon(1e-13));
}

TEST_CASE("torus grid and refinement") {
    auto tor = std::make_shared<Surface>(Surface::torus(2.0, 1.0));
    const TriMesh m = TriMesh::torus_grid(8, 16, tor);
    CHECK(m.euler_characteristic() == 0);
    CHECK(m.closed());
    const TriMesh r = m.refine();
    CHECK(r.euler_characteristic() == 0);
    // refined vertices lie on the torus
    for (const auto& v : r.vertices()) CHECK((tor->closest_point(v) - v).norm() < 1e-12);
    // area approaches 4*pi^2*R*r = 78.95...
    TriMesh fine = r.refine().refine();
    CHECK(fine.size().area_total == doctest::Approx(4.0 * M_PI * M_PI * 2.0).epsilon(5e-3));
}

TEST_CASE("off round trip") {
    const TriMesh m = TriMesh::icosahedron(unit_sphere()).refine();
    const std::string path = "test_roundtrip.off";
    m.write_off(path);
    const TriMesh n = load_mesh(path);
    REQUIRE(n.num_vertices() == m.num_vertices());
    CHECK(n.num_triangles() == m.num_triangles());
    for (Index i = 0; i < n.num_vertices(); ++i)
        CHECK((n.vertices()[i] - m.vertices()[i]).norm() == 0.0);
    std::remove(path.c_str());
}
