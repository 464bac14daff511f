#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace surfpde {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using VectorX = Eigen::VectorXd;
using MatrixX = Eigen::MatrixXd;
using Index = std::int32_t;

/// Base for all errors raised by the library; carries a short category tag.
class Error : public std::runtime_error {
public:
    Error(std::string category, const std::string& what)
        : std::runtime_error(category + ": " + what), category_(std::move(category)) {}
    const std::string& category() const { return category_; }

private:
    std::string category_;
};

struct ProjectionError : Error {
    explicit ProjectionError(const std::string& w) : Error("projection", w) {}
};
struct RankDeficiencyError : Error {
    explicit RankDeficiencyError(const std::string& w) : Error("rank-deficiency", w) {}
};
struct MeshError : Error {
    explicit MeshError(const std::string& w) : Error("mesh", w) {}
};
struct SolverError : Error {
    explicit SolverError(const std::string& w) : Error("solver", w) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error("config", w) {}
};

}  // namespace surfpde
