#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace popgrad {

using RealVector = Eigen::VectorXd;
using RealMatrix = Eigen::MatrixXd;

// Gradient of the population loss, row i = dL/dw_i (n x d).
using GradientMatrix = Eigen::MatrixXd;
// Dense (n*d) x (n*d) Hessian, organized in d x d blocks.
using HessianMatrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Error taxonomy. All conditions are hard errors, never silent perturbations.
// ---------------------------------------------------------------------------

struct ZeroVector : std::domain_error {
    ZeroVector() : std::domain_error("vector norm below 1e-300") {}
};

struct DegenerateNeuron : std::domain_error {
    int index;
    explicit DegenerateNeuron(int i)
        : std::domain_error("student neuron " + std::to_string(i) + " has zero norm"),
          index(i) {}
};

struct DegenerateUpdate : std::domain_error {
    int index;
    explicit DegenerateUpdate(int i)
        : std::domain_error("gradient step drove neuron " + std::to_string(i) + " to zero"),
          index(i) {}
};

struct NonFinite : std::runtime_error {
    explicit NonFinite(const std::string& what) : std::runtime_error(what) {}
};

struct StiffnessFailure : std::runtime_error {
    explicit StiffnessFailure(double t)
        : std::runtime_error("ODE step size underflow at t=" + std::to_string(t)) {}
};

struct BadParam : std::invalid_argument {
    explicit BadParam(const std::string& what) : std::invalid_argument(what) {}
};

struct NotSymmetric : std::domain_error {
    explicit NotSymmetric(const std::string& what) : std::domain_error(what) {}
};

struct BadProjection : std::domain_error {
    BadProjection() : std::domain_error("sum of projections h_j is not positive") {}
};

struct InsufficientData : std::runtime_error {
    explicit InsufficientData(const std::string& what) : std::runtime_error(what) {}
};

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// The n student neurons w_1..w_n as rows of an n x d matrix.
struct StudentParams {
    RealMatrix neurons;  // n x d, row i is w_i

    StudentParams() = default;
    explicit StudentParams(RealMatrix m) : neurons(std::move(m)) {}

    int n() const { return static_cast<int>(neurons.rows()); }
    int d() const { return static_cast<int>(neurons.cols()); }

    auto row(int i) const { return neurons.row(i); }

    bool all_finite() const { return neurons.allFinite(); }
};

// The single teacher neuron v with its cached norm.
struct TeacherConfig {
    RealVector v;
    double norm_v = 0.0;

    static TeacherConfig from_vector(RealVector vec) {
        if (!vec.allFinite()) throw NonFinite("teacher vector has non-finite entries");
        const double nv = vec.norm();
        if (nv < 1e-300) throw ZeroVector{};
        return TeacherConfig{std::move(vec), nv};
    }

    int d() const { return static_cast<int>(v.size()); }

    RealVector unit() const { return v / norm_v; }

    // Deterministic unit vector orthogonal to v: Gram-Schmidt against the
    // standard basis vector least aligned with v (stable as long as v is
    // fixed, used as the reference direction for symmetric toy pairs).
    RealVector canonical_perp() const {
        if (d() < 2) throw BadParam("canonical_perp requires d >= 2");
        int k = 0;
        double best = std::abs(v[0]);
        for (int i = 1; i < d(); ++i) {
            if (std::abs(v[i]) < best) {
                best = std::abs(v[i]);
                k = i;
            }
        }
        RealVector e = RealVector::Zero(d());
        e[k] = 1.0;
        RealVector p = e - (v.dot(e) / (norm_v * norm_v)) * v;
        return p / p.norm();
    }
};

inline void require_finite(const StudentParams& w, const char* where) {
    if (!w.all_finite()) throw NonFinite(std::string(where) + ": non-finite student parameters");
}

}  // namespace popgrad
