// Copyright 2026 The qfeedback Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qfb/quantum_core.h"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "qfb/errors.h"

namespace qfb {

bool all_finite(const ComplexMatrix &m) {
    return m.allFinite();
}

double hermiticity_defect(const ComplexMatrix &m) {
    if (m.size() == 0) {
        return 0.0;
    }
    return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

double min_eigenvalue(const ComplexMatrix &m) {
    ComplexMatrix h = (m + m.adjoint()) * 0.5;
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(h, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().minCoeff();
}

void require_square_finite(const ComplexMatrix &m, std::string_view what) {
    if (m.rows() == 0 || m.rows() != m.cols()) {
        throw InvalidArgument(fmt::format("{} must be a non-empty square matrix (got {}x{})", what, m.rows(), m.cols()));
    }
    if (!all_finite(m)) {
        throw InvalidArgument(fmt::format("{} has non-finite entries", what));
    }
}

namespace pauli {
ComplexMatrix x() {
    ComplexMatrix m(2, 2);
    m << 0, 1, 1, 0;
    return m;
}
ComplexMatrix y() {
    ComplexMatrix m(2, 2);
    m << 0, Complex(0, -1), Complex(0, 1), 0;
    return m;
}
ComplexMatrix z() {
    ComplexMatrix m(2, 2);
    m << 1, 0, 0, -1;
    return m;
}
}  // namespace pauli

DensityMatrix::DensityMatrix(ComplexMatrix mat, const ToleranceSettings &tol) : mat_(std::move(mat)) {
    require_square_finite(mat_, "density matrix");
    double herm = hermiticity_defect(mat_);
    if (herm > tol.hermiticity) {
        throw InvalidArgument(fmt::format("density matrix is not Hermitian (defect {:.3e})", herm));
    }
    double tr = mat_.trace().real();
    if (std::abs(tr - 1.0) > tol.unit_trace) {
        throw InvalidArgument(fmt::format("density matrix trace is {:.17g}, expected 1", tr));
    }
    double lo = min_eigenvalue(mat_);
    if (lo < -tol.psd_eigenvalue) {
        throw InvalidArgument(fmt::format("density matrix is not positive semidefinite (min eigenvalue {:.3e})", lo));
    }
}

DensityMatrix DensityMatrix::pure(const ComplexVector &psi) {
    double norm = psi.norm();
    if (!(norm > 0.0) || !std::isfinite(norm)) {
        throw InvalidArgument("pure state vector must have finite non-zero norm");
    }
    ComplexVector v = psi / norm;
    return DensityMatrix(Unchecked{}, v * v.adjoint());
}

DensityMatrix DensityMatrix::basis_state(Eigen::Index dim, Eigen::Index k) {
    if (k < 0 || k >= dim) {
        throw InvalidArgument(fmt::format("basis index {} out of range for dimension {}", k, dim));
    }
    ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
    m(k, k) = 1.0;
    return DensityMatrix(Unchecked{}, std::move(m));
}

DensityMatrix DensityMatrix::maximally_mixed(Eigen::Index dim) {
    if (dim <= 0) {
        throw InvalidArgument("dimension must be positive");
    }
    return DensityMatrix(Unchecked{}, ComplexMatrix::Identity(dim, dim) / static_cast<double>(dim));
}

DensityMatrix WeightedState::normalized(const ToleranceSettings &tol) const {
    double tr = trace();
    if (!(tr >= tol.unnormalizable_probability)) {
        throw NumericalError(fmt::format("cannot normalize a state of trace {:.3e}", tr));
    }
    ComplexMatrix m = mat / tr;
    // Re-symmetrize so rounding never accumulates an anti-Hermitian part.
    m = (m + m.adjoint()).eval() * 0.5;
    return DensityMatrix(DensityMatrix::Unchecked{}, std::move(m));
}

bool is_valid_weighted_state(const WeightedState &w, const ToleranceSettings &tol) {
    if (w.mat.rows() == 0 || w.mat.rows() != w.mat.cols() || !all_finite(w.mat)) {
        return false;
    }
    if (hermiticity_defect(w.mat) > tol.hermiticity) {
        return false;
    }
    double tr = w.trace();
    if (tr < -tol.psd_eigenvalue || tr > 1.0 + tol.unit_trace) {
        return false;
    }
    return min_eigenvalue(w.mat) >= -tol.psd_eigenvalue;
}

double completeness_defect(std::span<const ComplexMatrix> ops) {
    if (ops.empty()) {
        return std::numeric_limits<double>::infinity();
    }
    Eigen::Index d = ops.front().rows();
    ComplexMatrix sum = ComplexMatrix::Zero(d, d);
    for (const auto &k : ops) {
        sum.noalias() += k.adjoint() * k;
    }
    return (sum - ComplexMatrix::Identity(d, d)).cwiseAbs().maxCoeff();
}

namespace {

Eigen::Index check_operator_family(const std::vector<ComplexMatrix> &ops, std::string_view what,
                                   double completeness_tol) {
    if (ops.empty()) {
        throw InvalidArgument(fmt::format("{} needs at least one operator", what));
    }
    Eigen::Index d = ops.front().rows();
    for (const auto &k : ops) {
        require_square_finite(k, what);
        if (k.rows() != d) {
            throw DimensionError(fmt::format("{} mixes dimensions {} and {}", what, d, k.rows()));
        }
    }
    double defect = completeness_defect(ops);
    if (defect > completeness_tol) {
        throw InvalidArgument(fmt::format("{} violates completeness (defect {:.3e})", what, defect));
    }
    return d;
}

std::vector<double> default_labels(std::size_t n) {
    std::vector<double> labels(n);
    for (std::size_t k = 0; k < n; ++k) {
        labels[k] = static_cast<double>(k);
    }
    return labels;
}

}  // namespace

KrausSet::KrausSet(std::vector<ComplexMatrix> operators, std::vector<double> outcome_values,
                   const ToleranceSettings &tol)
    : dim_(check_operator_family(operators, "Kraus set", tol.completeness)),
      operators_(std::move(operators)),
      outcome_values_(std::move(outcome_values)) {
    if (outcome_values_.size() != operators_.size()) {
        throw DimensionError(fmt::format("Kraus set has {} operators but {} outcome labels", operators_.size(),
                                         outcome_values_.size()));
    }
    for (double v : outcome_values_) {
        if (!std::isfinite(v)) {
            throw InvalidArgument("outcome labels must be finite");
        }
    }
}

KrausSet::KrausSet(std::vector<ComplexMatrix> operators)
    : KrausSet(operators, default_labels(operators.size())) {
}

QuantumChannel::QuantumChannel(std::vector<ComplexMatrix> kraus_ops, const ToleranceSettings &tol)
    : kraus_ops_(std::move(kraus_ops)) {
    check_operator_family(kraus_ops_, "quantum channel", tol.completeness);
}

QuantumChannel QuantumChannel::identity(Eigen::Index dim) {
    return QuantumChannel({ComplexMatrix::Identity(dim, dim)});
}

QuantumChannel QuantumChannel::unitary(ComplexMatrix u, const ToleranceSettings &tol) {
    require_square_finite(u, "unitary");
    double defect = (u.adjoint() * u - ComplexMatrix::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff();
    if (defect > tol.unitarity) {
        throw InvalidArgument(fmt::format("matrix is not unitary (defect {:.3e})", defect));
    }
    return QuantumChannel({std::move(u)}, tol);
}

std::vector<double> born_probabilities(const KrausSet &kraus, const DensityMatrix &rho, const ToleranceSettings &tol) {
    if (kraus.dim() != rho.dim()) {
        throw DimensionError(fmt::format("Kraus dimension {} does not match state dimension {}", kraus.dim(), rho.dim()));
    }
    std::vector<double> probs;
    probs.reserve(kraus.num_outcomes());
    double total = 0.0;
    for (const auto &k : kraus.operators()) {
        double p = (k * rho.mat() * k.adjoint()).trace().real();
        if (!std::isfinite(p)) {
            throw NumericalError("Born probability is not finite; the Kraus operators are invalid");
        }
        p = std::clamp(p, 0.0, 1.0);
        total += p;
        probs.push_back(p);
    }
    if (std::abs(total - 1.0) > tol.probability_sum) {
        throw NumericalError(fmt::format("Born probabilities sum to {:.17g}", total));
    }
    return probs;
}

MeasurementBranch post_measurement_state(const ComplexMatrix &k, const DensityMatrix &rho,
                                         const ToleranceSettings &tol) {
    if (k.rows() != rho.dim() || k.cols() != rho.dim()) {
        throw DimensionError(fmt::format("operator is {}x{} but the state has dimension {}", k.rows(), k.cols(),
                                         rho.dim()));
    }
    WeightedState out = conjugate(k, WeightedState::from(rho));
    double p = out.trace();
    return MeasurementBranch{std::move(out), p, p >= tol.unnormalizable_probability};
}

WeightedState conjugate(const ComplexMatrix &k, const WeightedState &rho) {
    return WeightedState(k * rho.mat * k.adjoint());
}

WeightedState apply_channel(const QuantumChannel &ch, const WeightedState &rho) {
    if (ch.dim() != rho.dim()) {
        throw DimensionError(fmt::format("channel dimension {} does not match state dimension {}", ch.dim(), rho.dim()));
    }
    const auto &ops = ch.kraus_ops();
    if (ops.size() == 1) {
        return conjugate(ops.front(), rho);
    }
    ComplexMatrix out = ComplexMatrix::Zero(rho.dim(), rho.dim());
    for (const auto &k : ops) {
        out.noalias() += k * rho.mat * k.adjoint();
    }
    return WeightedState(std::move(out));
}

ComplexMatrix matrix_exponential(const ComplexMatrix &a) {
    require_square_finite(a, "matrix exponential argument");
    ComplexMatrix result = a.exp();
    if (!all_finite(result)) {
        throw NumericalError(fmt::format("matrix exponential overflowed (argument 1-norm {:.3e})",
                                         a.cwiseAbs().colwise().sum().maxCoeff()));
    }
    return result;
}

}  // namespace qfb
