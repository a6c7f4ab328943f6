// Copyright 2026 The Retroptics Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Eigenvalues>

#include <stdexcept>
#include <vector>

#include "retroptics/fock.hpp"

// Symmetric preparation/measurement probability calculus: joint, marginal,
// and conditional probabilities from unnormalized non-negative device
// operator sets, plus conditional reduction of a composite-system operator
// to an effective single-subsystem operator.
namespace retroptics {

enum class DeviceRole { preparation, measurement };
enum class Direction { predictive, retrodictive };

// Unnormalized non-negative operators describing one device: the i-th entry
// encodes "event i happened at this device". Overall scale is arbitrary and
// cancels in every probability.
template <typename Real>
struct DeviceOperatorSet {
  DeviceRole role = DeviceRole::preparation;
  std::vector<CMatrix<Real>> ops;
  int dimension = 0;

  CMatrix<Real> sum() const {
    CMatrix<Real> s = CMatrix<Real>::Zero(dimension, dimension);
    for (const auto& op : ops) s += op;
    return s;
  }
  // Explicit validity check (not enforced per mutation): smallest eigenvalue
  // across all operators, >= -1e-10 for a well-formed device.
  Real min_eigenvalue() const {
    Real lo = Real(0);
    for (const auto& op : ops) {
      Eigen::SelfAdjointEigenSolver<CMatrix<Real>> es(
          ((op + op.adjoint()) / Real(2)).eval());
      lo = std::min(lo, es.eigenvalues().minCoeff());
    }
    return lo;
  }
};

template <typename Real>
DeviceOperatorSet<Real> make_device(DeviceRole role,
                                    std::vector<CMatrix<Real>> ops) {
  if (ops.empty()) throw std::invalid_argument("device needs operators");
  DeviceOperatorSet<Real> d;
  d.role = role;
  d.ops = std::move(ops);
  d.dimension = int(d.ops.front().rows());
  for (const auto& op : d.ops)
    if (op.rows() != d.dimension || op.cols() != d.dimension)
      throw std::invalid_argument("dimension mismatch");
  return d;
}

namespace detail {

template <typename Real>
Real real_trace_product(const CMatrix<Real>& a, const CMatrix<Real>& b) {
  return (a * b).trace().real();
}

template <typename Real>
void check_pair(const DeviceOperatorSet<Real>& prep,
                const DeviceOperatorSet<Real>& meas) {
  if (prep.role != DeviceRole::preparation ||
      meas.role != DeviceRole::measurement)
    throw std::invalid_argument("expected a preparation/measurement pair");
  if (prep.dimension != meas.dimension)
    throw std::invalid_argument("dimension mismatch");
}

}  // namespace detail

// Tr[Lambda_i Gamma_j] / Tr[Lambda Gamma]; sums to one over all label pairs.
template <typename Real>
Real joint_probability(const DeviceOperatorSet<Real>& prep,
                       const DeviceOperatorSet<Real>& meas, int i, int j) {
  detail::check_pair(prep, meas);
  const Real denom = detail::real_trace_product(prep.sum(), meas.sum());
  const Real scale = std::abs(prep.sum().trace()) * std::abs(meas.sum().trace());
  if (!(denom > scale * Real(1e-14)))
    throw std::runtime_error("degenerate device pair");
  return detail::real_trace_product(prep.ops.at(i), meas.ops.at(j)) / denom;
}

// Predictive: Tr[Lambda_i Gamma_j] / Tr[Lambda_i Gamma], given preparation i.
// Retrodictive: Tr[Lambda_i Gamma_j] / Tr[Lambda Gamma_j], given outcome j.
// Over the queried label the values sum to one.
template <typename Real>
Real conditional_probability(const DeviceOperatorSet<Real>& prep,
                             const DeviceOperatorSet<Real>& meas,
                             Direction direction, int given, int query) {
  detail::check_pair(prep, meas);
  Real num, denom;
  if (direction == Direction::predictive) {
    num = detail::real_trace_product(prep.ops.at(given), meas.ops.at(query));
    denom = detail::real_trace_product(prep.ops.at(given), meas.sum());
  } else {
    num = detail::real_trace_product(prep.ops.at(query), meas.ops.at(given));
    denom = detail::real_trace_product(prep.sum(), meas.ops.at(given));
  }
  const Real scale = std::abs(prep.sum().trace()) * std::abs(meas.sum().trace());
  if (!(denom > scale * Real(1e-15)))
    throw std::runtime_error("conditioning event has zero probability");
  return num / denom;
}

// Kronecker product with subsystem a major: (a, b) -> a * dim_b + b.
template <typename Real>
CMatrix<Real> kron(const CMatrix<Real>& a, const CMatrix<Real>& b) {
  CMatrix<Real> out(a.rows() * b.rows(), a.cols() * b.cols());
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

// Tr_traced[joint_op (partner_op (x) 1)] on the composite Hilbert space
// dim_a x dim_b flattened with subsystem a major. keep selects which
// subsystem the returned (unnormalized, non-negative for PSD inputs)
// operator acts on; partner_op acts on the other one.
template <typename Real>
CMatrix<Real> reduce_composite(const CMatrix<Real>& joint_op,
                               const CMatrix<Real>& partner_op, int keep,
                               int dim_a, int dim_b) {
  if (keep != 0 && keep != 1)
    throw std::invalid_argument("keep must select subsystem 0 or 1");
  if (joint_op.rows() != dim_a * dim_b || joint_op.cols() != dim_a * dim_b)
    throw std::invalid_argument("dimension mismatch");
  const int dim_partner = keep == 0 ? dim_b : dim_a;
  if (partner_op.rows() != dim_partner || partner_op.cols() != dim_partner)
    throw std::invalid_argument("dimension mismatch");
  auto flat = [dim_b](int a, int b) { return a * dim_b + b; };
  if (keep == 1) {
    CMatrix<Real> m = CMatrix<Real>::Zero(dim_b, dim_b);
    for (int b = 0; b < dim_b; ++b)
      for (int b2 = 0; b2 < dim_b; ++b2)
        for (int a = 0; a < dim_a; ++a)
          for (int a2 = 0; a2 < dim_a; ++a2)
            m(b, b2) += joint_op(flat(a, b), flat(a2, b2)) * partner_op(a2, a);
    return m;
  }
  CMatrix<Real> m = CMatrix<Real>::Zero(dim_a, dim_a);
  for (int a = 0; a < dim_a; ++a)
    for (int a2 = 0; a2 < dim_a; ++a2)
      for (int b = 0; b < dim_b; ++b)
        for (int b2 = 0; b2 < dim_b; ++b2)
          m(a, a2) += joint_op(flat(a, b), flat(a2, b2)) * partner_op(b2, b);
  return m;
}

}  // namespace retroptics
