// SPDX-License-Identifier: Apache-2.0
//
// cfmimo: hybrid beamforming and pilot assignment for cell-free massive MIMO
// Copyright (C) 2026 The cfmimo authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef CFMIMO_LINALG_HPP
#define CFMIMO_LINALG_HPP

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "cfmimo/core.hpp"

namespace cfmimo
{

inline CMat hermitianize(const CMat& a)
{
    return 0.5 * (a + a.adjoint());
}

// tr(A B) without forming the product.
inline cplx trace_product(const CMat& a, const CMat& b)
{
    return (a.transpose().array() * b.array()).sum();
}

// Relative Hermitian defect ||A - A^*||_F / ||A||_F (0 for the zero matrix).
inline double hermitian_defect(const CMat& a)
{
    const double n = a.norm();
    return n == 0.0 ? 0.0 : (a - a.adjoint()).norm() / n;
}

struct HermitianEigen
{
    RVec values;  // descending
    CMat vectors; // columns match values
};

// Eigendecomposition of a Hermitian matrix with eigenvalues sorted in
// descending order. Eigenvalues within `clamp_tol * max|lambda|` below zero are
// clamped to zero; anything more negative is reported as not PSD when
// `require_psd` is set.
inline HermitianEigen eig_hermitian_desc(const CMat& a, bool require_psd = false, double clamp_tol = 1e-12)
{
    Eigen::SelfAdjointEigenSolver<CMat> solver(hermitianize(a));
    if (solver.info() != Eigen::Success)
        throw NumericalError("Hermitian eigendecomposition failed");
    const Eigen::Index n = a.rows();
    HermitianEigen out;
    out.values = solver.eigenvalues().reverse();
    out.vectors = solver.eigenvectors().rowwise().reverse();
    const double scale = n > 0 ? out.values.cwiseAbs().maxCoeff() : 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (out.values(i) < 0.0) {
            if (require_psd && out.values(i) < -clamp_tol * std::max(scale, 1e-300))
                throw NumericalError("matrix is not positive semidefinite");
            if (out.values(i) >= -clamp_tol * std::max(scale, 1e-300))
                out.values(i) = 0.0;
        }
    }
    return out;
}

// Solves A X = B for Hermitian positive definite A with an LDL^T
// factorization. If the factorization is unusable a diagonal jitter of
// 1e-12 * (tr A / n) is added once before giving up.
inline CMat solve_hpd(const CMat& a, const CMat& b)
{
    const CMat h = hermitianize(a);
    auto attempt = [&](const CMat& m, CMat& x) {
        Eigen::LDLT<CMat> ldlt(m);
        if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
            return false;
        x = ldlt.solve(b);
        return x.allFinite();
    };
    CMat x;
    if (attempt(h, x))
        return x;
    const double n = static_cast<double>(std::max<Eigen::Index>(h.rows(), 1));
    double jitter = 1e-12 * std::abs(h.trace().real()) / n;
    if (jitter == 0.0)
        jitter = 1e-300;
    const CMat reg = h + jitter * CMat::Identity(h.rows(), h.cols());
    if (attempt(reg, x))
        return x;
    throw NumericalError("Hermitian solve failed: matrix is not positive definite");
}

inline CVec solve_hpd(const CMat& a, const CVec& b)
{
    return solve_hpd(a, CMat(b)).col(0);
}

inline CMat inverse_hpd(const CMat& a)
{
    return hermitianize(solve_hpd(a, CMat(CMat::Identity(a.rows(), a.cols()))));
}

// 2-norm condition number of a Hermitian PSD matrix (inf if singular).
inline double condition_number_hpd(const CMat& a)
{
    if (a.rows() == 0)
        return 1.0;
    Eigen::SelfAdjointEigenSolver<CMat> solver(hermitianize(a), Eigen::EigenvaluesOnly);
    const double lo = solver.eigenvalues().minCoeff();
    const double hi = solver.eigenvalues().maxCoeff();
    if (lo <= 0.0)
        return std::numeric_limits<double>::infinity();
    return hi / lo;
}

// Orthonormal basis of the column span with per-column rank detection.
// Columns whose residual after projection falls below `tol` times their own
// norm are reported in `rejected` and skipped. Uses modified Gram-Schmidt
// with one reorthogonalization pass, so the basis equals the Q factor of a
// QR decomposition with positive real R diagonal and is exactly idempotent on
// orthonormal input.
struct OrthonormalBasis
{
    CMat basis;
    std::vector<Eigen::Index> accepted;
    std::vector<Eigen::Index> rejected;
};

inline OrthonormalBasis orthonormalize_columns(const CMat& a, Eigen::Index max_cols = -1, double tol = 1e-8)
{
    if (max_cols < 0)
        max_cols = a.cols();
    OrthonormalBasis out;
    out.basis.resize(a.rows(), 0);
    std::vector<CVec> q;
    for (Eigen::Index c = 0; c < a.cols() && static_cast<Eigen::Index>(q.size()) < max_cols; ++c) {
        CVec v = a.col(c);
        const double norm0 = v.norm();
        if (norm0 == 0.0) {
            out.rejected.push_back(c);
            continue;
        }
        for (int pass = 0; pass < 2; ++pass)
            for (const CVec& u : q)
                v -= u * u.dot(v);
        const double norm1 = v.norm();
        if (norm1 <= tol * norm0) {
            out.rejected.push_back(c);
            continue;
        }
        q.push_back(v / norm1);
        out.accepted.push_back(c);
    }
    out.basis.resize(a.rows(), static_cast<Eigen::Index>(q.size()));
    for (std::size_t i = 0; i < q.size(); ++i)
        out.basis.col(static_cast<Eigen::Index>(i)) = q[i];
    return out;
}

// Orthogonal projector onto span(Q) for Q with orthonormal columns.
inline CMat projector(const CMat& q)
{
    return q * q.adjoint();
}

// ---------------------------------------------------------------------------
// Block-diagonal Hermitian algebra.
//
// Every covariance in the pipeline is block diagonal over APs, so the
// resolvents of the asymptotic analysis never need dense ML x ML storage.
// BlockDiag supports exactly the operations used by the fixed-point solvers;
// the same templates also run on dense CMat for the generic oracles.
// ---------------------------------------------------------------------------

class BlockDiag
{
  public:
    BlockDiag() = default;
    explicit BlockDiag(std::vector<CMat> blocks) : blocks_(std::move(blocks)) {}

    static BlockDiag zeros(std::size_t count, Eigen::Index block_dim)
    {
        return BlockDiag(std::vector<CMat>(count, CMat::Zero(block_dim, block_dim)));
    }

    static BlockDiag identity(std::size_t count, Eigen::Index block_dim)
    {
        return BlockDiag(std::vector<CMat>(count, CMat::Identity(block_dim, block_dim)));
    }

    std::size_t count() const { return blocks_.size(); }
    CMat& block(std::size_t i) { return blocks_[i]; }
    const CMat& block(std::size_t i) const { return blocks_[i]; }
    const std::vector<CMat>& blocks() const { return blocks_; }

    Eigen::Index dim() const
    {
        Eigen::Index d = 0;
        for (const auto& b : blocks_)
            d += b.rows();
        return d;
    }

    CMat dense() const
    {
        const Eigen::Index n = dim();
        CMat out = CMat::Zero(n, n);
        Eigen::Index off = 0;
        for (const auto& b : blocks_) {
            out.block(off, off, b.rows(), b.cols()) = b;
            off += b.rows();
        }
        return out;
    }

    BlockDiag& operator+=(const BlockDiag& o)
    {
        for (std::size_t i = 0; i < blocks_.size(); ++i)
            blocks_[i] += o.blocks_[i];
        return *this;
    }

    BlockDiag& operator*=(double s)
    {
        for (auto& b : blocks_)
            b *= s;
        return *this;
    }

    friend BlockDiag operator+(BlockDiag a, const BlockDiag& b) { return a += b; }
    friend BlockDiag operator*(double s, BlockDiag a) { return a *= s; }

    friend BlockDiag operator*(const BlockDiag& a, const BlockDiag& b)
    {
        std::vector<CMat> out(a.blocks_.size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = a.blocks_[i] * b.blocks_[i];
        return BlockDiag(std::move(out));
    }

  private:
    std::vector<CMat> blocks_;
};

inline cplx trace_product(const BlockDiag& a, const BlockDiag& b)
{
    cplx t = 0.0;
    for (std::size_t i = 0; i < a.count(); ++i)
        t += trace_product(a.block(i), b.block(i));
    return t;
}

inline cplx trace(const BlockDiag& a)
{
    cplx t = 0.0;
    for (const auto& b : a.blocks())
        t += b.trace();
    return t;
}

inline cplx trace(const CMat& a)
{
    return a.trace();
}

inline BlockDiag inverse_hpd(const BlockDiag& a)
{
    std::vector<CMat> out;
    out.reserve(a.count());
    for (const auto& b : a.blocks())
        out.push_back(b.rows() == 0 ? b : inverse_hpd(b));
    return BlockDiag(std::move(out));
}

inline BlockDiag hermitianize(const BlockDiag& a)
{
    std::vector<CMat> out;
    out.reserve(a.count());
    for (const auto& b : a.blocks())
        out.push_back(hermitianize(b));
    return BlockDiag(std::move(out));
}

inline BlockDiag zeros_like(const BlockDiag& a)
{
    std::vector<CMat> out;
    out.reserve(a.count());
    for (const auto& b : a.blocks())
        out.push_back(CMat::Zero(b.rows(), b.cols()));
    return BlockDiag(std::move(out));
}

inline CMat zeros_like(const CMat& a)
{
    return CMat::Zero(a.rows(), a.cols());
}

inline BlockDiag identity_like(const BlockDiag& a)
{
    std::vector<CMat> out;
    out.reserve(a.count());
    for (const auto& b : a.blocks())
        out.push_back(CMat::Identity(b.rows(), b.cols()));
    return BlockDiag(std::move(out));
}

inline CMat identity_like(const CMat& a)
{
    return CMat::Identity(a.rows(), a.cols());
}

inline Eigen::Index dimension(const CMat& a)
{
    return a.rows();
}

inline Eigen::Index dimension(const BlockDiag& a)
{
    return a.dim();
}

} // namespace cfmimo

#endif
