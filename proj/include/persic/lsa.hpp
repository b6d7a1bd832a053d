#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "persic/tfidf.hpp"

namespace persic {

struct LsaModel {
    Mat projection;       // V x k, columns are top right singular vectors, unit norm
    Vec singular_values;  // descending, length k
    int k = 0;

    Vec transform(const SparseVec& row) const {
        Vec out = Vec::Zero(k);
        for (const auto& [t, w] : row) out += w * projection.row(t).transpose();
        return out;
    }

    Vec transform(const Vec& dense) const { return projection.transpose() * dense; }
};

// Top-k right singular vectors via the smaller of the two Gram matrices:
// X^T X (V x V) when V <= N, otherwise X X^T (N x N) with v = X^T u / sigma.
// Column signs are fixed so the largest-magnitude entry is positive.
inline LsaModel fit_lsa(const std::vector<SparseVec>& rows, int vocab_size, int k) {
    const int n = static_cast<int>(rows.size());
    const int v = vocab_size;
    if (n == 0 || v == 0) fail("LSA input matrix is empty");
    if (k < 1) fail("LSA dimension must be at least 1, got ", k);
    if (k > std::min(n, v))
        fail("LSA dimension ", k, " exceeds min(rows, vocabulary) = ", std::min(n, v));

    Mat gram;
    const bool vocab_side = v <= n;
    if (vocab_side) {
        gram = Mat::Zero(v, v);
        for (const auto& row : rows)
            for (const auto& [i, wi] : row)
                for (const auto& [j, wj] : row) gram(i, j) += wi * wj;
    } else {
        gram = Mat::Zero(n, n);
        for (int a = 0; a < n; ++a) {
            gram(a, a) = sparse_dot(rows[a], rows[a]);
            for (int b = a + 1; b < n; ++b) {
                const double d = sparse_dot(rows[a], rows[b]);
                gram(a, b) = d;
                gram(b, a) = d;
            }
        }
    }

    Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
    if (eig.info() != Eigen::Success) fail("LSA eigendecomposition failed to converge");
    const Vec& evals = eig.eigenvalues();  // ascending
    const int m = static_cast<int>(evals.size());

    const double tol = std::max(evals[m - 1], 0.0) * m * 1e-12;
    int rank = 0;
    for (int i = 0; i < m; ++i)
        if (evals[i] > tol) ++rank;
    if (k > rank) fail("LSA dimension ", k, " exceeds matrix rank; achievable rank is ", rank);

    LsaModel model;
    model.k = k;
    model.projection.resize(v, k);
    model.singular_values.resize(k);
    for (int c = 0; c < k; ++c) {
        const int src = m - 1 - c;  // descending eigenvalue order
        const double sigma = std::sqrt(std::max(evals[src], 0.0));
        model.singular_values[c] = sigma;
        Vec col;
        if (vocab_side) {
            col = eig.eigenvectors().col(src);
        } else {
            col = Vec::Zero(v);
            const Vec u = eig.eigenvectors().col(src);
            for (int a = 0; a < n; ++a)
                for (const auto& [t, w] : rows[a]) col[t] += w * u[a];
            col /= sigma;
            col.normalize();  // guard against eigenvalue round-off
        }
        int arg = 0;
        for (int i = 1; i < v; ++i)
            if (std::abs(col[i]) > std::abs(col[arg])) arg = i;
        if (col[arg] < 0.0) col = -col;
        model.projection.col(c) = col;
    }
    return model;
}

}  // namespace persic
