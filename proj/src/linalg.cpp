#include "bfront/linalg.hpp"

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <vector>

namespace bfront {

namespace {

struct Block {
  int start;
  int size;
};

std::vector<Block> schur_blocks(const Matrix& T) {
  std::vector<Block> blocks;
  const int n = static_cast<int>(T.rows());
  int i = 0;
  while (i < n) {
    int p = 1;
    if (i + 1 < n) {
      const double scale = std::abs(T(i, i)) + std::abs(T(i + 1, i + 1)) + 1e-300;
      if (std::abs(T(i + 1, i)) > 1e-13 * scale) p = 2;
    }
    blocks.push_back({i, p});
    i += p;
  }
  return blocks;
}

double block_real_part(const Matrix& T, const Block& b) {
  if (b.size == 1) return T(b.start, b.start);
  return 0.5 * (T(b.start, b.start) + T(b.start + 1, b.start + 1));
}

// Swaps the adjacent diagonal blocks of sizes p and q starting at row j.
void swap_blocks(Matrix& T, Matrix& U, int j, int p, int q) {
  const int m = p + q;
  const Matrix A11 = T.block(j, j, p, p);
  const Matrix A12 = T.block(j, j + p, p, q);
  const Matrix A22 = T.block(j + p, j + p, q, q);
  // A11 X - X A22 = A12, vectorized column-major.
  const Matrix K = Eigen::kroneckerProduct(Matrix::Identity(q, q), A11).eval() -
                   Eigen::kroneckerProduct(A22.transpose(), Matrix::Identity(p, p)).eval();
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(A12.data(), p * q);
  const Eigen::VectorXd x = K.fullPivLu().solve(rhs);
  const Matrix X = Eigen::Map<const Matrix>(x.data(), p, q);

  Matrix S(m, q);
  S.topRows(p) = -X;
  S.bottomRows(q) = Matrix::Identity(q, q);
  Eigen::HouseholderQR<Matrix> qr(S);
  const Matrix Q = qr.householderQ() * Matrix::Identity(m, m);

  const int n = static_cast<int>(T.rows());
  T.block(j, 0, m, n) = Q.transpose() * T.block(j, 0, m, n);
  T.block(0, j, n, m) = T.block(0, j, n, m) * Q;
  U.block(0, j, n, m) = U.block(0, j, n, m) * Q;
  T.block(j + q, j, p, q).setZero();
  for (int r = j + m; r < n; ++r) T.row(r).segment(j, m).setZero();
}

}  // namespace

OrderedSchur ordered_schur(const Matrix& M) {
  Eigen::RealSchur<Matrix> rs(M);
  Matrix T = rs.matrixT();
  Matrix U = rs.matrixU();
  // Bubble sort of the diagonal blocks by real part.
  bool swapped = true;
  while (swapped) {
    swapped = false;
    std::vector<Block> blocks = schur_blocks(T);
    for (std::size_t b = 0; b + 1 < blocks.size(); ++b) {
      if (block_real_part(T, blocks[b]) > block_real_part(T, blocks[b + 1]) + 1e-14) {
        swap_blocks(T, U, blocks[b].start, blocks[b].size, blocks[b + 1].size);
        swapped = true;
        break;
      }
    }
  }
  OrderedSchur out{T, U, Eigen::VectorXd(M.rows())};
  for (const Block& b : schur_blocks(T)) {
    for (int i = 0; i < b.size; ++i) out.block_real[b.start + i] = block_real_part(T, b);
  }
  return out;
}

Matrix stable_subspace(const Matrix& M, double margin) {
  const OrderedSchur s = ordered_schur(M);
  int count = 0;
  for (Eigen::Index i = 0; i < s.block_real.size(); ++i) {
    if (std::abs(s.block_real[i]) <= margin) {
      throw Error(ErrorKind::MarginalSpectrum,
                  "marginal spectrum: eigenvalue with real part " +
                      std::to_string(s.block_real[i]));
    }
    if (s.block_real[i] < 0) ++count;
  }
  return s.U.leftCols(count);
}

Matrix leading_subspace(const Matrix& M, int count) {
  if (count <= 0) return Matrix(M.rows(), 0);
  const OrderedSchur s = ordered_schur(M);
  int c = count;
  while (c < s.T.rows() && std::abs(s.T(c, c - 1)) > 0.0) ++c;
  return s.U.leftCols(c);
}

Matrix spectral_projector(const Matrix& M, const Matrix& basis) {
  const Eigen::Index n = M.rows();
  const Eigen::Index k = basis.cols();
  if (k == 0) return Matrix::Zero(n, n);
  if (k == n) return Matrix::Identity(n, n);
  // Complement: orthogonal complement is not invariant in general, so solve
  // for the invariant complement via the Schur form of the compressed map.
  Eigen::HouseholderQR<Matrix> qr(basis);
  const Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
  const Matrix Tq = Q.transpose() * M * Q;  // block upper triangular
  const Matrix T11 = Tq.topLeftCorner(k, k);
  const Matrix T12 = Tq.topRightCorner(k, n - k);
  const Matrix T22 = Tq.bottomRightCorner(n - k, n - k);
  // T11 Y - Y T22 = -T12 gives the invariant complement [Y; I].
  const Matrix K = Eigen::kroneckerProduct(Matrix::Identity(n - k, n - k), T11).eval() -
                   Eigen::kroneckerProduct(T22.transpose(), Matrix::Identity(k, k)).eval();
  const Matrix rhsM = -T12;
  const Eigen::VectorXd rhs = Eigen::Map<const Eigen::VectorXd>(rhsM.data(), k * (n - k));
  const Eigen::VectorXd y = K.fullPivLu().solve(rhs);
  const Matrix Y = Eigen::Map<const Matrix>(y.data(), k, n - k);
  // In Q coordinates: z = [a; b] = a-part + [Y; I] b  =>  projector keeps a - Y b.
  Matrix P = Matrix::Zero(n, n);
  P.topLeftCorner(k, k) = Matrix::Identity(k, k);
  P.topRightCorner(k, n - k) = -Y;
  return Q * P * Q.transpose();
}

Matrix matrix_exp(const Matrix& M) {
  if (M.size() == 0) return M;
  return M.exp();
}

Matrix align_basis(const Matrix& basis, const Matrix& reference) {
  if (basis.cols() == 0 || reference.cols() != basis.cols()) return basis;
  const Matrix C = basis.transpose() * reference;
  Eigen::JacobiSVD<Matrix> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return basis * (svd.matrixU() * svd.matrixV().transpose());
}

}  // namespace bfront
