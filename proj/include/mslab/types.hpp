#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <array>
#include <complex>
#include <stdexcept>
#include <string>

namespace mslab {

using Complex = std::complex<double>;

template <typename T>
using MatrixX = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VectorX = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatrixXd = MatrixX<double>;
using MatrixXcd = MatrixX<Complex>;
using VectorXd = VectorX<double>;
using VectorXcd = VectorX<Complex>;

template <typename T>
using SparseMatrix = Eigen::SparseMatrix<T>;
using SparseMatrixXcd = SparseMatrix<Complex>;
using SparseMatrixXd = SparseMatrix<double>;

using Index = Eigen::Index;

// Physical coordinates; components beyond the grid dimension are zero.
using Point = Eigen::Vector3d;
// Lattice multi-index; components beyond the grid dimension are zero.
using MultiIndex = std::array<int, 3>;

// Complex value per node.
using Field = VectorXcd;
// Nonnegative real value per node.
using WeightField = VectorXd;
// Complex value per edge of one lattice direction (see Grid::edge_index).
using EdgeField = VectorXcd;

inline constexpr Complex I{0.0, 1.0};

// Violated precondition on caller input.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Numerical obstruction: singular system, size cap, non-convergence.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw InputError(what);
}

}  // namespace mslab
