#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#ifndef lapack_complex_float
#define lapack_complex_float std::complex<float>
#endif
#ifndef lapack_complex_double
#define lapack_complex_double std::complex<double>
#endif
#include <lapacke.h>

namespace drbm::lapack {

using cplx = std::complex<double>;

class LapackError : public std::runtime_error {
 public:
  LapackError(const std::string& routine, lapack_int info)
      : std::runtime_error(routine + " failed with info=" + std::to_string(info)) {}
};

/// Eigenvalues of an upper Hessenberg matrix (column-major, overwritten).
inline std::vector<cplx> hessenberg_eigenvalues(std::vector<cplx>& h, int n) {
  std::vector<cplx> w(n);
  if (n == 0) return w;
  const lapack_int info = LAPACKE_zhseqr(LAPACK_COL_MAJOR, 'E', 'N', n, 1, n, h.data(), n, w.data(), nullptr, n);
  if (info != 0) throw LapackError("zhseqr", info);
  return w;
}

/// Eigenvalues of a general complex matrix.
inline std::vector<cplx> general_eigenvalues(Eigen::MatrixXcd a) {
  const int n = static_cast<int>(a.rows());
  std::vector<cplx> w(n);
  if (n == 0) return w;
  const lapack_int info = LAPACKE_zgeev(LAPACK_COL_MAJOR, 'N', 'N', n, a.data(), n, w.data(), nullptr, 1, nullptr, 1);
  if (info != 0) throw LapackError("zgeev", info);
  return w;
}

/// Ascending eigenvalues of a Hermitian matrix (lower triangle referenced).
inline Eigen::VectorXd hermitian_eigenvalues(Eigen::MatrixXcd a) {
  const int n = static_cast<int>(a.rows());
  Eigen::VectorXd w(n);
  if (n == 0) return w;
  const lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'L', n, a.data(), n, w.data());
  if (info != 0) throw LapackError("zheevd", info);
  return w;
}

}  // namespace drbm::lapack
