#include <cmath>
#include <random>

#include "doctest.h"
#include "simfl/errors.hpp"
#include "simfl/linalg.hpp"

using namespace simfl;

namespace {

Matrix random_symmetric(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> d(0.0, 1.0);
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) a(i, j) = a(j, i) = d(gen);
  return a;
}

Matrix reconstruct(const EigenDecomposition& e) {
  const std::size_t n = e.values.size();
  Matrix lambda(n, n);
  for (std::size_t i = 0; i < n; ++i) lambda(i, i) = e.values[i];
  return e.vectors * lambda * e.vectors.transposed();
}

}  // namespace

TEST_CASE("eigh_jacobi: identity") {
  const auto e = eigh_jacobi(Matrix::identity(4));
  for (double v : e.values) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("eigh_jacobi: diag(3,1,2) gives sorted values and permutation vectors") {
  Matrix a(3, 3);
  a(0, 0) = 3;
  a(1, 1) = 1;
  a(2, 2) = 2;
  const auto e = eigh_jacobi(a);
  CHECK(e.values == std::vector<double>{1, 2, 3});
  // Column k is the unit vector of the diagonal entry holding values[k].
  const int source[3] = {1, 2, 0};
  for (int k = 0; k < 3; ++k)
    for (int i = 0; i < 3; ++i) CHECK(std::abs(e.vectors(i, k)) == (i == source[k] ? 1.0 : 0.0));
}

TEST_CASE("eigh_jacobi: 2x2 closed form") {
  Matrix a(2, 2);
  a(0, 0) = 2;
  a(0, 1) = a(1, 0) = 1;
  a(1, 1) = 2;
  const auto e = eigh_jacobi(a);
  CHECK(e.values[0] == doctest::Approx(1.0));
  CHECK(e.values[1] == doctest::Approx(3.0));
  CHECK(std::abs(e.vectors(0, 1)) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("eigh_jacobi: 50 random symmetric matrices up to 12x12 reconstruct") {
  std::mt19937_64 gen(12);
  std::uniform_int_distribution<std::size_t> size(1, 12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = trial < 12 ? static_cast<std::size_t>(trial + 1) : size(gen);
    const Matrix a = random_symmetric(gen, n);
    const auto e = eigh_jacobi(a);
    REQUIRE(e.values.size() == n);
    CHECK((a - reconstruct(e)).frobenius_norm() <= 1e-8 * a.frobenius_norm());
    const Matrix vtv = e.vectors.transposed() * e.vectors;
    CHECK((vtv - Matrix::identity(n)).frobenius_norm() <= 1e-10);
    for (std::size_t k = 1; k < n; ++k) CHECK(e.values[k - 1] <= e.values[k]);
  }
}

TEST_CASE("eigh_jacobi: input errors") {
  Matrix a(2, 2);
  a(0, 1) = 1.0;
  CHECK_THROWS_AS(eigh_jacobi(a), ArgError);
  CHECK_THROWS_AS(eigh_jacobi(Matrix(2, 3)), ArgError);
  CHECK_THROWS_AS(eigh_jacobi(Matrix()), ArgError);
  a(1, 0) = 1.0 + 1e-13;  // within the symmetry tolerance
  CHECK_NOTHROW(eigh_jacobi(a));
}

TEST_CASE("matrix helpers") {
  Matrix a(2, 3);
  a(0, 2) = 5.0;
  a(1, 0) = -2.0;
  const Matrix t = a.transposed();
  CHECK(t.rows() == 3);
  CHECK(t(2, 0) == 5.0);
  CHECK(a.frobenius_norm() == doctest::Approx(std::sqrt(29.0)));
  const Matrix p = a * t;
  CHECK(p(0, 0) == 25.0);
  CHECK(p(1, 1) == 4.0);
  CHECK(p(0, 1) == 0.0);
  const std::vector<double> x{1, 2}, y{4, 6};
  CHECK(squared_distance(x, y) == 25.0);
}
