#include "tempflow/common/rng.hpp"

namespace tempflow {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::derive(std::string_view label) const {
  return Rng(splitmix64(seed_ ^ fnv1a64(label)));
}

Rng Rng::derive(std::string_view label, std::uint64_t index) const {
  return Rng(splitmix64(splitmix64(seed_ ^ fnv1a64(label)) + splitmix64(index + 1)));
}

double Rng::uniform() { return uniform_(engine_); }

double Rng::normal() { return normal_(engine_); }

std::uint64_t Rng::next_u64() { return engine_(); }

Vector Rng::normal_vector(Eigen::Index dim) {
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v[i] = normal();
  return v;
}

Matrix Rng::normal_matrix(Eigen::Index rows, Eigen::Index cols) {
  // Row-major fill so row i only depends on draws for rows < i.
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = normal();
  return m;
}

}  // namespace tempflow
