/*
 * Binary classification datasets for the logistic-regression objective:
 * LIBSVM text reader plus a seeded synthetic generator used by the tests
 * and the desk-scale experiments.
 */
#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace specgrad {

struct Dataset {
  std::size_t m = 0;             /* rows */
  std::size_t d = 0;             /* feature dimension */
  std::vector<double> features;  /* dense row-major m x d */
  std::vector<double> labels;    /* entries in {-1, +1} */
  std::string source;

  const double* row(std::size_t i) const { return features.data() + i * d; }
};

/* Parse LIBSVM sparse text format: `label idx:val idx:val ...` with 1-based
 * indices.  Feature dimension is the maximum index seen.  Labels {0,1} are
 * remapped to {-1,+1}; labels already in {-1,+1} are kept; any other label
 * set is an error.  Malformed lines raise std::runtime_error naming the
 * 1-based line number. */
Dataset read_libsvm(const std::string& path);

/* Synthetic binary dataset: rows i.i.d. standard normal, with the first
 * strong_dirs coordinates scaled by strong_scale so the logistic Hessian
 * has that many dominant eigenvalues.  Labels are signs of a planted linear
 * model with 5% flip noise.  Deterministic in (m, d, seed). */
Dataset make_synthetic_dataset(std::size_t m, std::size_t d, std::uint64_t seed,
                               std::size_t strong_dirs = 0, double strong_scale = 1.0);

}  // namespace specgrad
