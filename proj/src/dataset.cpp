#include "specgrad/dataset.h"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "specgrad/rng.h"

namespace specgrad {

namespace {

[[noreturn]] void parse_fail(std::size_t lineno, const std::string& what) {
  std::ostringstream msg;
  msg << "read_libsvm: line " << lineno << ": " << what;
  throw std::runtime_error(msg.str());
}

}  // namespace

Dataset read_libsvm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("read_libsvm: cannot open " + path);

  /* First pass over parsed rows in sparse form; dimension = max index. */
  struct Row {
    double label;
    std::vector<std::pair<std::size_t, double>> entries;
  };
  std::vector<Row> rows;
  std::set<double> label_set;
  std::size_t max_index = 0;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    Row row;
    std::string tok;
    if (!(ls >> tok)) continue;
    {
      std::size_t pos = 0;
      try {
        row.label = std::stod(tok, &pos);
      } catch (const std::exception&) {
        parse_fail(lineno, "bad label '" + tok + "'");
      }
      if (pos != tok.size()) parse_fail(lineno, "bad label '" + tok + "'");
    }
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos) parse_fail(lineno, "missing ':' in '" + tok + "'");
      std::size_t idx = 0;
      double val = 0.0;
      try {
        std::size_t pos = 0;
        const long long raw = std::stoll(tok.substr(0, colon), &pos);
        if (pos != colon || raw < 1) throw std::invalid_argument("index");
        idx = static_cast<std::size_t>(raw);
        val = std::stod(tok.substr(colon + 1), &pos);
        if (pos != tok.size() - colon - 1) throw std::invalid_argument("value");
      } catch (const std::exception&) {
        parse_fail(lineno, "bad feature '" + tok + "'");
      }
      row.entries.emplace_back(idx, val);
      max_index = std::max(max_index, idx);
    }
    label_set.insert(row.label);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::runtime_error("read_libsvm: " + path + " has no data lines");

  const std::set<double> zero_one{0.0, 1.0}, pm_one{-1.0, 1.0};
  bool remap_zero = false;
  auto subset_of = [&](const std::set<double>& allowed) {
    for (double v : label_set)
      if (!allowed.count(v)) return false;
    return true;
  };
  if (subset_of(pm_one)) {
    remap_zero = false;
  } else if (subset_of(zero_one)) {
    remap_zero = true;
  } else {
    throw std::runtime_error("read_libsvm: labels must be {-1,+1} or {0,1}");
  }

  Dataset ds;
  ds.m = rows.size();
  ds.d = max_index;
  ds.source = path;
  ds.features.assign(ds.m * ds.d, 0.0);
  ds.labels.resize(ds.m);
  for (std::size_t i = 0; i < ds.m; ++i) {
    ds.labels[i] = remap_zero ? (rows[i].label == 0.0 ? -1.0 : 1.0) : rows[i].label;
    for (const auto& [idx, val] : rows[i].entries)
      ds.features[i * ds.d + (idx - 1)] = val;
  }
  return ds;
}

Dataset make_synthetic_dataset(std::size_t m, std::size_t d, std::uint64_t seed,
                               std::size_t strong_dirs, double strong_scale) {
  if (m == 0 || d == 0)
    throw std::invalid_argument("make_synthetic_dataset: m and d must be positive");
  if (strong_dirs > d)
    throw std::invalid_argument("make_synthetic_dataset: strong_dirs > d");

  SplitMix64 rng(seed);
  SplitMix64 feat_rng = rng.split();
  SplitMix64 model_rng = rng.split();
  SplitMix64 noise_rng = rng.split();

  Dataset ds;
  ds.m = m;
  ds.d = d;
  ds.source = "synthetic";
  ds.features.resize(m * d);
  feat_rng.fill_gaussian(ds.features);
  if (strong_dirs > 0 && strong_scale != 1.0) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < strong_dirs; ++j) ds.features[i * d + j] *= strong_scale;
  }

  std::vector<double> w(d);
  model_rng.fill_gaussian(w);
  ds.labels.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < d; ++j) z += ds.features[i * d + j] * w[j];
    double y = (z >= 0.0) ? 1.0 : -1.0;
    if (noise_rng.next_double() < 0.05) y = -y;
    ds.labels[i] = y;
  }
  return ds;
}

}  // namespace specgrad
