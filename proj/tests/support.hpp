#pragma once

// Independent reference implementations. None of these call into the code
// they check; they favor the most literal formulation over speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "recsim/dataset.hpp"
#include "recsim/rng.hpp"
#include "recsim/rnn_recommender.hpp"
#include "recsim/synthetic.hpp"
#include "recsim/user_models.hpp"

namespace recsim::testing {

inline Dataset make_dataset(std::initializer_list<Interaction> records) {
  return Dataset::from_interactions(std::vector<Interaction>(records));
}

/// The 500-user power-law dataset shared by the invariant suites.
inline Dataset power_law_dataset(std::uint64_t seed = 3) {
  return generate_synthetic(SyntheticConfig::small(500, 1000, seed));
}

/// Full stable sort by (score desc, index asc), then the first k survivors.
inline std::vector<std::uint32_t> oracle_top_k(std::span<const double> scores,
                                               std::span<const std::uint8_t> excluded, std::size_t k) {
  std::vector<std::uint32_t> order;
  for (std::uint32_t i = 0; i < scores.size(); ++i) {
    if (!excluded[i]) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  order.resize(std::min(k, order.size()));
  return order;
}

/// Slope from raw sums over x = 1..n.
inline double oracle_ols_slope(std::span<const double> ys) {
  long double n = ys.size(), sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const long double x = i + 1;
    sx += x;
    sy += ys[i];
    sxx += x * x;
    sxy += x * ys[i];
  }
  return static_cast<double>((n * sxy - sx * sy) / (n * sxx - sx * sx));
}

/// Solves (A^T A + lambda I) p = A^T r by Gaussian elimination with partial
/// pivoting. `rows` are the rows of A.
inline std::vector<double> oracle_normal_equations(const std::vector<std::vector<double>>& rows,
                                                   const std::vector<double>& r, double lambda) {
  const std::size_t d = rows.front().size();
  std::vector<std::vector<double>> m(d, std::vector<double>(d + 1, 0.0));
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = 0; b < d; ++b) {
      for (std::size_t i = 0; i < rows.size(); ++i) m[a][b] += rows[i][a] * rows[i][b];
    }
    m[a][a] += lambda;
    for (std::size_t i = 0; i < rows.size(); ++i) m[a][d] += rows[i][a] * r[i];
  }
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t pivot = c;
    for (std::size_t i = c + 1; i < d; ++i) {
      if (std::abs(m[i][c]) > std::abs(m[pivot][c])) pivot = i;
    }
    std::swap(m[c], m[pivot]);
    if (m[c][c] == 0.0) throw std::runtime_error("singular oracle system");
    for (std::size_t i = 0; i < d; ++i) {
      if (i == c) continue;
      const double f = m[i][c] / m[c][c];
      for (std::size_t j = c; j <= d; ++j) m[i][j] -= f * m[c][j];
    }
  }
  std::vector<double> p(d);
  for (std::size_t i = 0; i < d; ++i) p[i] = m[i][d] / m[i][i];
  return p;
}

/// Pearson chi-square goodness of fit. Categories with expected count below 5
/// are pooled into one bin first. Returns the p-value.
inline double chi_square_p(std::span<const std::size_t> observed, std::span<const double> probabilities) {
  const double n = std::accumulate(observed.begin(), observed.end(), 0.0);
  std::vector<double> obs, exp;
  double pooled_obs = 0.0, pooled_exp = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double e = n * probabilities[i];
    if (e < 5.0) {
      pooled_obs += static_cast<double>(observed[i]);
      pooled_exp += e;
    } else {
      obs.push_back(static_cast<double>(observed[i]));
      exp.push_back(e);
    }
  }
  if (pooled_exp > 0.0) {
    obs.push_back(pooled_obs);
    exp.push_back(pooled_exp);
  }
  // Zero-probability categories must be empty; everything else is tested.
  std::vector<double> o2, e2;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (exp[i] == 0.0) {
      if (obs[i] > 0.0) return 0.0;
      continue;
    }
    o2.push_back(obs[i]);
    e2.push_back(exp[i]);
  }
  if (o2.size() < 2) return 1.0;
  double stat = 0.0;
  for (std::size_t i = 0; i < o2.size(); ++i) stat += (o2[i] - e2[i]) * (o2[i] - e2[i]) / e2[i];
  boost::math::chi_squared dist(static_cast<double>(o2.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

inline double relative_error(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

/// Choice probabilities written out from the model definitions. The alpha
/// weights are shifted by -|alpha| so exp() stays in range for |alpha| = 50.
inline std::vector<double> oracle_choice_probabilities(const ChoiceModel& model, const PopularityAttribute& attr,
                                                       std::span<const ItemIndex> slate) {
  std::vector<double> w(slate.size());
  double max_value = 0.0;
  for (double v : attr.values()) max_value = std::max(max_value, v);
  for (std::size_t r = 0; r < slate.size(); ++r) {
    switch (model.variant()) {
      case ChoiceVariant::lazy: w[r] = r == 0 ? 1.0 : 0.0; break;
      case ChoiceVariant::uniform: w[r] = 1.0; break;
      case ChoiceVariant::ranked: w[r] = 1.0 / std::log(1.0 + static_cast<double>(r + 1)); break;
      case ChoiceVariant::alpha_preference:
        w[r] = std::exp(model.alpha() * attr[slate[r]] / max_value - std::abs(model.alpha()));
        break;
    }
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= total;
  return w;
}

/// Ten items whose raw counts spread over two orders of magnitude.
inline std::shared_ptr<const PopularityAttribute> spread_attribute() {
  std::vector<ItemId> ids;
  std::vector<double> values;
  for (int i = 0; i < 10; ++i) {
    ids.push_back(i + 1);
    values.push_back(std::round(std::pow(1.7, i) * 10));
  }
  return std::make_shared<const PopularityAttribute>(PopularityMode::raw_count, ids, values);
}

/// Walks every RNN parameter with the matching gradient entry.
inline void for_each_parameter(RnnModel& m, const RnnGradient& g,
                               const std::function<void(const char*, double&, double)>& visit) {
  auto walk = [&](const char* name, double* p, const double* dp, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) visit(name, p[i], dp[i]);
  };
  walk("item_embeddings", m.item_embeddings.data(), g.item_embeddings.data(), m.item_embeddings.size());
  walk("input_weights", m.input_weights.data(), g.input_weights.data(), m.input_weights.size());
  walk("recurrent_weights", m.recurrent_weights.data(), g.recurrent_weights.data(), m.recurrent_weights.size());
  walk("bias", m.bias.data(), g.bias.data(), m.bias.size());
  walk("output_weights", m.output_weights.data(), g.output_weights.data(), m.output_weights.size());
}

inline std::vector<RnnSequence> random_sequences(std::size_t items, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<RnnSequence> seqs(count);
  for (auto& s : seqs) {
    const auto len = 2 + rng.below(6);
    for (std::size_t t = 0; t < len; ++t) {
      s.items.push_back(static_cast<ItemIndex>(rng.below(items)));
      s.targets.push_back(rng.uniform() * 4 - 2);
    }
  }
  return seqs;
}

/// Largest relative disagreement between analytic and central-difference
/// gradients, with the tensor it occurred in.
inline std::pair<double, std::string> worst_gradient_error(RnnModel m, std::span<const RnnSequence> seqs,
                                                           double eps = 1e-5) {
  RnnGradient grad;
  rnn_loss(m, seqs, &grad);
  double worst = 0.0;
  std::string worst_name;
  for_each_parameter(m, grad, [&](const char* name, double& param, double analytic) {
    const double saved = param;
    param = saved + eps;
    const double up = rnn_loss(m, seqs);
    param = saved - eps;
    const double down = rnn_loss(m, seqs);
    param = saved;
    const double numeric = (up - down) / (2 * eps);
    const double err = std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    if (err > worst) {
      worst = err;
      worst_name = name;
    }
  });
  return {worst, worst_name};
}

// Seeds each trajectory from its own dataset user's full history.
inline SeedStrategy own_history() {
  SeedStrategy s;
  s.variant = SeedVariant::real_history;
  return s;
}

}  // namespace recsim::testing
