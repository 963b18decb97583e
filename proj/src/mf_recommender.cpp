#include "recsim/mf_recommender.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "recsim/errors.hpp"
#include "recsim/rng.hpp"

namespace recsim {

namespace {

constexpr double kInitScale = 0.1;

bool same_matrix(const RowMatrix& a, const RowMatrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

/// Solves the row system `gram * x = rhs`. With a positive lambda the system
/// is positive definite. With lambda = 0 a singular system with a zero right
/// hand side resolves to the minimum-norm solution; anything else is fatal.
Vector solve_training_row(const Matrix& gram, const Vector& rhs, double lambda,
                          const char* table, std::int64_t id) {
  if (lambda > 0.0) {
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() == Eigen::Success) return llt.solve(rhs);
  } else {
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(gram);
    if (cod.rank() == gram.rows() || rhs.norm() == 0.0) return cod.solve(rhs);
  }
  throw NumericalError(std::string("singular normal equations for ") + table + " row " +
                       std::to_string(id) + " (lambda = " + std::to_string(lambda) + ")");
}

void require_finite(const RowMatrix& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string("non-finite entries in ") + what);
}

}  // namespace

std::optional<ItemIndex> MfModel::index_of(ItemId item) const {
  auto it = std::lower_bound(item_ids.begin(), item_ids.end(), item);
  if (it == item_ids.end() || *it != item) return std::nullopt;
  return static_cast<ItemIndex>(it - item_ids.begin());
}

void MfModel::validate() const {
  if (dim < 1) throw ModelError("embedding dimension must be at least 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ModelError("lambda must be finite and non-negative");
  if (!std::isfinite(global_mean)) throw ModelError("global mean is not finite");
  if (!std::is_sorted(item_ids.begin(), item_ids.end()) ||
      std::adjacent_find(item_ids.begin(), item_ids.end()) != item_ids.end()) {
    throw ModelError("item ids must be strictly ascending");
  }
  if (item_factors.rows() != static_cast<Eigen::Index>(item_ids.size()) ||
      item_factors.cols() != static_cast<Eigen::Index>(dim)) {
    throw ModelError("item factor table does not match the vocabulary");
  }
  if (user_factors.size() != 0 &&
      (user_factors.rows() != static_cast<Eigen::Index>(user_ids.size()) ||
       user_factors.cols() != static_cast<Eigen::Index>(dim))) {
    throw ModelError("user factor table does not match the user list");
  }
  if (!item_factors.allFinite() || !user_factors.allFinite()) {
    throw ModelError("model contains non-finite parameters");
  }
}

bool operator==(const MfModel& a, const MfModel& b) {
  return a.dim == b.dim && a.lambda == b.lambda && a.global_mean == b.global_mean &&
         a.item_ids == b.item_ids && a.user_ids == b.user_ids &&
         same_matrix(a.item_factors, b.item_factors) && same_matrix(a.user_factors, b.user_factors);
}

MfModel train_mf(const Dataset& dataset, const MfConfig& config, MfTrainingTrace* trace) {
  if (dataset.empty()) throw DatasetError("cannot train on an empty dataset");
  if (config.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (config.dim < 1) throw ConfigError("dim must be at least 1");
  if (!(config.lambda >= 0.0) || !std::isfinite(config.lambda)) {
    throw ConfigError("lambda must be finite and non-negative");
  }

  const auto d = static_cast<Eigen::Index>(config.dim);
  const auto n_users = dataset.num_users();
  const auto n_items = dataset.num_items();

  MfModel m;
  m.dim = config.dim;
  m.lambda = config.lambda;
  m.global_mean = dataset.mean_rating();
  m.item_ids.assign(dataset.items().begin(), dataset.items().end());
  m.user_ids.assign(dataset.users().begin(), dataset.users().end());
  m.item_factors.resize(static_cast<Eigen::Index>(n_items), d);
  m.user_factors = RowMatrix::Zero(static_cast<Eigen::Index>(n_users), d);

  Rng rng(config.seed);
  for (Eigen::Index i = 0; i < m.item_factors.rows(); ++i) {
    for (Eigen::Index f = 0; f < d; ++f) {
      m.item_factors(i, f) = kInitScale * (2.0 * rng.uniform() - 1.0);
    }
  }

  // Item-major view of the centered ratings.
  std::vector<std::size_t> item_offsets(n_items + 1, 0);
  for (std::size_t u = 0; u < n_users; ++u) {
    for (ItemIndex j : dataset.history_items(u)) ++item_offsets[j + 1];
  }
  for (std::size_t j = 0; j < n_items; ++j) item_offsets[j + 1] += item_offsets[j];
  std::vector<std::uint32_t> item_users(dataset.num_interactions());
  std::vector<double> item_ratings(dataset.num_interactions());
  {
    auto cursor = item_offsets;
    for (std::size_t u = 0; u < n_users; ++u) {
      const auto hist = dataset.history(u);
      const auto items = dataset.history_items(u);
      for (std::size_t n = 0; n < hist.size(); ++n) {
        const auto pos = cursor[items[n]]++;
        item_users[pos] = static_cast<std::uint32_t>(u);
        item_ratings[pos] = hist[n].rating - m.global_mean;
      }
    }
  }

  const Matrix ridge = config.lambda * Matrix::Identity(d, d);
  Matrix gathered;
  Vector targets;
  for (std::size_t sweep = 0; sweep < config.epochs; ++sweep) {
    for (std::size_t u = 0; u < n_users; ++u) {
      const auto hist = dataset.history(u);
      const auto items = dataset.history_items(u);
      const auto n = static_cast<Eigen::Index>(hist.size());
      gathered.resize(n, d);
      targets.resize(n);
      for (Eigen::Index r = 0; r < n; ++r) {
        gathered.row(r) = m.item_factors.row(items[static_cast<std::size_t>(r)]);
        targets(r) = hist[static_cast<std::size_t>(r)].rating - m.global_mean;
      }
      const Matrix gram = gathered.transpose() * gathered + ridge;
      const Vector rhs = gathered.transpose() * targets;
      m.user_factors.row(static_cast<Eigen::Index>(u)) =
          solve_training_row(gram, rhs, config.lambda, "user", m.user_ids[u]).transpose();
    }
    for (std::size_t j = 0; j < n_items; ++j) {
      const auto begin = item_offsets[j];
      const auto n = static_cast<Eigen::Index>(item_offsets[j + 1] - begin);
      gathered.resize(n, d);
      targets.resize(n);
      for (Eigen::Index r = 0; r < n; ++r) {
        gathered.row(r) = m.user_factors.row(item_users[begin + static_cast<std::size_t>(r)]);
        targets(r) = item_ratings[begin + static_cast<std::size_t>(r)];
      }
      const Matrix gram = gathered.transpose() * gathered + ridge;
      const Vector rhs = gathered.transpose() * targets;
      m.item_factors.row(static_cast<Eigen::Index>(j)) =
          solve_training_row(gram, rhs, config.lambda, "item", m.item_ids[j]).transpose();
    }
    require_finite(m.user_factors, "user factors");
    require_finite(m.item_factors, "item factors");
    if (trace) trace->objective.push_back(mf_objective(m, dataset));
  }
  return m;
}

double mf_objective(const MfModel& model, const Dataset& dataset) {
  if (model.user_factors.rows() != static_cast<Eigen::Index>(dataset.num_users())) {
    throw ModelError("objective needs the user factors of the training dataset");
  }
  double loss = 0.0;
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    const auto hist = dataset.history(u);
    for (const auto& rec : hist) {
      const auto j = model.index_of(rec.item);
      if (!j) throw ModelError("item " + std::to_string(rec.item) + " unknown to the model");
      const double pred = model.user_factors.row(static_cast<Eigen::Index>(u))
                              .dot(model.item_factors.row(*j));
      const double resid = pred - (rec.rating - model.global_mean);
      loss += resid * resid;
    }
  }
  return loss + model.lambda * (model.user_factors.squaredNorm() + model.item_factors.squaredNorm());
}

FoldInSolver::FoldInSolver(const MfModel& model)
    : model_(&model),
      gram_(model.lambda * Matrix::Identity(static_cast<Eigen::Index>(model.dim),
                                            static_cast<Eigen::Index>(model.dim))),
      rhs_(Vector::Zero(static_cast<Eigen::Index>(model.dim))) {}

void FoldInSolver::add(ItemIndex item, double centered_rating) {
  const auto q = model_->item_factors.row(item).transpose();
  gram_.selfadjointView<Eigen::Lower>().rankUpdate(q);
  rhs_.noalias() += centered_rating * q;
  ++count_;
}

Vector FoldInSolver::solve() const {
  if (count_ == 0) throw ModelError("fold-in needs at least one rated item");
  const Matrix gram = gram_.selfadjointView<Eigen::Lower>();
  if (model_->lambda > 0.0) {
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) throw NumericalError("fold-in normal equations are not positive definite");
    return llt.solve(rhs_);
  }
  return Eigen::CompleteOrthogonalDecomposition<Matrix>(gram).solve(rhs_);
}

Vector fold_in(const MfModel& model, std::span<const RatedItem> seen) {
  if (seen.empty()) throw ModelError("fold-in needs a non-empty history (supply a seed)");
  FoldInSolver solver(model);
  for (const auto& rated : seen) {
    const auto idx = model.index_of(rated.item);
    if (!idx) throw ModelError("item " + std::to_string(rated.item) + " unknown to the model");
    solver.add(*idx, rated.rating - model.global_mean);
  }
  return solver.solve();
}

std::vector<ItemId> recommend_mf(const MfModel& model, const Vector& user,
                                 const std::unordered_set<ItemId>& excluded, std::size_t k) {
  // Aliasing constructor: the recommender borrows the caller's model.
  const MfRecommender rec(std::shared_ptr<const MfModel>(std::shared_ptr<const MfModel>{}, &model));
  return rec.recommend(user, excluded, k);
}

namespace {

class MfSession final : public UserSession {
 public:
  explicit MfSession(const MfModel& model) : model_(model), solver_(model) {}

  void observe(ItemIndex item, double rating, RatingScale scale) override {
    if (item >= model_.item_ids.size()) throw ModelError("item index out of range");
    solver_.add(item, scale == RatingScale::dataset ? rating - model_.global_mean : rating);
  }

  Vector user_vector() const override { return solver_.solve(); }

 private:
  const MfModel& model_;
  FoldInSolver solver_;
};

}  // namespace

MfRecommender::MfRecommender(std::shared_ptr<const MfModel> model) : model_(std::move(model)) {
  if (!model_) throw ModelError("null MF model");
  model_->validate();
}

std::unique_ptr<UserSession> MfRecommender::start_session() const {
  return std::make_unique<MfSession>(*model_);
}

std::uint64_t MfRecommender::parameter_hash() const {
  const auto& m = *model_;
  std::uint64_t h = hash_bytes(&m.dim, sizeof(m.dim));
  h = hash_bytes(&m.lambda, sizeof(m.lambda), h);
  h = hash_bytes(&m.global_mean, sizeof(m.global_mean), h);
  h = hash_bytes(m.item_ids.data(), m.item_ids.size() * sizeof(ItemId), h);
  h = hash_bytes(m.item_factors.data(), static_cast<std::size_t>(m.item_factors.size()) * sizeof(double), h);
  h = hash_bytes(m.user_ids.data(), m.user_ids.size() * sizeof(UserId), h);
  return hash_bytes(m.user_factors.data(),
                    static_cast<std::size_t>(m.user_factors.size()) * sizeof(double), h);
}

}  // namespace recsim
