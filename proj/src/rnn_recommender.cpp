#include "recsim/rnn_recommender.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "recsim/errors.hpp"
#include "recsim/rng.hpp"

namespace recsim {

namespace {

template <typename M>
void fill_uniform(M& m, double scale, Rng& rng) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = scale * (2.0 * rng.uniform() - 1.0);
  }
}

template <typename A, typename B>
bool same(const A& a, const B& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
}

template <typename M>
std::uint64_t hash_matrix(const M& m, std::uint64_t h) {
  return hash_bytes(m.data(), static_cast<std::size_t>(m.size()) * sizeof(double), h);
}

double parameter_norm2(const RnnModel& m) {
  return m.item_embeddings.squaredNorm() + m.input_weights.squaredNorm() +
         m.recurrent_weights.squaredNorm() + m.bias.squaredNorm() + m.output_weights.squaredNorm();
}

RnnGradient zero_gradient(const RnnModel& m) {
  RnnGradient g;
  g.item_embeddings = RowMatrix::Zero(m.item_embeddings.rows(), m.item_embeddings.cols());
  g.input_weights = Matrix::Zero(m.input_weights.rows(), m.input_weights.cols());
  g.recurrent_weights = Matrix::Zero(m.recurrent_weights.rows(), m.recurrent_weights.cols());
  g.bias = Vector::Zero(m.bias.size());
  g.output_weights = Matrix::Zero(m.output_weights.rows(), m.output_weights.cols());
  return g;
}

/// Squared-error sum over the selected sequences; accumulates
/// `weight * d(sum)/d(theta)` into `gradient` when given.
double sequence_loss(const RnnModel& m, std::span<const RnnSequence> sequences,
                     std::span<const std::size_t> selection, RnnGradient* gradient,
                     double weight) {
  const auto h = static_cast<Eigen::Index>(m.hidden);
  double total = 0.0;
  std::vector<Vector> states;
  std::vector<double> errors;
  Vector prev(h), pred(static_cast<Eigen::Index>(m.dim));
  for (std::size_t sel : selection) {
    const auto& seq = sequences[sel];
    if (seq.items.size() < 2) continue;
    const std::size_t steps = seq.items.size() - 1;
    states.resize(steps);
    errors.resize(steps);
    prev.setZero();
    for (std::size_t s = 0; s < steps; ++s) {
      states[s] = m.step(prev, seq.items[s]);
      pred.noalias() = m.output_weights * states[s];
      const double y = pred.dot(m.item_embeddings.row(seq.items[s + 1]));
      errors[s] = y - seq.targets[s + 1];
      total += errors[s] * errors[s];
      prev = states[s];
    }
    if (!gradient) continue;

    Vector carry = Vector::Zero(h);
    for (std::size_t s = steps; s-- > 0;) {
      const double g = 2.0 * weight * errors[s];
      const ItemIndex next = seq.items[s + 1];
      const ItemIndex current = seq.items[s];
      pred.noalias() = m.output_weights * states[s];
      gradient->item_embeddings.row(next) += g * pred.transpose();
      const Vector dp = g * m.item_embeddings.row(next).transpose();
      gradient->output_weights.noalias() += dp * states[s].transpose();
      Vector dh = m.output_weights.transpose() * dp + carry;
      const Vector da = dh.array() * (1.0 - states[s].array().square());
      gradient->input_weights.noalias() += da * m.item_embeddings.row(current);
      gradient->item_embeddings.row(current) += (m.input_weights.transpose() * da).transpose();
      if (s > 0) gradient->recurrent_weights.noalias() += da * states[s - 1].transpose();
      gradient->bias += da;
      carry.noalias() = m.recurrent_weights.transpose() * da;
    }
  }
  return total;
}

std::size_t count_predictions(std::span<const RnnSequence> sequences,
                              std::span<const std::size_t> selection) {
  std::size_t n = 0;
  for (std::size_t sel : selection) {
    if (sequences[sel].items.size() >= 2) n += sequences[sel].items.size() - 1;
  }
  return n;
}

double loss_and_gradient(const RnnModel& m, std::span<const RnnSequence> sequences,
                         std::span<const std::size_t> selection, RnnGradient* gradient) {
  const auto n = count_predictions(sequences, selection);
  if (n == 0) throw ModelError("no predictable positions (sequences need at least two items)");
  const double weight = 1.0 / static_cast<double>(n);
  if (gradient) *gradient = zero_gradient(m);
  const double sse = sequence_loss(m, sequences, selection, gradient, weight);
  if (gradient && m.lambda != 0.0) {
    const double r = 2.0 * m.lambda;
    gradient->item_embeddings += r * m.item_embeddings;
    gradient->input_weights += r * m.input_weights;
    gradient->recurrent_weights += r * m.recurrent_weights;
    gradient->bias += r * m.bias;
    gradient->output_weights += r * m.output_weights;
  }
  return sse * weight + m.lambda * parameter_norm2(m);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void require_item(const RnnModel& m, ItemIndex item) {
  if (item >= m.item_ids.size()) throw ModelError("item index out of range");
}

}  // namespace

std::optional<ItemIndex> RnnModel::index_of(ItemId item) const {
  auto it = std::lower_bound(item_ids.begin(), item_ids.end(), item);
  if (it == item_ids.end() || *it != item) return std::nullopt;
  return static_cast<ItemIndex>(it - item_ids.begin());
}

void RnnModel::validate() const {
  if (hidden < 1 || dim < 1) throw ModelError("hidden and embedding sizes must be at least 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ModelError("lambda must be finite and non-negative");
  if (!std::is_sorted(item_ids.begin(), item_ids.end()) ||
      std::adjacent_find(item_ids.begin(), item_ids.end()) != item_ids.end()) {
    throw ModelError("item ids must be strictly ascending");
  }
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto d = static_cast<Eigen::Index>(dim);
  if (item_embeddings.rows() != static_cast<Eigen::Index>(item_ids.size()) || item_embeddings.cols() != d ||
      input_weights.rows() != h || input_weights.cols() != d || recurrent_weights.rows() != h ||
      recurrent_weights.cols() != h || bias.size() != h || output_weights.rows() != d ||
      output_weights.cols() != h) {
    throw ModelError("RNN parameter shapes are inconsistent");
  }
  if (!item_embeddings.allFinite() || !input_weights.allFinite() || !recurrent_weights.allFinite() ||
      !bias.allFinite() || !output_weights.allFinite() || !std::isfinite(global_mean)) {
    throw ModelError("RNN contains non-finite parameters");
  }
}

Vector RnnModel::step(const Vector& state, ItemIndex item) const {
  Vector pre = bias;
  pre.noalias() += input_weights * item_embeddings.row(item).transpose();
  pre.noalias() += recurrent_weights * state;
  return pre.array().tanh().matrix();
}

RnnModel RnnModel::initialize(std::vector<ItemId> item_ids, std::size_t hidden, std::size_t dim,
                              std::uint64_t seed) {
  if (hidden < 1 || dim < 1) throw ConfigError("hidden and dim must be at least 1");
  RnnModel m;
  m.hidden = hidden;
  m.dim = dim;
  m.item_ids = std::move(item_ids);
  const auto h = static_cast<Eigen::Index>(hidden);
  const auto d = static_cast<Eigen::Index>(dim);
  m.item_embeddings.resize(static_cast<Eigen::Index>(m.item_ids.size()), d);
  m.input_weights.resize(h, d);
  m.recurrent_weights.resize(h, h);
  m.bias = Vector::Zero(h);
  m.output_weights.resize(d, h);
  Rng rng(seed);
  fill_uniform(m.item_embeddings, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
  fill_uniform(m.input_weights, 1.0 / std::sqrt(static_cast<double>(dim)), rng);
  fill_uniform(m.recurrent_weights, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  fill_uniform(m.output_weights, 1.0 / std::sqrt(static_cast<double>(hidden)), rng);
  return m;
}

bool operator==(const RnnModel& a, const RnnModel& b) {
  return a.hidden == b.hidden && a.dim == b.dim && a.lambda == b.lambda &&
         a.global_mean == b.global_mean && a.item_ids == b.item_ids &&
         same(a.item_embeddings, b.item_embeddings) && same(a.input_weights, b.input_weights) &&
         same(a.recurrent_weights, b.recurrent_weights) && same(a.bias, b.bias) &&
         same(a.output_weights, b.output_weights);
}

std::vector<RnnSequence> rnn_sequences(const Dataset& dataset, const RnnModel& model,
                                       std::size_t max_length) {
  if (max_length < 2) throw ConfigError("max sequence length must be at least 2");
  std::vector<RnnSequence> out;
  for (std::size_t u = 0; u < dataset.num_users(); ++u) {
    const auto hist = dataset.history(u);
    if (hist.size() < 2) continue;
    const auto start = hist.size() > max_length ? hist.size() - max_length : 0;
    RnnSequence seq;
    for (std::size_t n = start; n < hist.size(); ++n) {
      const auto idx = model.index_of(hist[n].item);
      if (!idx) throw ModelError("item " + std::to_string(hist[n].item) + " unknown to the model");
      seq.items.push_back(*idx);
      seq.targets.push_back(hist[n].rating - model.global_mean);
    }
    out.push_back(std::move(seq));
  }
  return out;
}

double rnn_loss(const RnnModel& model, std::span<const RnnSequence> sequences, RnnGradient* gradient) {
  const auto selection = all_indices(sequences.size());
  return loss_and_gradient(model, sequences, selection, gradient);
}

double rnn_mse(const RnnModel& model, std::span<const RnnSequence> sequences) {
  const auto selection = all_indices(sequences.size());
  const auto n = count_predictions(sequences, selection);
  if (n == 0) throw ModelError("no predictable positions (sequences need at least two items)");
  return sequence_loss(model, sequences, selection, nullptr, 0.0) / static_cast<double>(n);
}

RnnModel train_rnn(const Dataset& dataset, const RnnConfig& config, RnnTrainingTrace* trace) {
  if (dataset.empty()) throw DatasetError("cannot train on an empty dataset");
  if (config.epochs < 1) throw ConfigError("epochs must be at least 1");
  if (config.batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (!(config.learning_rate >= 0.0) || !std::isfinite(config.learning_rate)) {
    throw ConfigError("learning rate must be finite and non-negative");
  }
  if (!(config.lambda >= 0.0) || !std::isfinite(config.lambda)) {
    throw ConfigError("lambda must be finite and non-negative");
  }

  RnnModel m = RnnModel::initialize({dataset.items().begin(), dataset.items().end()},
                                    config.hidden, config.dim, config.seed);
  m.lambda = config.lambda;
  m.global_mean = dataset.mean_rating();
  const auto sequences = rnn_sequences(dataset, m, config.max_length);
  if (sequences.empty()) throw DatasetError("no user has at least two interactions");

  if (trace) trace->initial_mse = rnn_mse(m, sequences);
  Rng shuffle_rng = Rng::split(config.seed, 0x5eed);
  auto order = all_indices(sequences.size());
  RnnGradient grad;
  const double lr = config.learning_rate;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const auto end = std::min(order.size(), begin + config.batch_size);
      const std::span<const std::size_t> batch(order.data() + begin, end - begin);
      const double loss = loss_and_gradient(m, sequences, batch, &grad);
      if (!std::isfinite(loss)) {
        throw NumericalError("training loss became non-finite in epoch " + std::to_string(epoch + 1) +
                             "; try a smaller learning rate");
      }
      if (lr == 0.0) continue;
      m.item_embeddings -= lr * grad.item_embeddings;
      m.input_weights -= lr * grad.input_weights;
      m.recurrent_weights -= lr * grad.recurrent_weights;
      m.bias -= lr * grad.bias;
      m.output_weights -= lr * grad.output_weights;
    }
    const double mse = rnn_mse(m, sequences);
    if (!std::isfinite(mse)) {
      throw NumericalError("training loss became non-finite in epoch " + std::to_string(epoch + 1) +
                           "; try a smaller learning rate");
    }
    if (trace) trace->epoch_mse.push_back(mse);
  }
  return m;
}

Vector rnn_forward(const RnnModel& model, std::span<const ItemId> sequence) {
  if (sequence.empty()) throw ModelError("RNN forward needs a non-empty item sequence");
  Vector state = Vector::Zero(static_cast<Eigen::Index>(model.hidden));
  for (ItemId item : sequence) {
    const auto idx = model.index_of(item);
    if (!idx) throw ModelError("item " + std::to_string(item) + " unknown to the model");
    state = model.step(state, *idx);
  }
  return model.readout(state);
}

std::vector<ItemId> recommend_rnn(const RnnModel& model, std::span<const ItemId> trajectory,
                                  const std::unordered_set<ItemId>& excluded, std::size_t k) {
  const RnnRecommender rec(std::shared_ptr<const RnnModel>(std::shared_ptr<const RnnModel>{}, &model));
  return rec.recommend(rnn_forward(model, trajectory), excluded, k);
}

namespace {

class RnnSession final : public UserSession {
 public:
  explicit RnnSession(const RnnModel& model)
      : model_(model), state_(Vector::Zero(static_cast<Eigen::Index>(model.hidden))) {}

  void observe(ItemIndex item, double, RatingScale) override {
    require_item(model_, item);
    state_ = model_.step(state_, item);
    ++count_;
  }

  Vector user_vector() const override {
    if (count_ == 0) throw ModelError("RNN user state needs at least one consumed item");
    return model_.readout(state_);
  }

 private:
  const RnnModel& model_;
  Vector state_;
  std::size_t count_ = 0;
};

}  // namespace

RnnRecommender::RnnRecommender(std::shared_ptr<const RnnModel> model) : model_(std::move(model)) {
  if (!model_) throw ModelError("null RNN model");
  model_->validate();
}

std::unique_ptr<UserSession> RnnRecommender::start_session() const {
  return std::make_unique<RnnSession>(*model_);
}

std::uint64_t RnnRecommender::parameter_hash() const {
  const auto& m = *model_;
  std::uint64_t h = hash_bytes(&m.hidden, sizeof(m.hidden));
  h = hash_bytes(&m.dim, sizeof(m.dim), h);
  h = hash_bytes(&m.lambda, sizeof(m.lambda), h);
  h = hash_bytes(&m.global_mean, sizeof(m.global_mean), h);
  h = hash_bytes(m.item_ids.data(), m.item_ids.size() * sizeof(ItemId), h);
  h = hash_matrix(m.item_embeddings, h);
  h = hash_matrix(m.input_weights, h);
  h = hash_matrix(m.recurrent_weights, h);
  h = hash_matrix(m.bias, h);
  return hash_matrix(m.output_weights, h);
}

}  // namespace recsim
