#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <memory>
#include <sstream>
#include <unordered_set>

#include "recsim/errors.hpp"
#include "recsim/metrics.hpp"
#include "recsim/sim_engine.hpp"
#include "recsim/snapshot.hpp"
#include "recsim/synthetic.hpp"

namespace py = pybind11;
using namespace py::literals;
using namespace recsim;

namespace {

// A trained or loaded model together with its frozen recommender.
struct Model {
  explicit Model(ModelSnapshot s)
      : snapshot(std::make_shared<const ModelSnapshot>(std::move(s))), recommender(make_recommender(*snapshot)) {}

  std::shared_ptr<const ModelSnapshot> snapshot;
  std::shared_ptr<const Recommender> recommender;
};

std::vector<ItemId> recommend_for(const Model& model, const std::vector<std::pair<ItemId, double>>& history,
                              std::size_t k) {
  const auto& rec = *model.recommender;
  auto session = rec.start_session();
  std::unordered_set<ItemId> seen;
  for (const auto& [item, rating] : history) {
    const auto index = rec.index_of(item);
    if (!index) throw ModelError("item " + std::to_string(item) + " is not in the model vocabulary");
    session->observe(*index, rating, RatingScale::dataset);
    seen.insert(item);
  }
  return rec.recommend(session->user_vector(), seen, k);
}

py::dict trajectory_dict(const Trajectory& t, const PopularityAttribute& attr) {
  py::list steps;
  for (const auto& s : t.steps) {
    steps.append(py::dict("slate"_a = s.slate, "choice"_a = s.choice, "rating"_a = s.rating,
                          "popularity"_a = attr.value_of(s.choice)));
  }
  std::vector<ItemId> seed;
  for (const auto& s : t.seed) seed.push_back(s.choice);
  return py::dict("id"_a = t.id, "seed_user"_a = t.seed_user, "seed"_a = seed, "steps"_a = steps);
}

py::dict simulate_cohort(const Model& model, const Dataset& dataset, const std::string& choice, double alpha,
                  const std::string& feedback_variant, int beta, double rho0, const std::string& seed,
                  std::optional<std::size_t> num_users, std::size_t steps, std::size_t slate_size,
                  const std::string& popularity_mode, const std::string& split, std::uint64_t master_seed,
                  std::size_t threads) {
  const auto attr = std::make_shared<const PopularityAttribute>(
      compute_popularity(dataset, parse_popularity_mode(popularity_mode)));
  UserModel user;
  switch (parse_choice_variant(choice)) {
    case ChoiceVariant::lazy: user.choice = ChoiceModel::lazy(); break;
    case ChoiceVariant::uniform: user.choice = ChoiceModel::uniform(); break;
    case ChoiceVariant::ranked: user.choice = ChoiceModel::ranked(); break;
    case ChoiceVariant::alpha_preference: user.choice = ChoiceModel::alpha_preference(alpha, attr); break;
  }
  if (parse_feedback_variant(feedback_variant) == FeedbackVariant::beta_preference) {
    user.feedback = FeedbackModel::beta_preference(beta, rho0);
  }
  BatchSettings settings;
  settings.seed.variant = parse_seed_variant(seed);
  settings.num_users = num_users.value_or(dataset.num_users());
  settings.steps = steps;
  settings.slate_size = slate_size;
  settings.master_seed = master_seed;
  settings.threads = threads;

  BatchResult batch;
  {
    py::gil_scoped_release release;
    batch = simulate_batch(*model.recommender, user, *attr, dataset, settings);
  }
  std::vector<TrajectoryReport> reports;
  py::list trajectories;
  for (const auto& t : batch.trajectories) {
    reports.push_back(trajectory_report(t, *attr));
    trajectories.append(trajectory_dict(t, *attr));
  }
  py::list failures;
  for (const auto& f : batch.failures) failures.append(py::dict("id"_a = f.id, "step"_a = f.step, "message"_a = f.message));
  py::object summary = py::none();
  if (!reports.empty()) {
    const auto s = summarize_cohort(reports, parse_cohort_split(split), attr->mode());
    summary = py::module_::import("json").attr("loads")(emit_report(s, reports, ReportFormat::summary_json));
  }
  return py::dict("trajectories"_a = trajectories, "failures"_a = failures, "summary"_a = summary,
                  "model_id"_a = model_id(*model.recommender), "user_model"_a = describe(user));
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Closed-loop recommender simulation core";

  auto base = py::register_exception<Error>(m, "RecsimError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ParseError>(m, "ParseError", base.ptr());

  py::class_<Dataset>(m, "Dataset")
      .def_property_readonly("num_users", &Dataset::num_users)
      .def_property_readonly("num_items", &Dataset::num_items)
      .def_property_readonly("num_interactions", &Dataset::num_interactions)
      .def_property_readonly("mean_rating", &Dataset::mean_rating)
      .def_property_readonly("items", [](const Dataset& d) { return std::vector<ItemId>(d.items().begin(), d.items().end()); })
      .def("popularity_of", &Dataset::popularity_of, "item"_a)
      .def("__repr__", [](const Dataset& d) {
        return "<Dataset users=" + std::to_string(d.num_users()) + " items=" + std::to_string(d.num_items()) +
               " ratings=" + std::to_string(d.num_interactions()) + ">";
      });

  m.def("load_dataset", [](const std::filesystem::path& path, const std::string& format) {
    return load_dataset(path, parse_dataset_format(format));
  }, "path"_a, "format"_a = "auto");
  m.def("from_ratings", [](const std::vector<std::tuple<UserId, ItemId, double, std::int64_t>>& rows) {
    std::vector<Interaction> raw;
    for (const auto& [u, i, r, t] : rows) raw.push_back({u, i, r, t});
    return Dataset::from_interactions(std::move(raw));
  }, "rows"_a, "Builds a dataset from (user, item, rating, timestamp) tuples.");
  m.def("synthetic", [](const std::string& profile, std::size_t users, std::size_t items, std::uint64_t seed) {
    if (profile == "ml1m") return generate_synthetic(SyntheticConfig::movielens_like(seed));
    if (profile == "small") return generate_synthetic(SyntheticConfig::small(users, items, seed));
    throw ConfigError("unknown synthetic profile '" + profile + "'");
  }, "profile"_a = "small", "users"_a = 500, "items"_a = 1000, "seed"_a = 7);

  py::class_<Model>(m, "Model")
      .def_property_readonly("kind", [](const Model& mdl) { return std::string(mdl.recommender->kind()); })
      .def_property_readonly("model_id", [](const Model& mdl) { return model_id(*mdl.recommender); })
      .def_property_readonly("num_items", [](const Model& mdl) { return mdl.recommender->num_items(); })
      .def("save", [](const Model& mdl, const std::filesystem::path& path) { save_model_file(path, *mdl.snapshot); },
           "path"_a)
      .def("recommend", &recommend_for, "history"_a, "k"_a = 10,
           "Top-k items for a user with the given (item, rating) history; rated items are excluded.");

  m.def("train_mf", [](const Dataset& d, std::size_t dim, double lambda, std::size_t epochs, std::uint64_t seed) {
    py::gil_scoped_release release;
    return Model(train_mf(d, {.dim = dim, .lambda = lambda, .epochs = epochs, .seed = seed}));
  }, "dataset"_a, "dim"_a = 32, "lambda_"_a = 0.1, "epochs"_a = 10, "seed"_a = 0);
  m.def("train_rnn", [](const Dataset& d, std::size_t hidden, std::size_t dim, double lambda, double learning_rate,
                        std::size_t epochs, std::size_t max_length, std::size_t batch_size, std::uint64_t seed) {
    py::gil_scoped_release release;
    return Model(train_rnn(d, {.hidden = hidden, .dim = dim, .lambda = lambda, .learning_rate = learning_rate,
                               .epochs = epochs, .max_length = max_length, .batch_size = batch_size, .seed = seed}));
  }, "dataset"_a, "hidden"_a = 32, "dim"_a = 32, "lambda_"_a = 1e-4, "learning_rate"_a = 0.01, "epochs"_a = 10,
     "max_length"_a = 50, "batch_size"_a = 32, "seed"_a = 0);
  m.def("load_model", [](const std::filesystem::path& path) { return Model(load_model_file(path)); }, "path"_a);

  m.def("simulate", &simulate_cohort, "model"_a, "dataset"_a, "choice"_a = "uniform", "alpha"_a = 0.0,
        "feedback"_a = "positive", "beta"_a = 1, "rho0"_a = 1000.0, "seed"_a = "real_history",
        "num_users"_a = py::none(), "steps"_a = 150, "slate_size"_a = 10, "popularity_mode"_a = "raw_count",
        "split"_a = "none", "master_seed"_a = 0, "threads"_a = 1,
        "Runs a cohort and returns its trajectories, failures and summary.");

  m.def("fit_trend", [](const std::vector<double>& ys) -> std::optional<std::pair<double, double>> {
    const auto fit = fit_trend(ys);
    if (!fit) return std::nullopt;
    return std::make_pair(fit->slope, fit->intercept);
  }, "series"_a, "OLS (slope, intercept) against t = 1..n, or None for fewer than two points.");
}
