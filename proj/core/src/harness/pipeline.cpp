#include "hydronmpc/harness/pipeline.hpp"

#include "hydronmpc/errors.hpp"
#include "hydronmpc/harness/metrics.hpp"
#include "hydronmpc/ssmp/dataset.hpp"

namespace hnmpc {

EpisodeStore build_dataset(const PlantParams& params, const DatasetRecipe& recipe) {
  const Workspace ws;
  EpisodeStore store = collect_open_loop(params, ws, recipe.collect, recipe.open_loop_episodes, recipe.seed);
  EpisodeStore closed =
      collect_closed_loop(params, ws, PidGains{}, recipe.collect, recipe.closed_loop_episodes, recipe.seed + 1);
  for (Episode& e : closed.episodes) store.episodes.push_back(std::move(e));
  return store;
}

Armse3 prediction_armse(const SsmpModel& model, const EpisodeStore& store) {
  const WindowIndex index = index_windows(store, model.history(), model.horizon());
  if (index.refs.empty()) throw ConfigError("prediction_armse: no windows");
  std::array<Armse, 3> acc;
  for (const WindowRef& ref : index.refs) {
    const Episode& ep = store.episodes[ref.episode];
    const OutputSequence pred =
        model.predict(window_at(ep, ref.t, model.history()), future_inputs_at(ep, ref.t, model.horizon()));
    const OutputSequence truth = realized_outputs_at(ep, ref.t, model.horizon());
    for (int j = 0; j < 3; ++j) acc[static_cast<std::size_t>(j)].add(rmse(truth.col(j), pred.col(j)));
  }
  Armse3 out;
  out.windows = index.refs.size();
  for (std::size_t j = 0; j < 3; ++j) {
    out.joint[j] = acc[j].value();
    out.mean += out.joint[j] / 3.0;
  }
  return out;
}

TrainedModel train_recipe(const EpisodeStore& store, const TrainRecipe& recipe) {
  const auto [train, valid] = split_validation(store, recipe.validation_fraction);
  const std::size_t h = recipe.dims.history;
  const std::size_t n = recipe.dims.horizon;
  Rng rng(recipe.train.seed);
  TrainedModel out{SsmpModel(recipe.dims, fit_normalizer(train, h, n, recipe.dims.target), rng), {}, {}};
  out.result = train_offline(out.model, train, index_windows(train, h, n).refs, recipe.train);
  out.validation = prediction_armse(out.model, valid);
  return out;
}

}  // namespace hnmpc
