#include "tubepi/ensemble.hpp"

#include "tubepi/errors.hpp"

namespace tubepi {

namespace {
constexpr std::uint64_t kNormalChannel = 1;
constexpr std::uint64_t kLongitudinalChannel = 2;
}  // namespace

Ensemble::Ensemble(MetricChart chart, TubeSpec spec, Frame frame, SDEParams params, EnsembleOptions options)
    : chart_(std::move(chart)),
      spec_(std::move(spec)),
      frame_(std::move(frame)),
      params_(std::move(params)),
      options_(options) {
    spec_.validate();
    params_.validate();
    if (frame_.nodes() != spec_.trajectory.grid.nodes())
        throw Error(ErrorKind::Shape, "frame and trajectory grids differ");
}

Ensemble Ensemble::build(const MetricChart& chart, const Vec& start, const Vec& end, double duration,
                         const SDEParams& params, const EnsembleOptions& options, double hbar,
                         const TrajectoryOptions& trajectory_options) {
    TrajectoryOptions topt = trajectory_options;
    topt.steps = params.steps;
    auto traj = solve_classical_trajectory(chart, start, end, duration, topt);
    auto frame = parallel_frame(chart, traj);
    auto spec = TubeSpec::with_defaults(std::move(traj), hbar);
    return Ensemble(chart, std::move(spec), std::move(frame), params, options);
}

FluctuationPath Ensemble::fluctuation(std::size_t index) const {
    RandomStream normal(options_.seed, index, kNormalChannel);
    RandomStream longitudinal(options_.seed, index, kLongitudinalChannel);
    return simulate_fluctuation(chart_, frame_, spec_, params_, normal, longitudinal);
}

Sample Ensemble::sample(std::size_t index) const {
    Sample s;
    s.fluctuation = fluctuation(index);
    AssembleOptions aopt;
    aopt.restore_gauge_orbit = options_.restore_gauge_orbit;
    s.path = assemble_path(chart_, spec_.trajectory, frame_, s.fluctuation, aopt);
    return s;
}

Ensemble Ensemble::with_samples(std::size_t samples) const {
    Ensemble e = *this;
    e.options_.samples = samples;
    return e;
}

Ensemble Ensemble::with_seed(std::uint64_t seed) const {
    Ensemble e = *this;
    e.options_.seed = seed;
    return e;
}

Ensemble Ensemble::with_workers(int workers) const {
    Ensemble e = *this;
    e.options_.workers = workers;
    return e;
}

}  // namespace tubepi
