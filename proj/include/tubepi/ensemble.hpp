#pragma once

#include "tubepi/dynamics.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace tubepi {

struct EnsembleOptions {
    std::uint64_t seed = 0;
    std::size_t samples = 1000;
    int workers = 1;
    bool restore_gauge_orbit = false;
};

struct Sample {
    FluctuationPath fluctuation;
    DiscretePath path;
};

// A reproducible family of tube paths: sample i is a pure function of
// (configuration, seed, i), so any subset can be regenerated in any order.
class Ensemble {
public:
    Ensemble(MetricChart chart, TubeSpec spec, Frame frame, SDEParams params, EnsembleOptions options);

    // Solves the trajectory, builds the parallel frame and the default tube.
    static Ensemble build(const MetricChart& chart, const Vec& start, const Vec& end, double duration,
                          const SDEParams& params, const EnsembleOptions& options, double hbar = 1.0,
                          const TrajectoryOptions& trajectory_options = {});

    FluctuationPath fluctuation(std::size_t index) const;
    Sample sample(std::size_t index) const;

    std::size_t size() const { return options_.samples; }
    const MetricChart& chart() const { return chart_; }
    const TubeSpec& spec() const { return spec_; }
    TubeSpec& spec() { return spec_; }
    const Frame& frame() const { return frame_; }
    const SDEParams& params() const { return params_; }
    const EnsembleOptions& options() const { return options_; }
    const ClassicalTrajectory& trajectory() const { return spec_.trajectory; }
    const TimeGrid& grid() const { return spec_.trajectory.grid; }
    SamplingLaw law() const { return params_.law; }

    Ensemble with_samples(std::size_t samples) const;
    Ensemble with_seed(std::uint64_t seed) const;
    Ensemble with_workers(int workers) const;

private:
    MetricChart chart_;
    TubeSpec spec_;
    Frame frame_;
    SDEParams params_;
    EnsembleOptions options_;
};

// Blocks of this many consecutive samples are the unit of work and of reduction.
inline constexpr std::size_t kBlockSize = 512;

// Evaluates fn(index) for every index in [0, count) on `workers` threads and
// returns the records in index order. The result does not depend on workers.
template <class Fn>
auto map_indices(std::size_t count, int workers, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
    using Record = decltype(fn(std::size_t{}));
    std::vector<Record> out(count);
    const std::size_t blocks = (count + kBlockSize - 1) / kBlockSize;
    const int threads = std::max(1, std::min<int>(workers, static_cast<int>(blocks)));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) out[i] = fn(i);
        return out;
    }
    std::size_t next_block = 0;
    std::mutex lock;
    std::exception_ptr failure;
    auto worker = [&]() {
        for (;;) {
            std::size_t b;
            {
                std::lock_guard<std::mutex> g(lock);
                if (next_block >= blocks || failure) return;
                b = next_block++;
            }
            try {
                const std::size_t end = std::min(count, (b + 1) * kBlockSize);
                for (std::size_t i = b * kBlockSize; i < end; ++i) out[i] = fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(lock);
                if (!failure) failure = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

template <class Fn>
auto map_samples(const Ensemble& ensemble, Fn&& fn) {
    return map_indices(ensemble.size(), ensemble.options().workers,
                       [&](std::size_t i) { return fn(i, ensemble.sample(i)); });
}

}  // namespace tubepi
