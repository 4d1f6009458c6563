#pragma once

// Synthetic pipeline corpora: runtimes drawn from known distributions whose
// family and parameters follow a few of the feature values.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rtdlab/dist.hpp"
#include "rtdlab/pipeline.hpp"
#include "rtdlab/rng.hpp"

namespace synthetic {

inline rtdlab::rtd::RtdSample draw_sample(rtdlab::dist::Family family, const rtdlab::dist::DistParams& p,
                                          std::size_t n, std::uint64_t seed) {
  rtdlab::Rng rng(seed);
  rtdlab::rtd::RtdSample s;
  for (std::size_t i = 0; i < n; ++i) {
    double u = rng.uniform();
    while (u <= 0.0) u = rng.uniform();
    const double x = rtdlab::dist::quantile(family, p, u);
    s.flips.push_back(static_cast<std::uint64_t>(std::max(1.0, std::round(x))));
  }
  std::sort(s.flips.begin(), s.flips.end());
  s.per_run_timeout = 1'000'000'000;
  s.master_seed = seed;
  return s;
}

inline std::vector<rtdlab::pipeline::InstanceData> corpus(std::size_t n, std::uint64_t seed) {
  using rtdlab::dist::Family;
  std::vector<rtdlab::pipeline::InstanceData> out;
  rtdlab::Rng rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    rtdlab::pipeline::InstanceData inst;
    inst.instance_id = "syn" + std::to_string(i);
    for (auto& v : inst.features.values) v = rng.uniform();
    const double selector = inst.features.get("nvarsOrig");
    const double knob = inst.features.get("nclausesOrig");
    const Family family = selector < 0.5 ? Family::Weibull : Family::Lognormal;
    rtdlab::dist::DistParams p;
    if (family == Family::Weibull) {
      p = {0.5 + knob, 2000.0 + 4000.0 * knob, 100.0};
    } else {
      p = {0.4 + knob, 6.0 + 2.0 * knob, 0.0};
    }
    inst.sample = draw_sample(family, p, 200, rtdlab::substream_seed(seed, i));
    inst.sample.instance_id = inst.instance_id;
    inst.fits = rtdlab::rtd::fit_all(inst.sample);
    out.push_back(std::move(inst));
  }
  return out;
}

inline rtdlab::pipeline::PipelineOptions quick_options() {
  rtdlab::pipeline::PipelineOptions o;
  o.n_trees = 15;
  o.train.max_epochs = 150;
  o.train.patience = 30;
  return o;
}

}  // namespace synthetic
