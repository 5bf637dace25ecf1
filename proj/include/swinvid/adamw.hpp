#pragma once

#include <vector>

#include "swinvid/array.hpp"

namespace swinvid {

struct AdamWConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

// Decoupled weight decay Adam. Moment buffers live here, keyed by parameter
// order, so the parameter list must be stable across steps.
class AdamW {
  public:
    explicit AdamW(std::vector<Array> params, AdamWConfig cfg = {});

    // one update from the gradients currently held by the parameters
    void step();
    void zero_grad();

    unsigned long long step_count() const { return t_; }
    const AdamWConfig& config() const { return cfg_; }

  private:
    std::vector<Array> params_;
    std::vector<std::vector<double>> m_;
    std::vector<std::vector<double>> v_;
    AdamWConfig cfg_;
    unsigned long long t_ = 0;
};

}  // namespace swinvid
