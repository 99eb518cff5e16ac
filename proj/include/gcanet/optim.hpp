#pragma once

#include <map>
#include <string>

#include "gcanet/tensor.hpp"

namespace gcanet {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 1e-6;
};

// Classic Adam with bias correction; weight decay is added to the gradient
// as wd * theta before the moment updates.
class Adam {
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig& config() const { return cfg_; }
    int64_t step_count() const { return step_; }
    void set_step_count(int64_t s) { step_ = s; }

    // One update over named parameters; missing gradients count as zero.
    void step(const std::map<std::string, Tensor>& params);

    std::map<std::string, Tensor>& moments1() { return m_; }
    std::map<std::string, Tensor>& moments2() { return v_; }

private:
    AdamConfig cfg_;
    int64_t step_ = 0;
    std::map<std::string, Tensor> m_;
    std::map<std::string, Tensor> v_;
};

}  // namespace gcanet
