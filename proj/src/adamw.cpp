#include "swinvid/adamw.hpp"

#include <cmath>

#include "swinvid/errors.hpp"
#include "swinvid/kernels.hpp"

namespace swinvid {

AdamW::AdamW(std::vector<Array> params, AdamWConfig cfg)
    : params_(std::move(params)), cfg_(cfg) {
    m_.reserve(params_.size());
    v_.reserve(params_.size());
    for (const Array& p : params_) {
        if (!p.valid()) throw contract_error("optimizer given an empty parameter");
        m_.emplace_back(p.numel(), 0.0);
        v_.emplace_back(p.numel(), 0.0);
    }
}

void AdamW::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const double inv_bc1 = 1.0 / bc1;
    const double inv_bc2 = 1.0 / bc2;
    const double lr_wd = cfg_.lr * cfg_.weight_decay;
    for (size_t i = 0; i < params_.size(); ++i) {
        Array& p = params_[i];
        kernels::adamw(p.data(), m_[i].data(), v_[i].data(), p.grad().data(), p.numel(),
                       cfg_.lr, cfg_.beta1, cfg_.beta2, cfg_.eps, inv_bc1, inv_bc2, lr_wd);
    }
}

void AdamW::zero_grad() {
    for (Array& p : params_) p.zero_grad();
}

}  // namespace swinvid
