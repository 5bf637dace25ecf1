#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "swinvid/errors.hpp"
#include "swinvid/rng.hpp"

namespace swinvid {

// Dense row-major float64 tensor. Arrays are cheap handles onto shared
// storage; ops never mutate their inputs, so sharing is safe. Scalars carry
// shape {1} and shapes are never empty.
struct ArrayStorage {
    std::vector<size_t> shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until a backward pass touches it
    bool requires_grad = false;
};

class Array {
  public:
    Array() = default;

    static Array zeros(std::vector<size_t> shape, bool requires_grad = false);
    static Array full(std::vector<size_t> shape, double value);
    static Array from_data(std::vector<size_t> shape, std::vector<double> data);
    static Array scalar(double value);

    bool valid() const { return static_cast<bool>(s_); }
    const std::vector<size_t>& shape() const { return s_->shape; }
    size_t rank() const { return s_->shape.size(); }
    size_t size(size_t axis) const;
    size_t numel() const { return s_->data.size(); }

    double* data() { return s_->data.data(); }
    const double* data() const { return s_->data.data(); }
    std::vector<double>& vec() { return s_->data; }
    const std::vector<double>& vec() const { return s_->data; }
    double item() const;

    bool requires_grad() const { return s_->requires_grad; }
    void set_requires_grad(bool v) { s_->requires_grad = v; }

    // gradient buffer; sized on demand
    std::vector<double>& grad();
    const std::vector<double>& grad() const { return s_->grad; }
    bool has_grad() const { return !s_->grad.empty(); }
    void zero_grad();

    std::shared_ptr<ArrayStorage> storage() const { return s_; }

    static size_t shape_numel(const std::vector<size_t>& shape);
    std::string shape_str() const;
    static std::string shape_str(const std::vector<size_t>& shape);

  private:
    explicit Array(std::shared_ptr<ArrayStorage> s) : s_(std::move(s)) {}
    std::shared_ptr<ArrayStorage> s_;
};

// Define-by-run gradient tape. Ops record one node each while a tape is
// active on the current thread; backward() replays the nodes in exact
// reverse order, accumulating additively so fan-out sums contributions.
// A tape together with its arrays is a single-threaded unit.
class Tape {
  public:
    struct Node {
        std::vector<std::shared_ptr<ArrayStorage>> inputs;
        std::shared_ptr<ArrayStorage> output;
        std::function<void()> backward;
    };

    Tape();
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* active();

    void record(Node node);
    size_t size() const { return nodes_.size(); }

    // seeds dLoss/dLoss = 1 and propagates to every recorded array;
    // loss must be a scalar recorded on this tape
    void backward(const Array& loss);

  private:
    std::vector<Node> nodes_;
    Tape* prev_ = nullptr;
};

}  // namespace swinvid
