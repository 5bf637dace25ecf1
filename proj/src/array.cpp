#include "swinvid/array.hpp"

#include <sstream>
#include <unordered_set>

namespace swinvid {

namespace {
thread_local Tape* t_active_tape = nullptr;

std::shared_ptr<ArrayStorage> make_storage(std::vector<size_t> shape) {
    if (shape.empty()) throw contract_error("array shape must not be empty");
    for (size_t d : shape) {
        if (d == 0) throw contract_error("array dimensions must be positive");
    }
    auto s = std::make_shared<ArrayStorage>();
    s->data.resize(Array::shape_numel(shape));
    s->shape = std::move(shape);
    return s;
}
}  // namespace

size_t Array::shape_numel(const std::vector<size_t>& shape) {
    size_t n = 1;
    for (size_t d : shape) n *= d;
    return n;
}

Array Array::zeros(std::vector<size_t> shape, bool requires_grad) {
    auto s = make_storage(std::move(shape));
    s->requires_grad = requires_grad;
    return Array(std::move(s));
}

Array Array::full(std::vector<size_t> shape, double value) {
    auto s = make_storage(std::move(shape));
    for (double& x : s->data) x = value;
    return Array(std::move(s));
}

Array Array::from_data(std::vector<size_t> shape, std::vector<double> data) {
    auto s = make_storage(std::move(shape));
    if (data.size() != s->data.size()) {
        throw contract_error("data length " + std::to_string(data.size()) +
                             " does not match shape " + shape_str(s->shape));
    }
    s->data = std::move(data);
    return Array(std::move(s));
}

Array Array::scalar(double value) { return full({1}, value); }

size_t Array::size(size_t axis) const {
    if (axis >= s_->shape.size()) throw contract_error("axis out of range");
    return s_->shape[axis];
}

double Array::item() const {
    if (numel() != 1) throw contract_error("item() requires a single-element array");
    return s_->data[0];
}

std::vector<double>& Array::grad() {
    if (s_->grad.size() != s_->data.size()) s_->grad.assign(s_->data.size(), 0.0);
    return s_->grad;
}

void Array::zero_grad() { s_->grad.assign(s_->data.size(), 0.0); }

std::string Array::shape_str(const std::vector<size_t>& shape) {
    std::ostringstream os;
    os << "(";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

std::string Array::shape_str() const { return shape_str(s_->shape); }

Tape::Tape() : prev_(t_active_tape) { t_active_tape = this; }

Tape::~Tape() { t_active_tape = prev_; }

Tape* Tape::active() { return t_active_tape; }

void Tape::record(Node node) { nodes_.push_back(std::move(node)); }

void Tape::backward(const Array& loss) {
    if (!loss.valid() || loss.numel() != 1) {
        throw contract_error("backward requires a scalar loss");
    }
    bool on_tape = false;
    for (const Node& n : nodes_) {
        if (n.output == loss.storage()) {
            on_tape = true;
            break;
        }
    }
    if (!on_tape) throw contract_error("loss was not recorded on this tape");

    std::unordered_set<ArrayStorage*> seen;
    auto prepare = [&seen](const std::shared_ptr<ArrayStorage>& s) {
        if (seen.insert(s.get()).second) s->grad.assign(s->data.size(), 0.0);
    };
    for (const Node& n : nodes_) {
        for (const auto& in : n.inputs) prepare(in);
        prepare(n.output);
    }
    loss.storage()->grad[0] = 1.0;

    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        if (it->backward) it->backward();
    }
}

}  // namespace swinvid
