#include "gapnet/tensor.hpp"

#include <algorithm>
#include <sstream>

namespace gapnet {

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size()) {
        throw ShapeError("tensor shape " + shape_str(shape_) + " does not match data length " +
                         std::to_string(data_.size()));
    }
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, std::vector<double>{value}); }

Tensor Tensor::eye(std::size_t n) {
    Tensor t({n, n}, 0.0);
    for (std::size_t i = 0; i < n; ++i) t.data_[i * n + i] = 1.0;
    return t;
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " + shape_str(shape_));
    }
    return shape_[axis];
}

double Tensor::item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
    return data_[0];
}

std::size_t Tensor::flat_index(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size()) {
        throw ShapeError("index rank " + std::to_string(index.size()) + " for shape " + shape_str(shape_));
    }
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= shape_[axis]) throw ShapeError("index out of bounds for shape " + shape_str(shape_));
        flat = flat * shape_[axis] + i;
        ++axis;
    }
    return flat;
}

double Tensor::at(std::initializer_list<std::size_t> index) const { return data_[flat_index(index)]; }
double& Tensor::at(std::initializer_list<std::size_t> index) { return data_[flat_index(index)]; }

std::optional<NodeId> Tensor::node() const {
    if (!tape_) return std::nullopt;
    return NodeId{node_};
}

Tensor Tape::make_handle(std::size_t index) {
    Tensor t(nodes_[index].shape, nodes_[index].value);
    t.tape_ = this;
    t.node_ = index;
    return t;
}

Tensor Tape::parameter(const std::string& name, const Tensor& value) {
    for (const auto& [existing, id] : registry_) {
        if (existing == name) throw std::invalid_argument("parameter registered twice: " + name);
    }
    Node node;
    node.shape = value.shape();
    node.value = value.values();
    node.requires_grad = true;
    nodes_.push_back(std::move(node));
    registry_.emplace_back(name, NodeId{nodes_.size() - 1});
    return make_handle(nodes_.size() - 1);
}

ParameterMap Tape::parameters(const ParameterMap& values) {
    ParameterMap tracked;
    for (const auto& [name, value] : values) tracked.emplace(name, parameter(name, value));
    return tracked;
}

Tensor Tape::constant(const Tensor& value) {
    Node node;
    node.shape = value.shape();
    node.value = value.values();
    nodes_.push_back(std::move(node));
    return make_handle(nodes_.size() - 1);
}

NodeId Tape::ensure(const Tensor& t) {
    if (t.tape_ == this) return NodeId{t.node_};
    if (t.tape_ != nullptr) throw std::invalid_argument("tensor belongs to a different tape");
    return NodeId{constant(t).node_};
}

Tensor Tape::record(Shape shape, std::vector<double> value, std::vector<NodeId> inputs, BackwardFn fn) {
    Node node;
    node.shape = std::move(shape);
    node.value = std::move(value);
    node.requires_grad = std::any_of(inputs.begin(), inputs.end(),
                                     [this](NodeId id) { return nodes_[id.index].requires_grad; });
    node.inputs = std::move(inputs);
    if (node.requires_grad) node.backward = std::move(fn);
    nodes_.push_back(std::move(node));
    return make_handle(nodes_.size() - 1);
}

std::span<double> Tape::grad_buffer(NodeId id) {
    Node& node = nodes_[id.index];
    if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
    return node.grad;
}

Tensor Tape::grad(const Tensor& t) const {
    if (t.tape_ != this) throw std::invalid_argument("grad() of a tensor not recorded on this tape");
    const Node& node = nodes_[t.node_];
    if (node.grad.empty()) return Tensor::zeros(node.shape);
    return Tensor(node.shape, node.grad);
}

void Tape::zero_grad() {
    for (Node& node : nodes_) node.grad.clear();
}

ParameterMap backward(Tape& tape, const Tensor& loss) {
    if (loss.tape() != &tape) throw std::invalid_argument("backward: loss is not recorded on this tape");
    if (loss.size() != 1) throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));

    const std::size_t root = loss.node()->index;
    tape.grad_buffer(NodeId{root})[0] += 1.0;

    for (std::size_t i = root + 1; i-- > 0;) {
        auto& node = tape.nodes_[i];
        if (!node.requires_grad || !node.backward || node.grad.empty()) continue;
        // Rules only touch buffers of earlier nodes, so this span stays valid.
        node.backward(tape, std::span<const double>(node.grad));
    }

    ParameterMap grads;
    for (const auto& [name, id] : tape.registry_) {
        const auto& node = tape.nodes_[id.index];
        grads.emplace(name, node.grad.empty() ? Tensor::zeros(node.shape) : Tensor(node.shape, node.grad));
    }
    return grads;
}

}  // namespace gapnet
