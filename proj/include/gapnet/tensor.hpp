#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gapnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Thrown when operand shapes do not conform; the message names both shapes.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class Tape;

/// Index of a recorded value on a Tape.
struct NodeId {
    std::size_t index = 0;
    friend bool operator==(NodeId, NodeId) = default;
};

/// Dense row-major tensor of doubles.
///
/// A tensor optionally carries a handle (tape pointer + node id) into the tape
/// that produced it. Ops whose inputs carry a handle are recorded on that tape;
/// ops on plain tensors run without recording. The handle is a non-owning
/// reference: a tracked tensor must not be used in new ops after its tape is
/// destroyed (call detach() first).
class Tensor {
public:
    Tensor() = default;
    Tensor(Shape shape, std::vector<double> data);
    explicit Tensor(Shape shape, double fill = 0.0);

    static Tensor scalar(double value);
    static Tensor zeros(const Shape& shape) { return Tensor(shape, 0.0); }
    static Tensor ones(const Shape& shape) { return Tensor(shape, 1.0); }
    static Tensor eye(std::size_t n);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const;

    std::span<const double> data() const { return data_; }
    /// Mutable access; only meaningful for untracked tensors since the tape keeps
    /// its own copy of recorded values.
    std::span<double> mutable_data() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double item() const;
    double operator[](std::size_t flat) const { return data_[flat]; }
    double at(std::initializer_list<std::size_t> index) const;
    double& at(std::initializer_list<std::size_t> index);

    bool tracked() const { return tape_ != nullptr; }
    Tape* tape() const { return tape_; }
    std::optional<NodeId> node() const;

    /// Copy of the values with no tape handle.
    Tensor detach() const { return Tensor(shape_, data_); }

private:
    friend class Tape;

    std::size_t flat_index(std::initializer_list<std::size_t> index) const;

    Shape shape_;
    std::vector<double> data_;
    Tape* tape_ = nullptr;
    std::size_t node_ = 0;
};

using ParameterMap = std::map<std::string, Tensor>;

/// Records operations in execution order for reverse-mode differentiation.
///
/// One tape per training step. Recorded nodes hold a copy of their forward
/// value, so backward rules never depend on caller-owned tensors.
class Tape {
public:
    /// Accumulates the node's output gradient into its inputs' gradients.
    using BackwardFn = std::function<void(Tape& tape, std::span<const double> out_grad)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Registers a named learnable leaf. Names must be unique per tape.
    Tensor parameter(const std::string& name, const Tensor& value);
    /// Registers every entry of a parameter map under its key.
    ParameterMap parameters(const ParameterMap& values);
    /// Records a value that never receives a gradient.
    Tensor constant(const Tensor& value);

    /// Records the result of an op. `inputs` must already live on this tape.
    Tensor record(Shape shape, std::vector<double> value, std::vector<NodeId> inputs,
                  BackwardFn backward);

    /// Puts `t` on this tape, as a constant if it is untracked.
    NodeId ensure(const Tensor& t);

    std::span<const double> value(NodeId id) const { return nodes_[id.index].value; }
    const Shape& shape(NodeId id) const { return nodes_[id.index].shape; }
    bool requires_grad(NodeId id) const { return nodes_[id.index].requires_grad; }

    /// Gradient buffer for `id`, allocated on first use.
    std::span<double> grad_buffer(NodeId id);
    /// Gradient of the last backward pass w.r.t. a tracked tensor (zeros if none).
    Tensor grad(const Tensor& t) const;

    const std::vector<std::pair<std::string, NodeId>>& registry() const { return registry_; }
    std::size_t op_count() const { return nodes_.size(); }

    void zero_grad();

private:
    friend ParameterMap backward(Tape& tape, const Tensor& loss);

    struct Node {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        std::vector<NodeId> inputs;
        BackwardFn backward;
        bool requires_grad = false;
    };

    Tensor make_handle(std::size_t index);

    std::vector<Node> nodes_;
    std::vector<std::pair<std::string, NodeId>> registry_;
};

/// Runs reverse accumulation from a scalar loss and returns the gradient of
/// every registered parameter; unreachable parameters get zeros. Gradients
/// accumulate into existing buffers, so call zero_grad() between passes.
ParameterMap backward(Tape& tape, const Tensor& loss);

}  // namespace gapnet
