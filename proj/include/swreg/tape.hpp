#pragma once

// Minimal reverse-mode tape over flat tensors.
//
// Each recorded node keeps its forward value and a closure that, given the
// node's own gradient, accumulates into its inputs. Parameter leaves map to
// a slice of the flat parameter vector; backward() returns dL/dtheta.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace swreg {

class TapeReused : public std::logic_error {
public:
    TapeReused() : std::logic_error("tape already consumed by a backward pass") {}
};

class Tape {
public:
    using Id = std::size_t;
    using BackwardFn = std::function<void(Tape&, Id self)>;

    explicit Tape(std::size_t param_count) : param_count_(param_count) {}

    Id constant(std::vector<double> value);
    Id parameter(std::span<const double> theta, std::size_t offset, std::size_t size);
    /// `differentiable` is whether any input carries a gradient path to theta.
    Id record(std::vector<double> value, bool differentiable, BackwardFn backward);

    [[nodiscard]] const std::vector<double>& value(Id id) const { return nodes_[id].value; }
    [[nodiscard]] bool differentiable(Id id) const { return nodes_[id].differentiable; }
    [[nodiscard]] std::size_t size() const { return nodes_.size(); }
    [[nodiscard]] bool consumed() const { return consumed_; }

    /// Gradient buffer of a node (zero-initialised on first use).
    std::vector<double>& grad(Id id);

    /// Seeds the last recorded node with `upstream` and runs the reverse pass.
    /// A tape supports exactly one backward pass.
    std::vector<double> backward(std::span<const double> upstream);

private:
    struct Node {
        std::vector<double> value;
        std::vector<double> grad;
        bool differentiable = false;
        BackwardFn backward;
        std::optional<std::size_t> param_offset;
    };

    std::vector<Node> nodes_;
    std::size_t param_count_;
    bool consumed_ = false;
};

}  // namespace swreg
