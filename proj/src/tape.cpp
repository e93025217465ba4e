#include "swreg/tape.hpp"

#include <algorithm>

namespace swreg {

Tape::Id Tape::constant(std::vector<double> value) {
    nodes_.push_back(Node{std::move(value), {}, false, nullptr, std::nullopt});
    return nodes_.size() - 1;
}

Tape::Id Tape::parameter(std::span<const double> theta, std::size_t offset, std::size_t size) {
    if (offset + size > theta.size() || theta.size() != param_count_) {
        throw std::out_of_range("parameter slice outside theta");
    }
    auto slice = theta.subspan(offset, size);
    nodes_.push_back(Node{std::vector<double>(slice.begin(), slice.end()), {}, true, nullptr, offset});
    return nodes_.size() - 1;
}

Tape::Id Tape::record(std::vector<double> value, bool differentiable, BackwardFn backward) {
    nodes_.push_back(Node{std::move(value), {}, differentiable, std::move(backward), std::nullopt});
    return nodes_.size() - 1;
}

std::vector<double>& Tape::grad(Id id) {
    Node& n = nodes_[id];
    if (n.grad.size() != n.value.size()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

std::vector<double> Tape::backward(std::span<const double> upstream) {
    if (consumed_) throw TapeReused();
    if (nodes_.empty()) throw std::logic_error("backward on an empty tape");
    consumed_ = true;
    const Id out = nodes_.size() - 1;
    if (upstream.size() != nodes_[out].value.size()) throw std::invalid_argument("upstream gradient size mismatch");
    std::vector<double> dtheta(param_count_, 0.0);
    if (std::all_of(upstream.begin(), upstream.end(), [](double g) { return g == 0.0; })) return dtheta;
    grad(out).assign(upstream.begin(), upstream.end());
    for (Id i = nodes_.size(); i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.differentiable || n.grad.empty()) continue;
        if (n.param_offset) {
            std::copy(n.grad.begin(), n.grad.end(), dtheta.begin() + static_cast<std::ptrdiff_t>(*n.param_offset));
        } else if (n.backward) {
            n.backward(*this, i);
        }
        // Intermediates are no longer needed once propagated.
        std::vector<double>().swap(n.grad);
    }
    return dtheta;
}

}  // namespace swreg
