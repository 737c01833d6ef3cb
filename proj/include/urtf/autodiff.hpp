#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace urtf::ad {

// Dense 64-bit float tensor, rank 0..2.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    static Tensor scalar(double v) { return {{}, {v}}; }
    static Tensor zeros(std::vector<int> shape);

    int size() const {
        int n = 1;
        for (int d : shape) n *= d;
        return n;
    }
    bool operator==(const Tensor&) const = default;
};

class ShapeMismatch : public std::runtime_error {
public:
    ShapeMismatch(const std::string& op, const Tensor& a, const Tensor& b);
    explicit ShapeMismatch(const std::string& what) : std::runtime_error(what) {}
};

class NotScalar : public std::runtime_error {
public:
    NotScalar() : std::runtime_error("grad target must be a scalar node") {}
};

using NodeId = int;

// Append-only record of primitive applications. Backward rules are expressed
// in terms of the same primitives, so gradient nodes can themselves be
// differentiated (gradients of gradients for the bi-level update).
class Tape {
public:
    NodeId input(Tensor value);

    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);  // elementwise
    NodeId scale(NodeId a, double factor);
    NodeId matmul(NodeId a, NodeId b);  // rank-2 only
    NodeId transpose(NodeId a);
    NodeId sum(NodeId a);   // scalar
    NodeId mean(NodeId a);  // scalar
    NodeId broadcast(NodeId scalar_node, std::vector<int> shape);
    NodeId log_softmax(NodeId a);  // over all elements
    NodeId exp(NodeId a);
    NodeId pick(NodeId a, int index);                  // scalar element of flattened a
    NodeId scatter(NodeId scalar_node, int index, int size);
    NodeId gather_rows(NodeId matrix, std::vector<int> rows);
    NodeId scatter_rows(NodeId rows_matrix, std::vector<int> rows, int n_rows);
    NodeId embedding_lookup(NodeId table, const std::vector<int>& token_ids);
    NodeId concat(NodeId a, NodeId b);  // flattens; result rank-1
    NodeId slice(NodeId a, int start, int len);
    NodeId pad(NodeId a, int start, int total);
    NodeId reshape(NodeId a, std::vector<int> shape);
    NodeId detach(NodeId a);  // value copy; gradient does not flow through

    // -log_softmax(logits)[target]; composite over recorded primitives
    NodeId cross_entropy(NodeId logits, int target_index);

    const Tensor& value(NodeId id) const;
    std::size_t size() const { return nodes_.size(); }

    // Reverse sweep from a scalar loss. Returns one gradient node per param
    // (a zero tensor node when the loss does not depend on it). The returned
    // nodes live on this tape and can be differentiated again.
    std::vector<NodeId> grad(NodeId loss, const std::vector<NodeId>& params);

private:
    enum class Op {
        Input, Add, Sub, Mul, Scale, Matmul, Transpose, Sum, Mean, Broadcast,
        LogSoftmax, Exp, Pick, Scatter, GatherRows, ScatterRows, Concat, Slice,
        Pad, Reshape, Detach,
    };

    struct Node {
        Op op;
        NodeId a = -1, b = -1;
        Tensor val;
        double factor = 0;          // Scale
        int i0 = 0, i1 = 0;         // Pick/Scatter/Slice/Pad indices
        std::vector<int> rows;      // GatherRows/ScatterRows
    };

    NodeId push(Node node);
    const Node& at(NodeId id) const;

    std::vector<Node> nodes_;
};

// Named tensor collection for model parameters; updates are by-value.
struct ParamStore {
    std::vector<std::pair<std::string, Tensor>> items;

    Tensor& operator[](const std::string& name);
    const Tensor& at(const std::string& name) const;
    bool operator==(const ParamStore&) const = default;
};

// Central finite differences against the supplied analytic gradients.
// Returns the max relative error with denominator max(1, |analytic|).
double finite_diff_check(const std::function<double(const std::vector<Tensor>&)>& f,
                         const std::vector<Tensor>& params,
                         const std::vector<Tensor>& analytic_grads, double epsilon);

}  // namespace urtf::ad
