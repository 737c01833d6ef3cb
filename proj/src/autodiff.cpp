#include "urtf/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace urtf::ad {

namespace {

std::string shape_str(const Tensor& t) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < t.shape.size(); ++i) {
        if (i) os << ",";
        os << t.shape[i];
    }
    os << ")";
    return os.str();
}

}  // namespace

Tensor Tensor::zeros(std::vector<int> shape) {
    Tensor t;
    t.shape = std::move(shape);
    t.data.assign(t.size(), 0.0);
    return t;
}

ShapeMismatch::ShapeMismatch(const std::string& op, const Tensor& a, const Tensor& b)
    : std::runtime_error(op + ": incompatible shapes " + shape_str(a) + " and " + shape_str(b)) {}

NodeId Tape::push(Node node) {
    nodes_.push_back(std::move(node));
    return static_cast<NodeId>(nodes_.size()) - 1;
}

const Tape::Node& Tape::at(NodeId id) const { return nodes_.at(id); }

const Tensor& Tape::value(NodeId id) const { return at(id).val; }

NodeId Tape::input(Tensor value) { return push({Op::Input, -1, -1, std::move(value)}); }

NodeId Tape::add(NodeId a, NodeId b) {
    const auto& ta = value(a);
    const auto& tb = value(b);
    if (ta.shape != tb.shape) throw ShapeMismatch("add", ta, tb);
    Tensor out = ta;
    for (int i = 0; i < out.size(); ++i) out.data[i] += tb.data[i];
    return push({Op::Add, a, b, std::move(out)});
}

NodeId Tape::sub(NodeId a, NodeId b) {
    const auto& ta = value(a);
    const auto& tb = value(b);
    if (ta.shape != tb.shape) throw ShapeMismatch("sub", ta, tb);
    Tensor out = ta;
    for (int i = 0; i < out.size(); ++i) out.data[i] -= tb.data[i];
    return push({Op::Sub, a, b, std::move(out)});
}

NodeId Tape::mul(NodeId a, NodeId b) {
    const auto& ta = value(a);
    const auto& tb = value(b);
    if (ta.shape != tb.shape) throw ShapeMismatch("mul", ta, tb);
    Tensor out = ta;
    for (int i = 0; i < out.size(); ++i) out.data[i] *= tb.data[i];
    return push({Op::Mul, a, b, std::move(out)});
}

NodeId Tape::scale(NodeId a, double factor) {
    Tensor out = value(a);
    for (auto& v : out.data) v *= factor;
    Node n{Op::Scale, a, -1, std::move(out)};
    n.factor = factor;
    return push(std::move(n));
}

NodeId Tape::matmul(NodeId a, NodeId b) {
    const auto& ta = value(a);
    const auto& tb = value(b);
    if (ta.shape.size() != 2 || tb.shape.size() != 2 || ta.shape[1] != tb.shape[0])
        throw ShapeMismatch("matmul", ta, tb);
    int m = ta.shape[0], k = ta.shape[1], n = tb.shape[1];
    Tensor out = Tensor::zeros({m, n});
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            double av = ta.data[i * k + p];
            if (av == 0) continue;
            for (int j = 0; j < n; ++j) out.data[i * n + j] += av * tb.data[p * n + j];
        }
    return push({Op::Matmul, a, b, std::move(out)});
}

NodeId Tape::transpose(NodeId a) {
    const auto& ta = value(a);
    if (ta.shape.size() != 2) throw ShapeMismatch("transpose: rank-2 required " + shape_str(ta));
    int m = ta.shape[0], n = ta.shape[1];
    Tensor out = Tensor::zeros({n, m});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.data[j * m + i] = ta.data[i * n + j];
    return push({Op::Transpose, a, -1, std::move(out)});
}

NodeId Tape::sum(NodeId a) {
    double s = 0;
    for (double v : value(a).data) s += v;
    return push({Op::Sum, a, -1, Tensor::scalar(s)});
}

NodeId Tape::mean(NodeId a) {
    const auto& ta = value(a);
    double s = 0;
    for (double v : ta.data) s += v;
    return push({Op::Mean, a, -1, Tensor::scalar(s / ta.size())});
}

NodeId Tape::broadcast(NodeId scalar_node, std::vector<int> shape) {
    const auto& ts = value(scalar_node);
    if (ts.size() != 1) throw ShapeMismatch("broadcast: source must be scalar " + shape_str(ts));
    Tensor out;
    out.shape = std::move(shape);
    out.data.assign(out.size(), ts.data[0]);
    return push({Op::Broadcast, scalar_node, -1, std::move(out)});
}

NodeId Tape::log_softmax(NodeId a) {
    const auto& ta = value(a);
    if (ta.size() == 0) throw ShapeMismatch("log_softmax: empty tensor " + shape_str(ta));
    double mx = *std::max_element(ta.data.begin(), ta.data.end());
    double lse = 0;
    for (double v : ta.data) lse += std::exp(v - mx);
    lse = mx + std::log(lse);
    Tensor out = ta;
    for (auto& v : out.data) v -= lse;
    return push({Op::LogSoftmax, a, -1, std::move(out)});
}

NodeId Tape::exp(NodeId a) {
    Tensor out = value(a);
    for (auto& v : out.data) v = std::exp(v);
    return push({Op::Exp, a, -1, std::move(out)});
}

NodeId Tape::pick(NodeId a, int index) {
    const auto& ta = value(a);
    if (index < 0 || index >= ta.size())
        throw ShapeMismatch("pick: index out of range in " + shape_str(ta));
    Node n{Op::Pick, a, -1, Tensor::scalar(ta.data[index])};
    n.i0 = index;
    return push(std::move(n));
}

NodeId Tape::scatter(NodeId scalar_node, int index, int size) {
    const auto& ts = value(scalar_node);
    if (ts.size() != 1 || index < 0 || index >= size)
        throw ShapeMismatch("scatter: bad scalar/index " + shape_str(ts));
    Tensor out = Tensor::zeros({size});
    out.data[index] = ts.data[0];
    Node n{Op::Scatter, scalar_node, -1, std::move(out)};
    n.i0 = index;
    n.i1 = size;
    return push(std::move(n));
}

NodeId Tape::gather_rows(NodeId matrix, std::vector<int> rows) {
    const auto& tm = value(matrix);
    if (tm.shape.size() != 2) throw ShapeMismatch("gather_rows: rank-2 required " + shape_str(tm));
    int n_rows = tm.shape[0], width = tm.shape[1];
    Tensor out = Tensor::zeros({static_cast<int>(rows.size()), width});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r] < 0 || rows[r] >= n_rows)
            throw ShapeMismatch("gather_rows: row index out of range in " + shape_str(tm));
        std::copy_n(tm.data.begin() + rows[r] * width, width, out.data.begin() + r * width);
    }
    Node n{Op::GatherRows, matrix, -1, std::move(out)};
    n.rows = std::move(rows);
    return push(std::move(n));
}

NodeId Tape::scatter_rows(NodeId rows_matrix, std::vector<int> rows, int n_rows) {
    const auto& tm = value(rows_matrix);
    if (tm.shape.size() != 2 || tm.shape[0] != static_cast<int>(rows.size()))
        throw ShapeMismatch("scatter_rows: rank-2 with one row per index required " + shape_str(tm));
    int width = tm.shape[1];
    Tensor out = Tensor::zeros({n_rows, width});
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (int j = 0; j < width; ++j) out.data[rows[r] * width + j] += tm.data[r * width + j];
    Node n{Op::ScatterRows, rows_matrix, -1, std::move(out)};
    n.rows = std::move(rows);
    n.i0 = n_rows;
    return push(std::move(n));
}

NodeId Tape::embedding_lookup(NodeId table, const std::vector<int>& token_ids) {
    return gather_rows(table, token_ids);
}

NodeId Tape::concat(NodeId a, NodeId b) {
    const auto& ta = value(a);
    const auto& tb = value(b);
    Tensor out = Tensor::zeros({ta.size() + tb.size()});
    std::copy(ta.data.begin(), ta.data.end(), out.data.begin());
    std::copy(tb.data.begin(), tb.data.end(), out.data.begin() + ta.size());
    return push({Op::Concat, a, b, std::move(out)});
}

NodeId Tape::slice(NodeId a, int start, int len) {
    const auto& ta = value(a);
    if (start < 0 || len < 0 || start + len > ta.size())
        throw ShapeMismatch("slice: range out of bounds in " + shape_str(ta));
    Tensor out = Tensor::zeros({len});
    std::copy_n(ta.data.begin() + start, len, out.data.begin());
    Node n{Op::Slice, a, -1, std::move(out)};
    n.i0 = start;
    n.i1 = len;
    return push(std::move(n));
}

NodeId Tape::pad(NodeId a, int start, int total) {
    const auto& ta = value(a);
    if (start < 0 || start + ta.size() > total)
        throw ShapeMismatch("pad: range out of bounds in " + shape_str(ta));
    Tensor out = Tensor::zeros({total});
    std::copy(ta.data.begin(), ta.data.end(), out.data.begin() + start);
    Node n{Op::Pad, a, -1, std::move(out)};
    n.i0 = start;
    n.i1 = total;
    return push(std::move(n));
}

NodeId Tape::reshape(NodeId a, std::vector<int> shape) {
    Tensor out;
    out.shape = std::move(shape);
    out.data = value(a).data;
    if (out.size() != value(a).size()) throw ShapeMismatch("reshape", value(a), out);
    return push({Op::Reshape, a, -1, std::move(out)});
}

NodeId Tape::detach(NodeId a) { return push({Op::Detach, a, -1, value(a)}); }

NodeId Tape::cross_entropy(NodeId logits, int target_index) {
    return scale(pick(log_softmax(logits), target_index), -1.0);
}

std::vector<NodeId> Tape::grad(NodeId loss, const std::vector<NodeId>& params) {
    if (value(loss).size() != 1) throw NotScalar();

    std::map<NodeId, NodeId> adjoint;
    adjoint[loss] = input(Tensor::scalar(1.0));

    auto accumulate = [&](NodeId target, NodeId contrib) {
        auto it = adjoint.find(target);
        if (it == adjoint.end())
            adjoint[target] = contrib;
        else
            it->second = add(it->second, contrib);
    };

    for (NodeId k = loss; k >= 0; --k) {
        auto it = adjoint.find(k);
        if (it == adjoint.end()) continue;
        NodeId d = it->second;
        // copy: backward rules push nodes, which can reallocate the node store
        const Node node = at(k);
        switch (node.op) {
            case Op::Input:
            case Op::Detach:
                break;
            case Op::Add:
                accumulate(node.a, d);
                accumulate(node.b, d);
                break;
            case Op::Sub:
                accumulate(node.a, d);
                accumulate(node.b, scale(d, -1.0));
                break;
            case Op::Mul:
                accumulate(node.a, mul(d, node.b));
                accumulate(node.b, mul(d, node.a));
                break;
            case Op::Scale:
                accumulate(node.a, scale(d, node.factor));
                break;
            case Op::Matmul:
                accumulate(node.a, matmul(d, transpose(node.b)));
                accumulate(node.b, matmul(transpose(node.a), d));
                break;
            case Op::Transpose:
                accumulate(node.a, transpose(d));
                break;
            case Op::Sum:
                accumulate(node.a, broadcast(d, value(node.a).shape));
                break;
            case Op::Mean:
                accumulate(node.a,
                           scale(broadcast(d, value(node.a).shape), 1.0 / value(node.a).size()));
                break;
            case Op::Broadcast:
                accumulate(node.a, sum(d));
                break;
            case Op::LogSoftmax: {
                // dX = dY - softmax(x) * sum(dY)
                NodeId soft = exp(k);
                NodeId total = broadcast(sum(d), value(node.a).shape);
                accumulate(node.a, sub(d, mul(soft, total)));
                break;
            }
            case Op::Exp:
                accumulate(node.a, mul(d, k));
                break;
            case Op::Pick:
                accumulate(node.a, reshape(scatter(d, node.i0, value(node.a).size()),
                                           value(node.a).shape));
                break;
            case Op::Scatter:
                accumulate(node.a, pick(d, node.i0));
                break;
            case Op::GatherRows:
                accumulate(node.a, scatter_rows(d, node.rows, value(node.a).shape[0]));
                break;
            case Op::ScatterRows:
                accumulate(node.a, gather_rows(d, node.rows));
                break;
            case Op::Concat: {
                int la = value(node.a).size();
                int lb = value(node.b).size();
                accumulate(node.a, reshape(slice(d, 0, la), value(node.a).shape));
                accumulate(node.b, reshape(slice(d, la, lb), value(node.b).shape));
                break;
            }
            case Op::Slice:
                accumulate(node.a, reshape(pad(d, node.i0, value(node.a).size()),
                                           value(node.a).shape));
                break;
            case Op::Pad:
                accumulate(node.a, reshape(slice(d, node.i0, value(node.a).size()),
                                           value(node.a).shape));
                break;
            case Op::Reshape:
                accumulate(node.a, reshape(d, value(node.a).shape));
                break;
        }
    }

    std::vector<NodeId> grads;
    grads.reserve(params.size());
    for (NodeId p : params) {
        auto it = adjoint.find(p);
        if (it != adjoint.end() && value(it->second).shape == value(p).shape)
            grads.push_back(it->second);
        else if (it != adjoint.end())
            grads.push_back(reshape(it->second, value(p).shape));
        else
            grads.push_back(input(Tensor::zeros(value(p).shape)));
    }
    return grads;
}

Tensor& ParamStore::operator[](const std::string& name) {
    for (auto& [key, tensor] : items)
        if (key == name) return tensor;
    items.emplace_back(name, Tensor{});
    return items.back().second;
}

const Tensor& ParamStore::at(const std::string& name) const {
    for (const auto& [key, tensor] : items)
        if (key == name) return tensor;
    throw std::out_of_range("no such parameter: " + name);
}

double finite_diff_check(const std::function<double(const std::vector<Tensor>&)>& f,
                         const std::vector<Tensor>& params,
                         const std::vector<Tensor>& analytic_grads, double epsilon) {
    if (epsilon <= 0) throw std::invalid_argument("epsilon must be > 0");
    if (params.size() != analytic_grads.size())
        throw std::invalid_argument("params/grads size mismatch");

    double max_rel = 0;
    std::vector<Tensor> probe = params;
    for (std::size_t p = 0; p < params.size(); ++p) {
        for (int i = 0; i < params[p].size(); ++i) {
            double saved = probe[p].data[i];
            probe[p].data[i] = saved + epsilon;
            double hi = f(probe);
            probe[p].data[i] = saved - epsilon;
            double lo = f(probe);
            probe[p].data[i] = saved;
            double numeric = (hi - lo) / (2 * epsilon);
            double analytic = analytic_grads[p].data[i];
            double rel = std::abs(numeric - analytic) / std::max(1.0, std::abs(analytic));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace urtf::ad
