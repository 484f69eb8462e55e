#include "gapnet/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>

namespace gapnet {
namespace {

Tape* common_tape(std::initializer_list<const Tensor*> inputs) {
    Tape* tape = nullptr;
    for (const Tensor* t : inputs) {
        if (!t->tracked()) continue;
        if (tape && t->tape() != tape) throw std::invalid_argument("op inputs belong to different tapes");
        tape = t->tape();
    }
    return tape;
}

// Records the op when any input is tracked; otherwise returns a plain tensor.
template <class MakeBackward>
Tensor emit(std::initializer_list<const Tensor*> inputs, Shape shape, std::vector<double> value,
            MakeBackward&& make_backward) {
    Tape* tape = common_tape(inputs);
    if (!tape) return Tensor(std::move(shape), std::move(value));
    std::vector<NodeId> ids;
    ids.reserve(inputs.size());
    for (const Tensor* t : inputs) ids.push_back(tape->ensure(*t));
    return tape->record(std::move(shape), std::move(value), ids, make_backward(ids));
}

void check_axis(const Tensor& x, std::size_t axis, const char* op) {
    if (axis >= x.rank()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                         shape_str(x.shape()));
    }
}

std::vector<std::size_t> strides_of(const Shape& shape) {
    std::vector<std::size_t> strides(shape.size(), 1);
    for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
    return strides;
}

// Outer/axis/inner decomposition for reductions along one axis.
struct AxisSplit {
    std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
    AxisSplit s;
    for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
    s.extent = shape[axis];
    for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
    return s;
}

// Maps each output element of a broadcast to flat offsets in the operands.
struct Broadcast {
    Shape out;
    std::vector<std::size_t> a_off, b_off;
};

Broadcast broadcast(const Shape& a, const Shape& b, const char* op) {
    const std::size_t rank = std::max(a.size(), b.size());
    Shape out(rank);
    std::vector<std::size_t> a_stride(rank, 0), b_stride(rank, 0);
    const auto as = strides_of(a), bs = strides_of(b);
    for (std::size_t i = 0; i < rank; ++i) {
        const std::size_t ai = i + a.size() >= rank ? i + a.size() - rank : SIZE_MAX;
        const std::size_t bi = i + b.size() >= rank ? i + b.size() - rank : SIZE_MAX;
        const std::size_t ad = ai == SIZE_MAX ? 1 : a[ai];
        const std::size_t bd = bi == SIZE_MAX ? 1 : b[bi];
        if (ad != bd && ad != 1 && bd != 1) {
            throw ShapeError(std::string(op) + ": cannot broadcast " + shape_str(a) + " with " + shape_str(b));
        }
        out[i] = std::max(ad, bd);
        if (ai != SIZE_MAX && ad != 1) a_stride[i] = as[ai];
        if (bi != SIZE_MAX && bd != 1) b_stride[i] = bs[bi];
    }
    Broadcast plan;
    plan.out = out;
    const std::size_t n = shape_size(out);
    plan.a_off.resize(n);
    plan.b_off.resize(n);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t ao = 0, bo = 0;
    for (std::size_t f = 0; f < n; ++f) {
        plan.a_off[f] = ao;
        plan.b_off[f] = bo;
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            ao += a_stride[d];
            bo += b_stride[d];
            if (idx[d] < out[d]) break;
            ao -= a_stride[d] * out[d];
            bo -= b_stride[d] * out[d];
            idx[d] = 0;
        }
    }
    return plan;
}

template <class Fwd, class DA, class DB>
Tensor binary(const Tensor& a, const Tensor& b, const char* op, Fwd fwd, DA da, DB db) {
    auto plan = std::make_shared<Broadcast>(broadcast(a.shape(), b.shape(), op));
    const std::size_t n = plan->a_off.size();
    std::vector<double> out(n);
    const auto av = a.data(), bv = b.data();
    for (std::size_t f = 0; f < n; ++f) out[f] = fwd(av[plan->a_off[f]], bv[plan->b_off[f]]);
    Shape shape = plan->out;
    return emit({&a, &b}, shape, std::move(out), [&](const std::vector<NodeId>& ids) {
        return [plan, ia = ids[0], ib = ids[1], da, db](Tape& tape, std::span<const double> g) {
            const auto x = tape.value(ia), y = tape.value(ib);
            const std::size_t m = plan->a_off.size();
            if (tape.requires_grad(ia)) {
                auto ga = tape.grad_buffer(ia);
                for (std::size_t f = 0; f < m; ++f) {
                    ga[plan->a_off[f]] += da(x[plan->a_off[f]], y[plan->b_off[f]]) * g[f];
                }
            }
            if (tape.requires_grad(ib)) {
                auto gb = tape.grad_buffer(ib);
                for (std::size_t f = 0; f < m; ++f) {
                    gb[plan->b_off[f]] += db(x[plan->a_off[f]], y[plan->b_off[f]]) * g[f];
                }
            }
        };
    });
}

// Elementwise op whose derivative is expressed through input x and output y.
template <class Fwd, class Deriv>
Tensor unary(const Tensor& x, Fwd fwd, Deriv deriv) {
    const auto xv = x.data();
    std::vector<double> out(xv.size());
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
    auto result_values = std::make_shared<std::vector<double>>(out);
    return emit({&x}, x.shape(), std::move(out), [&](const std::vector<NodeId>& ids) {
        return [ix = ids[0], deriv, result_values](Tape& tape, std::span<const double> g) {
            const auto in = tape.value(ix);
            auto gx = tape.grad_buffer(ix);
            const auto& y = *result_values;
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += deriv(in[i], y[i]) * g[i];
        };
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return binary(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor neg(const Tensor& x) {
    return unary(x, [](double v) { return -v; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& x, double factor) {
    return unary(x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& x, double value) {
    return unary(x, [value](double v) { return v + value; }, [](double, double) { return 1.0; });
}

Tensor pow_scalar(const Tensor& x, double p) {
    return unary(
        x, [p](double v) { return std::pow(v, p); }, [p](double v, double) { return p * std::pow(v, p - 1.0); });
}

Tensor sigmoid(const Tensor& x) {
    return unary(
        x, [](double v) { return 1.0 / (1.0 + std::exp(-v)); }, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
    return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
    return unary(
        x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double slope) {
    return unary(
        x, [slope](double v) { return v > 0.0 ? v : slope * v; },
        [slope](double v, double) { return v > 0.0 ? 1.0 : slope; });
}

Tensor abs(const Tensor& x) {
    return unary(
        x, [](double v) { return std::fabs(v); },
        [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() < 2 || b.rank() < 2 || a.shape()[a.rank() - 1] != b.shape()[b.rank() - 2]) {
        throw ShapeError("matmul: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " do not conform");
    }
    const std::size_t P = a.shape()[a.rank() - 2], Q = a.shape()[a.rank() - 1], R = b.shape()[b.rank() - 1];
    const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
    const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
    Broadcast batch;
    try {
        batch = broadcast(a_batch, b_batch, "matmul");
    } catch (const ShapeError&) {
        throw ShapeError("matmul: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) +
                         " do not conform");
    }
    auto plan = std::make_shared<Broadcast>(std::move(batch));
    const std::size_t nb = plan->a_off.size();
    Shape out_shape = plan->out;
    out_shape.push_back(P);
    out_shape.push_back(R);

    std::vector<double> out(nb * P * R, 0.0);
    const auto av = a.data(), bv = b.data();
    for (std::size_t bi = 0; bi < nb; ++bi) {
        const double* A = av.data() + plan->a_off[bi] * P * Q;
        const double* B = bv.data() + plan->b_off[bi] * Q * R;
        double* C = out.data() + bi * P * R;
        for (std::size_t i = 0; i < P; ++i)
            for (std::size_t k = 0; k < Q; ++k) {
                const double aik = A[i * Q + k];
                for (std::size_t j = 0; j < R; ++j) C[i * R + j] += aik * B[k * R + j];
            }
    }
    return emit({&a, &b}, out_shape, std::move(out), [&](const std::vector<NodeId>& ids) {
        return [plan, ia = ids[0], ib = ids[1], P, Q, R](Tape& tape, std::span<const double> g) {
            const auto av = tape.value(ia), bv = tape.value(ib);
            const bool need_a = tape.requires_grad(ia), need_b = tape.requires_grad(ib);
            std::span<double> ga, gb;
            if (need_a) ga = tape.grad_buffer(ia);
            if (need_b) gb = tape.grad_buffer(ib);
            for (std::size_t bi = 0; bi < plan->a_off.size(); ++bi) {
                const double* A = av.data() + plan->a_off[bi] * P * Q;
                const double* B = bv.data() + plan->b_off[bi] * Q * R;
                const double* G = g.data() + bi * P * R;
                if (need_a) {
                    // dA = G · Bᵀ
                    double* dA = ga.data() + plan->a_off[bi] * P * Q;
                    for (std::size_t i = 0; i < P; ++i)
                        for (std::size_t k = 0; k < Q; ++k) {
                            double s = 0.0;
                            for (std::size_t j = 0; j < R; ++j) s += G[i * R + j] * B[k * R + j];
                            dA[i * Q + k] += s;
                        }
                }
                if (need_b) {
                    // dB = Aᵀ · G
                    double* dB = gb.data() + plan->b_off[bi] * Q * R;
                    for (std::size_t i = 0; i < P; ++i)
                        for (std::size_t k = 0; k < Q; ++k) {
                            const double aik = A[i * Q + k];
                            for (std::size_t j = 0; j < R; ++j) dB[k * R + j] += aik * G[i * R + j];
                        }
                }
            }
        };
    });
}

Tensor transpose(const Tensor& x, const std::vector<std::size_t>& perm) {
    const std::size_t rank = x.rank();
    std::vector<bool> seen(rank, false);
    if (perm.size() != rank) throw ShapeError("transpose: permutation rank mismatch for " + shape_str(x.shape()));
    for (std::size_t p : perm) {
        if (p >= rank || seen[p]) throw ShapeError("transpose: invalid permutation for " + shape_str(x.shape()));
        seen[p] = true;
    }
    Shape out_shape(rank);
    for (std::size_t i = 0; i < rank; ++i) out_shape[i] = x.shape()[perm[i]];
    const auto in_strides = strides_of(x.shape());
    const std::size_t n = x.size();
    // src[f] = input offset of output element f
    auto src = std::make_shared<std::vector<std::size_t>>(n);
    std::vector<std::size_t> idx(rank, 0);
    std::size_t off = 0;
    for (std::size_t f = 0; f < n; ++f) {
        (*src)[f] = off;
        for (std::size_t d = rank; d-- > 0;) {
            ++idx[d];
            off += in_strides[perm[d]];
            if (idx[d] < out_shape[d]) break;
            off -= in_strides[perm[d]] * out_shape[d];
            idx[d] = 0;
        }
    }
    std::vector<double> out(n);
    const auto xv = x.data();
    for (std::size_t f = 0; f < n; ++f) out[f] = xv[(*src)[f]];
    return emit({&x}, out_shape, std::move(out), [&](const std::vector<NodeId>& ids) {
        return [src, ix = ids[0]](Tape& tape, std::span<const double> g) {
            auto gx = tape.grad_buffer(ix);
            for (std::size_t f = 0; f < g.size(); ++f) gx[(*src)[f]] += g[f];
        };
    });
}

Tensor transpose_last(const Tensor& x) {
    if (x.rank() < 2) throw ShapeError("transpose_last: rank < 2 for " + shape_str(x.shape()));
    std::vector<std::size_t> perm(x.rank());
    std::iota(perm.begin(), perm.end(), 0);
    std::swap(perm[x.rank() - 1], perm[x.rank() - 2]);
    return transpose(x, perm);
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_size(shape) != x.size()) {
        throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
    }
    std::vector<double> out(x.data().begin(), x.data().end());
    return emit({&x}, std::move(shape), std::move(out), [&](const std::vector<NodeId>& ids) {
        return [ix = ids[0]](Tape& tape, std::span<const double> g) {
            auto gx = tape.grad_buffer(ix);
            for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
        };
    });
}

Tensor concat(std::span<const Tensor> parts, std::size_t axis) {
    if (parts.empty()) throw ShapeError("concat: no inputs");
    const Tensor& first = parts.front();
    check_axis(first, axis, "concat");
    Shape out_shape = first.shape();
    out_shape[axis] = 0;
    for (const Tensor& p : parts) {
        bool ok = p.rank() == first.rank();
        for (std::size_t d = 0; ok && d < p.rank(); ++d) ok = d == axis || p.shape()[d] == first.shape()[d];
        if (!ok) throw ShapeError("concat: shapes " + shape_str(first.shape()) + " and " + shape_str(p.shape()));
        out_shape[axis] += p.shape()[axis];
    }
    const AxisSplit os = split_axis(out_shape, axis);
    std::vector<double> out(shape_size(out_shape));
    std::vector<std::size_t> extents;
    std::size_t start = 0;
    for (const Tensor& p : parts) {
        const std::size_t e = p.shape()[axis];
        const auto pv = p.data();
        for (std::size_t o = 0; o < os.outer; ++o)
            std::copy_n(pv.begin() + o * e * os.inner, e * os.inner,
                        out.begin() + (o * os.extent + start) * os.inner);
        extents.push_back(e);
        start += e;
    }

    Tape* tape = nullptr;
    for (const Tensor& p : parts) {
        if (!p.tracked()) continue;
        if (tape && p.tape() != tape) throw std::invalid_argument("op inputs belong to different tapes");
        tape = p.tape();
    }
    if (!tape) return Tensor(out_shape, std::move(out));
    std::vector<NodeId> ids;
    for (const Tensor& p : parts) ids.push_back(tape->ensure(p));
    return tape->record(out_shape, std::move(out), ids,
                        [ids, extents, os](Tape& t, std::span<const double> g) {
                            std::size_t start = 0;
                            for (std::size_t k = 0; k < ids.size(); ++k) {
                                const std::size_t e = extents[k];
                                if (t.requires_grad(ids[k])) {
                                    auto gp = t.grad_buffer(ids[k]);
                                    for (std::size_t o = 0; o < os.outer; ++o)
                                        for (std::size_t i = 0; i < e * os.inner; ++i)
                                            gp[o * e * os.inner + i] += g[(o * os.extent + start) * os.inner + i];
                                }
                                start += e;
                            }
                        });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t begin, std::size_t end) {
    check_axis(x, axis, "slice");
    if (begin > end || end > x.shape()[axis]) {
        throw ShapeError("slice: range [" + std::to_string(begin) + "," + std::to_string(end) + ") invalid for " +
                         shape_str(x.shape()));
    }
    const AxisSplit s = split_axis(x.shape(), axis);
    Shape out_shape = x.shape();
    out_shape[axis] = end - begin;
    const std::size_t e = end - begin;
    std::vector<double> out(shape_size(out_shape));
    const auto xv = x.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        std::copy_n(xv.begin() + (o * s.extent + begin) * s.inner, e * s.inner, out.begin() + o * e * s.inner);
    return emit({&x}, out_shape, std::move(out), [&](const std::vector<NodeId>& ids) {
        return [ix = ids[0], s, begin, e](Tape& tape, std::span<const double> g) {
            auto gx = tape.grad_buffer(ix);
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t i = 0; i < e * s.inner; ++i)
                    gx[(o * s.extent + begin) * s.inner + i] += g[o * e * s.inner + i];
        };
    });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
    check_axis(x, axis, "softmax");
    const AxisSplit s = split_axis(x.shape(), axis);
    const auto xv = x.data();
    std::vector<double> out(x.size());
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.extent * s.inner + in;
            double mx = -INFINITY;
            for (std::size_t k = 0; k < s.extent; ++k) mx = std::max(mx, xv[base + k * s.inner]);
            double z = 0.0;
            for (std::size_t k = 0; k < s.extent; ++k) {
                out[base + k * s.inner] = std::exp(xv[base + k * s.inner] - mx);
                z += out[base + k * s.inner];
            }
            for (std::size_t k = 0; k < s.extent; ++k) out[base + k * s.inner] /= z;
        }
    auto y = std::make_shared<std::vector<double>>(out);
    return emit({&x}, x.shape(), std::move(out), [&](const std::vector<NodeId>& ids) {
        return [ix = ids[0], s, y](Tape& tape, std::span<const double> g) {
            auto gx = tape.grad_buffer(ix);
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t in = 0; in < s.inner; ++in) {
                    const std::size_t base = o * s.extent * s.inner + in;
                    double dot = 0.0;
                    for (std::size_t k = 0; k < s.extent; ++k) {
                        const std::size_t f = base + k * s.inner;
                        dot += g[f] * (*y)[f];
                    }
                    for (std::size_t k = 0; k < s.extent; ++k) {
                        const std::size_t f = base + k * s.inner;
                        gx[f] += (*y)[f] * (g[f] - dot);
                    }
                }
        };
    });
}

Tensor layer_norm(const Tensor& x, std::size_t axis, double eps) {
    check_axis(x, axis, "layer_norm");
    const AxisSplit s = split_axis(x.shape(), axis);
    const auto xv = x.data();
    std::vector<double> out(x.size());
    auto inv_std = std::make_shared<std::vector<double>>(s.outer * s.inner);
    const double n = static_cast<double>(s.extent);
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t in = 0; in < s.inner; ++in) {
            const std::size_t base = o * s.extent * s.inner + in;
            double mu = 0.0;
            for (std::size_t k = 0; k < s.extent; ++k) mu += xv[base + k * s.inner];
            mu /= n;
            double var = 0.0;
            for (std::size_t k = 0; k < s.extent; ++k) {
                const double d = xv[base + k * s.inner] - mu;
                var += d * d;
            }
            var /= n;
            const double r = 1.0 / std::sqrt(var + eps);
            (*inv_std)[o * s.inner + in] = r;
            for (std::size_t k = 0; k < s.extent; ++k) out[base + k * s.inner] = (xv[base + k * s.inner] - mu) * r;
        }
    auto y = std::make_shared<std::vector<double>>(out);
    return emit({&x}, x.shape(), std::move(out), [&](const std::vector<NodeId>& ids) {
        return [ix = ids[0], s, y, inv_std, n](Tape& tape, std::span<const double> g) {
            auto gx = tape.grad_buffer(ix);
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t in = 0; in < s.inner; ++in) {
                    const std::size_t base = o * s.extent * s.inner + in;
                    double gm = 0.0, gym = 0.0;
                    for (std::size_t k = 0; k < s.extent; ++k) {
                        const std::size_t f = base + k * s.inner;
                        gm += g[f];
                        gym += g[f] * (*y)[f];
                    }
                    gm /= n;
                    gym /= n;
                    const double r = (*inv_std)[o * s.inner + in];
                    for (std::size_t k = 0; k < s.extent; ++k) {
                        const std::size_t f = base + k * s.inner;
                        gx[f] += r * (g[f] - gm - (*y)[f] * gym);
                    }
                }
        };
    });
}

Tensor sum(const Tensor& x) {
    const auto xv = x.data();
    const double total = std::accumulate(xv.begin(), xv.end(), 0.0);
    return emit({&x}, Shape{}, {total}, [&](const std::vector<NodeId>& ids) {
        return [ix = ids[0]](Tape& tape, std::span<const double> g) {
            auto gx = tape.grad_buffer(ix);
            for (double& v : gx) v += g[0];
        };
    });
}

Tensor mean(const Tensor& x) {
    if (x.size() == 0) throw ShapeError("mean of empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.size()));
}

Tensor sum_axis(const Tensor& x, std::size_t axis) {
    check_axis(x, axis, "sum_axis");
    const AxisSplit s = split_axis(x.shape(), axis);
    Shape out_shape = x.shape();
    out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
    std::vector<double> out(s.outer * s.inner, 0.0);
    const auto xv = x.data();
    for (std::size_t o = 0; o < s.outer; ++o)
        for (std::size_t k = 0; k < s.extent; ++k)
            for (std::size_t in = 0; in < s.inner; ++in)
                out[o * s.inner + in] += xv[(o * s.extent + k) * s.inner + in];
    return emit({&x}, out_shape, std::move(out), [&](const std::vector<NodeId>& ids) {
        return [ix = ids[0], s](Tape& tape, std::span<const double> g) {
            auto gx = tape.grad_buffer(ix);
            for (std::size_t o = 0; o < s.outer; ++o)
                for (std::size_t k = 0; k < s.extent; ++k)
                    for (std::size_t in = 0; in < s.inner; ++in)
                        gx[(o * s.extent + k) * s.inner + in] += g[o * s.inner + in];
        };
    });
}

Tensor mean_axis(const Tensor& x, std::size_t axis) {
    check_axis(x, axis, "mean_axis");
    return scale(sum_axis(x, axis), 1.0 / static_cast<double>(x.shape()[axis]));
}

Tensor mse(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mse: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
    }
    const Tensor d = sub(a, b);
    return mean(mul(d, d));
}

Tensor conv1d(const Tensor& x, const Tensor& w, const Tensor& b) {
    if (x.rank() != 3 || w.rank() != 3 || b.rank() != 1 || x.shape()[1] != w.shape()[1] ||
        b.shape()[0] != w.shape()[0]) {
        throw ShapeError("conv1d: input " + shape_str(x.shape()) + ", weight " + shape_str(w.shape()) + ", bias " +
                         shape_str(b.shape()) + " do not conform");
    }
    const std::size_t k = w.shape()[2];
    if (k % 2 == 0) throw ShapeError("conv1d: kernel size " + std::to_string(k) + " must be odd");
    const std::size_t N = x.shape()[0], Cin = x.shape()[1], L = x.shape()[2], Cout = w.shape()[0];
    const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(k / 2);
    const auto xv = x.data(), wv = w.data(), bv = b.data();
    std::vector<double> out(N * Cout * L);
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t o = 0; o < Cout; ++o)
            for (std::size_t t = 0; t < L; ++t) {
                double acc = bv[o];
                for (std::size_t c = 0; c < Cin; ++c)
                    for (std::size_t j = 0; j < k; ++j) {
                        const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - pad;
                        if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
                        acc += wv[(o * Cin + c) * k + j] * xv[(n * Cin + c) * L + static_cast<std::size_t>(src)];
                    }
                out[(n * Cout + o) * L + t] = acc;
            }
    return emit({&x, &w, &b}, Shape{N, Cout, L}, std::move(out), [&](const std::vector<NodeId>& ids) {
        return [ix = ids[0], iw = ids[1], ib = ids[2], N, Cin, L, Cout, k, pad](Tape& tape,
                                                                            std::span<const double> g) {
            const auto xv = tape.value(ix), wv = tape.value(iw);
            const bool nx = tape.requires_grad(ix), nw = tape.requires_grad(iw), nb = tape.requires_grad(ib);
            std::span<double> gx, gw, gb;
            if (nx) gx = tape.grad_buffer(ix);
            if (nw) gw = tape.grad_buffer(iw);
            if (nb) gb = tape.grad_buffer(ib);
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t o = 0; o < Cout; ++o)
                    for (std::size_t t = 0; t < L; ++t) {
                        const double go = g[(n * Cout + o) * L + t];
                        if (nb) gb[o] += go;
                        for (std::size_t c = 0; c < Cin; ++c)
                            for (std::size_t j = 0; j < k; ++j) {
                                const std::ptrdiff_t src = static_cast<std::ptrdiff_t>(t + j) - pad;
                                if (src < 0 || src >= static_cast<std::ptrdiff_t>(L)) continue;
                                const std::size_t xi = (n * Cin + c) * L + static_cast<std::size_t>(src);
                                const std::size_t wi = (o * Cin + c) * k + j;
                                if (nw) gw[wi] += go * xv[xi];
                                if (nx) gx[xi] += go * wv[wi];
                            }
                    }
        };
    });
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng) {
    if (p <= 0.0) return x;
    if (p >= 1.0) throw std::invalid_argument("dropout: probability must be < 1");
    std::bernoulli_distribution keep(1.0 - p);
    Tensor mask(x.shape(), 0.0);
    auto mv = mask.mutable_data();
    const double kept = 1.0 / (1.0 - p);
    for (double& m : mv) m = keep(rng) ? kept : 0.0;
    return mul(x, mask);
}

}  // namespace gapnet
