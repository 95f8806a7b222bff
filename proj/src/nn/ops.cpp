#include "raylink/nn/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace raylink::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;
using CMapVec = Eigen::Map<const Eigen::VectorXd>;

CMapMat as_mat(const Tensor& t) { return CMapMat(t.data(), t.dim(0), t.dim(1)); }
MapMat as_mat(Tensor& t) { return MapMat(t.data(), t.dim(0), t.dim(1)); }

void require(bool ok, const std::string& what)
{
    if (!ok) throw ShapeError(what);
}

void require_rank2(const Var& v, const char* op)
{
    require(v.value().rank() == 2, std::string(op) + ": expected a matrix, got " + shape_string(v.shape()));
}

Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

// Fixed-order reductions; the result must not depend on buffer alignment.
void add_column_sums(const Tensor& m, Tensor& out)
{
    const std::size_t rows = m.dim(0), cols = m.dim(1);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* row = m.data() + r * cols;
        for (std::size_t c = 0; c < cols; ++c) out[c] += row[c];
    }
}

void add_row_sums(const double* m, std::size_t rows, std::size_t cols, double* out)
{
    for (std::size_t r = 0; r < rows; ++r) {
        double s = 0.0;
        for (std::size_t c = 0; c < cols; ++c) s += m[r * cols + c];
        out[r] += s;
    }
}

template <typename F>
Var unary(const Var& x, F&& f, std::function<void(Node&)> back)
{
    Tensor out(x.shape());
    const auto& in = x.value().values();
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
    return record(std::move(out), {x}, std::move(back));
}

/// im2col for one image: cols[(c*9 + i*3 + j), y*w + x].
void im2col(const double* img, std::size_t c_n, std::size_t h, std::size_t w, double* cols)
{
    const std::size_t hw = h * w;
    for (std::size_t c = 0; c < c_n; ++c)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                double* row = cols + (c * 9 + static_cast<std::size_t>(i * 3 + j)) * hw;
                for (std::size_t y = 0; y < h; ++y) {
                    const long sy = static_cast<long>(y) + i - 1;
                    for (std::size_t x = 0; x < w; ++x) {
                        const long sx = static_cast<long>(x) + j - 1;
                        const bool inside = sy >= 0 && sy < static_cast<long>(h) && sx >= 0 && sx < static_cast<long>(w);
                        row[y * w + x] = inside ? img[(c * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)] : 0.0;
                    }
                }
            }
}

void col2im_add(const double* cols, std::size_t c_n, std::size_t h, std::size_t w, double* img)
{
    const std::size_t hw = h * w;
    for (std::size_t c = 0; c < c_n; ++c)
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                const double* row = cols + (c * 9 + static_cast<std::size_t>(i * 3 + j)) * hw;
                for (std::size_t y = 0; y < h; ++y) {
                    const long sy = static_cast<long>(y) + i - 1;
                    if (sy < 0 || sy >= static_cast<long>(h)) continue;
                    for (std::size_t x = 0; x < w; ++x) {
                        const long sx = static_cast<long>(x) + j - 1;
                        if (sx < 0 || sx >= static_cast<long>(w)) continue;
                        img[(c * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)] += row[y * w + x];
                    }
                }
            }
}

}  // namespace

Var matmul(const Var& a, const Var& b)
{
    require_rank2(a, "matmul");
    require_rank2(b, "matmul");
    require(a.shape()[1] == b.shape()[0],
            "matmul: inner dimensions differ " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    Tensor out({a.shape()[0], b.shape()[1]});
    as_mat(out).noalias() = as_mat(a.value()) * as_mat(b.value());
    return record(std::move(out), {a, b}, [](Node& n) {
        Node& pa = parent(n, 0);
        Node& pb = parent(n, 1);
        const auto g = as_mat(n.grad);
        if (pa.requires_grad) as_mat(pa.grad_buffer()).noalias() += g * as_mat(pb.value).transpose();
        if (pb.requires_grad) as_mat(pb.grad_buffer()).noalias() += as_mat(pa.value).transpose() * g;
    });
}

Var linear(const Var& x, const Var& w, const Var& bias)
{
    require_rank2(x, "linear");
    require_rank2(w, "linear");
    require(x.shape()[1] == w.shape()[0], "linear: input width " + std::to_string(x.shape()[1]) +
                                              " does not match weight " + shape_string(w.shape()));
    require(bias.value().size() == w.shape()[1], "linear: bias length does not match output width");
    Tensor out({x.shape()[0], w.shape()[1]});
    auto o = as_mat(out);
    o.noalias() = as_mat(x.value()) * as_mat(w.value());
    o.rowwise() += CMapVec(bias.value().data(), bias.value().size()).transpose();
    return record(std::move(out), {x, w, bias}, [](Node& n) {
        Node& px = parent(n, 0);
        Node& pw = parent(n, 1);
        Node& pb = parent(n, 2);
        const auto g = as_mat(n.grad);
        if (px.requires_grad) as_mat(px.grad_buffer()).noalias() += g * as_mat(pw.value).transpose();
        if (pw.requires_grad) as_mat(pw.grad_buffer()).noalias() += as_mat(px.value).transpose() * g;
        if (pb.requires_grad) add_column_sums(n.grad, pb.grad_buffer());
    });
}

Var add(const Var& a, const Var& b)
{
    require(a.shape() == b.shape(), "add: shapes differ " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
    return record(std::move(out), {a, b}, [](Node& n) {
        for (std::size_t k = 0; k < 2; ++k) {
            Node& p = parent(n, k);
            if (!p.requires_grad) continue;
            Tensor& g = p.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
    });
}

Var sub(const Var& a, const Var& b)
{
    require(a.shape() == b.shape(), "sub: shapes differ " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    Tensor out(a.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
    return record(std::move(out), {a, b}, [](Node& n) {
        for (std::size_t k = 0; k < 2; ++k) {
            Node& p = parent(n, k);
            if (!p.requires_grad) continue;
            const double s = k == 0 ? 1.0 : -1.0;
            Tensor& g = p.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * n.grad[i];
        }
    });
}

Var scale(const Var& a, double s)
{
    return unary(a, [s](double v) { return s * v; }, [s](Node& n) {
        Tensor& g = parent(n, 0).grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += s * n.grad[i];
    });
}

Var relu(const Var& x)
{
    return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](Node& n) {
        Node& p = parent(n, 0);
        Tensor& g = p.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i)
            if (p.value[i] > 0.0) g[i] += n.grad[i];
    });
}

Var leaky_relu(const Var& x, double slope)
{
    return unary(x, [slope](double v) { return v > 0.0 ? v : slope * v; }, [slope](Node& n) {
        Node& p = parent(n, 0);
        Tensor& g = p.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += (p.value[i] > 0.0 ? 1.0 : slope) * n.grad[i];
    });
}

Var sigmoid(const Var& x)
{
    return unary(x,
                 [](double v) { return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); },
                 [](Node& n) {
                     Tensor& g = parent(n, 0).grad_buffer();
                     for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.value[i] * (1.0 - n.value[i]) * n.grad[i];
                 });
}

Var reshape(const Var& x, Shape shape)
{
    Tensor out = x.value().reshaped(std::move(shape));
    return record(std::move(out), {x}, [](Node& n) {
        Tensor& g = parent(n, 0).grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
    });
}

Var gather_rows(const Var& x, const std::vector<std::uint32_t>& index)
{
    require_rank2(x, "gather_rows");
    const std::size_t rows = x.shape()[0], d = x.shape()[1];
    Tensor out({index.size(), d});
    for (std::size_t r = 0; r < index.size(); ++r) {
        require(index[r] < rows, "gather_rows: index out of range");
        std::copy_n(x.value().data() + index[r] * d, d, out.data() + r * d);
    }
    return record(std::move(out), {x}, [index, d](Node& n) {
        Tensor& g = parent(n, 0).grad_buffer();
        for (std::size_t r = 0; r < index.size(); ++r) {
            double* dst = g.data() + index[r] * d;
            const double* src = n.grad.data() + r * d;
            for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
        }
    });
}

Var concat_cols(const Var& a, const Var& b)
{
    require_rank2(a, "concat_cols");
    require_rank2(b, "concat_cols");
    require(a.shape()[0] == b.shape()[0], "concat_cols: row counts differ");
    const std::size_t n = a.shape()[0], da = a.shape()[1], db = b.shape()[1];
    Tensor out({n, da + db});
    for (std::size_t r = 0; r < n; ++r) {
        std::copy_n(a.value().data() + r * da, da, out.data() + r * (da + db));
        std::copy_n(b.value().data() + r * db, db, out.data() + r * (da + db) + da);
    }
    return record(std::move(out), {a, b}, [n, da, db](Node& node) {
        Node& pa = parent(node, 0);
        Node& pb = parent(node, 1);
        for (std::size_t r = 0; r < n; ++r) {
            const double* g = node.grad.data() + r * (da + db);
            if (pa.requires_grad) {
                double* ga = pa.grad_buffer().data() + r * da;
                for (std::size_t c = 0; c < da; ++c) ga[c] += g[c];
            }
            if (pb.requires_grad) {
                double* gb = pb.grad_buffer().data() + r * db;
                for (std::size_t c = 0; c < db; ++c) gb[c] += g[da + c];
            }
        }
    });
}

Var segment_sum(const Var& x, const std::vector<std::uint32_t>& segment, std::size_t segments)
{
    require_rank2(x, "segment_sum");
    require(segment.size() == x.shape()[0], "segment_sum: one segment id per row required");
    const std::size_t d = x.shape()[1];
    Tensor out({segments, d});
    for (std::size_t r = 0; r < segment.size(); ++r) {
        require(segment[r] < segments, "segment_sum: segment id out of range");
        double* dst = out.data() + segment[r] * d;
        const double* src = x.value().data() + r * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
    }
    return record(std::move(out), {x}, [segment, d](Node& n) {
        Tensor& g = parent(n, 0).grad_buffer();
        for (std::size_t r = 0; r < segment.size(); ++r) {
            double* dst = g.data() + r * d;
            const double* src = n.grad.data() + segment[r] * d;
            for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
        }
    });
}

Var segment_max(const Var& x, const std::vector<std::uint32_t>& segment, std::size_t segments)
{
    require_rank2(x, "segment_max");
    require(segment.size() == x.shape()[0], "segment_max: one segment id per row required");
    const std::size_t d = x.shape()[1];
    Tensor out({segments, d});
    std::vector<std::int64_t> arg(segments * d, -1);
    for (std::size_t r = 0; r < segment.size(); ++r) {
        require(segment[r] < segments, "segment_max: segment id out of range");
        const double* src = x.value().data() + r * d;
        for (std::size_t c = 0; c < d; ++c) {
            const std::size_t o = segment[r] * d + c;
            if (arg[o] < 0 || src[c] > out[o]) {
                out[o] = src[c];
                arg[o] = static_cast<std::int64_t>(r);
            }
        }
    }
    for (auto a : arg) require(a >= 0, "segment_max: empty segment");
    return record(std::move(out), {x}, [arg = std::move(arg), d](Node& n) {
        Tensor& g = parent(n, 0).grad_buffer();
        for (std::size_t o = 0; o < arg.size(); ++o) g[static_cast<std::size_t>(arg[o]) * d + o % d] += n.grad[o];
    });
}

Var conv2d(const Var& input, const Var& kernels, const Var& bias)
{
    require(input.value().rank() == 4, "conv2d: input must be NCHW, got " + shape_string(input.shape()));
    require(kernels.value().rank() == 4 && kernels.shape()[2] == 3 && kernels.shape()[3] == 3,
            "conv2d: kernels must be [out, in, 3, 3], got " + shape_string(kernels.shape()));
    const std::size_t batch = input.shape()[0], c_in = input.shape()[1], h = input.shape()[2], w = input.shape()[3];
    const std::size_t c_out = kernels.shape()[0];
    require(kernels.shape()[1] == c_in, "conv2d: kernel expects " + std::to_string(kernels.shape()[1]) +
                                            " input channels, input has " + std::to_string(c_in));
    const bool has_bias = static_cast<bool>(bias);
    if (has_bias) require(bias.value().size() == c_out, "conv2d: bias length does not match output channels");

    const std::size_t hw = h * w, k = c_in * 9;
    Tensor out({batch, c_out, h, w});
    std::vector<double> cols(k * hw);
    const CMapMat kmat(kernels.value().data(), c_out, k);
    for (std::size_t b = 0; b < batch; ++b) {
        im2col(input.value().data() + b * c_in * hw, c_in, h, w, cols.data());
        MapMat o(out.data() + b * c_out * hw, c_out, hw);
        o.noalias() = kmat * CMapMat(cols.data(), k, hw);
        if (has_bias) o.colwise() += CMapVec(bias.value().data(), c_out);
    }
    std::vector<Var> inputs{input, kernels};
    if (has_bias) inputs.push_back(bias);
    return record(std::move(out), std::move(inputs), [=](Node& n) {
        Node& px = parent(n, 0);
        Node& pk = parent(n, 1);
        std::vector<double> cols(k * hw), dcols(k * hw);
        const CMapMat kmat(pk.value.data(), c_out, k);
        for (std::size_t b = 0; b < batch; ++b) {
            const CMapMat g(n.grad.data() + b * c_out * hw, c_out, hw);
            if (pk.requires_grad) {
                im2col(px.value.data() + b * c_in * hw, c_in, h, w, cols.data());
                MapMat(pk.grad_buffer().data(), c_out, k).noalias() += g * CMapMat(cols.data(), k, hw).transpose();
            }
            if (px.requires_grad) {
                MapMat(dcols.data(), k, hw).noalias() = kmat.transpose() * g;
                col2im_add(dcols.data(), c_in, h, w, px.grad_buffer().data() + b * c_in * hw);
            }
            if (has_bias && parent(n, 2).requires_grad)
                add_row_sums(n.grad.data() + b * c_out * hw, c_out, hw, parent(n, 2).grad_buffer().data());
        }
    });
}

Var batch_norm2d(const Var& input, const Var& gamma, const Var& beta, BatchNormState& state, bool training)
{
    require(input.value().rank() == 4, "batch_norm2d: input must be NCHW, got " + shape_string(input.shape()));
    const std::size_t batch = input.shape()[0], c_n = input.shape()[1], hw = input.shape()[2] * input.shape()[3];
    require(gamma.value().size() == c_n && beta.value().size() == c_n,
            "batch_norm2d: scale/shift length does not match channel count");
    if (state.running_mean.empty()) {
        state.running_mean.assign(c_n, 0.0);
        state.running_var.assign(c_n, 1.0);
    }
    require(state.running_mean.size() == c_n, "batch_norm2d: running statistics have the wrong size");
    if (training && batch < 2) throw std::invalid_argument("batch_norm2d: training mode needs a batch of at least 2");

    const double count = static_cast<double>(batch * hw);
    const Tensor& x = input.value();
    std::vector<double> mean(c_n), inv_std(c_n);
    for (std::size_t c = 0; c < c_n; ++c) {
        if (training) {
            double s = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const double* p = x.data() + (b * c_n + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) s += p[i];
            }
            const double mu = s / count;
            double v = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const double* p = x.data() + (b * c_n + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) v += (p[i] - mu) * (p[i] - mu);
            }
            v /= count;
            mean[c] = mu;
            inv_std[c] = 1.0 / std::sqrt(v + state.eps);
            const double unbiased = count > 1.0 ? v * count / (count - 1.0) : v;
            state.running_mean[c] = (1.0 - state.momentum) * state.running_mean[c] + state.momentum * mu;
            state.running_var[c] = (1.0 - state.momentum) * state.running_var[c] + state.momentum * unbiased;
        } else {
            mean[c] = state.running_mean[c];
            inv_std[c] = 1.0 / std::sqrt(state.running_var[c] + state.eps);
        }
    }
    Tensor xhat(x.shape());
    Tensor out(x.shape());
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t c = 0; c < c_n; ++c) {
            const std::size_t off = (b * c_n + c) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
                xhat[off + i] = (x[off + i] - mean[c]) * inv_std[c];
                out[off + i] = gamma.value()[c] * xhat[off + i] + beta.value()[c];
            }
        }
    return record(std::move(out), {input, gamma, beta}, [=, xhat = std::move(xhat)](Node& n) {
        Node& px = parent(n, 0);
        Node& pg = parent(n, 1);
        Node& pb = parent(n, 2);
        for (std::size_t c = 0; c < c_n; ++c) {
            double sum_g = 0.0, sum_gx = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t off = (b * c_n + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    sum_g += n.grad[off + i];
                    sum_gx += n.grad[off + i] * xhat[off + i];
                }
            }
            if (pg.requires_grad) pg.grad_buffer()[c] += sum_gx;
            if (pb.requires_grad) pb.grad_buffer()[c] += sum_g;
            if (!px.requires_grad) continue;
            const double gm = pg.value[c];
            Tensor& gx = px.grad_buffer();
            for (std::size_t b = 0; b < batch; ++b) {
                const std::size_t off = (b * c_n + c) * hw;
                for (std::size_t i = 0; i < hw; ++i) {
                    const double dxhat = n.grad[off + i] * gm;
                    gx[off + i] += training
                                       ? inv_std[c] * (dxhat - gm * (sum_g + xhat[off + i] * sum_gx) / count)
                                       : inv_std[c] * dxhat;
                }
            }
        }
    });
}

Var bce(const Var& prediction, const Tensor& target)
{
    require(prediction.value().size() == target.size(), "bce: prediction and target sizes differ");
    const double lo = 1e-12, hi = 1.0 - 1e-12;
    const double n = static_cast<double>(target.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double p = std::clamp(prediction.value()[i], lo, hi);
        loss -= target[i] * std::log(p) + (1.0 - target[i]) * std::log(1.0 - p);
    }
    return record(Tensor({1}, loss / n), {prediction}, [target, lo, hi, n](Node& node) {
        Node& p = parent(node, 0);
        Tensor& g = p.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double q = std::clamp(p.value[i], lo, hi);
            g[i] += node.grad[0] * (-(target[i] / q) + (1.0 - target[i]) / (1.0 - q)) / n;
        }
    });
}

Var mae(const Var& prediction, const Tensor& target)
{
    require(prediction.value().size() == target.size(), "mae: prediction and target sizes differ");
    const double n = static_cast<double>(target.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) loss += std::abs(prediction.value()[i] - target[i]);
    return record(Tensor({1}, loss / n), {prediction}, [target, n](Node& node) {
        Node& p = parent(node, 0);
        Tensor& g = p.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            const double d = p.value[i] - target[i];
            g[i] += node.grad[0] * (d > 0.0 ? 1.0 : d < 0.0 ? -1.0 : 0.0) / n;
        }
    });
}

Var sum(const Var& x)
{
    double s = 0.0;
    for (double v : x.value().values()) s += v;
    return record(Tensor({1}, s), {x}, [](Node& n) {
        Tensor& g = parent(n, 0).grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[0];
    });
}

}  // namespace raylink::nn
