#include "raylink/detect.hpp"

#include "raylink/nn/adam.hpp"
#include "raylink/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <tuple>

namespace raylink::detect {

using nn::Tensor;
using nn::Var;

std::string to_string(Variant v)
{
    switch (v) {
        case Variant::Rt: return "rt";
        case Variant::Gnn: return "gnn";
        case Variant::Pbgnn: return "pbgnn";
    }
    return "rt";
}

Variant variant_from_string(const std::string& s)
{
    if (s == "rt") return Variant::Rt;
    if (s == "gnn") return Variant::Gnn;
    if (s == "pbgnn") return Variant::Pbgnn;
    throw std::invalid_argument("unknown detector variant '" + s + "'");
}

int detect_rt(const raytrace::PathList& paths)
{
    return !paths.empty() && paths.paths.front().is_los ? 1 : 0;
}

KnnGraph build_knn_graph(std::span<const Vec3> points, std::size_t k)
{
    const std::size_t n = points.size();
    KnnGraph g;
    g.positions.assign(points.begin(), points.end());
    g.nearest.resize(n);
    g.adjacency.resize(n);
    const std::size_t kk = n > 0 ? std::min(k, n - 1) : 0;
    std::vector<std::pair<double, std::uint32_t>> cand;
    for (std::size_t i = 0; i < n; ++i) {
        cand.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const Vec3 d = points[j] - points[i];
            cand.emplace_back(dot(d, d), static_cast<std::uint32_t>(j));
        }
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end());
        for (std::size_t m = 0; m < kk; ++m) g.nearest[i].push_back(cand[m].second);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (auto j : g.nearest[i]) {
            g.adjacency[i].push_back(j);
            g.adjacency[j].push_back(static_cast<std::uint32_t>(i));
        }
    for (auto& a : g.adjacency) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
    }
    return g;
}

std::vector<Vec3> farthest_point_sample(std::span<const Vec3> points, std::size_t max_points)
{
    if (points.size() <= max_points) return {points.begin(), points.end()};
    auto key = [](const Vec3& p) { return std::make_tuple(p.x, p.y, p.z); };
    // (score, coordinates) comparison makes every choice independent of input order.
    auto better = [&](double sa, const Vec3& a, double sb, const Vec3& b) {
        return sa > sb || (sa == sb && key(a) > key(b));
    };
    std::size_t start = 0;
    for (std::size_t i = 1; i < points.size(); ++i)
        if (better(dot(points[i], points[i]), points[i], dot(points[start], points[start]), points[start])) start = i;

    std::vector<Vec3> out{points[start]};
    std::vector<double> dist(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec3 d = points[i] - points[start];
        dist[i] = dot(d, d);
    }
    while (out.size() < max_points) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < points.size(); ++i)
            if (better(dist[i], points[i], dist[best], points[best])) best = i;
        out.push_back(points[best]);
        for (std::size_t i = 0; i < points.size(); ++i) {
            const Vec3 d = points[i] - points[best];
            dist[i] = std::min(dist[i], dot(d, d));
        }
    }
    return out;
}

std::array<Vec3, 3> link_frame_axes(const Vec3& direction)
{
    if (!(norm(direction) > 0.0)) throw std::invalid_argument("link_frame_axes: zero direction");
    const Vec3 x = normalized(direction);
    Vec3 y = cross(Vec3{0, 0, 1}, x);
    y = norm(y) > 1e-9 ? normalized(y) : Vec3{0, 1, 0};
    return {x, y, cross(x, y)};
}

PreparedGraph prepare_graph(const PointCloud& cloud, const DetectorHyper& hyper, std::optional<Vec3> link_direction)
{
    if (cloud.empty()) throw std::invalid_argument("prepare_graph: point cloud is empty");
    if (hyper.link_frame && !link_direction)
        throw std::invalid_argument("prepare_graph: the link frame needs the UE-BS direction");
    PreparedGraph g;
    g.positions = farthest_point_sample(cloud.points, hyper.max_points);
    if (hyper.link_frame) {
        const auto axes = link_frame_axes(*link_direction);
        for (auto& p : g.positions) p = {dot(axes[0], p), dot(axes[1], p), dot(axes[2], p)};
    }
    for (auto& p : g.positions) p *= 1.0 / hyper.position_scale;
    const KnnGraph knn = build_knn_graph(g.positions, hyper.k);
    for (std::uint32_t i = 0; i < knn.adjacency.size(); ++i) {
        g.src.push_back(i);
        g.dst.push_back(i);
        for (auto j : knn.adjacency[i]) {
            g.src.push_back(j);
            g.dst.push_back(i);
        }
    }
    return g;
}

namespace {

nn::MlpSpec hop_spec(std::size_t input, const DetectorHyper& h)
{
    return {input, std::vector<std::size_t>(h.hop_layers, h.hidden),
            std::vector<nn::Activation>(h.hop_layers, nn::Activation::Relu)};
}

nn::MlpSpec head_spec(Variant v, const DetectorHyper& h)
{
    return {h.hidden + (v == Variant::Pbgnn ? 1 : 0), {h.head_hidden, 1},
            {nn::Activation::Relu, nn::Activation::Sigmoid}};
}

nn::Mlp make_mlp(const nn::MlpSpec& spec, std::uint64_t seed)
{
    Rng rng(seed);
    return nn::Mlp(spec, rng);
}

std::vector<std::pair<std::string, Var>> named_parameters(const DetectorModel& m)
{
    std::vector<std::pair<std::string, Var>> out;
    auto& mm = const_cast<DetectorModel&>(m);
    auto add = [&](const std::string& prefix, nn::Mlp& mlp) {
        for (std::size_t i = 0; i < mlp.spec().widths.size(); ++i) {
            out.emplace_back(prefix + "." + std::to_string(i) + ".weight", mlp.layer(i).weight());
            out.emplace_back(prefix + "." + std::to_string(i) + ".bias", mlp.layer(i).bias());
        }
    };
    add("hop1", mm.hop1());
    add("hop2", mm.hop2());
    add("head", mm.head());
    return out;
}

}  // namespace

DetectorModel::DetectorModel(Variant variant, const DetectorHyper& hyper, std::uint64_t seed)
    : variant_(variant),
      hyper_(hyper),
      seed_(seed),
      hop1_(make_mlp(hop_spec(6, hyper), derive_seed(seed, "init.hop1"))),
      hop2_(make_mlp(hop_spec(hyper.hidden + 3, hyper), derive_seed(seed, "init.hop2"))),
      head_(make_mlp(head_spec(variant, hyper), derive_seed(seed, "init.head")))
{
    if (variant == Variant::Rt) throw std::invalid_argument("DetectorModel: the rt variant has no learned model");
}

std::vector<Var> DetectorModel::parameters() const
{
    std::vector<Var> out;
    for (const auto* m : {&hop1_, &hop2_, &head_})
        for (auto& p : m->parameters()) out.push_back(p);
    return out;
}

Var DetectorModel::forward(std::span<const PreparedGraph* const> graphs, std::span<const double> rt_status)
{
    if (variant_ == Variant::Pbgnn && rt_status.size() != graphs.size())
        throw std::invalid_argument("DetectorModel: pbgnn needs one ray-tracing status per graph");
    std::size_t n_nodes = 0, n_edges = 0;
    for (const auto* g : graphs) {
        n_nodes += g->positions.size();
        n_edges += g->src.size();
    }
    std::vector<std::uint32_t> src, dst, graph_of;
    src.reserve(n_edges);
    dst.reserve(n_edges);
    graph_of.reserve(n_nodes);
    Tensor x1({n_edges, 6});
    Tensor offsets({n_edges, 3});
    std::uint32_t base = 0;
    std::size_t e = 0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const auto& g = *graphs[gi];
        for (std::size_t k = 0; k < g.src.size(); ++k, ++e) {
            src.push_back(base + g.src[k]);
            dst.push_back(base + g.dst[k]);
            const Vec3& pj = g.positions[g.src[k]];
            const Vec3 d = pj - g.positions[g.dst[k]];
            const double row[6] = {pj.x, pj.y, pj.z, d.x, d.y, d.z};
            std::copy_n(row, 6, x1.data() + e * 6);
            std::copy_n(row + 3, 3, offsets.data() + e * 3);
        }
        for (std::size_t i = 0; i < g.positions.size(); ++i) graph_of.push_back(static_cast<std::uint32_t>(gi));
        base += static_cast<std::uint32_t>(g.positions.size());
    }
    const Var h1 = nn::segment_sum(hop1_.forward(Var(std::move(x1))), dst, n_nodes);
    const Var x2 = nn::concat_cols(nn::gather_rows(h1, src), Var(std::move(offsets)));
    const Var h2 = nn::segment_sum(hop2_.forward(x2), dst, n_nodes);
    Var pooled = nn::segment_max(h2, graph_of, graphs.size());
    if (variant_ == Variant::Pbgnn) {
        Tensor rt({graphs.size(), 1}, std::vector<double>(rt_status.begin(), rt_status.end()));
        pooled = nn::concat_cols(Var(std::move(rt)), pooled);
    }
    return head_.forward(pooled);
}

nn::Checkpoint DetectorModel::to_checkpoint(const nlohmann::json& extra) const
{
    nn::Checkpoint c;
    c.header = extra;
    c.header["model"] = "detector";
    c.header["variant"] = to_string(variant_);
    c.header["seed"] = seed_;
    c.header["architecture"] = {
        {"k", hyper_.k},
        {"hidden", hyper_.hidden},
        {"hop_layers", hyper_.hop_layers},
        {"hop_activation", "relu"},
        {"head_hidden", hyper_.head_hidden},
        {"head_activations", {"relu", "sigmoid"}},
        {"aggregation", "sum"},
        {"readout", "max"},
        {"max_points", hyper_.max_points},
        {"position_scale", hyper_.position_scale},
        {"link_frame", hyper_.link_frame},
    };
    for (const auto& [name, v] : named_parameters(*this)) c.tensors.push_back({name, v.value()});
    return c;
}

DetectorModel DetectorModel::from_checkpoint(const nn::Checkpoint& checkpoint)
{
    const auto& h = checkpoint.header;
    if (h.value("model", "") != "detector") throw std::runtime_error("checkpoint does not hold a detector");
    const auto& a = h.at("architecture");
    DetectorHyper hyper;
    hyper.k = a.at("k");
    hyper.hidden = a.at("hidden");
    hyper.hop_layers = a.at("hop_layers");
    hyper.head_hidden = a.at("head_hidden");
    hyper.max_points = a.at("max_points");
    hyper.position_scale = a.at("position_scale");
    hyper.link_frame = a.value("link_frame", false);
    DetectorModel m(variant_from_string(h.at("variant")), hyper, h.at("seed").get<std::uint64_t>());
    for (auto& [name, v] : named_parameters(m)) {
        const Tensor& t = checkpoint.get(name);
        if (t.shape() != v.shape()) throw std::runtime_error("checkpoint: tensor '" + name + "' has the wrong shape");
        v.value() = t;
    }
    return m;
}

double gnn_forward(const PointCloud& cloud, DetectorModel& model, std::optional<int> rt_status,
                   std::optional<Vec3> link_direction)
{
    if (cloud.empty()) throw std::invalid_argument("gnn_forward: point cloud is empty");
    if ((model.variant() == Variant::Pbgnn) != rt_status.has_value())
        throw std::invalid_argument("gnn_forward: the ray-tracing status is required by pbgnn and only by pbgnn");
    const PreparedGraph g = prepare_graph(cloud, model.hyper(), link_direction);
    const PreparedGraph* gp = &g;
    const double rt = rt_status.value_or(0);
    nn::NoGradGuard guard;
    const Var out = model.forward({&gp, 1}, {&rt, rt_status ? 1u : 0u});
    return out.value()[0];
}

std::vector<double> predict(DetectorModel& model, std::span<const DetectorSample> samples, std::size_t batch_size)
{
    nn::NoGradGuard guard;
    std::vector<double> out;
    out.reserve(samples.size());
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        const std::size_t end = std::min(samples.size(), start + batch_size);
        std::vector<const PreparedGraph*> graphs;
        std::vector<double> rt;
        for (std::size_t i = start; i < end; ++i) {
            graphs.push_back(&samples[i].graph);
            rt.push_back(samples[i].rt_status);
        }
        const Var p = model.forward(graphs, rt);
        for (std::size_t i = 0; i < p.value().size(); ++i) out.push_back(p.value()[i]);
    }
    return out;
}

DetectorTrainResult train_detector(std::span<const DetectorSample> train, std::span<const DetectorSample> val,
                                   Variant variant, const DetectorHyper& hyper, const TrainOptions& options)
{
    if (train.empty()) throw std::invalid_argument("train_detector: the training split is empty");
    if (val.empty()) throw std::invalid_argument("train_detector: the validation split is empty");
    if (options.batch_size == 0) throw std::invalid_argument("train_detector: batch size must be positive");

    DetectorTrainResult result{DetectorModel(variant, hyper, options.seed), {}, 0, -1.0, false, {}};
    DetectorModel& model = result.model;
    const auto params = model.parameters();
    nn::Adam adam(params, {options.lr});
    std::vector<Tensor> best;
    for (const auto& p : params) best.push_back(p.value());

    std::vector<std::size_t> order(train.size());
    for (std::size_t epoch = 1; epoch <= options.epochs && !result.diverged; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(options.seed, "shuffle", epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += options.batch_size) {
            const std::size_t end = std::min(order.size(), start + options.batch_size);
            std::vector<const PreparedGraph*> graphs;
            std::vector<double> rt;
            Tensor target({end - start, 1});
            for (std::size_t i = start; i < end; ++i) {
                const auto& s = train[order[i]];
                graphs.push_back(&s.graph);
                rt.push_back(s.rt_status);
                target[i - start] = s.label;
            }
            adam.zero_grad();
            const Var prob = model.forward(graphs, rt);
            const Var loss = nn::bce(prob, target);
            const double lv = loss.value()[0];
            if (!std::isfinite(lv)) {
                result.diverged = true;
                result.diagnostic = "non-finite training loss at epoch " + std::to_string(epoch);
                break;
            }
            nn::backward(loss);
            adam.step();
            loss_sum += lv * static_cast<double>(end - start);
            for (std::size_t i = 0; i < end - start; ++i)
                correct += (prob.value()[i] >= 0.5 ? 1 : 0) == static_cast<int>(target[i]) ? 1 : 0;
        }
        if (result.diverged) break;

        const auto probs = predict(model, val);
        std::size_t val_correct = 0;
        for (std::size_t i = 0; i < val.size(); ++i) val_correct += (probs[i] >= 0.5 ? 1 : 0) == val[i].label;
        DetectorLogRow row{epoch, loss_sum / static_cast<double>(train.size()),
                           static_cast<double>(correct) / static_cast<double>(train.size()),
                           static_cast<double>(val_correct) / static_cast<double>(val.size())};
        result.log.push_back(row);
        if (options.progress) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "epoch %zu loss %.5f train_acc %.4f val_acc %.4f\n", row.epoch,
                          row.train_loss, row.train_acc, row.val_acc);
            *options.progress << buf << std::flush;
        }
        if (row.val_acc > result.best_val_acc) {
            result.best_val_acc = row.val_acc;
            result.best_epoch = epoch;
            for (std::size_t k = 0; k < params.size(); ++k) best[k] = params[k].value();
        }
    }
    for (std::size_t k = 0; k < params.size(); ++k) const_cast<Var&>(params[k]).value() = best[k];
    if (adam.divergences() > 0 && result.diagnostic.empty())
        result.diagnostic = std::to_string(adam.divergences()) + " optimizer steps skipped on non-finite gradients";
    return result;
}

void write_detector_log(std::ostream& os, const std::vector<DetectorLogRow>& log)
{
    os << "epoch,train_loss,train_acc,val_acc\n";
    char buf[128];
    for (const auto& r : log) {
        std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g,%.12g\n", r.epoch, r.train_loss, r.train_acc, r.val_acc);
        os << buf;
    }
}

ClassificationMetrics classification_metrics(std::span<const int> predictions, std::span<const int> labels)
{
    if (predictions.empty()) throw std::invalid_argument("classification_metrics: empty input");
    if (predictions.size() != labels.size())
        throw std::invalid_argument("classification_metrics: predictions and labels differ in length");
    ClassificationMetrics m;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const bool p = predictions[i] != 0, l = labels[i] != 0;
        if (p && l) ++m.tp;
        else if (p) ++m.fp;
        else if (l) ++m.fn;
        else ++m.tn;
    }
    auto ratio = [](std::size_t num, std::size_t den, bool& undefined) {
        if (den == 0) {
            undefined = true;
            return num == 0 ? 1.0 : 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.precision = ratio(m.tp, m.tp + m.fp, m.precision_undefined);
    m.recall = ratio(m.tp, m.tp + m.fn, m.recall_undefined);
    m.accuracy = static_cast<double>(m.tp + m.tn) / static_cast<double>(predictions.size());
    return m;
}

}  // namespace raylink::detect
