#include "raylink/refine.hpp"

#include "raylink/nn/adam.hpp"
#include "raylink/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace raylink::refine {

using nn::Tensor;
using nn::Var;

namespace {

GramMatrix hermitian_gram(ComplexMatrix m)
{
    const std::size_t n = m.rows();
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = m(i, i).real();
        for (std::size_t j = i + 1; j < n; ++j) {
            const auto avg = 0.5 * (m(i, j) + std::conj(m(j, i)));
            m(i, j) = avg;
            m(j, i) = std::conj(avg);
        }
    }
    return GramMatrix(std::move(m));
}

/// Orthonormal basis led by `lead`, filled from `basis` columns 1..N-1 and then
/// column 0, skipping any column that is dependent on the ones already taken.
ComplexMatrix lead_basis(const std::vector<linalg::Complex>& lead, const ComplexMatrix& basis)
{
    const std::size_t n = basis.rows();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 1);
    order.back() = 0;
    for (;;) {
        ComplexMatrix cols(n, n);
        for (std::size_t r = 0; r < n; ++r) cols(r, 0) = lead[r];
        for (std::size_t c = 1; c < n; ++c)
            for (std::size_t r = 0; r < n; ++r) cols(r, c) = basis(r, order[c - 1]);
        try {
            return linalg::gram_schmidt(cols);
        } catch (const linalg::RankDeficientError& e) {
            if (e.column() == 0) throw;
            // Drop the dependent candidate; the remaining ones shift left.
            order.erase(order.begin() + static_cast<std::ptrdiff_t>(e.column() - 1));
            if (order.size() < n - 1) throw;
        }
    }
}

}  // namespace

LosRefinement refine_los(const raytrace::PathList& paths, const GramMatrix& t_rt, const LinkGeometry& link)
{
    const raytrace::Path* los = paths.los_path();
    if (!los) return {t_rt, true};

    raytrace::PathList only;
    only.paths.push_back(*los);
    const ComplexMatrix h_los = channel::assemble(only, link.tx_array, link.rx_array, link.wavelength);
    const auto s = linalg::svd(h_los);
    const std::vector<linalg::Complex> v_los = s.v.column(0);

    const auto eig = linalg::hermitian_eig(t_rt.matrix());
    const ComplexMatrix v = lead_basis(v_los, eig.eigenvectors);
    const std::size_t n = v.rows();
    ComplexMatrix out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        const double lambda = eig.eigenvalues[k];
        for (std::size_t i = 0; i < n; ++i) {
            const linalg::Complex vi = lambda * v(i, k);
            for (std::size_t j = 0; j < n; ++j) out(i, j) += vi * std::conj(v(j, k));
        }
    }
    return {hermitian_gram(std::move(out)), false};
}

RefinerModel::RefinerModel(std::size_t n, const RefinerHyper& hyper, std::uint64_t seed)
    : n_(n), hyper_(hyper), seed_(seed)
{
    if (n == 0) throw std::invalid_argument("RefinerModel: matrix size must be positive");
    if (hyper.channels.empty()) throw std::invalid_argument("RefinerModel: the channel ladder is empty");
    Rng rng(derive_seed(seed, "init.refiner"));
    std::size_t in = 2;
    for (std::size_t c : hyper.channels) {
        if (c == 0) throw std::invalid_argument("RefinerModel: channel counts must be positive");
        stack_.add(std::make_unique<nn::Conv2d>(in, c, rng, false));
        stack_.add(std::make_unique<nn::BatchNorm2d>(c));
        stack_.add(std::make_unique<nn::ActivationLayer>(nn::Activation::LeakyRelu));
        in = c;
    }
    auto out = std::make_unique<nn::Conv2d>(in, 2, rng, true);
    // Zero residual branch: the untrained refiner is the identity.
    out->kernels().value().fill(0.0);
    stack_.add(std::move(out));
}

Var RefinerModel::forward(const Var& x) { return nn::add(x, stack_.forward(x)); }

namespace {

std::vector<std::pair<std::string, Var>> named_parameters(RefinerModel& m)
{
    std::vector<std::pair<std::string, Var>> out;
    auto& s = m.stack();
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (auto* c = dynamic_cast<nn::Conv2d*>(&s.at(i))) {
            out.emplace_back("stack." + std::to_string(i) + ".kernels", c->kernels());
            if (c->bias()) out.emplace_back("stack." + std::to_string(i) + ".bias", c->bias());
        } else if (auto* b = dynamic_cast<nn::BatchNorm2d*>(&s.at(i))) {
            out.emplace_back("stack." + std::to_string(i) + ".gamma", b->gamma());
            out.emplace_back("stack." + std::to_string(i) + ".beta", b->beta());
        }
    }
    return out;
}

}  // namespace

nn::Checkpoint RefinerModel::to_checkpoint(const nlohmann::json& extra) const
{
    auto& self = const_cast<RefinerModel&>(*this);
    nn::Checkpoint c;
    c.header = extra;
    c.header["model"] = "refiner";
    c.header["seed"] = seed_;
    c.header["architecture"] = {
        {"n", n_},
        {"channels", hyper_.channels},
        {"kernel", 3},
        {"padding", "zero"},
        {"hidden_activation", "leaky_relu"},
        {"leaky_slope", nn::kLeakySlope},
        {"batch_norm_eps", 1e-5},
        {"batch_norm_momentum", 0.1},
        {"output_activation", "linear"},
        {"residual", true},
    };
    c.header["input_scale"] = input_scale_;
    for (auto& [name, v] : named_parameters(self)) c.tensors.push_back({name, v.value()});
    auto& s = self.stack();
    for (std::size_t i = 0; i < s.size(); ++i)
        if (auto* b = dynamic_cast<nn::BatchNorm2d*>(&s.at(i))) {
            const auto& st = b->state();
            const nn::Shape shape{st.running_mean.size()};
            c.tensors.push_back({"stack." + std::to_string(i) + ".running_mean", Tensor(shape, st.running_mean)});
            c.tensors.push_back({"stack." + std::to_string(i) + ".running_var", Tensor(shape, st.running_var)});
        }
    return c;
}

RefinerModel RefinerModel::from_checkpoint(const nn::Checkpoint& checkpoint)
{
    const auto& h = checkpoint.header;
    if (h.value("model", "") != "refiner") throw std::runtime_error("checkpoint does not hold a refiner");
    RefinerHyper hyper;
    hyper.channels = h.at("architecture").at("channels").get<std::vector<std::size_t>>();
    RefinerModel m(h.at("architecture").at("n"), hyper, h.at("seed").get<std::uint64_t>());
    m.set_input_scale(h.at("input_scale"));
    for (auto& [name, v] : named_parameters(m)) {
        const Tensor& t = checkpoint.get(name);
        if (t.shape() != v.shape()) throw std::runtime_error("checkpoint: tensor '" + name + "' has the wrong shape");
        v.value() = t;
    }
    auto& s = m.stack();
    for (std::size_t i = 0; i < s.size(); ++i)
        if (auto* b = dynamic_cast<nn::BatchNorm2d*>(&s.at(i))) {
            b->state().running_mean = checkpoint.get("stack." + std::to_string(i) + ".running_mean").values();
            b->state().running_var = checkpoint.get("stack." + std::to_string(i) + ".running_var").values();
        }
    m.set_training(false);
    return m;
}

void gram_to_channels(const ComplexMatrix& t, double scale, double* out)
{
    const std::size_t n = t.rows();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            out[i * n + j] = t(i, j).real() / scale;
            out[n * n + i * n + j] = t(i, j).imag() / scale;
        }
}

ComplexMatrix channels_to_matrix(const double* in, std::size_t n, double scale)
{
    ComplexMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = {in[i * n + j] * scale, in[n * n + i * n + j] * scale};
    return m;
}

NlosRefinement refine_nlos(const GramMatrix& t_rt, RefinerModel& model)
{
    const std::size_t n = model.n();
    if (t_rt.size() != n) throw std::invalid_argument("refine_nlos: Gram matrix size does not match the model");
    if (!t_rt.matrix().all_finite()) throw std::invalid_argument("refine_nlos: Gram matrix has non-finite entries");
    Tensor x({1, 2, n, n});
    gram_to_channels(t_rt.matrix(), model.input_scale(), x.data());
    model.set_training(false);
    nn::NoGradGuard guard;
    const Var y = model.forward(Var(std::move(x)));
    if (!y.value().all_finite()) return {hermitian_gram(linalg::nearest_hermitian_psd(t_rt.matrix())), true};
    const ComplexMatrix t_cnn = channels_to_matrix(y.value().data(), n, model.input_scale());
    return {hermitian_gram(linalg::nearest_hermitian_psd(t_cnn)), false};
}

Refinement refine(double los_probability, const raytrace::PathList& paths, const GramMatrix& t_rt,
                  const LinkGeometry& link, RefinerModel& model)
{
    if (los_probability >= 0.5) {
        auto r = refine_los(paths, t_rt, link);
        return {std::move(r.t), true, r.fallback};
    }
    auto r = refine_nlos(t_rt, model);
    return {std::move(r.t), false, r.fault};
}

namespace {

void fill_batch(std::span<const RefinerSample> samples, std::span<const std::size_t> idx, double scale, Tensor& x,
                Tensor& y)
{
    const std::size_t n = samples.front().t_rt.size();
    const std::size_t per = 2 * n * n;
    x = Tensor({idx.size(), 2, n, n});
    y = Tensor({idx.size(), 2, n, n});
    for (std::size_t b = 0; b < idx.size(); ++b) {
        gram_to_channels(samples[idx[b]].t_rt.matrix(), scale, x.data() + b * per);
        gram_to_channels(samples[idx[b]].t_true.matrix(), scale, y.data() + b * per);
    }
}

/// Batch boundaries; a trailing single sample joins the previous batch so
/// batch normalization always sees at least two samples.
std::vector<std::pair<std::size_t, std::size_t>> batches(std::size_t count, std::size_t batch_size)
{
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t s = 0; s < count; s += batch_size) out.emplace_back(s, std::min(count, s + batch_size));
    if (out.size() > 1 && out.back().second - out.back().first == 1) {
        out.pop_back();
        out.back().second = count;
    }
    return out;
}

}  // namespace

double validation_mae(RefinerModel& model, std::span<const RefinerSample> samples, std::size_t batch_size)
{
    if (samples.empty()) return 0.0;
    model.set_training(false);
    nn::NoGradGuard guard;
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t s = 0; s < samples.size(); s += batch_size) {
        const std::size_t e = std::min(samples.size(), s + batch_size);
        Tensor x, y;
        fill_batch(samples, std::span(idx).subspan(s, e - s), model.input_scale(), x, y);
        const Var out = model.forward(Var(std::move(x)));
        for (std::size_t i = 0; i < y.size(); ++i) total += std::abs(out.value()[i] - y[i]);
        count += y.size();
    }
    return total / static_cast<double>(count);
}

RefinerTrainResult train_refiner(std::span<const RefinerSample> train, std::span<const RefinerSample> val,
                                 std::size_t n, const RefinerHyper& hyper, const RefinerTrainOptions& options)
{
    if (train.size() < 2) throw std::invalid_argument("train_refiner: at least two NLoS training samples are needed");
    if (val.empty()) throw std::invalid_argument("train_refiner: the validation split holds no NLoS samples");
    if (options.batch_size < 2) throw std::invalid_argument("train_refiner: batch size must be at least 2");
    for (const auto& s : train)
        if (s.t_rt.size() != n || s.t_true.size() != n)
            throw std::invalid_argument("train_refiner: Gram matrix size does not match the model");

    RefinerTrainResult result{RefinerModel(n, hyper, options.seed), {}, 0, 0.0, false, {}};
    RefinerModel& model = result.model;
    double scale = 0.0;
    for (const auto& s : train) scale += s.t_rt.matrix().frobenius_norm();
    scale /= static_cast<double>(train.size());
    model.set_input_scale(scale > 0.0 ? scale : 1.0);

    const auto params = model.parameters();
    nn::Adam adam(params, {options.lr});
    auto snapshot = [&] { return model.to_checkpoint(); };
    nn::Checkpoint best = snapshot();
    result.best_val_mae = validation_mae(model, val);
    result.log.push_back({0, std::nan(""), result.best_val_mae});

    std::vector<std::size_t> order(train.size());
    for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(options.seed, "shuffle", epoch));
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

        model.set_training(true);
        double loss_sum = 0.0;
        for (const auto& [s, e] : batches(order.size(), options.batch_size)) {
            Tensor x, y;
            fill_batch(train, std::span(order).subspan(s, e - s), model.input_scale(), x, y);
            adam.zero_grad();
            const Var loss = nn::mae(model.forward(Var(std::move(x))), y);
            const double lv = loss.value()[0];
            if (!std::isfinite(lv)) {
                result.diverged = true;
                result.diagnostic = "non-finite training loss at epoch " + std::to_string(epoch);
                break;
            }
            nn::backward(loss);
            adam.step();
            loss_sum += lv * static_cast<double>(e - s);
        }
        if (result.diverged) break;

        const double val_mae = validation_mae(model, val);
        result.log.push_back({epoch, loss_sum / static_cast<double>(train.size()), val_mae});
        if (options.progress) {
            char buf[128];
            std::snprintf(buf, sizeof buf, "epoch %zu loss %.6f val_mae %.6f\n", epoch, result.log.back().train_loss,
                          val_mae);
            *options.progress << buf << std::flush;
        }
        if (val_mae < result.best_val_mae) {
            result.best_val_mae = val_mae;
            result.best_epoch = epoch;
            best = snapshot();
        }
    }
    result.model = RefinerModel::from_checkpoint(best);
    if (adam.divergences() > 0 && result.diagnostic.empty())
        result.diagnostic = std::to_string(adam.divergences()) + " optimizer steps skipped on non-finite gradients";
    return result;
}

void write_refiner_log(std::ostream& os, const std::vector<RefinerLogRow>& log)
{
    os << "epoch,train_loss,val_mae\n";
    char buf[128];
    for (const auto& r : log) {
        if (std::isnan(r.train_loss))
            std::snprintf(buf, sizeof buf, "%zu,,%.12g\n", r.epoch, r.val_mae);
        else
            std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g\n", r.epoch, r.train_loss, r.val_mae);
        os << buf;
    }
}

}  // namespace raylink::refine
