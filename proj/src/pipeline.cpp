#include "raylink/pipeline.hpp"

#include "raylink/binary_io.hpp"
#include "raylink/detect.hpp"
#include "raylink/nn/checkpoint.hpp"
#include "raylink/refine.hpp"
#include "raylink/rng.hpp"
#include "raylink/surface.hpp"

#include <array>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

namespace raylink::pipeline {

namespace fs = std::filesystem;
using channel::GramMatrix;
using config::RunConfig;
using dataset::Split;

namespace {

std::string fmt(double v, const char* spec = "%.12g")
{
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void say(std::ostream* log, const std::string& line)
{
    if (log) *log << line << '\n' << std::flush;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream os(path, std::ios::trunc);
    os << text;
    if (!os) throw std::runtime_error("write failed for " + path.string());
}

fs::path checkpoint_path(const RunConfig& c, TrainTarget t) { return fs::path(c.model_dir) / (to_string(t) + ".ckpt"); }

}  // namespace

DirectoryLock::DirectoryLock(const fs::path& dir) : path_(dir / ".lock")
{
    fs::create_directories(dir);
    std::FILE* f = std::fopen(path_.c_str(), "wx");
    if (!f)
        throw std::runtime_error("directory " + dir.string() + " is locked by another run (remove " + path_.string() +
                                 " if stale)");
    std::fclose(f);
}

DirectoryLock::~DirectoryLock()
{
    std::error_code ec;
    fs::remove(path_, ec);
}

void write_provenance(const fs::path& dir, const RunConfig& config)
{
    std::ostringstream os;
    os << "# raylink " << kVersion << " resolved configuration\n";
    config::write_config(os, config);
    write_text(dir / "config.ini", os.str());
    write_text(dir / "VERSION", std::string("raylink ") + kVersion + "\n");
}

// ---------------------------------------------------------------------------
// gen

GeneratedSample generate_sample(const RunConfig& config, std::uint64_t scene_id)
{
    constexpr std::uint64_t kMaxDraws = 100;
    const auto scene_cfg = config.scene_config();
    const auto lidar = config.lidar_config();
    const auto antennas = config.antenna_setup();
    const auto recon = config.reconstruct_options();

    // The LoS target is fixed per scene id so that redraws keep the mix.
    const bool want_los = Rng(derive_seed(config.seed, "los", scene_id)).bernoulli(config.los_fraction);
    GeneratedSample out;
    for (std::uint64_t draw = 0; draw < kMaxDraws; ++draw) {
        const auto sc =
            scene::generate_scene(scene_cfg, derive_seed(config.seed, "scene", scene_id, draw), want_los);
        auto h = scene::ground_truth_channel(sc, antennas, config.truth_order, config.fading_config(),
                                             derive_seed(config.seed, "fading", scene_id, draw));
        PointCloud cloud = scene::lidar_scan(sc, lidar, derive_seed(config.seed, "lidar", scene_id, draw));
        dataset::round_to_float(cloud);
        if (!h || cloud.empty()) {
            ++out.discarded;
            continue;
        }
        const auto surf = surface::reconstruct(cloud, recon);
        raytrace::TraceOptions opt;
        opt.wavelength = config.wavelength;
        opt.max_order = config.estimate_order;
        opt.tx_frame = antennas.ue_frame;
        opt.rx_frame = antennas.bs_frame;

        auto& r = out.record;
        r.scene_id = scene_id;
        r.split = dataset::split_for(config.seed, scene_id);
        r.true_los = sc.true_los();
        r.cloud = std::move(cloud);
        r.ue_position = sc.ue_position;
        r.bs_position = sc.bs_position;
        r.true_channel = std::move(*h);
        r.rt_paths = raytrace::trace(surf.facets, Vec3{}, sc.bs_position - sc.ue_position, opt);
        return out;
    }
    throw std::runtime_error("scene " + std::to_string(scene_id) + ": no usable draw after " +
                             std::to_string(kMaxDraws) + " attempts");
}

dataset::Dataset generate_dataset(const RunConfig& config, std::ostream* log)
{
    config.validate();
    const std::size_t n = config.n_scenes;
    std::vector<GeneratedSample> samples(n);
    std::atomic<std::size_t> next{0}, done{0};
    std::exception_ptr failure;
    std::mutex mutex;

    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            try {
                samples[i] = generate_sample(config, i);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!failure) failure = std::current_exception();
                next = n;
                return;
            }
            const std::size_t d = ++done;
            if (log && (d % 100 == 0 || d == n)) {
                std::lock_guard lock(mutex);
                say(log, "gen: " + std::to_string(d) + "/" + std::to_string(n) + " scenes");
            }
        }
    };
    const int threads = std::max(1, std::min<int>(config.threads, static_cast<int>(n)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    if (config.voxel_resolution < 2.0 * config.lidar_noise_sigma)
        say(log, "warning: voxel_resolution is below twice the LIDAR noise; expect spurious faces");

    dataset::Dataset d;
    auto& m = d.manifest;
    m.tool_version = kVersion;
    m.seed = config.seed;
    m.antennas = config.antenna_setup();
    m.wavelength = config.wavelength;
    m.estimate_order = config.estimate_order;
    m.truth_order = config.truth_order;
    m.config = config::to_json(config);

    d.records.reserve(n);
    for (auto& s : samples) {
        m.discarded += s.discarded;
        d.records.push_back(std::move(s.record));
    }

    // c = sqrt(N_R N_T / mean ||H||_F^2) over the training split.
    double energy = 0.0;
    std::size_t count = 0;
    for (const auto& r : d.records)
        if (r.split == Split::Train) {
            energy += std::pow(r.true_channel.frobenius_norm(), 2);
            ++count;
        }
    if (count == 0)
        for (const auto& r : d.records) {
            energy += std::pow(r.true_channel.frobenius_norm(), 2);
            ++count;
        }
    const double dims = static_cast<double>(m.antennas.ue_array.size() * m.antennas.bs_array.size());
    m.normalization = std::sqrt(dims / (energy / static_cast<double>(count)));

    std::vector<GramMatrix> train_t;
    for (auto& r : d.records) {
        for (std::size_t i = 0; i < r.true_channel.rows(); ++i)
            for (std::size_t j = 0; j < r.true_channel.cols(); ++j) r.true_channel(i, j) *= m.normalization;
        switch (r.split) {
            case Split::Train: ++m.train_count; break;
            case Split::Val: ++m.val_count; break;
            case Split::Test: ++m.test_count; break;
        }
        (r.true_los ? m.los_count : m.nlos_count) += 1;
        if (r.split == Split::Train) train_t.push_back(GramMatrix::of_channel(r.true_channel));
    }

    const auto pruned = precode::prune_codebook(precode::build_codebook(m.antennas.ue_array, config.codebook_bits),
                                                train_t, config.prune_min_count);
    m.codebook.b_bits = config.codebook_bits;
    m.codebook.pruned_indices = pruned.pruned_indices.value_or(std::vector<std::size_t>{});
    m.codebook.counts = pruned.counts;
    m.codebook.fallback = pruned.prune_fallback;

    say(log, "gen: " + std::to_string(m.los_count) + " LoS / " + std::to_string(m.nlos_count) + " NLoS, " +
                 std::to_string(m.discarded) + " draws discarded, " +
                 std::to_string(m.codebook.pruned_indices.size()) + " codewords kept");
    return d;
}

void cmd_gen(const RunConfig& config, std::ostream* log)
{
    config.validate();
    const fs::path dir = config.dataset_dir;
    DirectoryLock lock(dir);
    const auto d = generate_dataset(config, log);
    dataset::write_dataset(dir, d);
    write_provenance(dir, config);
}

void export_facets(const RunConfig& config, std::uint64_t scene_id, std::ostream& os)
{
    config.validate();
    const auto s = generate_sample(config, scene_id);
    surface::write_facets_csv(os, surface::reconstruct(s.record.cloud, config.reconstruct_options()).facets);
}

// ---------------------------------------------------------------------------
// train

std::string to_string(TrainTarget t)
{
    switch (t) {
        case TrainTarget::DetectorGnn: return "detector-gnn";
        case TrainTarget::DetectorPbgnn: return "detector-pbgnn";
        case TrainTarget::Refiner: return "refiner";
    }
    return "refiner";
}

TrainTarget train_target_from_string(const std::string& s)
{
    if (s == "detector-gnn") return TrainTarget::DetectorGnn;
    if (s == "detector-pbgnn") return TrainTarget::DetectorPbgnn;
    if (s == "refiner") return TrainTarget::Refiner;
    throw config::ConfigError("unknown training target '" + s + "'");
}

linalg::ComplexMatrix estimate_channel(const raytrace::PathList& paths, const dataset::Manifest& manifest)
{
    auto h = channel::assemble(paths, manifest.antennas.ue_array, manifest.antennas.bs_array, manifest.wavelength);
    for (std::size_t i = 0; i < h.rows(); ++i)
        for (std::size_t j = 0; j < h.cols(); ++j) h(i, j) *= manifest.normalization;
    return h;
}

namespace {

std::vector<detect::DetectorSample> detector_samples(const dataset::Dataset& d, std::span<const std::size_t> idx,
                                                     const detect::DetectorHyper& hyper)
{
    std::vector<detect::DetectorSample> out;
    out.reserve(idx.size());
    for (auto i : idx) {
        const auto& r = d.records[i];
        out.push_back({detect::prepare_graph(r.cloud, hyper, r.bs_position - r.ue_position), static_cast<double>(detect::detect_rt(r.rt_paths)),
                       r.true_los ? 1 : 0});
    }
    return out;
}

std::vector<refine::RefinerSample> refiner_samples(const dataset::Dataset& d, Split split)
{
    std::vector<refine::RefinerSample> out;
    for (auto i : d.indices(split)) {
        const auto& r = d.records[i];
        if (r.true_los) continue;
        out.push_back({GramMatrix::of_channel(estimate_channel(r.rt_paths, d.manifest)),
                       GramMatrix::of_channel(r.true_channel)});
    }
    return out;
}

nlohmann::json provenance_header(const RunConfig& config, TrainTarget target)
{
    return {{"target", to_string(target)}, {"tool_version", kVersion}, {"seed", config.seed}};
}

void train_detector_target(const RunConfig& config, const dataset::Dataset& d, TrainTarget target,
                           std::ostream* log)
{
    const auto variant = target == TrainTarget::DetectorGnn ? detect::Variant::Gnn : detect::Variant::Pbgnn;
    const auto hyper = config.detector_hyper();
    const auto train_idx = d.indices(Split::Train);
    auto val_idx = d.indices(Split::Val);
    if (train_idx.empty()) throw std::runtime_error(to_string(target) + ": dataset has no training samples");
    if (val_idx.empty()) {
        say(log, "warning: no validation samples; selecting on the training split");
        val_idx = train_idx;
    }
    say(log, to_string(target) + ": preparing " + std::to_string(train_idx.size() + val_idx.size()) + " graphs");
    const auto train = detector_samples(d, train_idx, hyper);
    const auto val = detector_samples(d, val_idx, hyper);

    detect::TrainOptions opt;
    opt.epochs = config.detector_epochs;
    opt.batch_size = config.detector_batch;
    opt.lr = config.detector_lr;
    opt.seed = config.seed;
    opt.progress = log;
    auto result = detect::train_detector(train, val, variant, hyper, opt);

    auto header = provenance_header(config, target);
    header["best_epoch"] = result.best_epoch;
    header["best_val_acc"] = result.best_val_acc;
    nn::save_checkpoint(checkpoint_path(config, target), result.model.to_checkpoint(header));
    std::ofstream os(fs::path(config.model_dir) / (to_string(target) + ".log.csv"), std::ios::trunc);
    detect::write_detector_log(os, result.log);
    say(log, to_string(target) + ": best validation accuracy " + fmt(result.best_val_acc, "%.4f") + " at epoch " +
                 std::to_string(result.best_epoch));
    if (result.diverged) throw DivergenceError(to_string(target) + ": " + result.diagnostic);
}

void train_refiner_target(const RunConfig& config, const dataset::Dataset& d, std::ostream* log)
{
    const auto train = refiner_samples(d, Split::Train);
    auto val = refiner_samples(d, Split::Val);
    if (train.empty())
        throw std::runtime_error("refiner: dataset has no NLoS training samples; the residual network is trained on "
                                 "NLoS links only");
    if (val.empty()) {
        say(log, "warning: no NLoS validation samples; selecting on the training split");
        val = train;
    }
    say(log, "refiner: " + std::to_string(train.size()) + " training / " + std::to_string(val.size()) +
                 " validation NLoS samples");
    refine::RefinerTrainOptions opt;
    opt.epochs = config.refiner_epochs;
    opt.batch_size = config.refiner_batch;
    opt.lr = config.refiner_lr;
    opt.seed = config.seed;
    opt.progress = log;
    auto result = refine::train_refiner(train, val, d.manifest.antennas.ue_array.size(), config.refiner_hyper(), opt);

    auto header = provenance_header(config, TrainTarget::Refiner);
    header["best_epoch"] = result.best_epoch;
    header["best_val_mae"] = result.best_val_mae;
    nn::save_checkpoint(checkpoint_path(config, TrainTarget::Refiner), result.model.to_checkpoint(header));
    std::ofstream os(fs::path(config.model_dir) / "refiner.log.csv", std::ios::trunc);
    refine::write_refiner_log(os, result.log);
    say(log, "refiner: best validation MAE " + fmt(result.best_val_mae, "%.6g") + " at epoch " +
                 std::to_string(result.best_epoch));
    if (result.diverged) throw DivergenceError("refiner: " + result.diagnostic);
}

}  // namespace

void cmd_train(const RunConfig& config, TrainTarget target, std::ostream* log)
{
    config.validate();
    const auto d = dataset::read_dataset(config.dataset_dir);
    const fs::path dir = config.model_dir;
    DirectoryLock lock(dir);
    write_provenance(dir, config);
    if (target == TrainTarget::Refiner) train_refiner_target(config, d, log);
    else train_detector_target(config, d, target, log);
}

// ---------------------------------------------------------------------------
// eval

raytrace::PathList geometric_los_paths(const dataset::Record& record, const dataset::Manifest& manifest)
{
    raytrace::TraceOptions opt;
    opt.wavelength = manifest.wavelength;
    opt.max_order = 0;
    opt.tx_frame = manifest.antennas.ue_frame;
    opt.rx_frame = manifest.antennas.bs_frame;
    return raytrace::trace({}, record.ue_position, record.bs_position, opt);
}

precode::Codebook dataset_codebook(const dataset::Manifest& manifest)
{
    auto cb = precode::build_codebook(manifest.antennas.ue_array, manifest.codebook.b_bits);
    if (!manifest.codebook.pruned_indices.empty()) cb.pruned_indices = manifest.codebook.pruned_indices;
    cb.counts = manifest.codebook.counts;
    cb.prune_fallback = manifest.codebook.fallback;
    return cb;
}

namespace {

template <typename Model>
std::optional<Model> try_load(const fs::path& path, std::ostream* log, std::vector<std::string>& skipped,
                              const std::string& what)
{
    if (!fs::exists(path)) {
        say(log, "warning: " + path.string() + " not found; skipping " + what);
        skipped.push_back(what);
        return std::nullopt;
    }
    return Model::from_checkpoint(nn::load_checkpoint(path));
}

void write_detection_row(std::ostream& os, const std::string& name, const detect::ClassificationMetrics& m)
{
    os << name << ',' << fmt(m.precision) << ',' << fmt(m.recall) << ',' << fmt(m.accuracy) << ',' << m.tp << ','
       << m.fp << ',' << m.tn << ',' << m.fn << ',' << (m.tp + m.fp + m.tn + m.fn) << '\n';
}

nlohmann::json metrics_json(const detect::ClassificationMetrics& m)
{
    return {{"precision", m.precision}, {"recall", m.recall}, {"accuracy", m.accuracy}, {"tp", m.tp},
            {"fp", m.fp},               {"tn", m.tn},         {"fn", m.fn}};
}

void write_matrix(std::ostream& os, const linalg::ComplexMatrix& t)
{
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) {
            io::write_le<double>(os, t(i, j).real());
            io::write_le<double>(os, t(i, j).imag());
        }
}

}  // namespace

void cmd_eval(const RunConfig& config, const EvalOptions& options, std::ostream* log)
{
    config.validate();
    const auto d = dataset::read_dataset(config.dataset_dir);
    const auto& m = d.manifest;
    const auto test = d.indices(Split::Test);
    if (test.empty()) throw std::runtime_error("eval: dataset has no test samples");
    const fs::path out_dir = config.results_dir;
    DirectoryLock lock(out_dir);
    write_provenance(out_dir, config);

    std::vector<std::string> skipped;
    auto gnn = try_load<detect::DetectorModel>(checkpoint_path(config, TrainTarget::DetectorGnn), log, skipped, "GNN");
    auto pbgnn =
        try_load<detect::DetectorModel>(checkpoint_path(config, TrainTarget::DetectorPbgnn), log, skipped, "PBGNN");
    std::optional<refine::RefinerModel> refiner;
    if (!options.oracle)
        refiner = try_load<refine::RefinerModel>(checkpoint_path(config, TrainTarget::Refiner), log, skipped, "Refined");

    // detection
    std::vector<int> labels, rt_pred;
    for (auto i : test) {
        labels.push_back(d.records[i].true_los ? 1 : 0);
        rt_pred.push_back(detect::detect_rt(d.records[i].rt_paths));
    }
    auto run_detector = [&](detect::DetectorModel& model) {
        return detect::predict(model, detector_samples(d, test, model.hyper()));
    };
    auto threshold = [](const std::vector<double>& p) {
        std::vector<int> out;
        for (double v : p) out.push_back(v >= 0.5 ? 1 : 0);
        return out;
    };
    nlohmann::json detection_json = nlohmann::json::object();
    {
        std::ofstream os(out_dir / "detection.csv", std::ios::trunc);
        os << "detector,precision,recall,accuracy,tp,fp,tn,fn,sample_count\n";
        const auto rt = detect::classification_metrics(rt_pred, labels);
        write_detection_row(os, "RT", rt);
        detection_json["RT"] = metrics_json(rt);
        if (gnn) {
            const auto mm = detect::classification_metrics(threshold(run_detector(*gnn)), labels);
            write_detection_row(os, "GNN", mm);
            detection_json["GNN"] = metrics_json(mm);
        }
        std::vector<double> p;
        if (pbgnn) {
            p = run_detector(*pbgnn);
            const auto mm = detect::classification_metrics(threshold(p), labels);
            write_detection_row(os, "PBGNN", mm);
            detection_json["PBGNN"] = metrics_json(mm);
        }
        if (!pbgnn && refiner) {
            say(log, "warning: Refined needs the PBGNN detector; skipping Refined");
            skipped.push_back("Refined");
            refiner.reset();
        }

        // precoding strategies
        std::vector<precode::EvalSample> samples;
        precode::Strategy los{"LoS", false, {}, 0}, rt_s{"RT", false, {}, 0}, refined{"Refined", false, {}, 0},
            perfect{"Perfect CSI", false, {}, 0};
        const refine::LinkGeometry link{m.antennas.ue_array, m.antennas.bs_array, m.wavelength};
        std::size_t los_branch = 0, los_fallback = 0, nlos_branch = 0;
        std::ofstream cache;
        if (options.cache_refined && (refiner || options.oracle))
            cache.open(out_dir / "refined.bin", std::ios::binary | std::ios::trunc);

        for (std::size_t k = 0; k < test.size(); ++k) {
            const auto& r = d.records[test[k]];
            const auto truth = GramMatrix::of_channel(r.true_channel);
            samples.push_back({r.scene_id, truth, r.true_los});
            perfect.estimates.push_back(truth);
            if (options.oracle) {
                los.estimates.push_back(truth);
                rt_s.estimates.push_back(truth);
                refined.estimates.push_back(truth);
                if (cache.is_open()) {
                    io::write_le<std::uint64_t>(cache, r.scene_id);
                    write_matrix(cache, truth.matrix());
                }
                continue;
            }
            const auto t_rt = GramMatrix::of_channel(estimate_channel(r.rt_paths, m));
            rt_s.estimates.push_back(t_rt);
            los.estimates.push_back(GramMatrix::of_channel(estimate_channel(geometric_los_paths(r, m), m)));
            if (refiner) {
                const auto ref = refine::refine(p[k], r.rt_paths, t_rt, link, *refiner);
                (ref.los_branch ? los_branch : nlos_branch) += 1;
                los_fallback += ref.fallback ? 1 : 0;
                refined.estimates.push_back(ref.t);
                if (cache.is_open()) {
                    io::write_le<std::uint64_t>(cache, r.scene_id);
                    write_matrix(cache, ref.t.matrix());
                }
            }
        }

        const auto codebook = dataset_codebook(m);
        std::vector<precode::Strategy> strategies;
        strategies.push_back({"No CSI", true, {}, precode::most_frequent_codeword(codebook)});
        strategies.push_back(std::move(los));
        strategies.push_back(std::move(rt_s));
        if (options.oracle || refiner) strategies.push_back(std::move(refined));
        strategies.push_back(std::move(perfect));

        precode::EvaluateOptions eo;
        eo.snr_db = config.snr_db;
        eo.use_pruned = config.use_pruned;
        const auto table = precode::evaluate(samples, strategies, codebook, eo);

        precode::MetricTable digital, analog;
        for (const auto& row : table.rows)
            (row.metric == "rate_ratio" || row.metric == "analog_rate" ? analog : digital).rows.push_back(row);
        {
            std::ofstream ds(out_dir / "digital_rate.csv", std::ios::trunc);
            digital.write_csv(ds);
            std::ofstream as(out_dir / "analog_rate_ratio.csv", std::ios::trunc);
            analog.write_csv(as);
        }

        nlohmann::json summary;
        summary["tool_version"] = kVersion;
        summary["oracle"] = options.oracle;
        summary["test_samples"] = test.size();
        summary["detection"] = detection_json;
        summary["skipped"] = skipped;
        summary["refinement"] = {{"los_branch", los_branch}, {"nlos_branch", nlos_branch}, {"los_fallback", los_fallback}};
        nlohmann::json cap = nlohmann::json::object(), ana = nlohmann::json::object();
        for (const auto& row : table.rows) {
            if (!row.snr_db) continue;
            const std::string split = precode::to_string(row.split);
            const std::string snr = fmt(*row.snr_db, "%g");
            if (row.metric == "capacity_ratio") cap[row.strategy][split][snr] = row.value;
            if (row.metric == "rate_ratio") ana[row.strategy][split][snr] = row.value;
        }
        summary["capacity_ratio"] = cap;
        summary["analog_rate_ratio"] = ana;
        write_text(out_dir / "summary.json", summary.dump(2) + "\n");
    }
    say(log, "eval: " + std::to_string(test.size()) + " test samples written to " + out_dir.string());
}

// ---------------------------------------------------------------------------
// report

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path)
{
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path.string() + "; run eval first");
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
        std::vector<std::string> cells;
        std::istringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) cells.push_back(cell);
        if (line.ends_with(',')) cells.emplace_back();
        if (cells.size() == 6) rows.push_back(std::move(cells));
    }
    return rows;
}

}  // namespace

void cmd_report(const RunConfig& config, std::ostream& out)
{
    const fs::path dir = config.results_dir;
    struct Entry
    {
        std::string rate, capacity_ratio, rate_ratio;
    };
    std::vector<std::array<std::string, 3>> order;  // strategy, split, snr
    std::map<std::array<std::string, 3>, Entry> table;
    auto touch = [&](const std::array<std::string, 3>& key) -> Entry& {
        if (!table.contains(key)) order.push_back(key);
        return table[key];
    };
    for (const auto& file : {"digital_rate.csv", "analog_rate_ratio.csv"})
        for (const auto& row : read_csv(dir / file)) {
            if (row[1].empty()) continue;
            auto& e = touch({row[0], row[2], row[1]});
            if (row[3] == "rate") e.rate = row[4];
            else if (row[3] == "capacity_ratio") e.capacity_ratio = row[4];
            else if (row[3] == "rate_ratio") e.rate_ratio = row[4];
        }

    std::ostringstream csv;
    csv << "strategy,los_split,snr_db,rate,capacity_ratio,analog_rate_ratio\n";
    out << std::left << std::setw(13) << "strategy" << std::setw(6) << "split" << std::right << std::setw(8) << "snr_db"
        << std::setw(12) << "rate" << std::setw(12) << "cap_ratio" << std::setw(12) << "analog" << '\n';
    auto short_num = [](const std::string& s) { return s.empty() ? std::string("-") : fmt(std::stod(s), "%.4f"); };
    for (const auto& key : order) {
        const auto& e = table[key];
        csv << key[0] << ',' << key[1] << ',' << key[2] << ',' << e.rate << ',' << e.capacity_ratio << ','
            << e.rate_ratio << '\n';
        out << std::left << std::setw(13) << key[0] << std::setw(6) << key[1] << std::right << std::setw(8) << key[2]
            << std::setw(12) << short_num(e.rate) << std::setw(12) << short_num(e.capacity_ratio) << std::setw(12)
            << short_num(e.rate_ratio) << '\n';
    }
    write_text(dir / "report.csv", csv.str());
}

}  // namespace raylink::pipeline
