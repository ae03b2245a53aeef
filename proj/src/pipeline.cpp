#include "lesionseg/pipeline.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "lesionseg/nifti.hpp"

namespace fs = std::filesystem;

namespace lesionseg {

void save_cohort(const std::string& dir, const std::vector<Subject>& cohort,
                 std::uint64_t seed) {
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["seed"] = seed;
    manifest["n_subjects"] = cohort.size();
    auto& subjects = manifest["subjects"] = nlohmann::json::array();

    // temp name keeps the .nii.gz suffix so the writer picks the right format
    auto write_atomic = [&](const std::string& fname, auto&& writer) {
        const std::string tmp = (fs::path(dir) / ("tmp." + fname)).string();
        writer(tmp);
        fs::rename(tmp, (fs::path(dir) / fname).string());
    };

    for (const auto& s : cohort) {
        nlohmann::json js;
        js["id"] = s.id;
        js["availability"] = s.image.availability_mask();
        nlohmann::json contrasts;
        for (Contrast c : kAllContrasts) {
            if (!s.image.available(c))
                continue;
            const std::string fname = s.id + "_" + contrast_name(c) + ".nii.gz";
            write_atomic(fname,
                         [&](const std::string& p) { nifti::write_volume(s.image.volume(c), p); });
            contrasts[contrast_name(c)] = fname;
        }
        js["contrasts"] = contrasts;
        const std::string r1 = s.id + "_rater1.nii.gz";
        const std::string r2 = s.id + "_rater2.nii.gz";
        write_atomic(r1, [&](const std::string& p) { nifti::write_mask(s.rater1, p); });
        write_atomic(r2, [&](const std::string& p) { nifti::write_mask(s.rater2, p); });
        js["rater1"] = r1;
        js["rater2"] = r2;
        subjects.push_back(js);
    }
    atomic_write_text((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

std::vector<Subject> load_cohort(const std::string& manifest_path) {
    std::ifstream is(manifest_path);
    if (!is)
        throw data_error("cannot open manifest: " + manifest_path);
    nlohmann::json manifest = nlohmann::json::parse(is, nullptr, false);
    if (manifest.is_discarded())
        throw data_error("bad manifest json: " + manifest_path);

    const fs::path dir = fs::path(manifest_path).parent_path();
    std::vector<Subject> cohort;
    for (const auto& js : manifest.at("subjects")) {
        Subject s;
        s.id = js.at("id").get<std::string>();
        for (auto& [name, fname] : js.at("contrasts").items())
            s.image.set(parse_contrast(name),
                        nifti::read_volume((dir / fname.get<std::string>()).string()));
        if (s.image.empty())
            throw data_error("manifest subject has no contrasts: " + s.id);
        s.rater1 = nifti::read_mask((dir / js.at("rater1").get<std::string>()).string());
        s.rater2 = nifti::read_mask((dir / js.at("rater2").get<std::string>()).string());
        if (!(s.rater1.dims() == s.image.dims()) || !(s.rater2.dims() == s.image.dims()))
            throw data_error("manifest subject mask dims mismatch: " + s.id);
        cohort.push_back(std::move(s));
    }
    if (cohort.empty())
        throw data_error("manifest has no subjects: " + manifest_path);
    return cohort;
}

std::vector<OrientTransform> transform_set(const std::string& name) {
    if (name == "all24")
        return transform_catalog();
    if (name == "identity")
        return {OrientTransform{Plane::Axial, 0}};
    if (name == "3plane")
        return {OrientTransform{Plane::Axial, 0}, OrientTransform{Plane::Sagittal, 0},
                OrientTransform{Plane::Coronal, 0}};
    throw config_error("unknown transform set: " + name + " (all24|identity|3plane)");
}

SlicePredictor make_net_predictor(UNet& net, StatsMode stats) {
    return [&net, stats](const MultiContrastVolume& mcv, Plane plane) {
        return net.predict_volume(mcv, plane, stats);
    };
}

namespace {

SubjectPrediction predict_subject(UNet& net, const Subject& subject,
                                  const InferOptions& opts,
                                  const std::vector<OrientTransform>& transforms,
                                  std::atomic<long>* passes) {
    MultiContrastVolume image = subject.image;
    for (Contrast c : opts.drop)
        image.drop(c);
    if (image.empty())
        throw data_error("inference input has no contrast left: " + subject.id);

    SlicePredictor inner = make_net_predictor(net, opts.stats);
    SlicePredictor predictor = [&](const MultiContrastVolume& mcv, Plane plane) {
        if (passes)
            passes->fetch_add(1, std::memory_order_relaxed);
        return inner(mcv, plane);
    };

    SubjectPrediction out;
    out.id = subject.id;
    out.confidence = self_ensemble_predict(image, predictor, transforms);
    FusionParams params{opts.tau1, opts.tau2, int(transforms.size())};
    out.mask = fuse(out.confidence, params);
    return out;
}

} // namespace

std::vector<SubjectPrediction> run_inference(const UNet& net,
                                             const std::vector<Subject>& cohort,
                                             const InferOptions& opts) {
    const auto transforms = transform_set(opts.transforms);
    FusionParams params{opts.tau1, opts.tau2, int(transforms.size())};
    params.validate();

    std::vector<SubjectPrediction> results(cohort.size());
    const int jobs = std::max(1, opts.jobs);
    if (jobs == 1) {
        UNet local = net;
        for (std::size_t i = 0; i < cohort.size(); ++i)
            results[i] = predict_subject(local, cohort[i], opts, transforms, nullptr);
        return results;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    auto worker = [&] {
        UNet local = net; // activation caches are per-thread
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cohort.size())
                return;
            try {
                results[i] = predict_subject(local, cohort[i], opts, transforms, nullptr);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!error)
                    error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < jobs; ++t)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();
    if (error)
        std::rethrow_exception(error);
    return results;
}

std::vector<SweepRow> run_sweep(const UNet& net, const std::vector<Subject>& cohort,
                                const InferOptions& opts, const std::vector<int>& tau1_grid,
                                const std::vector<int>& tau2_grid, long* inference_passes) {
    const auto transforms = transform_set(opts.transforms);
    std::atomic<long> passes{0};

    UNet local = net;
    std::vector<ConfidenceMap> cmaps;
    std::vector<BinaryMask3D> rater1, rater2;
    for (const auto& subject : cohort) {
        MultiContrastVolume image = subject.image;
        for (Contrast c : opts.drop)
            image.drop(c);
        SlicePredictor inner = make_net_predictor(local, opts.stats);
        SlicePredictor predictor = [&](const MultiContrastVolume& mcv, Plane plane) {
            passes.fetch_add(1, std::memory_order_relaxed);
            return inner(mcv, plane);
        };
        cmaps.push_back(self_ensemble_predict(image, predictor, transforms));
        rater1.push_back(subject.rater1);
        rater2.push_back(subject.rater2);
    }
    if (inference_passes)
        *inference_passes = passes.load();
    return tau_sweep(cmaps, rater1, rater2, tau1_grid, tau2_grid);
}

void atomic_write_text(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os)
            throw data_error("cannot open file for writing: " + tmp);
        os.write(content.data(), std::streamsize(content.size()));
        if (!os)
            throw data_error("write failed: " + tmp);
    }
    fs::rename(tmp, path);
}

} // namespace lesionseg
