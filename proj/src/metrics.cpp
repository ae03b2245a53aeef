#include "lesionseg/metrics.hpp"

#include <cmath>
#include <ostream>
#include <set>

#include <nlohmann/json.hpp>

#include "lesionseg/components.hpp"

namespace lesionseg {

VoxelMetrics voxel_metrics(const BinaryMask3D& pred, const BinaryMask3D& gt) {
    if (!(pred.dims() == gt.dims()))
        throw config_error("voxel_metrics: dims mismatch");
    std::size_t tp = 0, fp = 0, fn = 0;
    const auto& p = pred.data();
    const auto& g = gt.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        tp += p[i] & g[i];
        fp += p[i] & (1 - g[i]);
        fn += (1 - p[i]) & g[i];
    }
    VoxelMetrics m;
    m.dsc = (2 * tp + fp + fn) == 0 ? 1.0 : 2.0 * tp / double(2 * tp + fp + fn);
    m.ppv = (tp + fp) == 0 ? 1.0 : double(tp) / double(tp + fp);
    m.tpr = (tp + fn) == 0 ? 1.0 : double(tp) / double(tp + fn);
    return m;
}

LesionMetrics lesion_metrics(const BinaryMask3D& pred, const BinaryMask3D& gt) {
    if (!(pred.dims() == gt.dims()))
        throw config_error("lesion_metrics: dims mismatch");

    std::vector<std::int32_t> pl, gl;
    int np = label_components_26(pred, pl);
    int ng = label_components_26(gt, gl);

    std::vector<char> gt_hit(ng + 1, 0);
    std::vector<char> pred_hit(np + 1, 0);
    for (std::size_t i = 0; i < pl.size(); ++i) {
        if (pl[i] && gl[i]) {
            gt_hit[gl[i]] = 1;
            pred_hit[pl[i]] = 1;
        }
    }

    int gt_detected = 0;
    for (int k = 1; k <= ng; ++k)
        gt_detected += gt_hit[k];
    int pred_false = 0;
    for (int k = 1; k <= np; ++k)
        pred_false += 1 - pred_hit[k];

    LesionMetrics m;
    m.ltpr = ng == 0 ? 1.0 : double(gt_detected) / ng;
    m.lfpr = np == 0 ? 0.0 : double(pred_false) / np;
    return m;
}

double volume_correlation(const std::vector<double>& pred_volumes,
                          const std::vector<double>& gt_volumes) {
    if (pred_volumes.size() != gt_volumes.size())
        throw config_error("volume_correlation: length mismatch");
    const std::size_t n = pred_volumes.size();
    if (n < 2)
        throw config_error("volume_correlation: need at least 2 subjects");

    double mp = 0, mg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        mp += pred_volumes[i];
        mg += gt_volumes[i];
    }
    mp /= double(n);
    mg /= double(n);

    double spg = 0, spp = 0, sgg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double a = pred_volumes[i] - mp;
        double b = gt_volumes[i] - mg;
        spg += a * b;
        spp += a * a;
        sgg += b * b;
    }
    if (spp == 0.0 || sgg == 0.0)
        throw config_error("volume_correlation: zero variance");
    return spg / std::sqrt(spp * sgg);
}

double composite_score(double dsc, double ppv, double ltpr, double lfpr, double vc) {
    return dsc / 8.0 + ppv / 8.0 + ltpr / 4.0 + (1.0 - lfpr) / 4.0 + vc / 4.0;
}

double composite_score_partial(double dsc, double ppv, double ltpr, double lfpr) {
    return dsc / 8.0 + ppv / 8.0 + ltpr / 4.0 + (1.0 - lfpr) / 4.0;
}

namespace {

CohortMetrics rater_cohort(const std::vector<BinaryMask3D>& preds,
                           const std::vector<BinaryMask3D>& gts) {
    const std::size_t n = preds.size();
    CohortMetrics m;
    std::vector<double> pv(n), gv(n);
    for (std::size_t i = 0; i < n; ++i) {
        VoxelMetrics vm = voxel_metrics(preds[i], gts[i]);
        LesionMetrics lm = lesion_metrics(preds[i], gts[i]);
        m.dsc += vm.dsc;
        m.ppv += vm.ppv;
        m.tpr += vm.tpr;
        m.ltpr += lm.ltpr;
        m.lfpr += lm.lfpr;
        pv[i] = preds[i].volume_mm3();
        gv[i] = gts[i].volume_mm3();
    }
    m.dsc /= double(n);
    m.ppv /= double(n);
    m.tpr /= double(n);
    m.ltpr /= double(n);
    m.lfpr /= double(n);
    try {
        m.vc = volume_correlation(pv, gv);
        m.vc_defined = true;
        m.score = composite_score(m.dsc, m.ppv, m.ltpr, m.lfpr, m.vc);
    } catch (const config_error&) {
        m.vc = 0.0;
        m.vc_defined = false;
        m.score = composite_score_partial(m.dsc, m.ppv, m.ltpr, m.lfpr);
    }
    return m;
}

CohortMetrics average_raters(const CohortMetrics& a, const CohortMetrics& b) {
    CohortMetrics m;
    m.dsc = (a.dsc + b.dsc) / 2;
    m.ppv = (a.ppv + b.ppv) / 2;
    m.tpr = (a.tpr + b.tpr) / 2;
    m.lfpr = (a.lfpr + b.lfpr) / 2;
    m.ltpr = (a.ltpr + b.ltpr) / 2;
    m.vc = (a.vc + b.vc) / 2;
    m.vc_defined = a.vc_defined && b.vc_defined;
    m.score = (a.score + b.score) / 2;
    return m;
}

} // namespace

MetricsReport evaluate_cohort(const std::vector<BinaryMask3D>& preds,
                              const std::vector<BinaryMask3D>& rater1,
                              const std::vector<BinaryMask3D>& rater2) {
    if (preds.empty())
        throw config_error("evaluate_cohort: empty cohort");
    if (preds.size() != rater1.size() || preds.size() != rater2.size())
        throw config_error("evaluate_cohort: cohort size mismatch");

    MetricsReport rep;
    rep.n_subjects = int(preds.size());
    rep.rater1 = rater_cohort(preds, rater1);
    rep.rater2 = rater_cohort(preds, rater2);
    rep.average = average_raters(rep.rater1, rep.rater2);
    rep.partial = !rep.average.vc_defined;
    return rep;
}

namespace {

nlohmann::json cohort_json(const CohortMetrics& m) {
    nlohmann::json j;
    j["dsc"] = m.dsc;
    j["ppv"] = m.ppv;
    j["tpr"] = m.tpr;
    j["lfpr"] = m.lfpr;
    j["ltpr"] = m.ltpr;
    if (m.vc_defined)
        j["vc"] = m.vc;
    else
        j["vc"] = nullptr;
    j["score"] = m.score;
    return j;
}

void cohort_csv_row(const CohortMetrics& m, const char* name, int n, std::ostream& os) {
    os << name << ',' << m.dsc << ',' << m.ppv << ',' << m.tpr << ',' << m.lfpr << ','
       << m.ltpr << ',';
    if (m.vc_defined)
        os << m.vc;
    os << ',' << m.score << ',' << n << '\n';
}

} // namespace

void write_report_json(const MetricsReport& rep, std::ostream& os) {
    nlohmann::json j;
    j["rater1"] = cohort_json(rep.rater1);
    j["rater2"] = cohort_json(rep.rater2);
    j["average"] = cohort_json(rep.average);
    j["n_subjects"] = rep.n_subjects;
    j["partial"] = rep.partial;
    os << j.dump(2) << '\n';
}

void write_report_csv(const MetricsReport& rep, std::ostream& os) {
    os << "rater,dsc,ppv,tpr,lfpr,ltpr,vc,score,n_subjects\n";
    os.precision(12);
    cohort_csv_row(rep.rater1, "rater1", rep.n_subjects, os);
    cohort_csv_row(rep.rater2, "rater2", rep.n_subjects, os);
    cohort_csv_row(rep.average, "average", rep.n_subjects, os);
}

} // namespace lesionseg
