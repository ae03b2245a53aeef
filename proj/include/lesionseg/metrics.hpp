#ifndef LESIONSEG_METRICS_HPP
#define LESIONSEG_METRICS_HPP

#include <iosfwd>
#include <vector>

#include "lesionseg/volume.hpp"

namespace lesionseg {

struct VoxelMetrics {
    double dsc = 0, ppv = 0, tpr = 0;
};

struct LesionMetrics {
    double ltpr = 0, lfpr = 0;
};

// dsc = 2TP/(2TP+FP+FN), ppv = TP/(TP+FP), tpr = TP/(TP+FN).
// Empty-denominator conventions (all in one place):
//   both masks empty -> dsc 1; empty pred -> ppv 1; empty gt -> tpr 1.
VoxelMetrics voxel_metrics(const BinaryMask3D& pred, const BinaryMask3D& gt);

// 26-connected components on both masks; a gt lesion counts as detected when
// it shares >= 1 voxel with pred. Conventions: empty gt -> ltpr 1;
// empty pred -> lfpr 0.
LesionMetrics lesion_metrics(const BinaryMask3D& pred, const BinaryMask3D& gt);

// Pearson correlation of total lesion volumes across a cohort.
// Throws config_error for n < 2 or zero variance on either side.
double volume_correlation(const std::vector<double>& pred_volumes,
                          const std::vector<double>& gt_volumes);

// dsc/8 + ppv/8 + ltpr/4 + (1-lfpr)/4 + vc/4
double composite_score(double dsc, double ppv, double ltpr, double lfpr, double vc);
// Same with the vc term excluded (cohorts where correlation is undefined).
double composite_score_partial(double dsc, double ppv, double ltpr, double lfpr);

struct CohortMetrics {
    double dsc = 0, ppv = 0, tpr = 0, lfpr = 0, ltpr = 0, vc = 0, score = 0;
    bool vc_defined = true;
};

struct MetricsReport {
    CohortMetrics rater1, rater2, average;
    int n_subjects = 0;
    bool partial = false; // vc undefined for at least one rater; score omits it
};

// Per rater: voxel/lesion metrics averaged over subjects, VC once over the
// cohort; the two rater reports are then averaged.
MetricsReport evaluate_cohort(const std::vector<BinaryMask3D>& preds,
                              const std::vector<BinaryMask3D>& rater1,
                              const std::vector<BinaryMask3D>& rater2);

void write_report_json(const MetricsReport& rep, std::ostream& os);
void write_report_csv(const MetricsReport& rep, std::ostream& os);

} // namespace lesionseg

#endif
