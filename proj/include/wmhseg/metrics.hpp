#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "wmhseg/morphology.hpp"
#include "wmhseg/volume.hpp"

namespace wmhseg {

/// 2|P n G| / (|P| + |G|); 1 when both masks are empty.
double dice(const BinaryMask3D& pred, const BinaryMask3D& gt);

/// Nearest-rank percentile of an ascending list: element at 1-based index
/// ceil(q/100 * n). q is an integer percent in [1, 100]; values must be sorted.
double nearest_rank_percentile(const std::vector<double>& sorted, unsigned q);

/// Distance in mm from each border voxel of `from` to the nearest border voxel
/// of `to`, in border_voxels order. `to` must have at least one voxel.
std::vector<double> directed_border_distances(const BinaryMask3D& from, const BinaryMask3D& to,
                                              const std::array<double, 3>& spacing);

/// Symmetric 95th-percentile border distance in mm. Empty when either mask is empty.
std::optional<double> h95(const BinaryMask3D& pred, const BinaryMask3D& gt,
                          const std::array<double, 3>& spacing);

/// 100 * ||P| - |G|| / |G|. Empty when gt is empty.
std::optional<double> avd_percent(const BinaryMask3D& pred, const BinaryMask3D& gt);

/// Component bookkeeping behind the lesion-wise scores. A component is
/// "hit" when it shares at least one voxel with the other mask.
struct LesionCounts {
    std::size_t gt_components = 0;
    std::size_t gt_detected = 0;
    std::size_t pred_components = 0;
    std::size_t pred_true = 0;

    std::size_t false_positive_components() const { return pred_components - pred_true; }
};
LesionCounts lesion_counts(const BinaryMask3D& pred, const BinaryMask3D& gt,
                           Connectivity c = Connectivity::C26);

/// Detected gt components / gt components; 1 when gt is empty.
double lesion_recall(const BinaryMask3D& pred, const BinaryMask3D& gt,
                     Connectivity c = Connectivity::C26);
/// 2pr / (p + r); precision is 1 when nothing is predicted, F1 is 0 when p + r = 0.
double lesion_f1(const BinaryMask3D& pred, const BinaryMask3D& gt,
                 Connectivity c = Connectivity::C26);

struct CaseMetrics {
    std::string case_id;
    double dice = 0.0;
    std::optional<double> h95_mm;
    std::optional<double> avd_percent;
    double lesion_recall = 0.0;
    double lesion_f1 = 0.0;
};

CaseMetrics evaluate_case(const BinaryMask3D& pred, const BinaryMask3D& gt,
                          const std::array<double, 3>& spacing, Connectivity c = Connectivity::C26,
                          std::string case_id = {});

struct TeamSummary {
    std::string team;
    double dice = 0.0;
    double h95_mm = 0.0;
    double avd_percent = 0.0;
    double lesion_recall = 0.0;
    double lesion_f1 = 0.0;
    /// Cases contributing to each average; undefined values are left out.
    std::size_t cases = 0;
    std::size_t h95_cases = 0;
    std::size_t avd_cases = 0;
};

/// Averages per-case metrics in case order. Throws on an empty list.
TeamSummary summarize_cases(const std::string& team, const std::vector<CaseMetrics>& cases);

struct TeamRank {
    std::string team;
    double dice = 0.0;
    double h95 = 0.0;
    double avd = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double overall = 0.0;
};

struct RankTable {
    std::vector<TeamRank> teams;

    const TeamRank& find(const std::string& team) const;
    std::string to_csv() const;
    std::string to_json() const;
};

/// Min-max rank per metric in [0, 1], lower is better: 1 - (m - min)/(max - min)
/// for dice, recall and F1; (m - min)/(max - min) for H95 and AVD. A metric
/// with max == min ranks every team 0. Throws with fewer than 2 teams.
RankTable rank_teams(const std::vector<TeamSummary>& teams);

/// CSV with header
/// case_id,dice,h95_mm,avd_percent,lesion_recall,lesion_f1,h95_defined,avd_defined
/// Undefined values are written as empty fields.
std::string case_metrics_csv(const std::vector<CaseMetrics>& cases);

/// CSV with header team,dice,h95_mm,avd_percent,lesion_recall,lesion_f1.
std::string team_summaries_csv(const std::vector<TeamSummary>& teams);
/// Parses the format above; extra columns are ignored, column order is free.
std::vector<TeamSummary> parse_team_summaries_csv(const std::string& text);

}  // namespace wmhseg
