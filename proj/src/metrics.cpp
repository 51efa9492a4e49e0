#include "wmhseg/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace wmhseg {

namespace {

void require_same_grid(const BinaryMask3D& a, const BinaryMask3D& b, const char* what) {
    if (!a.grid().same_dims(b.grid())) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas over one line (Felzenszwalb and Huttenlocher),
// with sample q sitting at position q * step.
void distance_1d(const std::vector<double>& f, double step, std::vector<double>& d,
                 std::vector<std::size_t>& v, std::vector<double>& z) {
    const std::size_t n = f.size();
    std::ptrdiff_t k = -1;
    for (std::size_t q = 0; q < n; ++q) {
        if (f[q] == kInf) continue;
        const double xq = static_cast<double>(q) * step;
        while (true) {
            if (k < 0) {
                k = 0;
                v[0] = q;
                z[0] = -kInf;
                z[1] = kInf;
                break;
            }
            const double xv = static_cast<double>(v[static_cast<std::size_t>(k)]) * step;
            const double s = ((f[q] + xq * xq) - (f[v[static_cast<std::size_t>(k)]] + xv * xv)) / (2.0 * (xq - xv));
            if (s <= z[static_cast<std::size_t>(k)]) {
                --k;
                continue;
            }
            ++k;
            v[static_cast<std::size_t>(k)] = q;
            z[static_cast<std::size_t>(k)] = s;
            z[static_cast<std::size_t>(k) + 1] = kInf;
            break;
        }
    }
    if (k < 0) {
        std::fill(d.begin(), d.end(), kInf);
        return;
    }
    std::size_t j = 0;
    for (std::size_t q = 0; q < n; ++q) {
        const double xq = static_cast<double>(q) * step;
        while (z[j + 1] < xq) ++j;
        const double diff = xq - static_cast<double>(v[j]) * step;
        d[q] = diff * diff + f[v[j]];
    }
}

// Squared mm distance from every voxel to the nearest foreground voxel of m.
std::vector<double> squared_distance_map(const BinaryMask3D& m, const std::array<double, 3>& spacing) {
    const Grid& g = m.grid();
    const std::array<std::size_t, 3> n = g.dims;
    std::vector<double> dist(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) dist[i] = m[i] ? 0.0 : kInf;

    const std::array<std::size_t, 3> stride{1, n[0], n[0] * n[1]};
    for (std::size_t axis = 0; axis < 3; ++axis) {
        const std::size_t len = n[axis];
        std::vector<double> f(len), d(len), z(len + 1);
        std::vector<std::size_t> v(len);
        const std::size_t a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
        for (std::size_t i2 = 0; i2 < n[a2]; ++i2) {
            for (std::size_t i1 = 0; i1 < n[a1]; ++i1) {
                const std::size_t base = i1 * stride[a1] + i2 * stride[a2];
                for (std::size_t q = 0; q < len; ++q) f[q] = dist[base + q * stride[axis]];
                distance_1d(f, spacing[axis], d, v, z);
                for (std::size_t q = 0; q < len; ++q) dist[base + q * stride[axis]] = d[q];
            }
        }
    }
    return dist;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

double dice(const BinaryMask3D& pred, const BinaryMask3D& gt) {
    require_same_grid(pred, gt, "dice");
    std::size_t inter = 0, p = 0, g = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        inter += static_cast<std::size_t>(pred[i] & gt[i]);
        p += pred[i];
        g += gt[i];
    }
    if (p + g == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(p + g);
}

double nearest_rank_percentile(const std::vector<double>& sorted, unsigned q) {
    if (sorted.empty()) throw std::invalid_argument("nearest_rank_percentile: empty list");
    if (q < 1 || q > 100) throw std::invalid_argument("nearest_rank_percentile: q must lie in [1, 100]");
    const std::size_t n = sorted.size();
    const std::size_t rank = (q * n + 99) / 100;  // ceil(q * n / 100), 1-based
    return sorted[std::max<std::size_t>(rank, 1) - 1];
}

std::vector<double> directed_border_distances(const BinaryMask3D& from, const BinaryMask3D& to,
                                              const std::array<double, 3>& spacing) {
    require_same_grid(from, to, "directed_border_distances");
    const BinaryMask3D to_border = border_mask(to);
    if (to_border.count() == 0) throw std::invalid_argument("directed_border_distances: empty target");
    const std::vector<double> d2 = squared_distance_map(to_border, spacing);
    std::vector<double> out;
    for (const Voxel& v : border_voxels(from)) out.push_back(std::sqrt(d2[from.grid().index(v[0], v[1], v[2])]));
    return out;
}

std::optional<double> h95(const BinaryMask3D& pred, const BinaryMask3D& gt,
                          const std::array<double, 3>& spacing) {
    require_same_grid(pred, gt, "h95");
    if (pred.count() == 0 || gt.count() == 0) return std::nullopt;
    auto ab = directed_border_distances(pred, gt, spacing);
    auto ba = directed_border_distances(gt, pred, spacing);
    std::sort(ab.begin(), ab.end());
    std::sort(ba.begin(), ba.end());
    return std::max(nearest_rank_percentile(ab, 95), nearest_rank_percentile(ba, 95));
}

std::optional<double> avd_percent(const BinaryMask3D& pred, const BinaryMask3D& gt) {
    require_same_grid(pred, gt, "avd_percent");
    const std::size_t g = gt.count();
    if (g == 0) return std::nullopt;
    const std::size_t p = pred.count();
    const std::size_t diff = p > g ? p - g : g - p;
    return 100.0 * static_cast<double>(diff) / static_cast<double>(g);
}

LesionCounts lesion_counts(const BinaryMask3D& pred, const BinaryMask3D& gt, Connectivity c) {
    require_same_grid(pred, gt, "lesion_counts");
    const LabelVolume gl = connected_components(gt, c);
    const LabelVolume pl = connected_components(pred, c);
    std::vector<std::uint8_t> gt_hit(gl.count + 1, 0), pred_hit(pl.count + 1, 0);
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (gl.labels[i] != 0 && pred[i]) gt_hit[gl.labels[i]] = 1;
        if (pl.labels[i] != 0 && gt[i]) pred_hit[pl.labels[i]] = 1;
    }
    LesionCounts out;
    out.gt_components = gl.count;
    out.pred_components = pl.count;
    out.gt_detected = static_cast<std::size_t>(std::count(gt_hit.begin(), gt_hit.end(), std::uint8_t{1}));
    out.pred_true = static_cast<std::size_t>(std::count(pred_hit.begin(), pred_hit.end(), std::uint8_t{1}));
    return out;
}

namespace {

double recall_of(const LesionCounts& k) {
    return k.gt_components == 0 ? 1.0
                                : static_cast<double>(k.gt_detected) / static_cast<double>(k.gt_components);
}

double f1_of(const LesionCounts& k) {
    const double r = recall_of(k);
    const double p = k.pred_components == 0
                         ? 1.0
                         : static_cast<double>(k.pred_true) / static_cast<double>(k.pred_components);
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

}  // namespace

double lesion_recall(const BinaryMask3D& pred, const BinaryMask3D& gt, Connectivity c) {
    return recall_of(lesion_counts(pred, gt, c));
}

double lesion_f1(const BinaryMask3D& pred, const BinaryMask3D& gt, Connectivity c) {
    return f1_of(lesion_counts(pred, gt, c));
}

CaseMetrics evaluate_case(const BinaryMask3D& pred, const BinaryMask3D& gt,
                          const std::array<double, 3>& spacing, Connectivity c, std::string case_id) {
    require_same_grid(pred, gt, "evaluate_case");
    CaseMetrics m;
    m.case_id = std::move(case_id);
    m.dice = dice(pred, gt);
    m.h95_mm = h95(pred, gt, spacing);
    m.avd_percent = avd_percent(pred, gt);
    const LesionCounts k = lesion_counts(pred, gt, c);
    m.lesion_recall = recall_of(k);
    m.lesion_f1 = f1_of(k);
    return m;
}

TeamSummary summarize_cases(const std::string& team, const std::vector<CaseMetrics>& cases) {
    if (cases.empty()) throw std::invalid_argument("summarize_cases: no cases");
    TeamSummary s;
    s.team = team;
    s.cases = cases.size();
    double h = 0.0, a = 0.0;
    for (const auto& c : cases) {
        s.dice += c.dice;
        s.lesion_recall += c.lesion_recall;
        s.lesion_f1 += c.lesion_f1;
        if (c.h95_mm) {
            h += *c.h95_mm;
            ++s.h95_cases;
        }
        if (c.avd_percent) {
            a += *c.avd_percent;
            ++s.avd_cases;
        }
    }
    const auto n = static_cast<double>(cases.size());
    s.dice /= n;
    s.lesion_recall /= n;
    s.lesion_f1 /= n;
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    s.h95_mm = s.h95_cases ? h / static_cast<double>(s.h95_cases) : nan;
    s.avd_percent = s.avd_cases ? a / static_cast<double>(s.avd_cases) : nan;
    return s;
}

const TeamRank& RankTable::find(const std::string& team) const {
    for (const auto& t : teams) {
        if (t.team == team) return t;
    }
    throw std::out_of_range("no team named '" + team + "'");
}

std::string RankTable::to_csv() const {
    std::string out = "team,dice_rank,h95_rank,avd_rank,recall_rank,f1_rank,overall_rank\n";
    for (const auto& t : teams) {
        out += t.team + ',' + format_double(t.dice) + ',' + format_double(t.h95) + ',' + format_double(t.avd) +
               ',' + format_double(t.recall) + ',' + format_double(t.f1) + ',' + format_double(t.overall) + '\n';
    }
    return out;
}

std::string RankTable::to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : teams) {
        arr.push_back({{"team", t.team},
                       {"dice_rank", t.dice},
                       {"h95_rank", t.h95},
                       {"avd_rank", t.avd},
                       {"recall_rank", t.recall},
                       {"f1_rank", t.f1},
                       {"overall_rank", t.overall}});
    }
    return nlohmann::json{{"teams", arr}}.dump(2);
}

RankTable rank_teams(const std::vector<TeamSummary>& teams) {
    if (teams.size() < 2) throw std::invalid_argument("rank_teams: need at least 2 teams");
    for (const auto& t : teams) {
        for (double v : {t.dice, t.h95_mm, t.avd_percent, t.lesion_recall, t.lesion_f1}) {
            if (!std::isfinite(v)) throw std::invalid_argument("rank_teams: non-finite metric for team '" + t.team + "'");
        }
    }
    auto rank_metric = [&](auto get, bool higher_is_better) {
        double lo = get(teams.front()), hi = lo;
        for (const auto& t : teams) {
            lo = std::min(lo, get(t));
            hi = std::max(hi, get(t));
        }
        std::vector<double> r(teams.size(), 0.0);
        if (hi == lo) return r;
        for (std::size_t k = 0; k < teams.size(); ++k) {
            const double u = (get(teams[k]) - lo) / (hi - lo);
            r[k] = higher_is_better ? 1.0 - u : u;
        }
        return r;
    };
    const auto rd = rank_metric([](const TeamSummary& t) { return t.dice; }, true);
    const auto rh = rank_metric([](const TeamSummary& t) { return t.h95_mm; }, false);
    const auto ra = rank_metric([](const TeamSummary& t) { return t.avd_percent; }, false);
    const auto rr = rank_metric([](const TeamSummary& t) { return t.lesion_recall; }, true);
    const auto rf = rank_metric([](const TeamSummary& t) { return t.lesion_f1; }, true);

    RankTable table;
    for (std::size_t k = 0; k < teams.size(); ++k) {
        TeamRank t{teams[k].team, rd[k], rh[k], ra[k], rr[k], rf[k], 0.0};
        t.overall = (t.dice + t.h95 + t.avd + t.recall + t.f1) / 5.0;
        table.teams.push_back(t);
    }
    return table;
}

std::string case_metrics_csv(const std::vector<CaseMetrics>& cases) {
    std::string out = "case_id,dice,h95_mm,avd_percent,lesion_recall,lesion_f1,h95_defined,avd_defined\n";
    for (const auto& c : cases) {
        out += c.case_id + ',' + format_double(c.dice) + ',' + (c.h95_mm ? format_double(*c.h95_mm) : "") + ',' +
               (c.avd_percent ? format_double(*c.avd_percent) : "") + ',' + format_double(c.lesion_recall) + ',' +
               format_double(c.lesion_f1) + ',' + (c.h95_mm ? "1" : "0") + ',' + (c.avd_percent ? "1" : "0") + '\n';
    }
    return out;
}

std::string team_summaries_csv(const std::vector<TeamSummary>& teams) {
    std::string out = "team,dice,h95_mm,avd_percent,lesion_recall,lesion_f1\n";
    for (const auto& t : teams) {
        out += t.team + ',' + format_double(t.dice) + ',' + format_double(t.h95_mm) + ',' +
               format_double(t.avd_percent) + ',' + format_double(t.lesion_recall) + ',' +
               format_double(t.lesion_f1) + '\n';
    }
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    fields.push_back(cur);
    for (auto& f : fields) {
        const auto b = f.find_first_not_of(" \t");
        const auto e = f.find_last_not_of(" \t");
        f = b == std::string::npos ? std::string{} : f.substr(b, e - b + 1);
    }
    return fields;
}

double parse_number(const std::string& s, std::size_t line_no, const std::string& column) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw std::invalid_argument("line " + std::to_string(line_no) + ": column '" + column +
                                    "' is not a number: '" + s + "'");
    }
    return v;
}

}  // namespace

std::vector<TeamSummary> parse_team_summaries_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (header.empty() && std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        header = split_csv_line(line);
    }
    if (header.empty()) throw std::invalid_argument("team summary CSV: missing header");
    const std::array<std::string, 6> names{"team", "dice", "h95_mm", "avd_percent", "lesion_recall", "lesion_f1"};
    std::array<std::size_t, 6> col{};
    for (std::size_t k = 0; k < names.size(); ++k) {
        const auto it = std::find(header.begin(), header.end(), names[k]);
        if (it == header.end()) throw std::invalid_argument("team summary CSV: missing column '" + names[k] + "'");
        col[k] = static_cast<std::size_t>(it - header.begin());
    }
    std::vector<TeamSummary> teams;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const auto f = split_csv_line(line);
        if (f.size() != header.size()) {
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
        }
        TeamSummary t;
        t.team = f[col[0]];
        t.dice = parse_number(f[col[1]], line_no, names[1]);
        t.h95_mm = parse_number(f[col[2]], line_no, names[2]);
        t.avd_percent = parse_number(f[col[3]], line_no, names[3]);
        t.lesion_recall = parse_number(f[col[4]], line_no, names[4]);
        t.lesion_f1 = parse_number(f[col[5]], line_no, names[5]);
        teams.push_back(t);
    }
    return teams;
}

}  // namespace wmhseg
