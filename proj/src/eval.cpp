#include "etpick/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace etpick {

namespace {

double f1_of(int tp, int fp, int fn, double* precision, double* recall) {
    const double p = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    if (precision) *precision = p;
    if (recall) *recall = r;
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

struct CandidatePair {
    double dist;
    int pred, truth;
};

}  // namespace

void finalize_scores(MatchReport& rep) {
    int stp = 0, sfp = 0, sfn = 0;
    double sum_f1 = 0.0;
    int present = 0;
    for (auto& c : rep.per_class) {
        c.absent = c.tp == 0 && c.fp == 0 && c.fn == 0;
        c.f1 = f1_of(c.tp, c.fp, c.fn, &c.precision, &c.recall);
        if (!c.absent) {
            sum_f1 += c.f1;
            ++present;
        }
        stp += c.tp;
        sfp += c.fp;
        sfn += c.fn;
    }
    rep.macro_f1 = present > 0 ? sum_f1 / present : 0.0;
    rep.micro_f1 = f1_of(stp, sfp, sfn, nullptr, nullptr);
}

MatchReport match_detections(const std::vector<Detection>& preds, const PickSet& truth,
                             const ClassCatalog& catalog, double spacing_angstrom,
                             const MatchConfig& cfg) {
    catalog.validate();
    if (cfg.tau <= 0.0) throw std::invalid_argument("tau must be positive");
    for (const auto& d : preds)
        if (d.class_id < 0 || d.class_id >= catalog.size())
            throw std::invalid_argument("detection class not in catalog");
    for (const auto& t : truth.picks)
        if (t.class_id < 0 || t.class_id >= catalog.size())
            throw std::invalid_argument("truth class not in catalog");

    MatchReport rep;
    rep.tau = cfg.tau;
    rep.per_class.resize(static_cast<std::size_t>(catalog.size()));

    // Candidate pairs with distance <= tau * radius; the cutoff radius comes
    // from the truth's class. Greedy in ascending (distance, pred, truth).
    std::vector<CandidatePair> pairs;
    for (std::size_t a = 0; a < preds.size(); ++a)
        for (std::size_t b = 0; b < truth.picks.size(); ++b) {
            const auto& p = preds[a];
            const auto& t = truth.picks[b];
            if (cfg.class_aware && p.class_id != t.class_id) continue;
            const double cutoff = cfg.tau * catalog.radius_voxels(t.class_id, spacing_angstrom);
            const double dz = p.z - t.z, dy = p.y - t.y, dx = p.x - t.x;
            const double dist = std::sqrt(dz * dz + dy * dy + dx * dx);
            if (dist <= cutoff) pairs.push_back({dist, static_cast<int>(a), static_cast<int>(b)});
        }
    // distance first, then coordinate-lexicographic tie-break so the result
    // is invariant to the order of the prediction list
    auto coord_key = [](double z, double y, double x, int cid) {
        return std::make_tuple(z, y, x, cid);
    };
    std::sort(pairs.begin(), pairs.end(), [&](const CandidatePair& A, const CandidatePair& B) {
        if (A.dist != B.dist) return A.dist < B.dist;
        const auto& pa = preds[static_cast<std::size_t>(A.pred)];
        const auto& pb = preds[static_cast<std::size_t>(B.pred)];
        const auto ka = coord_key(pa.z, pa.y, pa.x, pa.class_id);
        const auto kb = coord_key(pb.z, pb.y, pb.x, pb.class_id);
        if (ka != kb) return ka < kb;
        const auto& ta = truth.picks[static_cast<std::size_t>(A.truth)];
        const auto& tb = truth.picks[static_cast<std::size_t>(B.truth)];
        return coord_key(ta.z, ta.y, ta.x, ta.class_id) < coord_key(tb.z, tb.y, tb.x, tb.class_id);
    });

    std::vector<char> pused(preds.size(), 0), tused(truth.picks.size(), 0);
    for (const auto& pr : pairs) {
        if (pused[static_cast<std::size_t>(pr.pred)] || tused[static_cast<std::size_t>(pr.truth)])
            continue;
        pused[static_cast<std::size_t>(pr.pred)] = 1;
        tused[static_cast<std::size_t>(pr.truth)] = 1;
        rep.per_class[static_cast<std::size_t>(truth.picks[static_cast<std::size_t>(pr.truth)].class_id)].tp += 1;
    }
    for (std::size_t a = 0; a < preds.size(); ++a)
        if (!pused[a]) rep.per_class[static_cast<std::size_t>(preds[a].class_id)].fp += 1;
    for (std::size_t b = 0; b < truth.picks.size(); ++b)
        if (!tused[b]) rep.per_class[static_cast<std::size_t>(truth.picks[b].class_id)].fn += 1;

    finalize_scores(rep);
    return rep;
}

MatchReport merge_reports(const std::vector<MatchReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("no reports to merge");
    MatchReport out;
    out.tau = reports[0].tau;
    out.per_class.resize(reports[0].per_class.size());
    for (const auto& r : reports) {
        if (r.per_class.size() != out.per_class.size())
            throw std::invalid_argument("merge_reports: class count mismatch");
        for (std::size_t c = 0; c < r.per_class.size(); ++c) {
            out.per_class[c].tp += r.per_class[c].tp;
            out.per_class[c].fp += r.per_class[c].fp;
            out.per_class[c].fn += r.per_class[c].fn;
        }
    }
    finalize_scores(out);
    return out;
}

SweepResult sweep_thresholds(const std::vector<std::vector<Detection>>& preds_per_volume,
                             const std::vector<PickSet>& truths, const ClassCatalog& catalog,
                             double spacing_angstrom, const std::vector<double>& grid,
                             const MatchConfig& cfg) {
    if (preds_per_volume.size() != truths.size())
        throw std::invalid_argument("sweep: prediction/truth volume count mismatch");
    for (double t : grid)
        if (t <= 0.0 || t >= 1.0) throw std::invalid_argument("sweep grid must lie in (0,1)");

    SweepResult res;
    for (double t : grid) {
        std::vector<MatchReport> per_vol;
        for (std::size_t v = 0; v < truths.size(); ++v) {
            std::vector<Detection> kept;
            for (const auto& d : preds_per_volume[v])
                if (d.confidence > t) kept.push_back(d);
            per_vol.push_back(match_detections(kept, truths[v], catalog, spacing_angstrom, cfg));
        }
        res.curve.push_back({t, merge_reports(per_vol)});
    }

    const int C = catalog.size();
    res.best_threshold.assign(static_cast<std::size_t>(C), grid.empty() ? 0.5 : grid[0]);
    res.best_f1.assign(static_cast<std::size_t>(C), -1.0);
    for (const auto& pt : res.curve)
        for (int c = 0; c < C; ++c) {
            const double f1 = pt.report.per_class[static_cast<std::size_t>(c)].f1;
            if (f1 > res.best_f1[static_cast<std::size_t>(c)]) {  // ties keep the lowest threshold
                res.best_f1[static_cast<std::size_t>(c)] = f1;
                res.best_threshold[static_cast<std::size_t>(c)] = pt.threshold;
            }
        }
    return res;
}

std::string report_table(const MatchReport& rep, const ClassCatalog& catalog) {
    std::ostringstream os;
    char line[200];
    std::snprintf(line, sizeof(line), "tau = %.2f\n", rep.tau);
    os << line;
    os << "class                   TP    FP    FN    precision  recall     F1\n";
    for (int c = 0; c < catalog.size(); ++c) {
        const auto& cc = rep.per_class[static_cast<std::size_t>(c)];
        std::snprintf(line, sizeof(line), "%-22s %5d %5d %5d   %8.3f %8.3f %8.3f%s\n",
                      catalog.spec(c).name.c_str(), cc.tp, cc.fp, cc.fn, cc.precision, cc.recall,
                      cc.f1, cc.absent ? "  (absent)" : "");
        os << line;
    }
    std::snprintf(line, sizeof(line), "macro-F1 %.4f   micro-F1 %.4f\n", rep.macro_f1,
                  rep.micro_f1);
    os << line;
    return os.str();
}

void report_csv(const MatchReport& rep, const ClassCatalog& catalog, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for write: " + path);
    f << "tau,class,tp,fp,fn,precision,recall,f1,absent\n";
    for (int c = 0; c < catalog.size(); ++c) {
        const auto& cc = rep.per_class[static_cast<std::size_t>(c)];
        f << rep.tau << "," << catalog.spec(c).name << "," << cc.tp << "," << cc.fp << ","
          << cc.fn << "," << cc.precision << "," << cc.recall << "," << cc.f1 << ","
          << (cc.absent ? 1 : 0) << "\n";
    }
    f << rep.tau << ",macro,,,,,," << rep.macro_f1 << ",\n";
    f << rep.tau << ",micro,,,,,," << rep.micro_f1 << ",\n";
}

}  // namespace etpick
