#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "isbench/error.hpp"
#include "isbench/metrics.hpp"
#include "test_support.hpp"

using namespace isbench;

namespace {

EvaluationRecord rec(std::string ds, std::string cs, std::string cls, std::string inst, std::optional<double> v,
                     std::string scheme = "3PPS", int iteration = 0, int interactions = 3) {
    return {std::move(ds), std::move(cs), std::move(cls), std::move(inst), iteration, v, interactions, std::move(scheme), {}};
}

const AggregateRow* find_row(const std::vector<AggregateRow>& rows, const std::string& level, const std::string& ds,
                             const std::string& cls = "*", const std::string& cs = "*") {
    for (const auto& r : rows)
        if (r.level == level && r.dataset_id == ds && r.class_id == cls && r.case_id == cs) return &r;
    return nullptr;
}

double mean(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

}  // namespace

TEST_CASE("dsc examples") {
    const Dims d{4, 1, 1};
    BinaryMask a(d), b(d);
    a.set(Index3{0, 0, 0});
    a.set(Index3{1, 0, 0});
    CHECK(dsc(a, a) == 1.0);
    b.set(Index3{1, 0, 0});
    b.set(Index3{2, 0, 0});
    CHECK(dsc(a, b) == 0.5);
    BinaryMask c(d);
    c.set(Index3{3, 0, 0});
    CHECK(dsc(c, a) == 0.0);
    CHECK(dsc(BinaryMask(d), a) == 0.0);
    try {
        dsc(a, BinaryMask(d));
        FAIL("expected EmptyGroundTruth");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyGroundTruth);
    }
    CHECK_THROWS_AS(dsc(a, BinaryMask(Dims{2, 2, 1})), Error);
}

TEST_CASE("dsc matches set arithmetic on 200 random 8x8x8 pairs") {
    std::mt19937 gen(17);
    int mismatches = 0;
    for (int seed = 0; seed < 200; ++seed) {
        const Dims d{8, 8, 8};
        const auto p = testing::random_mask(d, gen, 0.3);
        auto g = testing::random_mask(d, gen, 0.3);
        if (g.empty()) g.set(Index3{0, 0, 0});
        std::set<std::size_t> ps, gs, both;
        for (std::size_t i = 0; i < d.voxel_count(); ++i) {
            if (p.test(i)) ps.insert(i);
            if (g.test(i)) gs.insert(i);
        }
        std::set_intersection(ps.begin(), ps.end(), gs.begin(), gs.end(), std::inserter(both, both.end()));
        const double want = 2.0 * static_cast<double>(both.size()) / static_cast<double>(ps.size() + gs.size());
        mismatches += dsc(p, g) != want;
        if (!p.empty()) mismatches += dsc(g, p) != want;  // symmetric
    }
    CHECK(mismatches == 0);
}

TEST_CASE("dsc grows when correct voxels are added to an under-segmentation") {
    std::mt19937 gen(2);
    const auto gt = testing::random_blob({10, 10, 10}, gen, 6);
    BinaryMask pred(gt.dims());
    double last = 0;
    for (std::size_t i = 0; i < gt.dims().voxel_count(); ++i) {
        if (!gt.test(i)) continue;
        pred.set(i);
        const double now = dsc(pred, gt);
        CHECK(now > last);
        last = now;
    }
    CHECK(last == 1.0);
}

TEST_CASE("aggregation examples") {
    const auto one = aggregate({rec("d", "c1", "k", "1", 0.4), rec("d", "c1", "k", "2", 0.6)});
    CHECK(find_row(one, "case", "d", "k", "c1")->mean_dsc.value() == doctest::Approx(0.5));

    const auto two = aggregate({rec("d", "c1", "k", "1", 0.5), rec("d", "c2", "k", "1", 1.0)});
    CHECK(find_row(two, "dataset", "d")->mean_dsc.value() == doctest::Approx(0.75));
}

TEST_CASE("case-weighted mean differs from instance-weighted mean") {
    // Case 1 has three instances at 0.0, case 2 one instance at 1.0.
    const std::vector<EvaluationRecord> r{rec("d", "c1", "k", "1", 0.0), rec("d", "c1", "k", "2", 0.0),
                                          rec("d", "c1", "k", "3", 0.0), rec("d", "c2", "k", "1", 1.0)};
    const auto rows = aggregate(r);
    CHECK(find_row(rows, "dataset", "d")->mean_dsc.value() == doctest::Approx(0.5));
    CHECK(find_row(rows, "dataset", "d")->mean_dsc.value() != doctest::Approx(0.25));
}

TEST_CASE("missing instances are surfaced, not dropped") {
    auto bad = rec("d", "c2", "k", "1", std::nullopt);
    bad.cause = "SegmenterCrash";
    const auto rows = aggregate({rec("d", "c1", "k", "1", 0.8), bad});
    const auto* ds = find_row(rows, "dataset", "d");
    CHECK(ds->mean_dsc.value() == doctest::Approx(0.8));
    CHECK(ds->n == 1);
    CHECK(ds->n_missing == 1);
    CHECK_FALSE(find_row(rows, "case", "d", "k", "c2")->mean_dsc.has_value());
    CHECK(find_row(rows, "overall", "*")->n_missing == 1);
}

TEST_CASE("aggregation equals a nested-mean oracle on random records") {
    std::mt19937 gen(23);
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<EvaluationRecord> records;
        // dataset -> class -> case -> instance DSCs
        std::map<std::string, std::map<std::string, std::map<std::string, std::vector<double>>>> nest;
        std::map<std::string, std::map<std::string, std::vector<double>>> by_case;  // for CaseFirst
        std::uniform_int_distribution<int> n_ds(1, 2), n_cls(1, 3), n_case(1, 4), n_inst(1, 3);
        std::uniform_real_distribution<double> v(0.0, 1.0);
        for (int di = 0, nd = n_ds(gen); di < nd; ++di) {
            const auto ds = "ds" + std::to_string(di);
            for (int ci = 0, nc = n_case(gen); ci < nc; ++ci) {
                const auto cs = "case" + std::to_string(ci);
                for (int ki = 0, nk = n_cls(gen); ki < nk; ++ki) {
                    const auto cls = "cls" + std::to_string(ki);
                    for (int ii = 0, ni = n_inst(gen); ii < ni; ++ii) {
                        const double x = v(gen);
                        records.push_back(rec(ds, cs, cls, std::to_string(ii), x));
                        nest[ds][cls][cs].push_back(x);
                        by_case[ds][cs].push_back(x);
                    }
                }
            }
        }
        std::shuffle(records.begin(), records.end(), gen);
        const auto rows = aggregate(records);
        std::vector<double> ds_means;
        for (const auto& [ds, classes] : nest) {
            std::vector<double> class_means;
            for (const auto& [cls, cases] : classes) {
                std::vector<double> case_means;
                for (const auto& [cs, xs] : cases) case_means.push_back(mean(xs));
                class_means.push_back(mean(case_means));
                mismatches += std::abs(find_row(rows, "class", ds, cls)->mean_dsc.value() - class_means.back()) > 1e-12;
            }
            ds_means.push_back(mean(class_means));
            mismatches += std::abs(find_row(rows, "dataset", ds)->mean_dsc.value() - ds_means.back()) > 1e-12;
        }
        mismatches += std::abs(find_row(rows, "overall", "*")->mean_dsc.value() - mean(ds_means)) > 1e-12;

        const auto alt = aggregate(records, AggregationOrder::CaseFirst);
        for (const auto& [ds, cases] : by_case) {
            std::vector<double> case_means;
            for (const auto& [cs, xs] : cases) case_means.push_back(mean(xs));
            mismatches += std::abs(find_row(alt, "dataset", ds)->mean_dsc.value() - mean(case_means)) > 1e-12;
        }

        // Permutation invariance: exact row equality.
        auto again = records;
        std::reverse(again.begin(), again.end());
        mismatches += aggregate(again) != rows;
    }
    CHECK(mismatches == 0);
}

TEST_CASE("aggregation keeps schemes and iterations apart") {
    const auto rows = aggregate({rec("d", "c", "k", "1", 0.2, "A", 0, 2), rec("d", "c", "k", "1", 0.6, "A", 1, 5),
                                 rec("d", "c", "k", "1", 1.0, "B", 0, 6)});
    int overall = 0;
    for (const auto& r : rows)
        if (r.level == "overall") {
            ++overall;
            if (r.scheme_id == "A" && r.iteration == 1) {
                CHECK(r.mean_dsc.value() == doctest::Approx(0.6));
                CHECK(r.mean_interactions == 5.0);
            }
        }
    CHECK(overall == 3);
    CHECK(rows.front().level == "overall");
}

TEST_CASE("records CSV and JSON round trip") {
    std::vector<EvaluationRecord> r{rec("d", "c,1", "k", "001", 0.123456), rec("d", "c2", "k", "002", std::nullopt)};
    r[1].cause = "SegmenterCrash";
    const auto csv = records_to_csv(r);
    CHECK(csv.rfind("dataset,case,class,instance,iteration,scheme,interactions,dsc\n", 0) == 0);
    CHECK(csv.find("NaN") != std::string::npos);
    auto back = records_from_csv(csv);
    back[1].cause = "SegmenterCrash";
    CHECK(back == r);
    CHECK(records_from_json(records_to_json(r)) == r);
    CHECK_THROWS_AS(records_from_csv("nope\n"), Error);
    const auto agg = aggregate_to_csv(aggregate(r));
    CHECK(agg.find("level,dataset,scheme,iteration") == 0);
}
