#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "test_support.hpp"

using namespace nomscreen;

namespace {

AnnotationRecord rec(std::string d, std::string c, int s, Source src = Source::NN) {
    AnnotationRecord r;
    r.director_id = std::move(d);
    r.coder_id = std::move(c);
    r.score = s;
    r.timestamp = "2024-01-01T00:00:00Z";
    r.source = src;
    return r;
}

} // namespace

TEST(Annotation, ReconcileTruthTable) {
    for (int a = 1; a <= 5; ++a)
        for (int b = 1; b <= 5; ++b) {
            Label want = (a >= 4 && b >= 4) ? Label::CSP : (a <= 2 && b <= 2) ? Label::NonCSP : Label::Unknown;
            EXPECT_EQ(reconcile(a, b), want) << a << "," << b;
            EXPECT_EQ(reconcile(a, b), reconcile(b, a));
        }
    EXPECT_EQ(reconcile(std::optional<int>(4), std::nullopt), Label::Pending);
    EXPECT_THROW(reconcile(0, 3), Error);
    EXPECT_THROW(reconcile(3, 6), Error);
}

TEST(Annotation, SamplingIsUniform) {
    std::vector<std::string> cands;
    for (int i = 0; i < 50; ++i) cands.push_back("D" + std::to_string(100 + i));
    std::map<std::string, double> included, first;
    const int draws = 10000;
    for (int s = 0; s < draws; ++s) {
        auto r = sample_for_annotation(cands, 10, sub_seed(99, static_cast<uint64_t>(s)));
        ASSERT_EQ(r.queue.size(), 10u);
        std::set<std::string> uniq(r.queue.begin(), r.queue.end());
        ASSERT_EQ(uniq.size(), 10u);
        for (const auto& d : r.queue) included[d] += 1;
        first[r.queue[0]] += 1;
    }
    // chi-square, 49 dof; 0.999 quantile is 85.35
    auto chi2 = [](const std::map<std::string, double>& obs, double expected) {
        double x = 0;
        for (const auto& [k, o] : obs) x += (o - expected) * (o - expected) / expected;
        return x;
    };
    EXPECT_EQ(included.size(), 50u);
    EXPECT_LT(chi2(included, draws * 10.0 / 50.0) / (1.0 - 10.0 / 50.0), 85.35);  // binomial variance per item
    EXPECT_LT(chi2(first, draws / 50.0), 85.35);
}

TEST(Annotation, SampleIndependentOfInputOrderAndShort) {
    std::vector<std::string> a = {"C", "A", "B", "D", "E"}, b = {"E", "D", "C", "B", "A", "A"};
    EXPECT_EQ(sample_for_annotation(a, 3, 7).queue, sample_for_annotation(b, 3, 7).queue);
    auto s = sample_for_annotation(a, 10, 7);
    EXPECT_TRUE(s.short_population);
    EXPECT_EQ(s.queue.size(), 5u);
}

TEST(Annotation, LogitCandidatesExcludeKnnAndLicensed) {
    EXPECT_EQ(logit_candidates({"A", "B", "C", "D"}, {"B"}, {"D"}), (std::vector<std::string>{"A", "C"}));
}

TEST(Annotation, StateLabelsAndSingleCoder) {
    AnnotationState s;
    s.apply(rec("D1", "alice", 5));
    EXPECT_EQ(s.label("D1"), Label::Pending);
    EXPECT_EQ(s.label("D1", true), Label::CSP);
    s.apply(rec("D1", "bob", 3));
    EXPECT_EQ(s.label("D1"), Label::Unknown);
    s.apply(rec("D1", "bob", 4));  // latest score wins
    EXPECT_EQ(s.label("D1"), Label::CSP);
    s.apply(rec("D1", "carol", 1));  // only the first two coders by id count
    EXPECT_EQ(s.label("D1"), Label::CSP);
    EXPECT_EQ(s.label("D2"), Label::Pending);
    EXPECT_THROW(s.apply(rec("D1", "bob", 9)), Error);
}

TEST(Annotation, CountsRejectPending) {
    auto c = counts({{"A", Label::CSP}, {"B", Label::NonCSP}, {"C", Label::Unknown}, {"D", Label::CSP}}, 300, Source::LOGIT);
    EXPECT_EQ(c.tp, 2u);
    EXPECT_EQ(c.fp, 1u);
    EXPECT_EQ(c.unknown, 1u);
    EXPECT_EQ(c.n_candidates, 300u);
    EXPECT_EQ(c.source, Source::LOGIT);
    try {
        counts({{"A", Label::CSP}, {"Z", Label::Pending}}, 10, Source::NN);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("Z"), std::string::npos);
    }
}

TEST(Annotation, RecordJsonRoundTripAndValidation) {
    auto r = rec("D1", "alice", 2, Source::LOGIT);
    r.notes = "address in leaks";
    auto back = AnnotationRecord::from_json(nlohmann::json::parse(r.to_json().dump()));
    EXPECT_EQ(back.to_json(), r.to_json());
    EXPECT_TRUE(r.to_json().contains("notes"));
    EXPECT_TRUE(rec("D", "c", 1).to_json().at("notes").is_null());
    EXPECT_THROW(AnnotationRecord::from_json({{"director_id", "D"}, {"coder_id", "c"}, {"score", 0}}), Error);
    EXPECT_THROW(AnnotationRecord::from_json({{"director_id", "D"}, {"coder_id", ""}, {"score", 3}}), Error);
    EXPECT_THROW(AnnotationRecord::from_json({{"director_id", "D"}, {"score", 3}}), std::exception);
}

TEST(Annotation, LogReplayRebuildsState) {
    auto dir = nomscreen::testing::scratch_dir("annotation_log");
    auto path = (dir / "annotations.jsonl").string();
    AnnotationState direct;
    {
        AnnotationLog log(path);
        std::mt19937_64 rng(3);
        for (int i = 0; i < 200; ++i) {
            auto r = rec("D" + std::to_string(rng() % 30), "c" + std::to_string(rng() % 3), 1 + static_cast<int>(rng() % 5));
            log.append(r);
            direct.apply(r);
        }
        EXPECT_EQ(log.snapshot(), direct);
        EXPECT_EQ(log.events().size(), 200u);
    }
    AnnotationLog reopened(path);
    EXPECT_EQ(reopened.snapshot(), direct);
    std::ifstream in(path);
    EXPECT_EQ(AnnotationLog::replay(in).size(), 200u);
    std::istringstream bad("{\"director_id\":\"D\",\"coder_id\":\"c\",\"score\":3}\nnot json\n");
    try {
        AnnotationLog::replay(bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

TEST(Annotation, LogAppendsConcurrently) {
    auto dir = nomscreen::testing::scratch_dir("annotation_concurrent");
    auto path = (dir / "annotations.jsonl").string();
    AnnotationLog log(path);
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            for (int i = 0; i < 50; ++i) log.append(rec("D" + std::to_string(i), "c" + std::to_string(t), 1 + i % 5));
        });
    for (auto& th : threads) th.join();
    std::ifstream in(path);
    EXPECT_EQ(AnnotationLog::replay(in).size(), 200u);
    EXPECT_EQ(AnnotationLog(path).snapshot(), log.snapshot());
}

TEST(Annotation, ServiceQueueSubmitEstimate) {
    AnnotationLog log;
    std::vector<AnnotationQueue> queues = {{Source::NN, {"N1", "N2", "N3"}, 2944}, {Source::LOGIT, {"L1", "L2"}, 3677}};
    EstimateSettings settings;
    settings.n_mc = 2000;
    AnnotationService svc(queues, log,
                          [](const std::string& id) -> std::optional<nlohmann::json> {
                              if (id == "missing") return std::nullopt;
                              return nlohmann::json{{"director_id", id}};
                          },
                          "# codebook", settings);
    EXPECT_EQ(svc.next(Source::NN, "alice"), "N1");
    svc.submit({{"director_id", "N1"}, {"coder_id", "alice"}, {"score", 5}});
    EXPECT_EQ(svc.next(Source::NN, "alice"), "N2");
    EXPECT_EQ(svc.next(Source::NN, "bob"), "N1");
    auto ack = svc.submit({{"director_id", "N1"}, {"coder_id", "bob"}, {"score", 4}, {"notes", "trust office"}}, "bob");
    EXPECT_EQ(ack.at("label"), "CSP");
    EXPECT_EQ(ack.at("record").at("source"), "nn");
    EXPECT_EQ(svc.submit({{"director_id", "L1"}, {"coder_id", "alice"}, {"score", 1}}).at("record").at("source"), "logit");
    EXPECT_THROW(svc.submit({{"director_id", "N1"}, {"coder_id", "alice"}, {"score", 5}}, "mallory"), Error);
    EXPECT_THROW(svc.submit({{"director_id", "X"}, {"coder_id", "alice"}, {"score", 5}}), Error);
    EXPECT_THROW(svc.submit({{"director_id", "N1"}, {"coder_id", "alice"}, {"score", 7}}), Error);
    EXPECT_THROW(svc.submit({{"director_id", "N1"}}), Error);

    auto est = svc.estimate();
    EXPECT_EQ(est.at("sources")[0].at("counts").at("tp"), 1);
    EXPECT_EQ(est.at("pending").at("nn"), 2);
    EXPECT_EQ(est.at("pending").at("logit"), 2);
    EXPECT_TRUE(est.contains("combined"));
    EXPECT_EQ(svc.export_positives().at("director_ids"), nlohmann::json::array({"N1"}));
    auto d = svc.director("N1");
    ASSERT_TRUE(d);
    EXPECT_EQ(d->at("annotations").size(), 2u);
    EXPECT_EQ(d->at("label"), "CSP");
    EXPECT_FALSE(svc.director("missing"));
    auto q = svc.queue_json(Source::NN, "alice");
    EXPECT_EQ(q.at("labeled"), 1);
    EXPECT_EQ(q.at("total"), 3);
}

TEST(Annotation, EstimateJsonCarriesUnknownSensitivity) {
    EstimateSettings s;
    s.n_mc = 5000;
    auto j = estimate_json({AnnotationCounts{11, 80, 9, 2944, Source::NN}}, s);
    double base = j.at("sources")[0].at("median"), sens = j.at("sources")[0].at("unknown_as_fp").at("median");
    EXPECT_LT(sens, base);
    EXPECT_NEAR(sens, 338.992, 0.01);
}

TEST(Annotation, QueueJsonRoundTrip) {
    AnnotationQueue q{Source::LOGIT, {"A", "B"}, 12};
    auto back = AnnotationQueue::from_json(nlohmann::json::parse(q.to_json().dump()));
    EXPECT_EQ(back.source, q.source);
    EXPECT_EQ(back.directors, q.directors);
    EXPECT_EQ(back.n_candidates, 12u);
}
