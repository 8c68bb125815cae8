#include <doctest.h>

#include <set>
#include <sstream>

#include "attacknet/protocol.hpp"
#include "test_support.hpp"

using namespace attacknet;

namespace {

struct TwoDatasets {
    DatasetManifest a, b;

    TwoDatasets() {
        const std::string ra = testutil::temp_dir("proto_a");
        const std::string rb = testutil::temp_dir("proto_b");
        testutil::write_synthetic_dataset(ra, 12, 16, 16, 501);
        testutil::write_synthetic_dataset(rb, 12, 16, 16, 502);
        a = load_dataset(ra, "alpha", 0.5, 1);
        b = load_dataset(rb, "beta", 0.5, 2);
    }
};

ModelConfig proto_config() {
    ModelConfig cfg = testutil::tiny_config();
    cfg.batch_size = 6;
    cfg.max_epochs = 6;
    cfg.lr = 0.01f;  // few steps on a tiny separable problem
    return cfg;
}

}  // namespace

TEST_CASE("predict agrees with genuine scores and the 0.5 rule") {
    TwoDatasets ds;
    ModelConfig cfg = proto_config();
    Prng pm(7);
    Model m = build_model(cfg, pm);
    auto data = load_split(ds.a, Split::Val, 16, 16);
    REQUIRE(!data.empty());

    auto preds = predict(m, data);
    auto scores = genuine_scores(m, data);
    REQUIRE(preds.size() == data.size());
    REQUIRE(scores.size() == data.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        CHECK(scores[i] >= 0.0);
        CHECK(scores[i] <= 1.0);
        // Two classes: argmax with ties to bonafide is score >= 0.5.
        CHECK(preds[i] == (scores[i] >= 0.5 ? Label::Bonafide : Label::Attack));
    }
}

TEST_CASE("evaluate_model equals metrics recomputed from raw predictions") {
    TwoDatasets ds;
    ModelConfig cfg = proto_config();
    Prng pm(8);
    Model m = build_model(cfg, pm);
    auto data = load_split(ds.a, Split::Val, 16, 16);

    EvalReport rep = evaluate_model(m, data);
    std::vector<Label> labels;
    for (const auto& s : data) labels.push_back(static_cast<Label>(s.label));
    ConfusionMatrix cm = confusion(predict(m, data), labels);
    EvalReport ref = eval_report(cm);
    CHECK(rep.confusion.tp == cm.tp);
    CHECK(rep.confusion.tn == cm.tn);
    CHECK(rep.hter == ref.hter);
    CHECK(rep.bonafide.f1.value == ref.bonafide.f1.value);
}

TEST_CASE("cross-eval produces a full matrix and learns the diagonal") {
    TwoDatasets ds;
    ModelConfig cfg = proto_config();
    AugmentSpec aug;
    CrossEvalMatrix m = run_cross_eval({ds.a, ds.b}, cfg, aug, 99);

    REQUIRE(m.train_names == std::vector<std::string>{"alpha", "beta"});
    REQUIRE(m.eval_names == m.train_names);
    REQUIRE(m.cells.size() == 4);
    REQUIRE(m.logs.size() == 2);
    REQUIRE(m.models.size() == 2);

    // The synthetic color rule is shared across both datasets, so every cell
    // of a trained model should beat chance by a wide margin.
    for (const auto& cell : m.cells) CHECK(cell.hter < 0.25);
    CHECK(&m.cell(1, 0) == &m.cells[2]);

    SUBCASE("deterministic across runs") {
        CrossEvalMatrix m2 = run_cross_eval({ds.a, ds.b}, cfg, aug, 99);
        for (std::size_t i = 0; i < m.cells.size(); ++i) {
            CHECK(m.cells[i].hter == m2.cells[i].hter);
            CHECK(m.cells[i].confusion.tp == m2.cells[i].confusion.tp);
        }
    }

    SUBCASE("per-dataset seeds do not depend on the dataset list length") {
        CrossEvalMatrix solo = run_cross_eval({ds.a}, cfg, aug, 99);
        auto pa = solo.models[0].params();
        auto pb = m.models[0].params();
        for (std::size_t i = 0; i < pa.size(); ++i)
            for (std::size_t j = 0; j < pa[i].tensor->size(); ++j)
                CHECK((*pa[i].tensor)[j] == (*pb[i].tensor)[j]);
    }
}

TEST_CASE("matrix renderers") {
    TwoDatasets ds;
    ModelConfig cfg = proto_config();
    cfg.max_epochs = 1;
    AugmentSpec aug;
    CrossEvalMatrix m = run_cross_eval({ds.a, ds.b}, cfg, aug, 5);

    const std::string txt = render_matrix_text(m);
    CHECK(txt.find("alpha") != std::string::npos);
    CHECK(txt.find("beta") != std::string::npos);
    CHECK(txt.find("hter") != std::string::npos);

    const std::string csv = render_matrix_csv(m);
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);
    CHECK(line == "train,eval,class,precision,recall,f1,far,frr,hter");
    std::size_t rows = 0;
    std::size_t alpha_alpha = 0;
    while (std::getline(is, line)) {
        if (!line.empty()) ++rows;
        if (line.rfind("alpha,alpha,", 0) == 0) ++alpha_alpha;
    }
    CHECK(rows == 8);  // 4 cells x 2 class rows
    CHECK(alpha_alpha == 2);
}

TEST_CASE("fused training covers every source") {
    TwoDatasets ds;
    ModelConfig cfg = proto_config();
    AugmentSpec aug;
    FusedResult f = run_fused({ds.a, ds.b}, cfg, aug, 17);

    REQUIRE(f.source_names.size() == 2);
    CHECK(std::set<std::string>(f.source_names.begin(), f.source_names.end()) ==
          std::set<std::string>{"alpha", "beta"});
    REQUIRE(f.reports.size() == 2);
    for (const auto& rep : f.reports) {
        CHECK(rep.confusion.total() > 0);
        CHECK(rep.hter < 0.3);  // shared color rule; fused training learns it
    }
    CHECK(!f.log.records.empty());

    SUBCASE("single dataset is rejected") {
        CHECK_THROWS_AS(run_fused({ds.a}, cfg, aug, 1), ConfigError);
    }
}
