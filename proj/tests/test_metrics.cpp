#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "stressfuse/errors.hpp"
#include "stressfuse/metrics.hpp"
#include "stressfuse/nn.hpp"
#include "stressfuse/rng.hpp"

using namespace stressfuse;
using doctest::Approx;

TEST_CASE("confusion examples") {
    std::vector<int> labels{1, 0, 1};
    auto perfect = metrics::confusion(labels, labels);
    CHECK(perfect.tp == 2);
    CHECK(perfect.tn == 1);
    CHECK(perfect.fp == 0);
    CHECK(perfect.fn == 0);

    std::vector<int> inverted{0, 1, 0};
    auto worst = metrics::confusion(inverted, labels);
    CHECK(worst.tp == 0);
    CHECK(worst.tn == 0);
    CHECK(worst.fp == 1);
    CHECK(worst.fn == 2);
}

TEST_CASE("confusion matches enumeration on random cases") {
    Rng rng(2301);
    std::vector<int> preds(200), labels(200);
    for (std::size_t i = 0; i < 200; ++i) {
        preds[i] = rng.bernoulli(0.4) ? 1 : 0;
        labels[i] = rng.bernoulli(0.6) ? 1 : 0;
    }
    auto cm = metrics::confusion(preds, labels);
    auto oracle = testutil::enumerate_confusion(preds, labels);
    CHECK(cm.tp == oracle.tp);
    CHECK(cm.fp == oracle.fp);
    CHECK(cm.tn == oracle.tn);
    CHECK(cm.fn == oracle.fn);
    CHECK(cm.total() == 200);
}

TEST_CASE("confusion input validation") {
    std::vector<int> a{1, 0}, b{1};
    try {
        metrics::confusion(a, b);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::dimension_mismatch);
    }
    std::vector<int> bad{2, 0};
    std::vector<int> ok{1, 0};
    CHECK_THROWS_AS(metrics::confusion(bad, ok), Error);
    CHECK_THROWS_AS(metrics::confusion(ok, bad), Error);
    std::vector<int> empty;
    CHECK_THROWS_AS(metrics::confusion(empty, empty), Error);
}

TEST_CASE("report arithmetic") {
    metrics::ConfusionMatrix cm{95, 5, 95, 5};
    auto rep = metrics::report(cm);
    CHECK(rep.accuracy == Approx(0.95).epsilon(1e-12));
    CHECK(rep.precision == Approx(0.95).epsilon(1e-12));
    CHECK(rep.recall == Approx(0.95).epsilon(1e-12));
    CHECK(rep.f1 == Approx(0.95).epsilon(1e-12));
    CHECK_FALSE(rep.precision_degenerate);
    CHECK_FALSE(rep.recall_degenerate);
    CHECK_FALSE(rep.f1_degenerate);
}

TEST_CASE("report degenerate denominators") {
    metrics::ConfusionMatrix cm{0, 0, 10, 5};
    auto rep = metrics::report(cm);
    CHECK(rep.precision == 0.0);
    CHECK(rep.precision_degenerate);
    CHECK(rep.recall == 0.0);
    CHECK_FALSE(rep.recall_degenerate); // fn > 0, denominator fine
    CHECK(rep.f1_degenerate);           // P + R = 0

    metrics::ConfusionMatrix empty{0, 0, 0, 0};
    CHECK_THROWS_AS(metrics::report(empty), Error);
}

TEST_CASE("report perfect case") {
    metrics::ConfusionMatrix cm{40, 0, 60, 0};
    auto rep = metrics::report(cm);
    CHECK(rep.accuracy == 1.0);
    CHECK(rep.precision == 1.0);
    CHECK(rep.recall == 1.0);
    CHECK(rep.f1 == 1.0);
}

TEST_CASE("report properties over random confusion matrices") {
    Rng rng(4001);
    for (int trial = 0; trial < 300; ++trial) {
        metrics::ConfusionMatrix cm;
        cm.tp = rng.uniform_index(20);
        cm.fp = rng.uniform_index(20);
        cm.tn = rng.uniform_index(20);
        cm.fn = rng.uniform_index(20);
        if (cm.total() == 0) cm.tn = 1;
        auto rep = metrics::report(cm);
        for (double m : {rep.accuracy, rep.precision, rep.recall, rep.f1}) {
            CHECK(m >= 0.0);
            CHECK(m <= 1.0);
        }
        // f1 = 2PR/(P+R) whenever the denominator is alive.
        if (rep.precision + rep.recall > 0.0 && !rep.precision_degenerate &&
            !rep.recall_degenerate) {
            double expected = 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall);
            CHECK(rep.f1 == Approx(expected).epsilon(1e-12));
        }
        bool perfect = cm.fp == 0 && cm.fn == 0;
        CHECK((rep.accuracy == 1.0) == perfect);
    }
}

TEST_CASE("composed confusion and report match enumeration on 1000 random cases") {
    Rng rng(999);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t n = 1 + rng.uniform_index(40);
        std::vector<int> preds(n), labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            preds[i] = rng.bernoulli(0.5) ? 1 : 0;
            labels[i] = rng.bernoulli(0.5) ? 1 : 0;
        }
        auto cm = metrics::confusion(preds, labels);
        auto oracle = testutil::enumerate_confusion(preds, labels);
        REQUIRE(cm.tp == oracle.tp);
        REQUIRE(cm.fp == oracle.fp);
        REQUIRE(cm.tn == oracle.tn);
        REQUIRE(cm.fn == oracle.fn);

        auto rep = metrics::report(cm);
        double total = static_cast<double>(n);
        REQUIRE(rep.accuracy ==
                Approx((oracle.tp + oracle.tn) / total).epsilon(1e-12));
        if (oracle.tp + oracle.fp > 0)
            REQUIRE(rep.precision ==
                    Approx(double(oracle.tp) / double(oracle.tp + oracle.fp)).epsilon(1e-12));
        else
            REQUIRE(rep.precision_degenerate);
        if (oracle.tp + oracle.fn > 0)
            REQUIRE(rep.recall ==
                    Approx(double(oracle.tp) / double(oracle.tp + oracle.fn)).epsilon(1e-12));
        else
            REQUIRE(rep.recall_degenerate);
    }
}

TEST_CASE("roc on perfectly separating scores") {
    std::vector<double> scores{0.9, 0.8, 0.2, 0.1};
    std::vector<int> labels{1, 1, 0, 0};
    auto curve = metrics::roc(scores, labels);
    CHECK(curve.auc == Approx(1.0).epsilon(1e-12));
    REQUIRE(!curve.points.empty());
    CHECK(curve.points.front().fpr == 0.0);
    CHECK(curve.points.front().tpr == 0.0);
    CHECK(curve.points.back().fpr == 1.0);
    CHECK(curve.points.back().tpr == 1.0);
}

TEST_CASE("roc on reversed ranking") {
    std::vector<double> scores{0.1, 0.2, 0.8, 0.9};
    std::vector<int> labels{1, 1, 0, 0};
    auto curve = metrics::roc(scores, labels);
    CHECK(curve.auc == Approx(0.0).epsilon(1e-12));
}

TEST_CASE("roc on constant scores is the diagonal") {
    std::vector<double> scores(10, 0.5);
    std::vector<int> labels{1, 0, 1, 0, 1, 0, 1, 0, 1, 0};
    auto curve = metrics::roc(scores, labels);
    CHECK(curve.auc == Approx(0.5).epsilon(1e-12));
}

TEST_CASE("roc requires both classes") {
    std::vector<double> scores{0.1, 0.9};
    std::vector<int> ones{1, 1};
    try {
        metrics::roc(scores, ones);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::undefined_metric);
    }
}

TEST_CASE("roc auc matches Mann-Whitney pair counting") {
    Rng rng(7777);
    for (int trial = 0; trial < 100; ++trial) {
        std::size_t n = 10 + rng.uniform_index(41);
        std::vector<double> scores(n);
        std::vector<int> labels(n);
        bool has_pos = false, has_neg = false;
        for (std::size_t i = 0; i < n; ++i) {
            // Coarse grid forces plenty of score ties.
            scores[i] = rng.uniform_index(8) / 7.0;
            labels[i] = rng.bernoulli(0.5) ? 1 : 0;
            (labels[i] ? has_pos : has_neg) = true;
        }
        if (!has_pos) labels[0] = 1;
        if (!has_neg) labels[1] = 0;
        auto curve = metrics::roc(scores, labels);
        double oracle = testutil::mann_whitney_auc(scores, labels);
        REQUIRE(curve.auc == Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("roc curve is monotone and auc is transform-invariant") {
    Rng rng(515);
    std::vector<double> scores(60);
    std::vector<int> labels(60);
    for (std::size_t i = 0; i < 60; ++i) {
        scores[i] = rng.uniform();
        labels[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    labels[0] = 1;
    labels[1] = 0;
    auto curve = metrics::roc(scores, labels);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
        CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
        CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
    }

    auto transformed = scores;
    for (double& s : transformed) s = std::exp(3.0 * s) + 10.0; // strictly increasing
    auto curve2 = metrics::roc(transformed, labels);
    CHECK(curve2.auc == Approx(curve.auc).epsilon(1e-12));
    REQUIRE(curve2.points.size() == curve.points.size());
}

TEST_CASE("regression report examples") {
    std::vector<double> targets{1.0, 2.0, 3.0};
    auto perfect = metrics::regression_report(targets, targets);
    CHECK(perfect.rmse == 0.0);
    CHECK(perfect.within_half == 1.0);
    CHECK(perfect.within_two == 1.0);

    // Residuals (target - prediction) of 0.4, -0.3, 1.9.
    std::vector<double> preds{0.6, 2.3, 1.1};
    auto rep = metrics::regression_report(preds, targets);
    REQUIRE(rep.residuals.size() == 3);
    CHECK(rep.residuals[0] == Approx(0.4).epsilon(1e-12));
    CHECK(rep.residuals[1] == Approx(-0.3).epsilon(1e-12));
    CHECK(rep.residuals[2] == Approx(1.9).epsilon(1e-12));
    CHECK(rep.within_half == Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(rep.within_two == Approx(1.0).epsilon(1e-12));
}

TEST_CASE("regression rmse agrees with the training loss definition") {
    Rng rng(606);
    std::vector<double> preds(25), targets(25);
    for (std::size_t i = 0; i < 25; ++i) {
        preds[i] = rng.normal();
        targets[i] = rng.normal();
    }
    auto rep = metrics::regression_report(preds, targets);
    Vector p(preds.begin(), preds.end());
    Vector t(targets.begin(), targets.end());
    double reference = nn::loss(nn::LossKind::mse_for_rmse, p, t);
    CHECK(rep.rmse == Approx(reference).epsilon(1e-12));
}

TEST_CASE("regression report length mismatch") {
    std::vector<double> a{1.0, 2.0}, b{1.0};
    CHECK_THROWS_AS(metrics::regression_report(a, b), Error);
}
