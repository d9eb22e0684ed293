#include "test_util.hpp"

#include "pathrwkv/aggregate.hpp"

using namespace prwk;

namespace {

ModelConfig tiny_config(std::size_t tasks = 2) {
    ModelConfig cfg;
    cfg.d_in = 12;
    cfg.d_model = 16;
    cfg.depth = 2;
    cfg.heads = 2;
    cfg.r_lora = 4;
    cfg.r_decay = 4;
    cfg.d_cm = 24;
    cfg.tasks.clear();
    cfg.tasks.push_back({"cls", TaskKind::classification, 3});
    if (tasks > 1) cfg.tasks.push_back({"reg", TaskKind::regression, 1});
    return cfg;
}

TileBag random_bag(std::size_t n, std::size_t d_in, std::uint64_t seed) {
    Rng rng(seed);
    TileBag bag;
    bag.slide_id = "t";
    bag.n = n;
    bag.d_in = d_in;
    bag.features.resize(n * d_in);
    for (auto& f : bag.features) f = static_cast<float>(gaussian(rng) * 0.5);
    bag.coords.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        bag.coords[i] = {static_cast<std::int32_t>(i % 37),
                         static_cast<std::int32_t>(i / 37)};
    return bag;
}

}  // namespace

TEST_CASE("comb monoid basics", "[aggregate]") {
    std::vector<double> x = {1.0, -2.0, 5.0};
    auto id = comb_identity<double>(3);
    CHECK(comb(x, id) == x);
    CHECK(comb(id, x) == x);
    CHECK(comb(x, x) == x);
    CHECK_THROWS_AS(comb(x, comb_identity<double>(2)), ShapeError);
}

TEST_CASE("comb monoid laws on random vectors", "[aggregate]") {
    Rng rng(4);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> a(5), b(5), c(5);
        for (std::size_t i = 0; i < 5; ++i) {
            a[i] = gaussian(rng);
            b[i] = gaussian(rng);
            c[i] = gaussian(rng);
        }
        CHECK(comb(comb(a, b), c) == comb(a, comb(b, c)));
        CHECK(comb(a, b) == comb(b, a));
        CHECK(comb(a, a) == a);
    }
}

TEST_CASE("local summary basics and column-scan oracle", "[aggregate]") {
    std::vector<double> rows = {1, 3, 2, 0};
    auto s = local_summary(rows, 2);
    CHECK(s == std::vector<double>{2, 3});

    std::vector<double> one = {4, 7, -1};
    CHECK(local_summary(one, 3) == one);

    bool empty = false;
    auto idv = local_summary(std::vector<double>{}, 3, &empty);
    CHECK(empty);
    CHECK(idv == comb_identity<double>(3));

    Rng rng(8);
    std::vector<double> m(20 * 6);
    for (auto& v : m) v = gaussian(rng);
    auto got = local_summary(m, 6);
    for (std::size_t j = 0; j < 6; ++j) {  // independent column scan
        double best = -1e300;
        for (std::size_t i = 0; i < 20; ++i) best = std::max(best, m[i * 6 + j]);
        CHECK(got[j] == best);
    }
}

TEST_CASE("fold of bag summaries equals the global summary bit-exactly", "[aggregate]") {
    Rng rng(15);
    const std::size_t n = 100, d = 7;
    std::vector<double> rows(n * d);
    for (auto& v : rows) v = gaussian(rng);
    // random partition into 7 bags
    std::vector<std::size_t> owner(n);
    for (auto& o : owner) o = uniform_index(rng, 7);
    auto acc = comb_identity<double>(d);
    for (std::size_t b = 0; b < 7; ++b) {
        std::vector<double> part;
        for (std::size_t i = 0; i < n; ++i)
            if (owner[i] == b)
                part.insert(part.end(), rows.begin() + static_cast<long>(i * d),
                            rows.begin() + static_cast<long>((i + 1) * d));
        bool empty = false;
        acc = comb(acc, local_summary(part, d, &empty));
    }
    CHECK(acc == local_summary(rows, d));
}

TEST_CASE("plan_bags arithmetic", "[aggregate]") {
    auto p = plan_bags(10, 4);
    REQUIRE(p.ranges.size() == 3);
    CHECK(p.ranges[0] == std::make_pair(std::size_t(0), std::size_t(4)));
    CHECK(p.ranges[2] == std::make_pair(std::size_t(8), std::size_t(10)));

    CHECK(plan_bags(4, 4).ranges.size() == 1);

    auto big = plan_bags(2000, 512);
    REQUIRE(big.ranges.size() == 4);
    CHECK(big.ranges[3].second - big.ranges[3].first == 464);

    CHECK_THROWS_AS(plan_bags(0, 4), DataError);
    CHECK_THROWS_AS(plan_bags(5, 0), ContractError);
}

TEST_CASE("recurrent inference equals single-pass at any bag size", "[aggregate]") {
    PathRwkv<double> model(tiny_config(), 99);
    const auto bag = random_bag(257, 12, 31);

    NoGradGuard ng;
    auto full_preds = model.forward_slide(bag);
    std::vector<std::vector<double>> want;
    for (auto& p : full_preds) want.emplace_back(p.value().begin(), p.value().end());

    for (std::size_t bag_size : {std::size_t(1), std::size_t(7), std::size_t(64),
                                 std::size_t(300)}) {
        auto got = infer_slide_outputs(model, chunk_source(bag, bag_size));
        REQUIRE(got.size() == want.size());
        for (std::size_t t = 0; t < want.size(); ++t)
            for (std::size_t j = 0; j < want[t].size(); ++j)
                CHECK(std::abs(got[t][j] - want[t][j]) < 1e-10);
    }
}

TEST_CASE("inference memory tracks bag size, not slide length", "[aggregate]") {
    PathRwkv<double> model(tiny_config(), 7);
    InferStats<double> small_n, large_n, large_bag;
    (void)infer_slide(model, chunk_source(random_bag(1024, 12, 1), 128), &small_n);
    (void)infer_slide(model, chunk_source(random_bag(4096, 12, 2), 128), &large_n);
    (void)infer_slide(model, chunk_source(random_bag(4096, 12, 3), 1024), &large_bag);
    // 4x the tiles at the same bag size: nearly flat peak
    const double ratio = static_cast<double>(large_n.peak_live_bytes) /
                         static_cast<double>(small_n.peak_live_bytes);
    CHECK(ratio < 1.15);
    // 8x the bag size: clearly larger peak
    CHECK(large_bag.peak_live_bytes > 2 * large_n.peak_live_bytes);
}

TEST_CASE("infer_slide skips empty bags and rejects empty slides", "[aggregate]") {
    PathRwkv<double> model(tiny_config(), 5);
    const auto bag = random_bag(16, 12, 77);
    std::size_t calls = 0;
    auto source = [&]() -> std::optional<BagBatch> {
        ++calls;
        if (calls == 1) return BagBatch{};  // empty after filtering: skipped
        if (calls == 2) {
            BagBatch b;
            b.n = bag.n;
            b.features = bag.features;
            b.coords = bag.coords;
            return b;
        }
        return std::nullopt;
    };
    InferStats<double> stats;
    auto feats = infer_slide(model, source, &stats);
    CHECK(stats.skipped_bags == 1);
    CHECK(stats.tiles == 16);
    CHECK(feats.size() == 2);

    auto empty_source = []() -> std::optional<BagBatch> { return std::nullopt; };
    CHECK_THROWS_AS(infer_slide(model, empty_source), DataError);
}

TEST_CASE("slide_ave and slide_max", "[aggregate]") {
    std::vector<double> preds = {0, 1, 1, 0};
    auto ave = slide_ave(preds.data(), 2, 2);
    auto mx = slide_max(preds.data(), 2, 2);
    CHECK(ave == std::vector<double>{0.5, 0.5});
    CHECK(mx == std::vector<double>{1.0, 1.0});

    std::vector<double> constant = {3, 4, 3, 4, 3, 4};
    CHECK(slide_ave(constant.data(), 3, 2) == std::vector<double>{3, 4});
    CHECK(slide_max(constant.data(), 3, 2) == std::vector<double>{3, 4});

    Rng rng(6);
    std::vector<double> m(15 * 4);
    for (auto& v : m) v = gaussian(rng);
    auto got_ave = slide_ave(m.data(), 15, 4);
    auto got_max = slide_max(m.data(), 15, 4);
    for (std::size_t j = 0; j < 4; ++j) {
        double s = 0, best = -1e300;
        for (std::size_t i = 0; i < 15; ++i) {
            s += m[i * 4 + j];
            best = std::max(best, m[i * 4 + j]);
        }
        CHECK(got_ave[j] == Catch::Approx(s / 15.0).epsilon(1e-14));
        CHECK(got_max[j] == best);
    }
    CHECK_THROWS_AS(slide_ave(m.data(), 0, 4), ContractError);
}

TEST_CASE("subset prediction variance: zero at full set, positive at one tile",
          "[aggregate]") {
    PathRwkv<double> model(tiny_config(1), 13);
    const auto bag = random_bag(40, 12, 21);
    Rng rng(5);
    const double v_full = subset_prediction_variance(model, bag, 40, 50, rng);
    CHECK(v_full == 0.0);
    const double v_one = subset_prediction_variance(model, bag, 1, 50, rng);
    CHECK(v_one > 0.0);
    const double v_mid = subset_prediction_variance(model, bag, 16, 50, rng);
    CHECK(v_mid <= v_one);
    CHECK_THROWS_AS(subset_prediction_variance(model, bag, 0, 10, rng), ContractError);
    CHECK_THROWS_AS(subset_prediction_variance(model, bag, 41, 10, rng), ContractError);
    CHECK_THROWS_AS(subset_prediction_variance(model, bag, 4, 1, rng), ContractError);
}
