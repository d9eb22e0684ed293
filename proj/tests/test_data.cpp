#include "test_util.hpp"

#include <set>

#include "pathrwkv/bagio.hpp"
#include "pathrwkv/data.hpp"
#include "pathrwkv/dataset.hpp"

using namespace prwk;

namespace {

TileImage constant_tile(std::size_t p, float v) {
    TileImage img;
    img.px = p;
    img.pixels.assign(p * p, v);
    return img;
}

// Simple logistic probe trained with gradient descent; test-side oracle.
double probe_separability(const std::vector<std::vector<float>>& feats,
                          const std::vector<int>& labels) {
    const std::size_t n = feats.size(), d = feats[0].size();
    const std::size_t half = n / 2;
    std::vector<double> w(d, 0.0);
    double b = 0.0;
    for (int iter = 0; iter < 300; ++iter) {
        std::vector<double> gw(d, 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < half; ++i) {
            double z = b;
            for (std::size_t j = 0; j < d; ++j) z += w[j] * feats[i][j];
            const double p = 1.0 / (1.0 + std::exp(-z));
            const double err = p - labels[i];
            for (std::size_t j = 0; j < d; ++j) gw[j] += err * feats[i][j];
            gb += err;
        }
        for (std::size_t j = 0; j < d; ++j) w[j] -= 0.05 * gw[j] / half;
        b -= 0.05 * gb / half;
    }
    std::size_t hit = 0;
    for (std::size_t i = half; i < n; ++i) {
        double z = b;
        for (std::size_t j = 0; j < d; ++j) z += w[j] * feats[i][j];
        hit += (z > 0) == (labels[i] == 1);
    }
    return static_cast<double>(hit) / static_cast<double>(n - half);
}

}  // namespace

TEST_CASE("generate_slide labels track witness occupancy", "[data]") {
    SyntheticSlideSpec spec;
    spec.grid_w = 8;
    spec.grid_h = 8;
    spec.seed = 3;

    spec.witness_rate = 0.0;
    auto neg = generate_slide(spec);
    CHECK(neg.labels.at("witness") == 0.0);
    CHECK(neg.labels.at("grade") == 0.0);
    CHECK(std::abs(neg.labels.at("fraction")) < 0.02);
    CHECK_FALSE(neg.labels.count("extent"));  // undefined without witnesses

    spec.witness_rate = 1.0;
    auto pos = generate_slide(spec);
    CHECK(pos.labels.at("witness") == 1.0);
    CHECK(pos.labels.at("grade") == 3.0);
    CHECK(pos.labels.at("fraction") == Catch::Approx(1.0).margin(0.02));
    CHECK(pos.labels.count("extent") == 1);

    spec.grid_w = 0;
    CHECK_THROWS_AS(generate_slide(spec), ConfigError);
}

TEST_CASE("generate_slide is byte-deterministic per seed", "[data]") {
    SyntheticSlideSpec spec;
    spec.grid_w = 6;
    spec.grid_h = 5;
    spec.witness_rate = 0.3;
    spec.seed = 1234;
    auto a = generate_slide(spec);
    auto b = generate_slide(spec);
    REQUIRE(a.tiles.size() == b.tiles.size());
    for (std::size_t i = 0; i < a.tiles.size(); ++i)
        CHECK(std::memcmp(a.tiles[i].pixels.data(), b.tiles[i].pixels.data(),
                          a.tiles[i].pixels.size() * sizeof(float)) == 0);
    CHECK(a.labels == b.labels);
}

TEST_CASE("tile filters drop blank and low-variance tiles", "[data]") {
    // uniform tile: variance 0 -> dropped
    std::vector<TileImage> tiles;
    tiles.push_back(constant_tile(16, 0.5f));
    CHECK_THROWS_AS(filter_tiles(tiles), DataError);  // everything dropped

    // coverage 0.4 -> dropped even with high variance
    TileImage low_cov = constant_tile(16, 0.0f);
    for (std::size_t i = 0; i < 102; ++i)  // 102/256 ~ 0.398 above split
        low_cov.pixels[i] = 0.2f + 0.6f * static_cast<float>(i % 2);
    REQUIRE(tile_coverage(low_cov) < 0.5);
    REQUIRE(tile_variance(low_cov) > 0.01);

    // coverage 0.6, variance > 0.01 -> kept
    TileImage ok = constant_tile(16, 0.05f);
    for (std::size_t i = 0; i < 154; ++i)  // 154/256 ~ 0.6
        ok.pixels[i] = (i % 2) ? 0.9f : 0.4f;
    REQUIRE(tile_coverage(ok) >= 0.5);
    REQUIRE(tile_variance(ok) >= 0.01);

    // high-contrast full-tissue tile -> kept
    TileImage tissue = constant_tile(16, 0.3f);
    for (std::size_t i = 0; i < 256; i += 2) tissue.pixels[i] = 0.8f;

    tiles = {constant_tile(16, 0.5f), low_cov, ok, tissue};
    auto kept = filter_tiles(tiles);
    CHECK(kept == std::vector<std::size_t>{2, 3});

    // idempotence: filtering the kept subset keeps everything
    std::vector<TileImage> kept_tiles = {tiles[2], tiles[3]};
    CHECK(filter_tiles(kept_tiles).size() == 2);
}

TEST_CASE("stub embedder is deterministic and maps zero to tanh(bias)", "[data]") {
    StubEmbedder e(64, 16, 7);
    auto z = e.embed(constant_tile(16, 0.0f));
    for (std::size_t i = 0; i < z.size(); ++i)
        CHECK(z[i] == Catch::Approx(std::tanh(e.bias()[i])).margin(1e-7));
    SyntheticSlideSpec spec;
    spec.seed = 9;
    spec.witness_rate = 0.5;
    auto s = generate_slide(spec);
    auto f1 = e.embed(s.tiles[0]);
    auto f2 = e.embed(s.tiles[0]);
    CHECK(f1 == f2);
    StubEmbedder other(64, 16, 8);
    CHECK(other.embed(s.tiles[0]) != f1);
}

TEST_CASE("witness tiles are linearly separable from background", "[data]") {
    StubEmbedder e(96, 16, 7);
    std::vector<std::vector<float>> feats;
    std::vector<int> labels;
    Rng order_rng(17);
    for (int i = 0; i < 500; ++i) {
        SyntheticSlideSpec spec;
        spec.grid_w = 1;
        spec.grid_h = 2;
        spec.blank_rate = 0;
        spec.seed = 1000 + static_cast<std::uint64_t>(i);
        spec.witness_rate = (i % 2) ? 1.0 : 0.0;
        auto s = generate_slide(spec);
        feats.push_back(e.embed(s.tiles[0]));
        labels.push_back(i % 2);
    }
    CHECK(probe_separability(feats, labels) > 0.99);
}

TEST_CASE("morton codes and bit interleave", "[data]") {
    CHECK(morton_code(0u, 0u) == 0);
    CHECK(morton_code(1u, 0u) == 1);
    CHECK(morton_code(0u, 1u) == 2);
    CHECK(morton_code(1u, 1u) == 3);
    CHECK(morton_code(2u, 3u) == 14);  // interleave(10, 11) = 1110
    CHECK(morton_code(GridCoord{65535, 65535}) == 0xFFFFFFFFull);
    CHECK_THROWS_AS(morton_code(GridCoord{-1, 0}), ContractError);
}

TEST_CASE("positional embedding basics", "[data]") {
    std::vector<GridCoord> coords = {{0, 0}, {3, 5}};
    auto pe = positional_embedding<double>(coords, 8, true);
    // (0,0): all sin terms 0, all cos terms 1
    CHECK(pe.value()[0] == 0.0);
    CHECK(pe.value()[1] == 1.0);
    CHECK(pe.value()[4] == 0.0);
    CHECK(pe.value()[5] == 1.0);
    auto off = positional_embedding<double>(coords, 8, false);
    for (double v : off.value()) CHECK(v == 0.0);
    CHECK_THROWS_AS(positional_embedding<double>(coords, 10), ConfigError);
}

TEST_CASE("positional embeddings are distinct across a 64x64 grid", "[data]") {
    std::vector<GridCoord> coords;
    for (std::int32_t y = 0; y < 64; ++y)
        for (std::int32_t x = 0; x < 64; ++x) coords.push_back({x, y});
    auto pe = positional_embedding<double>(coords, 16, true);
    std::set<std::vector<double>> rows;
    for (std::size_t i = 0; i < coords.size(); ++i)
        rows.insert(std::vector<double>(pe.value().begin() + static_cast<long>(i * 16),
                                        pe.value().begin() + static_cast<long>((i + 1) * 16)));
    CHECK(rows.size() == coords.size());
}

TEST_CASE("tile samplers", "[data]") {
    TileBag bag;
    bag.slide_id = "s";
    bag.d_in = 2;
    bag.n = 16;
    for (std::int32_t y = 0; y < 4; ++y) {
        for (std::int32_t x = 0; x < 4; ++x) {
            bag.coords.push_back({x, y});
            bag.features.push_back(static_cast<float>(x));
            bag.features.push_back(static_cast<float>(y));
        }
    }
    SECTION("z-order keeps the whole bag sorted by morton code when it fits") {
        auto out = sample_tiles(bag, 100, SampleMethod::z_order, 5);
        REQUIRE(out.n == 16);
        for (std::size_t i = 1; i < out.n; ++i)
            CHECK(morton_code(out.coords[i - 1]) < morton_code(out.coords[i]));
    }
    SECTION("random sampling is seed-reproducible and caps the count") {
        auto a = sample_tiles(bag, 7, SampleMethod::random, 42);
        auto b = sample_tiles(bag, 7, SampleMethod::random, 42);
        auto c = sample_tiles(bag, 7, SampleMethod::random, 43);
        CHECK(a.n == 7);
        CHECK(a.features == b.features);
        CHECK(a.coords == b.coords);
        CHECK(a.coords != c.coords);
        // unique coords, subset of the bag
        std::set<std::pair<int, int>> seen;
        for (auto& co : a.coords) seen.insert({co.x, co.y});
        CHECK(seen.size() == a.n);
    }
    SECTION("z-order run is contiguous in morton order") {
        auto out = sample_tiles(bag, 5, SampleMethod::z_order, 11);
        REQUIRE(out.n == 5);
        // codes 0..15 on a 4x4 grid: consecutive codes (mod 16)
        const auto first = morton_code(out.coords[0]);
        for (std::size_t i = 0; i < out.n; ++i)
            CHECK(morton_code(out.coords[i]) == (first + i) % 16);
    }
}

TEST_CASE("z-order sampling preserves locality better than random", "[data]") {
    // average grid distance between consecutive sampled tiles
    TileBag bag;
    bag.d_in = 1;
    bag.n = 0;
    for (std::int32_t y = 0; y < 20; ++y)
        for (std::int32_t x = 0; x < 20; ++x) {
            bag.coords.push_back({x, y});
            bag.features.push_back(0.0f);
            ++bag.n;
        }
    auto mean_step = [](const TileBag& b) {
        double acc = 0;
        for (std::size_t i = 1; i < b.n; ++i)
            acc += std::abs(b.coords[i].x - b.coords[i - 1].x) +
                   std::abs(b.coords[i].y - b.coords[i - 1].y);
        return acc / static_cast<double>(b.n - 1);
    };
    int z_wins = 0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        auto z = sample_tiles(bag, 100, SampleMethod::z_order, seed);
        auto r = sample_tiles(bag, 100, SampleMethod::random, seed);
        z_wins += mean_step(z) < mean_step(r);
    }
    CHECK(z_wins >= 19);
}

TEST_CASE("bag file round trip and corruption", "[data]") {
    Rng rng(12);
    TileBag bag;
    bag.slide_id = "bag_rt";
    bag.n = 9;
    bag.d_in = 5;
    bag.features.resize(45);
    for (auto& f : bag.features) f = static_cast<float>(gaussian(rng));
    for (std::size_t i = 0; i < 9; ++i)
        bag.coords.push_back({static_cast<std::int32_t>(i * 3),
                              static_cast<std::int32_t>(7 - i)});
    const std::string path = "bag_rt.prwk";
    write_bag(path, bag);

    SECTION("round trip is bit-exact") {
        auto back = read_bag(path);
        CHECK(back.n == bag.n);
        CHECK(back.d_in == bag.d_in);
        CHECK(std::memcmp(back.features.data(), bag.features.data(),
                          bag.features.size() * sizeof(float)) == 0);
        CHECK(back.coords == bag.coords);
    }
    SECTION("minimal bag has exact file size") {
        TileBag one;
        one.slide_id = "one";
        one.n = 1;
        one.d_in = 5;
        one.features = {1, 2, 3, 4, 5};
        one.coords = {{2, 3}};
        write_bag("bag_one.prwk", one);
        CHECK(std::filesystem::file_size("bag_one.prwk") == 16 + 5 * 4 + 8);
        std::filesystem::remove("bag_one.prwk");
    }
    SECTION("wrong magic is rejected") {
        std::ofstream os(path, std::ios::binary | std::ios::trunc);
        os << "NOPE" << std::string(32, '\0');
        os.close();
        CHECK_THROWS_AS(read_bag(path), DataError);
    }
    SECTION("truncation reports a byte offset") {
        std::filesystem::resize_file(path, 30);
        try {
            read_bag(path);
            FAIL("expected DataError");
        } catch (const DataError& e) {
            CHECK(e.offset >= 0);
        }
    }
    std::filesystem::remove(path);
}

TEST_CASE("manifest round trip with missing labels", "[data]") {
    Manifest m;
    m.task_names = {"witness", "grade", "fraction", "extent"};
    SlideRecord r1{"s0", "s0.prwk", 12, {{"witness", 1}, {"grade", 2}, {"fraction", 0.031}}};
    SlideRecord r2{"s1", "s1.prwk", 9, {{"witness", 0}, {"fraction", 0.0}}};
    m.records = {r1, r2};
    write_manifest("manifest_rt.tsv", m);
    auto back = read_manifest("manifest_rt.tsv");
    REQUIRE(back.records.size() == 2);
    CHECK(back.task_names == m.task_names);
    CHECK(back.records[0].labels == r1.labels);
    CHECK(back.records[1].labels == r2.labels);
    CHECK(back.records[1].n_tiles == 9);
    std::filesystem::remove("manifest_rt.tsv");
}

TEST_CASE("dataset generation is deterministic and filters blanks", "[data]") {
    GenConfig cfg;
    cfg.slides = 6;
    cfg.grid_w = 8;
    cfg.grid_h = 8;
    cfg.witness_rate = 0.3;
    cfg.blank_rate = 0.2;
    cfg.d_in = 16;
    cfg.seed = 77;
    auto s1 = generate_dataset(cfg, "gentest_a", 1, true);
    auto s2 = generate_dataset(cfg, "gentest_b", 2, true);  // worker count irrelevant
    CHECK(s1.manifest_hash == s2.manifest_hash);
    CHECK(s1.kept_tiles < s1.total_tiles);  // blanks got dropped
    CHECK(s1.slides == 6);

    auto ds = load_dataset("gentest_a/manifest.tsv");
    CHECK(ds.size() == 6);
    CHECK(ds.bag(0).d_in == 16);
    // refusal without force
    CHECK_THROWS_AS(generate_dataset(cfg, "gentest_a", 1, false), ConfigError);
    std::filesystem::remove_all("gentest_a");
    std::filesystem::remove_all("gentest_b");
}
