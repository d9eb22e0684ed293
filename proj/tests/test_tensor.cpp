#include "test_util.hpp"

using namespace prwk;
using prwk_test::matmul_oracle;
using prwk_test::rel_err;

TEST_CASE("matmul identity and projector", "[tensor]") {
    auto eye = Tensor<float>::from_vector({2, 2}, {1, 0, 0, 1});
    auto a = Tensor<float>::from_vector({2, 2}, {1, 2, 3, 4});
    auto r = matmul(eye, a);
    CHECK(std::vector<float>(r.value().begin(), r.value().end()) ==
          std::vector<float>{1, 2, 3, 4});

    auto proj = Tensor<float>::from_vector({2, 2}, {1, 0, 0, 0});
    auto b = Tensor<float>::from_vector({2, 2}, {5, 6, 7, 8});
    auto r2 = matmul(proj, b);
    CHECK(std::vector<float>(r2.value().begin(), r2.value().end()) ==
          std::vector<float>{5, 6, 0, 0});
}

TEST_CASE("matmul matches triple-loop oracle", "[tensor]") {
    Rng rng(11);
    std::vector<double> av(12), bv(8);
    for (auto& v : av) v = gaussian(rng);
    for (auto& v : bv) v = gaussian(rng);
    auto a = Tensor<float>::zeros({3, 4});
    auto b = Tensor<float>::zeros({4, 2});
    for (std::size_t i = 0; i < av.size(); ++i) a.value()[i] = static_cast<float>(av[i]);
    for (std::size_t i = 0; i < bv.size(); ++i) b.value()[i] = static_cast<float>(bv[i]);
    auto c = matmul(a, b);
    auto expect = matmul_oracle(av, bv, 3, 4, 2);
    for (std::size_t i = 0; i < expect.size(); ++i)
        CHECK(rel_err(c.value()[i], expect[i]) < 1e-6);
}

TEST_CASE("matmul rejects shape mismatch", "[tensor]") {
    auto a = Tensor<float>::zeros({2, 3});
    auto b = Tensor<float>::zeros({2, 3});
    CHECK_THROWS_AS(matmul(a, b), ShapeError);
}

TEST_CASE("elementwise analytic values", "[tensor]") {
    auto x = Tensor<double>::from_vector({3}, {-2.0, 0.0, 3.0});
    auto rs = relu_squared(x);
    CHECK(rs.value()[0] == 0.0);
    CHECK(rs.value()[2] == 9.0);
    CHECK(sigmoid(Tensor<double>::scalar(0.0)).item() == 0.5);
    CHECK(neg_exp_exp(Tensor<double>::scalar(0.0)).item() ==
          Catch::Approx(0.3678794411714423).epsilon(1e-12));
    CHECK(silu(Tensor<double>::scalar(0.0)).item() == 0.0);
    CHECK(tanh_op(Tensor<double>::scalar(0.0)).item() == 0.0);
}

TEST_CASE("broadcast add over rows and mismatch error", "[tensor]") {
    auto x = Tensor<double>::from_vector({2, 3}, {1, 2, 3, 4, 5, 6});
    auto row = Tensor<double>::from_vector({3}, {10, 20, 30});
    auto y = add(x, row);
    CHECK(y.value()[0] == 11.0);
    CHECK(y.value()[5] == 36.0);
    auto bad = Tensor<double>::zeros({2});
    CHECK_THROWS_AS(add(x, bad), ShapeError);
}

TEST_CASE("linear map gradient: loss = sum(W x)", "[tensor]") {
    auto w = Tensor<double>::from_vector({2, 2}, {1, 2, 3, 4});
    w.set_requires_grad();
    auto x = Tensor<double>::from_vector({2, 1}, {5, 7});
    auto loss = sum_all(matmul(w, x));
    backward(loss);
    // dW[i][j] = x[j] for every row i
    REQUIRE(w.has_grad());
    CHECK(w.grad()[0] == 5.0);
    CHECK(w.grad()[1] == 7.0);
    CHECK(w.grad()[2] == 5.0);
    CHECK(w.grad()[3] == 7.0);
    // x does not require grad -> untouched
    CHECK_FALSE(x.has_grad());
}

TEST_CASE("backward accumulates across calls and detached stays empty", "[tensor]") {
    auto w = Tensor<double>::scalar(2.0);
    w.set_requires_grad();
    auto detached = Tensor<double>::scalar(3.0);
    detached.set_requires_grad();
    auto loss = mul(w, w);  // dL/dw = 2w = 4
    backward(loss);
    CHECK(w.grad()[0] == Catch::Approx(4.0));
    backward(loss);
    CHECK(w.grad()[0] == Catch::Approx(8.0));
    CHECK_FALSE(detached.has_grad());
}

TEST_CASE("backward rejects non-scalar loss", "[tensor]") {
    auto x = Tensor<double>::from_vector({2}, {1, 2});
    x.set_requires_grad();
    CHECK_THROWS_AS(backward(add(x, x)), ContractError);
}

TEST_CASE("no-grad mode records nothing", "[tensor]") {
    auto w = Tensor<double>::scalar(2.0);
    w.set_requires_grad();
    NoGradGuard ng;
    auto y = mul(w, w);
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("finite differences agree on a composed graph", "[tensor]") {
    Rng rng(5);
    ParamStore<double> store;
    auto& w1 = store.add("w1", Tensor<double>::zeros({4, 3}));
    auto& w2 = store.add("w2", Tensor<double>::zeros({3, 2}));
    auto& bias = store.add("b", Tensor<double>::zeros({2}));
    prwk_test::randomize(w1, rng);
    prwk_test::randomize(w2, rng);
    prwk_test::randomize(bias, rng);
    auto x = Tensor<double>::zeros({2, 4});
    prwk_test::randomize(x, rng);

    auto loss_fn = [&] {
        auto h = silu(matmul(x, w1));
        auto y = add(matmul(tanh_op(h), w2), bias);
        return sum_all(mul(sigmoid(y), relu_squared(y)));
    };
    prwk_test::check_gradients(store, loss_fn, 1e-6);
}

TEST_CASE("col_max routes gradient to argmax rows", "[tensor]") {
    auto x = Tensor<double>::from_vector({2, 2}, {1, 3, 2, 0});
    x.set_requires_grad();
    auto m = col_max(x);
    CHECK(m.value()[0] == 2.0);
    CHECK(m.value()[1] == 3.0);
    backward(sum_all(m));
    CHECK(x.grad()[0] == 0.0);  // (0,0)=1 lost to (1,0)=2
    CHECK(x.grad()[1] == 1.0);
    CHECK(x.grad()[2] == 1.0);
    CHECK(x.grad()[3] == 0.0);
}

TEST_CASE("row_shift carries state row", "[tensor]") {
    auto x = Tensor<double>::from_vector({3, 2}, {1, 2, 3, 4, 5, 6});
    auto first = Tensor<double>::from_vector({2}, {9, 9});
    auto s = row_shift(x, first);
    CHECK(std::vector<double>(s.value().begin(), s.value().end()) ==
          std::vector<double>{9, 9, 1, 2, 3, 4});
}

TEST_CASE("group_norm normalizes per group and checks gradients", "[tensor]") {
    Rng rng(17);
    ParamStore<double> store;
    auto& g = store.add("g", Tensor<double>::filled({6}, 1.0));
    auto& b = store.add("b", Tensor<double>::zeros({6}));
    auto& x = store.add("x", Tensor<double>::zeros({3, 6}));
    prwk_test::randomize(x, rng, 1.0);
    prwk_test::randomize(g, rng, 0.3);
    prwk_test::randomize(b, rng, 0.3);

    auto y = group_norm(x, g, b, 2);
    // each (row, group) of x-hat has mean ~0: reconstruct via (y-b)/g
    for (std::size_t i = 0; i < 3; ++i) {
        double mean = 0;
        for (std::size_t j = 0; j < 3; ++j)
            mean += (y.value()[i * 6 + j] - b.value()[j]) / g.value()[j];
        CHECK(std::abs(mean / 3.0) < 1e-9);
    }
    auto loss_fn = [&] { return sum_all(relu_squared(group_norm(x, g, b, 2))); };
    prwk_test::check_gradients(store, loss_fn, 1e-6);
}

TEST_CASE("cross entropy of uniform logits is ln K", "[tensor]") {
    auto logits = Tensor<double>::zeros({4});
    auto l = cross_entropy_logits(logits, 2);
    CHECK(l.item() == Catch::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("memory counter tracks live tensor bytes", "[tensor]") {
    const long long before = tensor_mem().live();
    {
        auto t = Tensor<float>::zeros({1024});
        CHECK(tensor_mem().live() >= before + 4096);
    }
    CHECK(tensor_mem().live() == before);
}
