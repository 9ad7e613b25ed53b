#include <cmath>

#include "agtm/graph.hpp"
#include "agtm/numerics.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace agtm;
using test::random_matrix;

namespace {

InteractionSet single_edge() { return InteractionSet({"u0"}, {"i0"}, {{0, 0}}); }

// u0-{i0,i1}, u1-{i0}
InteractionSet two_by_two() { return InteractionSet({"u0", "u1"}, {"i0", "i1"}, {{0, 0}, {0, 1}, {1, 0}}); }

Matrix column(std::initializer_list<double> v) {
  Matrix m(v.size(), 1);
  std::copy(v.begin(), v.end(), m.data().begin());
  return m;
}

double inner(const Matrix& a, const Matrix& b) { return dot(a.data(), b.data()); }

}  // namespace

TEST_SUITE("graph") {

TEST_CASE("edge norms from degrees") {
  CHECK(InteractionGraph(single_edge()).norm(0, 0) == 1.0);
  const InteractionGraph g(two_by_two());
  CHECK(g.norm(0, 0) == 0.5);
  CHECK(g.norm(0, 1) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  // deg(u1) = 1, deg(i0) = 2
  CHECK(g.norm(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(g.norm(1, 1) == 0.0);
  CHECK_FALSE(g.has_edge(1, 1));
}

TEST_CASE("user and item adjacency are transposes with sorted lists") {
  const auto data = test::random_interactions(12, 15, 100, 3);
  const InteractionGraph g(data);
  std::vector<std::vector<bool>> dense(12, std::vector<bool>(15, false));
  for (const auto& p : data.pairs()) dense[p.user][p.item] = true;
  std::size_t edges = 0;
  for (std::size_t u = 0; u < 12; ++u) {
    const auto nb = g.user_neighbors(u);
    CHECK(std::is_sorted(nb.begin(), nb.end()));
    for (auto i : nb) CHECK(dense[u][i]);
    edges += nb.size();
  }
  CHECK(edges == data.size());
  CHECK(g.n_edges() == data.size());
  for (std::size_t i = 0; i < 15; ++i) {
    const auto nb = g.item_neighbors(i);
    CHECK(std::is_sorted(nb.begin(), nb.end()));
    std::size_t count = 0;
    for (std::size_t u = 0; u < 12; ++u) count += dense[u][i];
    CHECK(nb.size() == count);
    for (std::size_t n = 0; n < nb.size(); ++n) {
      CHECK(dense[nb[n]][i]);
      CHECK(g.item_norms(i)[n] ==
            doctest::Approx(1.0 / std::sqrt(double(g.user_degree(nb[n])) * double(g.item_degree(i)))).epsilon(1e-15));
    }
  }
}

TEST_CASE("propagation examples") {
  SUBCASE("single edge swaps sides") {
    const auto [nu, ni] = propagate(column({2.0}), column({1.0}), InteractionGraph(single_edge()));
    CHECK(nu(0, 0) == 1.0);
    CHECK(ni(0, 0) == 2.0);
  }
  SUBCASE("two by two") {
    const auto [nu, ni] = propagate(column({2.0, 4.0}), column({1.0, 3.0}), InteractionGraph(two_by_two()));
    CHECK(nu(0, 0) == doctest::Approx(2.6213203435596424).epsilon(1e-15));
    // 0.5 * 2 + (1/sqrt 2) * 4
    CHECK(ni(0, 0) == doctest::Approx(1.0 + 4.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(nu(1, 0) == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
    CHECK(ni(1, 0) == doctest::Approx(2.0 / std::sqrt(2.0)).epsilon(1e-15));
  }
  SUBCASE("zero input") {
    const InteractionGraph g(two_by_two());
    const auto [nu, ni] = propagate(Matrix(2, 3), Matrix(2, 3), g);
    CHECK(nu == Matrix(2, 3));
    CHECK(ni == Matrix(2, 3));
  }
  SUBCASE("dimension mismatch") {
    const InteractionGraph g(two_by_two());
    CHECK_THROWS(propagate(Matrix(3, 2), Matrix(2, 2), g));
    CHECK_THROWS(propagate(Matrix(2, 2), Matrix(2, 3), g));
  }
}

TEST_CASE("propagation matches the dense normalized adjacency and is linear") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const std::size_t nu = 1 + rng.below(20), ni = 1 + rng.below(20);
    const auto data = test::random_interactions(nu, ni, rng.below(60), seed + 100);
    const InteractionGraph g(data);
    const auto a = test::dense_norm_adjacency(data);
    const Matrix eu = random_matrix(nu, 3, seed + 200), ei = random_matrix(ni, 3, seed + 300);
    const auto [pu, pi] = propagate(eu, ei, g);
    const auto [ou, oi] = test::dense_propagate(a, eu, ei);
    CHECK(test::max_abs_diff(pu, ou) <= 1e-10);
    CHECK(test::max_abs_diff(pi, oi) <= 1e-10);

    const Matrix fu = random_matrix(nu, 3, seed + 400), fi = random_matrix(ni, 3, seed + 500);
    Matrix mu = eu, mi = ei;
    for (std::size_t j = 0; j < mu.size(); ++j) mu.data()[j] = 2.0 * eu.data()[j] - 0.5 * fu.data()[j];
    for (std::size_t j = 0; j < mi.size(); ++j) mi.data()[j] = 2.0 * ei.data()[j] - 0.5 * fi.data()[j];
    const auto [qu, qi] = propagate(fu, fi, g);
    const auto [mu2, mi2] = propagate(mu, mi, g);
    for (std::size_t j = 0; j < mu2.size(); ++j)
      CHECK(std::abs(mu2.data()[j] - (2.0 * pu.data()[j] - 0.5 * qu.data()[j])) <= 1e-10);
    for (std::size_t j = 0; j < mi2.size(); ++j)
      CHECK(std::abs(mi2.data()[j] - (2.0 * pi.data()[j] - 0.5 * qi.data()[j])) <= 1e-10);
  }
}

TEST_CASE("adjoint identity") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto data = test::random_interactions(9, 7, 20, seed);
    const InteractionGraph g(data);
    const Matrix xu = random_matrix(9, 4, seed + 1), xi = random_matrix(7, 4, seed + 2);
    const Matrix yu = random_matrix(9, 4, seed + 3), yi = random_matrix(7, 4, seed + 4);
    const auto [au, ai] = propagate(xu, xi, g);
    const auto [bu, bi] = propagate_backward(yu, yi, g);
    CHECK(std::abs(inner(au, yu) + inner(ai, yi) - inner(xu, bu) - inner(xi, bi)) <= 1e-9);
  }
  const auto [zu, zi] = propagate_backward(Matrix(1, 2), Matrix(1, 2), InteractionGraph(single_edge()));
  CHECK(zu == Matrix(1, 2));
  CHECK(zi == Matrix(1, 2));
  const auto [su, si] = propagate_backward(column({5.0}), column({7.0}), InteractionGraph(single_edge()));
  CHECK(su(0, 0) == 7.0);
  CHECK(si(0, 0) == 5.0);
}

TEST_CASE("propagation adjoint passes finite differences") {
  // 4 users, 4 items, 10 edges.
  const InteractionSet data({"a", "b", "c", "d"}, {"w", "x", "y", "z"},
                            {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 3}, {2, 0}, {2, 2}, {2, 3}, {3, 3}, {3, 1}});
  const InteractionGraph g(data);
  const Matrix eu = random_matrix(4, 2, 7), ei = random_matrix(4, 2, 8);
  const auto loss = [&](std::span<const double> flat) {
    Matrix u(4, 2), i(4, 2);
    std::copy_n(flat.begin(), 8, u.data().begin());
    std::copy_n(flat.begin() + 8, 8, i.data().begin());
    const auto [nu, ni] = propagate(u, i, g);
    // Cubic so the gradient is not constant.
    double s = 0.0;
    for (double v : nu.data()) s += v * v * v / 3.0 + v;
    for (double v : ni.data()) s += v * v * v / 3.0 - 2.0 * v;
    return s;
  };
  const auto [nu, ni] = propagate(eu, ei, g);
  Matrix gu = nu, gi = ni;
  for (double& v : gu.data()) v = v * v + 1.0;
  for (double& v : gi.data()) v = v * v - 2.0;
  const auto [bu, bi] = propagate_backward(gu, gi, g);
  std::vector<double> theta(eu.data().begin(), eu.data().end()), analytic(bu.data().begin(), bu.data().end());
  theta.insert(theta.end(), ei.data().begin(), ei.data().end());
  analytic.insert(analytic.end(), bi.data().begin(), bi.data().end());
  const auto report = finite_diff_check(loss, theta, analytic, {});
  INFO("max relative error " << report.max_rel_error);
  CHECK(report.passed);
}

TEST_CASE("layer combination") {
  SUBCASE("identical layers in mean mode") {
    const Matrix v = random_matrix(3, 2, 1);
    LayerStack s{{v, v, v}, {v, v, v}};
    const auto [eu, ei] = combine_layers(s, CombineMode::mean);
    CHECK(test::max_abs_diff(eu, v) <= 1e-15);
    CHECK(test::max_abs_diff(ei, v) <= 1e-15);
  }
  SUBCASE("L=1 zero and two") {
    LayerStack s{{column({0.0}), column({2.0})}, {column({0.0}), column({2.0})}};
    CHECK(combine_layers(s, CombineMode::mean).first(0, 0) == 1.0);
    CHECK(combine_layers(s, CombineMode::paper_literal).first(0, 0) == 2.0);
  }
  SUBCASE("L=3 random stack against elementwise average") {
    LayerStack s;
    for (std::uint64_t l = 0; l < 4; ++l) {
      s.user_layers.push_back(random_matrix(3, 2, 10 + l));
      s.item_layers.push_back(random_matrix(5, 2, 20 + l));
    }
    const auto [eu, ei] = combine_layers(s, CombineMode::mean);
    for (std::size_t j = 0; j < eu.size(); ++j) {
      double sum = 0.0;
      for (const auto& m : s.user_layers) sum += m.data()[j];
      CHECK(eu.data()[j] == doctest::Approx(sum / 4.0).epsilon(1e-14));
    }
    for (std::size_t j = 0; j < ei.size(); ++j) {
      double sum = 0.0;
      for (const auto& m : s.item_layers) sum += m.data()[j];
      CHECK(ei.data()[j] == doctest::Approx(sum / 4.0).epsilon(1e-14));
      CHECK(combine_layers(s, CombineMode::paper_literal).second.data()[j] ==
            doctest::Approx(sum / 3.0).epsilon(1e-14));
    }
  }
  SUBCASE("L=0") {
    const Matrix v = random_matrix(2, 2, 5);
    LayerStack s{{v}, {v}};
    CHECK(combine_layers(s, CombineMode::mean).first == v);
    CHECK_THROWS_AS(combine_layers(s, CombineMode::paper_literal), std::domain_error);
  }
}

TEST_CASE("propagate_layers builds L+1 layers") {
  const InteractionGraph g(two_by_two());
  const auto s = propagate_layers(column({2.0, 4.0}), column({1.0, 3.0}), g, 3);
  CHECK(s.layers() == 3);
  CHECK(s.user_layers.size() == 4);
  const auto [u1, i1] = propagate(s.user_layers[1], s.item_layers[1], g);
  CHECK(s.user_layers[2] == u1);
  CHECK(s.item_layers[2] == i1);
}

}  // TEST_SUITE
