#include "oodlab/ranking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/students_t.hpp>

namespace oodlab {

void BlockTable::validate() const {
  require(values.rows() >= 2 && values.cols() >= 2, ErrorKind::InvalidInput,
          "block table needs at least 2 blocks and 2 methods");
  require(method_ids.empty() || static_cast<Index>(method_ids.size()) == values.cols(), ErrorKind::InvalidInput,
          "block table: method id count does not match columns");
  require(block_keys.empty() || static_cast<Index>(block_keys.size()) == values.rows(), ErrorKind::InvalidInput,
          "block table: block key count does not match rows");
  for (Index i = 0; i < values.rows(); ++i) {
    for (Index j = 0; j < values.cols(); ++j) {
      if (!std::isfinite(values(i, j))) {
        const std::string block = block_keys.empty() ? std::to_string(i) : block_keys[static_cast<std::size_t>(i)];
        const std::string method = method_ids.empty() ? std::to_string(j) : method_ids[static_cast<std::size_t>(j)];
        fail(ErrorKind::IncompleteBlock, "block '" + block + "' has no finite value for '" + method + "'");
      }
    }
  }
}

Matrix rank_blocks(const BlockTable& table) {
  table.validate();
  const Index k = table.methods();
  Matrix ranks(table.blocks(), k);
  std::vector<Index> order(static_cast<std::size_t>(k));
  for (Index i = 0; i < table.blocks(); ++i) {
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return table.values(i, a) < table.values(i, b); });
    Index s = 0;
    while (s < k) {
      Index e = s;
      while (e < k && table.values(i, order[static_cast<std::size_t>(e)]) ==
                          table.values(i, order[static_cast<std::size_t>(s)])) {
        ++e;
      }
      const double mid = 0.5 * static_cast<double>(s + 1 + e);
      for (Index t = s; t < e; ++t) ranks(i, order[static_cast<std::size_t>(t)]) = mid;
      s = e;
    }
  }
  return ranks;
}

FriedmanResult friedman(const Matrix& ranks, bool tie_correction) {
  const Index n = ranks.rows();
  const Index k = ranks.cols();
  require(n >= 2 && k >= 2, ErrorKind::InvalidInput, "Friedman test needs N >= 2 and k >= 2");
  const double nd = static_cast<double>(n);
  const double kd = static_cast<double>(k);
  FriedmanResult r;
  r.mean_ranks = ranks.colwise().mean().transpose();
  r.q = 12.0 * nd / (kd * (kd + 1.0)) * r.mean_ranks.squaredNorm() - 3.0 * nd * (kd + 1.0);
  if (tie_correction) {
    double ties = 0.0;
    for (Index i = 0; i < n; ++i) {
      std::vector<double> row(static_cast<std::size_t>(k));
      for (Index j = 0; j < k; ++j) row[static_cast<std::size_t>(j)] = ranks(i, j);
      std::sort(row.begin(), row.end());
      std::size_t s = 0;
      while (s < row.size()) {
        std::size_t e = s;
        while (e < row.size() && row[e] == row[s]) ++e;
        const double t = static_cast<double>(e - s);
        ties += t * t * t - t;
        s = e;
      }
    }
    const double c = 1.0 - ties / (nd * (kd * kd * kd - kd));
    r.q = c > 1e-15 ? r.q / c : 0.0;
  }
  r.q = std::max(r.q, 0.0);
  const double denom = nd * (kd - 1.0) - r.q;
  if (denom <= 1e-12 * nd * (kd - 1.0)) {
    r.f = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    r.perfect_agreement = true;
    return r;
  }
  r.f = (nd - 1.0) * r.q / denom;
  const boost::math::fisher_f_distribution<double> dist(kd - 1.0, (kd - 1.0) * (nd - 1.0));
  r.p_value = r.f <= 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(dist, r.f));
  return r;
}

double conover_se(Index k, Index n) {
  require(k >= 2 && n >= 1, ErrorKind::InvalidInput, "Conover SE needs k >= 2 and N >= 1");
  const double kd = static_cast<double>(k);
  return std::sqrt(kd * (kd + 1.0) / (6.0 * static_cast<double>(n)));
}

Matrix conover_pairwise(const Matrix& ranks, ConoverReference reference) {
  const Index n = ranks.rows();
  const Index k = ranks.cols();
  require(n >= 2 && k >= 2, ErrorKind::InvalidInput, "Conover comparisons need N >= 2 and k >= 2");
  const Vector mean = ranks.colwise().mean().transpose();
  const double se = conover_se(k, n);
  const double df = static_cast<double>((k - 1) * (n - 1));
  const boost::math::students_t_distribution<double> t_dist(df);
  Matrix p = Matrix::Ones(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j) {
      const double stat = std::abs(mean[i] - mean[j]) / se;
      double pv = 1.0;
      if (stat > 0.0) {
        pv = reference == ConoverReference::Normal
                 ? std::erfc(stat / std::sqrt(2.0))
                 : 2.0 * boost::math::cdf(boost::math::complement(t_dist, stat));
      }
      p(i, j) = p(j, i) = std::min(1.0, pv);
    }
  }
  return p;
}

std::vector<double> holm_adjust(std::span<const double> p_values) {
  const std::size_t m = p_values.size();
  require(m >= 1, ErrorKind::InvalidInput, "Holm adjustment needs at least one p-value");
  for (double p : p_values) {
    require(p >= 0.0 && p <= 1.0, ErrorKind::InvalidInput, "p-values must lie in [0, 1]");
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> out(m);
  double running = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    const double scaled = std::min(1.0, static_cast<double>(m - r) * p_values[order[r]]);
    running = std::max(running, scaled);
    out[order[r]] = running;
  }
  return out;
}

Matrix holm_adjust_matrix(const Matrix& p_matrix) {
  const Index k = p_matrix.rows();
  require(p_matrix.cols() == k && k >= 2, ErrorKind::InvalidInput, "Holm: p-matrix must be square with k >= 2");
  std::vector<double> flat;
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j) flat.push_back(p_matrix(i, j));
  }
  const std::vector<double> adj = holm_adjust(flat);
  Matrix out = Matrix::Ones(k, k);
  std::size_t t = 0;
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j, ++t) out(i, j) = out(j, i) = adj[t];
  }
  return out;
}

void Graph::connect(Index i, Index j) {
  require(i != j, ErrorKind::InvalidInput, "graph: self-loops are not allowed");
  adjacency[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = 1;
  adjacency[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = 1;
}

Index Graph::edge_count() const {
  Index count = 0;
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) count += edge(i, j) ? 1 : 0;
  }
  return count;
}

Graph indifference_graph(const Matrix& adjusted_p, double alpha) {
  const Index k = adjusted_p.rows();
  require(adjusted_p.cols() == k, ErrorKind::InvalidInput, "indifference graph: p-matrix must be square");
  Graph g(k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = i + 1; j < k; ++j) {
      if (adjusted_p(i, j) >= alpha) g.connect(i, j);
    }
  }
  return g;
}

namespace {

void expand(const Graph& g, std::vector<Index>& r, std::vector<Index> p, std::vector<Index> x,
            std::vector<std::vector<Index>>& out) {
  if (p.empty()) {
    if (x.empty()) {
      std::vector<Index> clique = r;
      std::sort(clique.begin(), clique.end());
      out.push_back(std::move(clique));
    }
    return;
  }
  // Pivot u in P u X with the most neighbours in P.
  Index pivot = -1;
  std::ptrdiff_t best = -1;
  for (const std::vector<Index>* set : {&p, &x}) {
    for (Index u : *set) {
      const auto count = std::count_if(p.begin(), p.end(), [&](Index v) { return g.edge(u, v); });
      if (count > best) {
        best = count;
        pivot = u;
      }
    }
  }
  std::vector<Index> candidates;
  for (Index v : p) {
    if (!g.edge(pivot, v)) candidates.push_back(v);
  }
  for (Index v : candidates) {
    std::vector<Index> np;
    std::vector<Index> nx;
    for (Index w : p) {
      if (g.edge(v, w)) np.push_back(w);
    }
    for (Index w : x) {
      if (g.edge(v, w)) nx.push_back(w);
    }
    r.push_back(v);
    expand(g, r, std::move(np), std::move(nx), out);
    r.pop_back();
    p.erase(std::find(p.begin(), p.end(), v));
    x.push_back(v);
  }
}

}  // namespace

std::vector<std::vector<Index>> bron_kerbosch(const Graph& graph) {
  std::vector<std::vector<Index>> out;
  if (graph.n == 0) return out;
  std::vector<Index> r;
  std::vector<Index> p(static_cast<std::size_t>(graph.n));
  std::iota(p.begin(), p.end(), Index{0});
  expand(graph, r, std::move(p), {}, out);
  std::sort(out.begin(), out.end());
  return out;
}

bool CliqueReport::in_top(Index method) const {
  const auto& m = top().members;
  return std::binary_search(m.begin(), m.end(), method);
}

CliqueReport top_cliques(const BlockTable& table, const RankingOptions& options) {
  require(options.alpha >= 0.0 && options.alpha <= 1.0, ErrorKind::InvalidConfig, "alpha must lie in [0, 1]");
  const Matrix ranks = rank_blocks(table);
  const Index k = table.methods();
  CliqueReport rep;
  rep.alpha = options.alpha;
  rep.method_ids = table.method_ids;
  if (rep.method_ids.empty()) {
    for (Index j = 0; j < k; ++j) rep.method_ids.push_back(std::to_string(j));
  }
  rep.friedman = friedman(ranks, options.tie_correction);
  if (rep.friedman.perfect_agreement) {
    rep.warnings.push_back("every block ranks the methods identically; Iman-Davenport F is infinite");
  }
  rep.friedman_rejected = rep.friedman.p_value < options.alpha;
  rep.raw_p = conover_pairwise(ranks, options.reference);
  rep.adjusted_p = holm_adjust_matrix(rep.raw_p);
  if (rep.friedman_rejected) {
    rep.graph = indifference_graph(rep.adjusted_p, options.alpha);
  } else {
    rep.graph = Graph(k);
    for (Index i = 0; i < k; ++i) {
      for (Index j = i + 1; j < k; ++j) rep.graph.connect(i, j);
    }
    rep.warnings.push_back("Friedman test does not reject at alpha; all methods are treated as indistinguishable");
  }

  const Vector& mean = rep.friedman.mean_ranks;
  for (auto& members : bron_kerbosch(rep.graph)) {
    double avg = 0.0;
    for (Index m : members) avg += mean[m];
    avg /= static_cast<double>(members.size());
    rep.cliques.push_back({std::move(members), avg});
  }
  std::stable_sort(rep.cliques.begin(), rep.cliques.end(),
                   [](const Clique& a, const Clique& b) { return a.mean_rank < b.mean_rank; });

  mean.minCoeff(&rep.best_method);
  rep.best_method_tied = (mean.array() == mean[rep.best_method]).count() > 1;
  bool found = false;
  for (std::size_t c = 0; c < rep.cliques.size(); ++c) {
    const auto& m = rep.cliques[c].members;
    if (!std::binary_search(m.begin(), m.end(), rep.best_method)) continue;
    if (!found) {
      rep.top_clique = static_cast<Index>(c);
      found = true;
    } else if (rep.cliques[c].mean_rank == rep.top().mean_rank) {
      rep.top_clique_tied = true;
    }
  }
  if (rep.best_method_tied) rep.warnings.push_back("several methods share the best mean rank");
  if (rep.top_clique_tied) rep.warnings.push_back("several cliques tie for the top position");
  return rep;
}

}  // namespace oodlab
