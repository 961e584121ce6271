#pragma once

#include <span>
#include <string>
#include <vector>

#include "oodlab/core.hpp"

namespace oodlab {

/// Blocks x methods matrix of losses (lower is better).
struct BlockTable {
  Matrix values;
  std::vector<std::string> block_keys;
  std::vector<std::string> method_ids;

  Index blocks() const noexcept { return values.rows(); }
  Index methods() const noexcept { return values.cols(); }
  void validate() const;
};

/// Row-wise ascending mid-ranks (rank 1 is the lowest value).
Matrix rank_blocks(const BlockTable& table);

struct FriedmanResult {
  Vector mean_ranks;
  double q = 0.0;
  double f = 0.0;        // Iman-Davenport statistic
  double p_value = 1.0;  // upper tail of F(k-1, (k-1)(N-1))
  bool perfect_agreement = false;
};

FriedmanResult friedman(const Matrix& ranks, bool tie_correction = false);

enum class ConoverReference { Normal, StudentT };

/// sqrt(k (k + 1) / (6 N)).
double conover_se(Index k, Index n);

/// Symmetric k x k matrix of two-sided p-values for |Rbar_i - Rbar_j| / SE; unit diagonal.
Matrix conover_pairwise(const Matrix& ranks, ConoverReference reference = ConoverReference::Normal);

/// Holm step-down adjustment, returned in the input order.
std::vector<double> holm_adjust(std::span<const double> p_values);

/// Holm over the k (k - 1) / 2 upper-triangle pairs of a symmetric p-matrix.
Matrix holm_adjust_matrix(const Matrix& p_matrix);

struct Graph {
  Index n = 0;
  std::vector<std::vector<char>> adjacency;

  explicit Graph(Index vertices = 0)
      : n(vertices), adjacency(static_cast<std::size_t>(vertices), std::vector<char>(static_cast<std::size_t>(vertices), 0)) {}
  bool edge(Index i, Index j) const { return adjacency[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] != 0; }
  void connect(Index i, Index j);
  Index edge_count() const;
};

/// Edge (i, j) iff adjusted p_ij >= alpha.
Graph indifference_graph(const Matrix& adjusted_p, double alpha);

/// All maximal cliques (pivoting Bron-Kerbosch). Each clique is sorted; the list is sorted
/// lexicographically.
std::vector<std::vector<Index>> bron_kerbosch(const Graph& graph);

struct RankingOptions {
  double alpha = 0.05;
  ConoverReference reference = ConoverReference::Normal;
  bool tie_correction = false;
};

struct Clique {
  std::vector<Index> members;
  double mean_rank = 0.0;
};

struct CliqueReport {
  std::vector<std::string> method_ids;
  FriedmanResult friedman;
  bool friedman_rejected = false;
  Matrix raw_p;
  Matrix adjusted_p;
  Graph graph;
  std::vector<Clique> cliques;  // ascending mean rank
  Index top_clique = 0;         // index into cliques
  Index best_method = 0;
  bool best_method_tied = false;
  bool top_clique_tied = false;
  double alpha = 0.05;
  std::vector<std::string> warnings;

  const Clique& top() const { return cliques[static_cast<std::size_t>(top_clique)]; }
  bool in_top(Index method) const;
};

/// Full chain: mid-ranks, Friedman / Iman-Davenport, Conover with Holm, indifference graph and
/// maximal cliques. When Friedman does not reject at alpha no pair is declared different and
/// the graph is complete.
CliqueReport top_cliques(const BlockTable& table, const RankingOptions& options = {});

}  // namespace oodlab
