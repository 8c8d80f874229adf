#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "grapher/graph.hpp"
#include "grapher/matrix.hpp"

namespace grapher {

struct ScoreVector {
    enum class Role { seed, final };

    std::vector<double> values;
    Role role = Role::seed;

    std::size_t size() const noexcept { return values.size(); }
};

enum class RerankAlgorithm { gcs, ppr };

RerankAlgorithm parse_algorithm(std::string_view name);
std::string_view to_string(RerankAlgorithm algorithm);

/// Where PPR sends the probability mass sitting on nodes without out-links.
enum class DanglingPolicy { uniform, seed };

DanglingPolicy parse_dangling(std::string_view name);
std::string_view to_string(DanglingPolicy policy);

struct RerankConfig {
    double alpha = 0.5;
    double epsilon = 1e-10;
    int max_iters = 1000;
    RerankAlgorithm algorithm = RerankAlgorithm::gcs;

    DanglingPolicy ppr_dangling = DanglingPolicy::uniform;
    bool ppr_normalize_seed = true;
    bool ppr_apply_floor = false;

    /// Throws ConfigError unless 0 < alpha < 1, epsilon > 0 and max_iters >= 1.
    void check() const;
};

struct RankedEntry {
    std::string id;
    double final_score = 0.0;
    double seed_score = 0.0;
};

struct RankedResult {
    std::vector<RankedEntry> entries;
    int iterations = 0;
    bool converged = true;
};

/// Final score desc, then seed desc, then id asc.
void sort_ranked(std::vector<RankedEntry>& entries);

/// W_ij = A_ij / sum_k A_ik; all-zero rows stay zero.
SquareMatrix row_normalize(const SquareMatrix& a);

/// W_ij = A_ij / sum_k A_kj; all-zero columns stay zero.
SquareMatrix column_normalize(const SquareMatrix& a);

struct Smoothing {
    std::vector<double> scores;  ///< last iterate, before any floor
    int iterations = 0;
    bool converged = false;
};

/// Repeats p <- alpha*s + (1-alpha)*W*p from p = s until the L1 step is below epsilon.
Smoothing gcs_smooth(const CandidateGraph& graph, const ScoreVector& seed,
                     const RerankConfig& config);

/// Graph cohesive smoothing: the smoothed scores floored element-wise at the seed.
RankedResult gcs_rank(const CandidateGraph& graph, const ScoreVector& seed,
                      const RerankConfig& config);

/// Personalized PageRank stationary distribution, before ranking.
Smoothing ppr_scores(const CandidateGraph& graph, const ScoreVector& seed,
                     const RerankConfig& config);

RankedResult ppr_rank(const CandidateGraph& graph, const ScoreVector& seed,
                      const RerankConfig& config);

/// Dispatch on config.algorithm.
RankedResult rerank(const CandidateGraph& graph, const ScoreVector& seed,
                    const RerankConfig& config);

enum class Normalization { row, column };

inline constexpr std::size_t kOracleMaxNodes = 1000;

/// Exact solution of (I - (1-alpha)W) p = alpha*s by Gaussian elimination with partial
/// pivoting. Test oracle only. Column mode rejects graphs with dangling nodes.
ScoreVector solve_oracle(const CandidateGraph& graph, const ScoreVector& seed,
                         const RerankConfig& config, Normalization normalization);

/// First min(k, n) ids.
std::vector<std::string> final_ranking(const RankedResult& result, std::size_t k);

}  // namespace grapher
