#include "grapher/rerank.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "grapher/errors.hpp"

namespace grapher {

RerankAlgorithm parse_algorithm(std::string_view name) {
    if (name == "gcs") return RerankAlgorithm::gcs;
    if (name == "ppr") return RerankAlgorithm::ppr;
    throw ConfigError("unknown rerank algorithm '" + std::string(name) + "' (expected gcs|ppr)");
}

std::string_view to_string(RerankAlgorithm algorithm) {
    return algorithm == RerankAlgorithm::gcs ? "gcs" : "ppr";
}

DanglingPolicy parse_dangling(std::string_view name) {
    if (name == "uniform") return DanglingPolicy::uniform;
    if (name == "seed") return DanglingPolicy::seed;
    throw ConfigError("unknown dangling policy '" + std::string(name) +
                      "' (expected uniform|seed)");
}

std::string_view to_string(DanglingPolicy policy) {
    return policy == DanglingPolicy::uniform ? "uniform" : "seed";
}

void RerankConfig::check() const {
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw ConfigError("damping factor alpha must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) {
        throw ConfigError("tolerance epsilon must be > 0");
    }
    if (max_iters < 1) {
        throw ConfigError("max_iters must be >= 1");
    }
}

void sort_ranked(std::vector<RankedEntry>& entries) {
    std::sort(entries.begin(), entries.end(), [](const RankedEntry& a, const RankedEntry& b) {
        if (a.final_score != b.final_score) return a.final_score > b.final_score;
        if (a.seed_score != b.seed_score) return a.seed_score > b.seed_score;
        return a.id < b.id;
    });
}

SquareMatrix row_normalize(const SquareMatrix& a) {
    const std::size_t n = a.size();
    SquareMatrix w(n);
    for (std::size_t i = 0; i < n; ++i) {
        double sum = 0.0;
        for (double x : a.row(i)) sum += x;
        if (sum <= 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (a(i, j) > 0.0) w(i, j) = a(i, j) / sum;
        }
    }
    return w;
}

SquareMatrix column_normalize(const SquareMatrix& a) {
    const std::size_t n = a.size();
    std::vector<double> sums(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) sums[j] += a(i, j);
    }
    SquareMatrix w(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (a(i, j) > 0.0 && sums[j] > 0.0) w(i, j) = a(i, j) / sums[j];
        }
    }
    return w;
}

namespace {

void check_inputs(const CandidateGraph& graph, const ScoreVector& seed,
                  const RerankConfig& config) {
    config.check();
    if (graph.adjacency.size() != graph.size()) {
        throw DimensionError("adjacency is " + std::to_string(graph.adjacency.size()) +
                             "x" + std::to_string(graph.adjacency.size()) + " for " +
                             std::to_string(graph.size()) + " candidates");
    }
    if (seed.size() != graph.size()) {
        throw DimensionError("seed has " + std::to_string(seed.size()) + " entries for " +
                             std::to_string(graph.size()) + " nodes");
    }
    for (double s : seed.values) {
        if (!std::isfinite(s)) throw NumericError("seed scores must be finite");
        if (s < 0.0) throw NumericError("seed scores must be non-negative");
    }
}

void multiply(const SquareMatrix& w, std::span<const double> p, std::span<double> out) {
    const std::size_t n = w.size();
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = w.row(i);
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * p[j];
        out[i] = acc;
    }
}

double l1_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return d;
}

RankedResult make_result(const CandidateGraph& graph, const ScoreVector& seed,
                         std::span<const double> finals, const Smoothing& run) {
    RankedResult result;
    result.iterations = run.iterations;
    result.converged = run.converged;
    result.entries.reserve(graph.size());
    for (std::size_t i = 0; i < graph.size(); ++i) {
        result.entries.push_back({graph.ids[i], finals[i], seed.values[i]});
    }
    sort_ranked(result.entries);
    return result;
}

std::vector<double> l1_normalized(const std::vector<double>& values) {
    const double total = std::accumulate(values.begin(), values.end(), 0.0);
    std::vector<double> out(values.size());
    if (total > 0.0) {
        for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] / total;
    } else if (!values.empty()) {
        std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(values.size()));
    }
    return out;
}

}  // namespace

Smoothing gcs_smooth(const CandidateGraph& graph, const ScoreVector& seed,
                     const RerankConfig& config) {
    check_inputs(graph, seed, config);
    const auto w = row_normalize(graph.adjacency);
    const auto& s = seed.values;
    const double alpha = config.alpha;

    Smoothing out;
    std::vector<double> p = s;
    std::vector<double> next(p.size());
    while (out.iterations < config.max_iters) {
        multiply(w, p, next);
        for (std::size_t i = 0; i < p.size(); ++i) {
            next[i] = alpha * s[i] + (1.0 - alpha) * next[i];
        }
        const double delta = l1_distance(next, p);
        p.swap(next);
        ++out.iterations;
        if (delta < config.epsilon) {
            out.converged = true;
            break;
        }
    }
    out.scores = std::move(p);
    return out;
}

RankedResult gcs_rank(const CandidateGraph& graph, const ScoreVector& seed,
                      const RerankConfig& config) {
    const auto run = gcs_smooth(graph, seed, config);
    std::vector<double> finals(run.scores.size());
    for (std::size_t i = 0; i < finals.size(); ++i) {
        finals[i] = std::max(run.scores[i], seed.values[i]);
    }
    return make_result(graph, seed, finals, run);
}

Smoothing ppr_scores(const CandidateGraph& graph, const ScoreVector& seed,
                     const RerankConfig& config) {
    check_inputs(graph, seed, config);
    const std::size_t n = graph.size();
    const auto w = column_normalize(graph.adjacency);
    const auto teleport = config.ppr_normalize_seed ? l1_normalized(seed.values) : seed.values;
    // Dangling mass follows the normalized seed or spreads uniformly.
    const auto dangling_target = config.ppr_dangling == DanglingPolicy::seed
                                     ? l1_normalized(seed.values)
                                     : std::vector<double>(n, n ? 1.0 / n : 0.0);

    std::vector<char> dangling(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (graph.adjacency(i, j) > 0.0) dangling[j] = 0;
        }
    }

    const double alpha = config.alpha;
    Smoothing out;
    std::vector<double> p = teleport;
    std::vector<double> next(n);
    while (out.iterations < config.max_iters) {
        double dangling_mass = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (dangling[j]) dangling_mass += p[j];
        }
        multiply(w, p, next);
        for (std::size_t i = 0; i < n; ++i) {
            next[i] = alpha * teleport[i] +
                      (1.0 - alpha) * (next[i] + dangling_mass * dangling_target[i]);
        }
        const double delta = l1_distance(next, p);
        p.swap(next);
        ++out.iterations;
        if (delta < config.epsilon) {
            out.converged = true;
            break;
        }
    }
    out.scores = std::move(p);
    return out;
}

RankedResult ppr_rank(const CandidateGraph& graph, const ScoreVector& seed,
                      const RerankConfig& config) {
    const auto run = ppr_scores(graph, seed, config);
    std::vector<double> finals = run.scores;
    if (config.ppr_apply_floor) {
        const auto floor = config.ppr_normalize_seed ? l1_normalized(seed.values) : seed.values;
        for (std::size_t i = 0; i < finals.size(); ++i) {
            finals[i] = std::max(finals[i], floor[i]);
        }
    }
    return make_result(graph, seed, finals, run);
}

RankedResult rerank(const CandidateGraph& graph, const ScoreVector& seed,
                    const RerankConfig& config) {
    return config.algorithm == RerankAlgorithm::gcs ? gcs_rank(graph, seed, config)
                                                    : ppr_rank(graph, seed, config);
}

ScoreVector solve_oracle(const CandidateGraph& graph, const ScoreVector& seed,
                         const RerankConfig& config, Normalization normalization) {
    check_inputs(graph, seed, config);
    const std::size_t n = graph.size();
    if (n > kOracleMaxNodes) {
        throw ConfigError("oracle solve is capped at " + std::to_string(kOracleMaxNodes) +
                          " nodes");
    }
    SquareMatrix w;
    if (normalization == Normalization::row) {
        w = row_normalize(graph.adjacency);
    } else {
        for (std::size_t j = 0; j < n; ++j) {
            double column = 0.0;
            for (std::size_t i = 0; i < n; ++i) column += graph.adjacency(i, j);
            if (!(column > 0.0)) {
                throw ValidationError("column-normalized oracle requires no dangling nodes; '" +
                                      graph.ids[j] + "' has no edges");
            }
        }
        w = column_normalize(graph.adjacency);
    }

    // Augmented system [I - (1-alpha)W | alpha*s].
    const double alpha = config.alpha;
    std::vector<std::vector<double>> m(n, std::vector<double>(n + 1, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            m[i][j] = (i == j ? 1.0 : 0.0) - (1.0 - alpha) * w(i, j);
        }
        m[i][n] = alpha * seed.values[i];
    }
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r) {
            if (std::abs(m[r][col]) > std::abs(m[pivot][col])) pivot = r;
        }
        if (std::abs(m[pivot][col]) < 1e-300) {
            throw NumericError("singular system in oracle solve");
        }
        std::swap(m[col], m[pivot]);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double factor = m[r][col] / m[col][col];
            if (factor == 0.0) continue;
            for (std::size_t c = col; c <= n; ++c) m[r][c] -= factor * m[col][c];
        }
    }
    ScoreVector out;
    out.role = ScoreVector::Role::final;
    out.values.assign(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double acc = m[i][n];
        for (std::size_t c = i + 1; c < n; ++c) acc -= m[i][c] * out.values[c];
        out.values[i] = acc / m[i][i];
    }
    return out;
}

std::vector<std::string> final_ranking(const RankedResult& result, std::size_t k) {
    std::vector<std::string> ids;
    const auto count = std::min(k, result.entries.size());
    ids.reserve(count);
    for (std::size_t i = 0; i < count; ++i) ids.push_back(result.entries[i].id);
    return ids;
}

}  // namespace grapher
