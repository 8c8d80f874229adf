#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "commands.hpp"
#include "grapher/corpus.hpp"
#include "grapher/errors.hpp"
#include "grapher/evaluation.hpp"
#include "grapher/graph.hpp"
#include "grapher/rerank.hpp"
#include "grapher/retriever.hpp"

namespace py = pybind11;
using namespace grapher;

namespace {

CandidateGraph graph_from_array(py::array_t<double, py::array::c_style | py::array::forcecast> a,
                                std::optional<std::vector<std::string>> ids) {
    if (a.ndim() != 2 || a.shape(0) != a.shape(1)) {
        throw DimensionError("adjacency must be a square 2-d array");
    }
    const auto n = static_cast<std::size_t>(a.shape(0));
    CandidateGraph g;
    g.adjacency = SquareMatrix(n, 0.0);
    auto view = a.unchecked<2>();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) g.adjacency(i, j) = view(i, j);
    if (ids) {
        if (ids->size() != n) throw DimensionError("ids length does not match adjacency");
        g.ids = std::move(*ids);
    } else {
        for (std::size_t i = 0; i < n; ++i) g.ids.push_back(std::to_string(i));
    }
    return g;
}

RerankConfig make_config(double alpha, double epsilon, int max_iters, const std::string& algorithm,
                         const std::string& dangling) {
    RerankConfig c;
    c.alpha = alpha;
    c.epsilon = epsilon;
    c.max_iters = max_iters;
    c.algorithm = parse_algorithm(algorithm);
    c.ppr_dangling = parse_dangling(dangling);
    return c;
}

py::dict result_dict(const RankedResult& r) {
    py::list entries;
    for (const auto& e : r.entries) entries.append(py::make_tuple(e.id, e.final_score, e.seed_score));
    py::dict d;
    d["entries"] = entries;
    d["iterations"] = r.iterations;
    d["converged"] = r.converged;
    return d;
}

}  // namespace

PYBIND11_MODULE(_grapher, m) {
    m.doc() = "Graph-based reranking for hybrid retrieval";

    py::register_exception<Error>(m, "GrapherError", PyExc_RuntimeError);

    m.def("tokenize", &tokenize, py::arg("text"));

    m.def(
        "rerank",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> adjacency,
           std::vector<double> seed, std::optional<std::vector<std::string>> ids, const std::string& algo,
           double alpha, double epsilon, int max_iters, const std::string& dangling) {
            auto g = graph_from_array(adjacency, std::move(ids));
            return result_dict(rerank(g, {std::move(seed), ScoreVector::Role::seed},
                                      make_config(alpha, epsilon, max_iters, algo, dangling)));
        },
        py::arg("adjacency"), py::arg("seed"), py::arg("ids") = py::none(), py::arg("algo") = "gcs",
        py::arg("alpha") = 0.5, py::arg("epsilon") = 1e-10, py::arg("max_iters") = 1000,
        py::arg("ppr_dangling") = "uniform");

    m.def(
        "solve_oracle",
        [](py::array_t<double, py::array::c_style | py::array::forcecast> adjacency,
           std::vector<double> seed, double alpha, const std::string& normalization) {
            auto g = graph_from_array(adjacency, std::nullopt);
            Normalization norm;
            if (normalization == "row") norm = Normalization::row;
            else if (normalization == "column") norm = Normalization::column;
            else throw ConfigError("normalization must be 'row' or 'column'");
            RerankConfig c;
            c.alpha = alpha;
            return solve_oracle(g, {std::move(seed), ScoreVector::Role::seed}, c, norm).values;
        },
        py::arg("adjacency"), py::arg("seed"), py::arg("alpha") = 0.5, py::arg("normalization") = "row");

    m.def(
        "build_graph",
        [](const std::filesystem::path& corpus_path, std::vector<std::string> ids, const std::string& scheme) {
            auto corpus = load_corpus(corpus_path);
            auto g = build_graph(ids, corpus, parse_scheme(scheme));
            const auto n = static_cast<py::ssize_t>(g.size());
            py::array_t<double> out({n, n});
            auto view = out.mutable_unchecked<2>();
            for (py::ssize_t i = 0; i < n; ++i)
                for (py::ssize_t j = 0; j < n; ++j) view(i, j) = g.adjacency(i, j);
            return out;
        },
        py::arg("corpus_path"), py::arg("ids"), py::arg("scheme") = "structural");

    m.def(
        "perfect_recall_at_k",
        [](const std::vector<std::string>& ranked, const std::set<std::string>& relevant, std::size_t k) {
            return perfect_recall_at_k(ranked, relevant, k);
        },
        py::arg("ranked"), py::arg("relevant"), py::arg("k"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
