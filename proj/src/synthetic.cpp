#include "grapher/synthetic.hpp"

#include <cmath>
#include <random>

#include "grapher/errors.hpp"
#include "grapher/retriever.hpp"

namespace grapher::synthetic {

Pattern parse_pattern(std::string_view name) {
    if (name == "fk-triple") return Pattern::fk_triple;
    if (name == "hub") return Pattern::hub;
    throw ConfigError("unknown synthetic pattern '" + std::string(name) +
                      "' (expected fk-triple|hub)");
}

namespace {

using Vec = std::vector<double>;

Vec random_unit(std::mt19937_64& rng, std::size_t dim) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Vec v(dim);
    double norm = 0.0;
    do {
        norm = 0.0;
        for (auto& x : v) {
            x = normal(rng);
            norm += x * x;
        }
    } while (norm == 0.0);
    norm = std::sqrt(norm);
    for (auto& x : v) x /= norm;
    return v;
}

/// Unit vector whose cosine with the unit vector `q` is exactly `c`.
std::vector<float> at_cosine(std::mt19937_64& rng, const Vec& q, double c) {
    Vec u;
    double norm = 0.0;
    do {
        u = random_unit(rng, q.size());
        double dot = 0.0;
        for (std::size_t k = 0; k < q.size(); ++k) dot += u[k] * q[k];
        norm = 0.0;
        for (std::size_t k = 0; k < q.size(); ++k) {
            u[k] -= dot * q[k];
            norm += u[k] * u[k];
        }
    } while (norm < 1e-12);
    norm = std::sqrt(norm);
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    std::vector<float> v(q.size());
    for (std::size_t k = 0; k < q.size(); ++k) {
        v[k] = static_cast<float>(c * q[k] + s * u[k] / norm);
    }
    return v;
}

std::vector<float> to_float(const Vec& v) { return {v.begin(), v.end()}; }

DataObject table(const std::string& db, const std::string& name, const std::string& columns) {
    DataObject object;
    object.id = db + "." + name;
    object.content = "table " + db + " " + name + " columns " + columns;
    return object;
}

void link(DataObject& a, DataObject& b) {
    a.add_link(b.id);
    b.add_link(a.id);
}

void fk_triple(const Options& options, std::mt19937_64& rng, Dataset& out) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    for (std::size_t g = 0; g < options.queries; ++g) {
        const std::string db = "db" + std::to_string(g);
        const auto q = random_unit(rng, options.dim);
        const bool easy = unit(rng) < options.easy_fraction;

        auto orders = table(db, "orders", "order id customer id order date amount");
        auto customers = table(db, "customers", "customer id name email city");
        auto stores = table(db, "stores", "store id address city manager");
        auto employees = table(db, "employees", "employee id store id name role");
        auto products = table(db, "products", "product id title price category");
        auto suppliers = table(db, "suppliers", "supplier id product id company phone");
        auto shipments = table(db, "shipments", "shipment id carrier status eta");
        link(orders, customers);
        link(stores, employees);
        link(stores, shipments);
        link(products, suppliers);

        std::vector<std::pair<DataObject*, double>> placed{
            {&orders, between(0.88, 0.95)},
            {&customers, easy ? between(0.62, 0.72) : between(-0.05, 0.08)},
            {&stores, between(0.15, 0.30)},
            {&employees, between(0.15, 0.30)},
            {&products, between(0.15, 0.30)},
            {&suppliers, between(0.15, 0.30)},
            {&shipments, between(0.15, 0.30)},
        };
        for (auto& [object, c] : placed) {
            out.vectors.emplace_back(object->id, at_cosine(rng, q, c));
        }
        const std::string query_id = "q" + std::to_string(g);
        out.queries.push_back({query_id, db + " total order amount per customer"});
        out.vectors.emplace_back(query_id, to_float(q));
        out.qrels[query_id] = {orders.id, customers.id};
        for (auto* object :
             {&orders, &customers, &stores, &employees, &products, &suppliers, &shipments}) {
            out.corpus.add(std::move(*object));
        }
    }
}

void hub(const Options& options, std::mt19937_64& rng, Dataset& out) {
    constexpr int kLeaves = 20;
    for (std::size_t g = 0; g < options.queries; ++g) {
        const std::string prefix = "g" + std::to_string(g) + ".";
        const auto q = random_unit(rng, options.dim);

        DataObject center{.id = prefix + "hub", .content = "hub record linked to many leaves"};
        std::vector<DataObject> leaves;
        for (int l = 0; l < kLeaves; ++l) {
            DataObject leaf{.id = prefix + "leaf" + std::to_string(l), .content = "leaf record"};
            link(center, leaf);
            leaves.push_back(std::move(leaf));
        }
        DataObject detached{.id = prefix + "detached", .content = "detached record"};
        DataObject background{.id = prefix + "background", .content = "background record"};

        // Star at cosine -0.864 and the background at -1 put star seeds near 0.05 of the
        // detached node's seed after min-max scaling.
        out.vectors.emplace_back(center.id, at_cosine(rng, q, -0.864));
        for (const auto& leaf : leaves) {
            out.vectors.emplace_back(leaf.id, at_cosine(rng, q, -0.864));
        }
        out.vectors.emplace_back(detached.id, at_cosine(rng, q, 0.9));
        Vec opposite(q);
        for (auto& x : opposite) x = -x;
        out.vectors.emplace_back(background.id, to_float(opposite));

        const std::string query_id = "hq" + std::to_string(g);
        out.queries.push_back({query_id, "which single item answers this"});
        out.vectors.emplace_back(query_id, to_float(q));
        out.qrels[query_id] = {detached.id};

        out.corpus.add(std::move(center));
        for (auto& leaf : leaves) out.corpus.add(std::move(leaf));
        out.corpus.add(std::move(detached));
        out.corpus.add(std::move(background));
    }
}

}  // namespace

Dataset generate(const Options& options) {
    if (options.dim < 2) throw ConfigError("synthetic embedding dimension must be >= 2");
    std::mt19937_64 rng(options.seed);
    Dataset out;
    if (options.pattern == Pattern::fk_triple) {
        fk_triple(options, rng, out);
    } else {
        hub(options, rng, out);
    }
    return out;
}

void write(const std::filesystem::path& dir, const Dataset& dataset) {
    std::filesystem::create_directories(dir);
    save_corpus(dir / "corpus.jsonl", dataset.corpus);
    save_queries(dir / "queries.jsonl", dataset.queries);
    save_qrels(dir / "qrels.tsv", dataset.qrels);
    save_vectors_jsonl(dir / "vectors.jsonl", dataset.vectors);
}

}  // namespace grapher::synthetic
