#include "stochmatch/instance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <queue>
#include <set>
#include <sstream>

#include <json.hpp>

#include "stochmatch/errors.hpp"
#include "stochmatch/numerics.hpp"

namespace stochmatch {

using nlohmann::json;

Instance::Instance(std::vector<Resource> resources, int arrival_count, std::vector<Edge> edges)
    : resources_(std::move(resources)), arrival_count_(arrival_count), edges_(std::move(edges)) {
    std::stable_sort(edges_.begin(), edges_.end(), [](const Edge& a, const Edge& b) {
        return a.arrival != b.arrival ? a.arrival < b.arrival : a.resource < b.resource;
    });

    // Adjacency is built only over in-range indices; validate() reports the rest.
    const int n = resource_count();
    const int m = std::max(arrival_count_, 0);
    arrival_begin_.assign(m + 1, 0);
    std::vector<std::vector<int>> by_arrival(m);
    std::vector<std::vector<int>> by_resource(n);
    for (int e = 0; e < edge_count(); ++e) {
        const Edge& edge = edges_[e];
        bool ok_t = edge.arrival >= 0 && edge.arrival < m;
        bool ok_i = edge.resource >= 0 && edge.resource < n;
        if (ok_t && ok_i) {
            by_arrival[edge.arrival].push_back(e);
            by_resource[edge.resource].push_back(e);
        }
    }
    for (int t = 0; t < m; ++t) {
        arrival_begin_[t + 1] = arrival_begin_[t] + static_cast<int>(by_arrival[t].size());
        arrival_index_.insert(arrival_index_.end(), by_arrival[t].begin(), by_arrival[t].end());
    }
    resource_begin_.assign(n + 1, 0);
    for (int i = 0; i < n; ++i) {
        resource_begin_[i + 1] = resource_begin_[i] + static_cast<int>(by_resource[i].size());
        resource_index_.insert(resource_index_.end(), by_resource[i].begin(), by_resource[i].end());
    }
}

std::span<const int> Instance::arrival_edges(int t) const {
    int lo = arrival_begin_[t];
    int hi = arrival_begin_[t + 1];
    return {arrival_index_.data() + lo, static_cast<std::size_t>(hi - lo)};
}

std::span<const int> Instance::resource_edges(int i) const {
    int lo = resource_begin_[i];
    int hi = resource_begin_[i + 1];
    return {resource_index_.data() + lo, static_cast<std::size_t>(hi - lo)};
}

int Instance::find_edge(int i, int t) const {
    if (t < 0 || t >= arrival_count_) {
        return -1;
    }
    for (int e : arrival_edges(t)) {
        if (edges_[e].resource == i) {
            return e;
        }
    }
    return -1;
}

bool Instance::unit_capacities() const {
    return std::all_of(resources_.begin(), resources_.end(), [](const Resource& r) { return r.capacity == 1; });
}

double Instance::max_p() const {
    double best = 0.0;
    for (const auto& e : edges_) {
        best = std::max(best, e.p);
    }
    return best;
}

std::vector<std::string> validate(const Instance& inst) {
    std::vector<std::string> out;
    if (inst.arrival_count() < 1) {
        out.push_back("arrivals: must be positive");
    }
    for (int i = 0; i < inst.resource_count(); ++i) {
        const Resource& r = inst.resource(i);
        std::string tag = "resources[" + std::to_string(i) + "]";
        if (r.id != i) {
            out.push_back(tag + ".id: expected dense index " + std::to_string(i));
        }
        if (!(r.reward >= 0.0) || !std::isfinite(r.reward)) {
            out.push_back(tag + ".reward: negative or non-finite");
        }
        if (r.capacity < 1) {
            out.push_back(tag + ".capacity: must be at least 1");
        }
    }
    std::set<std::pair<int, int>> seen;
    for (const Edge& e : inst.edges()) {
        std::string tag = "edge (" + std::to_string(e.resource) + "," + std::to_string(e.arrival) + ")";
        if (e.resource < 0 || e.resource >= inst.resource_count()) {
            out.push_back(tag + ": dangling resource");
        }
        if (e.arrival < 0 || e.arrival >= inst.arrival_count()) {
            out.push_back(tag + ": dangling arrival");
        }
        if (!(e.p >= 0.0 && e.p <= 1.0)) {
            out.push_back(tag + ": p out of [0,1]");
        }
        if (!seen.insert({e.resource, e.arrival}).second) {
            out.push_back(tag + ": duplicate edge");
        }
    }
    return out;
}

void require_valid(const Instance& inst) {
    auto violations = validate(inst);
    if (!violations.empty()) {
        throw InvalidInstance(violations.front());
    }
}

Instance expand_capacities(const Instance& inst, int limit) {
    require_valid(inst);
    long total = 0;
    for (const auto& r : inst.resources()) {
        total += r.capacity;
    }
    if (total > limit) {
        throw CapacityExplosion("total capacity " + std::to_string(total) + " exceeds limit " +
                                std::to_string(limit));
    }
    std::vector<Resource> resources;
    std::vector<int> origin;
    std::vector<std::vector<int>> copies(inst.resource_count());
    for (int i = 0; i < inst.resource_count(); ++i) {
        const Resource& r = inst.resource(i);
        for (int c = 0; c < r.capacity; ++c) {
            copies[i].push_back(static_cast<int>(resources.size()));
            resources.push_back({static_cast<int>(resources.size()), r.reward, 1});
            origin.push_back(inst.origin(i));
        }
    }
    std::vector<Edge> edges;
    for (const Edge& e : inst.edges()) {
        for (int copy : copies[e.resource]) {
            edges.push_back({copy, e.arrival, e.p});
        }
    }
    Instance out(std::move(resources), inst.arrival_count(), std::move(edges));
    out.origin_ = std::move(origin);
    return out;
}

const char* to_string(ProbabilityStructure::Tag tag) {
    switch (tag) {
    case ProbabilityStructure::Tag::Identical: return "identical";
    case ProbabilityStructure::Tag::Decomposable: return "decomposable";
    case ProbabilityStructure::Tag::General: return "general";
    }
    return "?";
}

ProbabilityStructure detect_structure(const Instance& inst) {
    constexpr double tol = 1e-9;
    const int n = inst.resource_count();
    const int m = inst.arrival_count();
    ProbabilityStructure out;
    out.resource_factors.assign(n, 0.0);
    out.arrival_factors.assign(m, 0.0);
    if (inst.edge_count() == 0) {
        return out;
    }

    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Edge& e : inst.edges()) {
        lo = std::min(lo, e.p);
        hi = std::max(hi, e.p);
    }
    const bool identical = hi - lo <= tol;

    // Propagate factors over positive edges, one component at a time. Nodes
    // 0..n-1 are resources, n..n+m-1 arrivals.
    std::vector<double> factor(n + m, -1.0);
    auto neighbours = [&](int node) {
        std::vector<std::pair<int, double>> adj;
        auto list = node < n ? inst.resource_edges(node) : inst.arrival_edges(node - n);
        for (int e : list) {
            const Edge& edge = inst.edge(e);
            if (edge.p > 0.0) {
                adj.push_back({node < n ? n + edge.arrival : edge.resource, edge.p});
            }
        }
        return adj;
    };
    bool ok = true;
    for (int root = 0; root < n && ok; ++root) {
        if (factor[root] >= 0.0) {
            continue;
        }
        double pivot = 0.0;
        for (int e : inst.resource_edges(root)) {
            pivot = std::max(pivot, inst.edge(e).p);
        }
        if (pivot <= 0.0) {
            continue;
        }
        factor[root] = pivot;
        std::queue<int> queue;
        queue.push(root);
        while (!queue.empty()) {
            int node = queue.front();
            queue.pop();
            for (auto [next, p] : neighbours(node)) {
                if (factor[next] < 0.0) {
                    factor[next] = p / factor[node];
                    queue.push(next);
                }
            }
        }
    }
    for (double& f : factor) {
        if (f < 0.0) {
            f = 0.0;
        }
    }
    for (const Edge& e : inst.edges()) {
        if (std::fabs(factor[e.resource] * factor[n + e.arrival] - e.p) > tol) {
            ok = false;
            break;
        }
    }

    if (identical) {
        out.tag = ProbabilityStructure::Tag::Identical;
        out.p = inst.edge(0).p;
    } else if (ok) {
        out.tag = ProbabilityStructure::Tag::Decomposable;
    } else {
        out.tag = ProbabilityStructure::Tag::General;
        return out;
    }
    if (ok) {
        std::copy(factor.begin(), factor.begin() + n, out.resource_factors.begin());
        std::copy(factor.begin() + n, factor.end(), out.arrival_factors.begin());
    }
    return out;
}

GeneratorKind parse_generator_kind(const std::string& name) {
    if (name == "upper_triangular") return GeneratorKind::UpperTriangular;
    if (name == "single_resource_hard") return GeneratorKind::SingleResourceHard;
    if (name == "counterexample_3x3") return GeneratorKind::Counterexample3x3;
    if (name == "random_decomposable") return GeneratorKind::RandomDecomposable;
    if (name == "random_small_prob") return GeneratorKind::RandomSmallProb;
    if (name == "random_general") return GeneratorKind::RandomGeneral;
    throw UsageError("unknown generator kind '" + name + "'");
}

const char* to_string(GeneratorKind kind) {
    switch (kind) {
    case GeneratorKind::UpperTriangular: return "upper_triangular";
    case GeneratorKind::SingleResourceHard: return "single_resource_hard";
    case GeneratorKind::Counterexample3x3: return "counterexample_3x3";
    case GeneratorKind::RandomDecomposable: return "random_decomposable";
    case GeneratorKind::RandomSmallProb: return "random_small_prob";
    case GeneratorKind::RandomGeneral: return "random_general";
    }
    return "?";
}

namespace {

void check_size(int n, int m) {
    if (n < 1 || m < 1) {
        throw InvalidParams("n and m must be at least 1");
    }
}

void check_prob(double p, const char* what) {
    if (!(p > 0.0 && p <= 1.0)) {
        throw InvalidParams(std::string(what) + " must lie in (0, 1]");
    }
}

std::vector<Resource> unit_resources(int n) {
    std::vector<Resource> out;
    for (int i = 0; i < n; ++i) {
        out.push_back({i, 1.0, 1});
    }
    return out;
}

// Shared skeleton for the random families: each (i, t) pair is present with
// probability 0.7, drawn arrival-major.
constexpr double kEdgeDensity = 0.7;

}  // namespace

Instance upper_triangular(int n, double p) {
    check_size(n, n);
    check_prob(p, "p");
    std::vector<Edge> edges;
    for (int t = 0; t < n; ++t) {
        for (int i = t; i < n; ++i) {
            edges.push_back({i, t, p});
        }
    }
    return Instance(unit_resources(n), n, std::move(edges));
}

Instance single_resource_hard(int m) {
    check_size(1, m);
    std::vector<Edge> edges;
    for (int t = 0; t < m; ++t) {
        edges.push_back({0, t, 1.0 / m});
    }
    return Instance(unit_resources(1), m, std::move(edges));
}

Instance counterexample_3x3(double p_shared, double p_i_t3, double p_j_t3) {
    check_prob(p_shared, "p");
    check_prob(p_i_t3, "p_i_t3");
    check_prob(p_j_t3, "p_j_t3");
    if (!(p_i_t3 < p_j_t3)) {
        throw InvalidParams("counterexample requires p_i_t3 < p_j_t3");
    }
    constexpr int i = 0, j = 1, k = 2;
    std::vector<Edge> edges = {
        {i, 0, p_shared}, {k, 0, p_shared}, {i, 1, p_shared}, {j, 1, p_shared}, {i, 2, p_i_t3}, {j, 2, p_j_t3},
    };
    return Instance(unit_resources(3), 3, std::move(edges));
}

Instance random_decomposable(int n, int m, std::uint64_t seed) {
    check_size(n, m);
    auto rng = rng_stream(seed, 0);
    std::vector<Resource> resources;
    std::vector<double> pi(n), pt(m);
    for (int i = 0; i < n; ++i) {
        resources.push_back({i, 0.5 + rng.uniform(), 1});
        pi[i] = 0.2 + 0.8 * rng.uniform();
    }
    for (int t = 0; t < m; ++t) {
        pt[t] = 0.2 + 0.8 * rng.uniform();
    }
    std::vector<Edge> edges;
    for (int t = 0; t < m; ++t) {
        for (int i = 0; i < n; ++i) {
            if (rng.bernoulli(kEdgeDensity)) {
                edges.push_back({i, t, pi[i] * pt[t]});
            }
        }
    }
    return Instance(std::move(resources), m, std::move(edges));
}

Instance random_small_prob(int n, int m, double p_max, std::uint64_t seed) {
    check_size(n, m);
    check_prob(p_max, "p_max");
    auto rng = rng_stream(seed, 0);
    std::vector<Edge> edges;
    for (int t = 0; t < m; ++t) {
        for (int i = 0; i < n; ++i) {
            bool present = rng.bernoulli(kEdgeDensity);
            double u = 1.0 - rng.uniform();  // (0, 1]
            if (present) {
                edges.push_back({i, t, p_max * u});
            }
        }
    }
    return Instance(unit_resources(n), m, std::move(edges));
}

Instance random_general(int n, int m, std::uint64_t seed) {
    check_size(n, m);
    auto rng = rng_stream(seed, 0);
    std::vector<Resource> resources;
    for (int i = 0; i < n; ++i) {
        resources.push_back({i, 0.5 + rng.uniform(), 1});
    }
    std::vector<Edge> edges;
    for (int t = 0; t < m; ++t) {
        for (int i = 0; i < n; ++i) {
            bool present = rng.bernoulli(kEdgeDensity);
            double u = 1.0 - rng.uniform();
            if (present) {
                edges.push_back({i, t, u});
            }
        }
    }
    return Instance(std::move(resources), m, std::move(edges));
}

Instance generate(GeneratorKind kind, const GeneratorParams& prm, std::uint64_t seed) {
    switch (kind) {
    case GeneratorKind::UpperTriangular: return upper_triangular(prm.n, prm.p);
    case GeneratorKind::SingleResourceHard: return single_resource_hard(prm.m);
    case GeneratorKind::Counterexample3x3: return counterexample_3x3(prm.p, prm.p_i_t3, prm.p_j_t3);
    case GeneratorKind::RandomDecomposable: return random_decomposable(prm.n, prm.m, seed);
    case GeneratorKind::RandomSmallProb: return random_small_prob(prm.n, prm.m, prm.p_max, seed);
    case GeneratorKind::RandomGeneral: return random_general(prm.n, prm.m, seed);
    }
    throw InvalidParams("unknown generator");
}

namespace {

std::string line_context(const std::string& text, std::size_t byte) {
    std::size_t line = 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + std::min(byte, text.size()), '\n'));
    return "line " + std::to_string(line);
}

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& where) {
    if (!obj.is_object()) {
        throw ParseError(where, "expected an object");
    }
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return it.key() == k; });
        if (!known) {
            throw ParseError(where, "unknown field '" + it.key() + "'");
        }
    }
    for (const char* key : allowed) {
        if (!obj.contains(key)) {
            throw ParseError(where, std::string("missing field '") + key + "'");
        }
    }
}

template <typename T>
T field(const json& obj, const char* key, const std::string& where) {
    const json& v = obj.at(key);
    if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) {
            throw ParseError(where + "." + key, "expected an integer");
        }
    } else {
        if (!v.is_number()) {
            throw ParseError(where + "." + key, "expected a number");
        }
    }
    return v.get<T>();
}

std::string format17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Instance parse_instance(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(line_context(text, e.byte), e.what());
    }
    reject_unknown(doc, {"resources", "arrivals", "edges"}, "document");
    if (!doc["resources"].is_array() || !doc["edges"].is_array()) {
        throw ParseError("document", "resources and edges must be arrays");
    }
    std::vector<Resource> resources;
    for (std::size_t k = 0; k < doc["resources"].size(); ++k) {
        const json& r = doc["resources"][k];
        std::string where = "resources[" + std::to_string(k) + "]";
        reject_unknown(r, {"id", "reward", "capacity"}, where);
        resources.push_back({field<int>(r, "id", where), field<double>(r, "reward", where),
                             field<int>(r, "capacity", where)});
    }
    int arrivals = field<int>(doc, "arrivals", "document");
    std::vector<Edge> edges;
    std::set<std::pair<int, int>> seen;
    for (std::size_t k = 0; k < doc["edges"].size(); ++k) {
        const json& e = doc["edges"][k];
        std::string where = "edges[" + std::to_string(k) + "]";
        reject_unknown(e, {"resource", "arrival", "p"}, where);
        Edge edge{field<int>(e, "resource", where), field<int>(e, "arrival", where), field<double>(e, "p", where)};
        if (!seen.insert({edge.resource, edge.arrival}).second) {
            throw ParseError(where, "duplicate (resource, arrival) edge");
        }
        edges.push_back(edge);
    }
    Instance inst(std::move(resources), arrivals, std::move(edges));
    auto violations = validate(inst);
    if (!violations.empty()) {
        throw ParseError("document", violations.front());
    }
    return inst;
}

std::string render_instance(const Instance& inst) {
    // Hand-rolled so probabilities keep exactly 17 significant digits.
    std::ostringstream out;
    out << "{\n  \"resources\": [";
    for (int i = 0; i < inst.resource_count(); ++i) {
        const Resource& r = inst.resource(i);
        out << (i ? ",\n    " : "\n    ") << "{\"id\": " << r.id << ", \"reward\": " << format17(r.reward)
            << ", \"capacity\": " << r.capacity << "}";
    }
    out << "\n  ],\n  \"arrivals\": " << inst.arrival_count() << ",\n  \"edges\": [";
    for (int e = 0; e < inst.edge_count(); ++e) {
        const Edge& edge = inst.edge(e);
        out << (e ? ",\n    " : "\n    ") << "{\"resource\": " << edge.resource << ", \"arrival\": " << edge.arrival
            << ", \"p\": " << format17(edge.p) << "}";
    }
    out << "\n  ]\n}\n";
    return out.str();
}

Instance load_instance(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ParseError(path, "cannot open file");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_instance(buf.str());
    } catch (const ParseError& e) {
        throw ParseError(path, e.what());
    }
}

void save_instance(const Instance& inst, const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw UsageError("cannot write " + path);
    }
    out << render_instance(inst);
}

}  // namespace stochmatch
