#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace stochmatch {

struct Resource {
    int id = 0;
    double reward = 1.0;
    int capacity = 1;

    friend bool operator==(const Resource&, const Resource&) = default;
};

struct Edge {
    int resource = 0;
    int arrival = 0;
    double p = 0.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

// Bipartite instance. Edges are kept in canonical (arrival, resource) order, so
// the edges of arrival t occupy a contiguous index range and every edge on an
// arrival before t has a smaller index than every edge on t. Sample paths are
// indexed by this canonical edge index.
class Instance {
public:
    Instance() = default;
    Instance(std::vector<Resource> resources, int arrival_count, std::vector<Edge> edges);

    const std::vector<Resource>& resources() const { return resources_; }
    const std::vector<Edge>& edges() const { return edges_; }
    const Resource& resource(int i) const { return resources_[i]; }
    const Edge& edge(int e) const { return edges_[e]; }
    int resource_count() const { return static_cast<int>(resources_.size()); }
    int arrival_count() const { return arrival_count_; }
    int edge_count() const { return static_cast<int>(edges_.size()); }

    // Edge indices incident on arrival t, ascending by resource.
    std::span<const int> arrival_edges(int t) const;
    // Edge indices incident on resource i, ascending by arrival.
    std::span<const int> resource_edges(int i) const;
    // First canonical edge index belonging to arrival t (t == arrival_count gives edge_count).
    int first_edge_of_arrival(int t) const { return arrival_begin_[t]; }
    // Canonical index of edge (i, t), or -1.
    int find_edge(int i, int t) const;

    // Original resource id before capacity expansion (identity otherwise).
    int origin(int i) const { return origin_.empty() ? i : origin_[i]; }
    bool unit_capacities() const;
    double max_p() const;

    friend bool operator==(const Instance& a, const Instance& b) {
        return a.resources_ == b.resources_ && a.arrival_count_ == b.arrival_count_ && a.edges_ == b.edges_;
    }

private:
    friend Instance expand_capacities(const Instance&, int);

    std::vector<Resource> resources_;
    int arrival_count_ = 0;
    std::vector<Edge> edges_;
    std::vector<int> arrival_begin_;
    std::vector<int> arrival_index_;
    std::vector<int> resource_begin_;
    std::vector<int> resource_index_;
    std::vector<int> origin_;
};

// Returns one message per violated invariant; empty means valid.
std::vector<std::string> validate(const Instance& instance);
// Throws InvalidInstance listing the first violation.
void require_valid(const Instance& instance);

// Replaces resource i by c_i unit copies. Throws CapacityExplosion when
// the total capacity exceeds `limit`.
Instance expand_capacities(const Instance& instance, int limit = 64);

struct ProbabilityStructure {
    enum class Tag { Identical, Decomposable, General };
    Tag tag = Tag::General;
    double p = 0.0;  // only for Identical
    std::vector<double> resource_factors;
    std::vector<double> arrival_factors;

    bool decomposable() const { return tag != Tag::General; }
};

const char* to_string(ProbabilityStructure::Tag tag);

ProbabilityStructure detect_structure(const Instance& instance);

enum class GeneratorKind {
    UpperTriangular,
    SingleResourceHard,
    Counterexample3x3,
    RandomDecomposable,
    RandomSmallProb,
    RandomGeneral,
};

struct GeneratorParams {
    int n = 1;
    int m = 1;
    double p = 1.0;      // upper_triangular; shared t1/t2 probability for counterexample_3x3
    double p_max = 0.01;
    double p_i_t3 = 0.1;
    double p_j_t3 = 0.5;
};

GeneratorKind parse_generator_kind(const std::string& name);
const char* to_string(GeneratorKind kind);

Instance generate(GeneratorKind kind, const GeneratorParams& params, std::uint64_t seed);

Instance upper_triangular(int n, double p);
Instance single_resource_hard(int m);
// Resources i=0, j=1, k=2; arrivals t1, t2, t3. i is adjacent to all arrivals,
// j to t2 and t3, k to t1. p_it1 = p_kt1 = p_it2 = p_jt2 = p_shared.
Instance counterexample_3x3(double p_shared, double p_i_t3, double p_j_t3);
Instance random_decomposable(int n, int m, std::uint64_t seed);
Instance random_small_prob(int n, int m, double p_max, std::uint64_t seed);
Instance random_general(int n, int m, std::uint64_t seed);

Instance parse_instance(const std::string& text);
std::string render_instance(const Instance& instance);
Instance load_instance(const std::string& path);
void save_instance(const Instance& instance, const std::string& path);

}  // namespace stochmatch
