#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "random.hpp"

namespace conemkt {

struct Violation {
    std::string where;
    std::string rule;
};

struct ValidationReport {
    bool ok = true;
    std::vector<Violation> violations;

    void add(std::string where, std::string rule) {
        ok = false;
        violations.push_back({std::move(where), std::move(rule)});
    }
};

struct TreeNode {
    std::string id;
    int time = 0;
    int parent = -1;               // index; -1 for the root
    double prob = 1.0;             // transition probability from the parent; 1 at root
    std::vector<int> children;     // indexes, in insertion order
};

// Node spec used by builders/parsers before indexes are resolved.
struct NodeSpec {
    std::string id;
    int time = 0;
    std::string parent;            // empty = root
    double prob = 1.0;
};

// Rooted tree carrying the filtered space (Omega, (F_t), P). Immutable after
// construction. Transition probabilities live on the child edge so martingale
// constraints stay local to a node and its children.
class ScenarioTree {
  public:
    ScenarioTree(int horizon, std::vector<TreeNode> nodes, int root)
        : horizon_(horizon), nodes_(std::move(nodes)), root_(root) {
        index_.reserve(nodes_.size());
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
            index_.emplace(nodes_[i].id, i);
        for (int i = 0; i < static_cast<int>(nodes_.size()); ++i)
            if (nodes_[i].children.empty()) leaves_.push_back(i);
        prob_.assign(nodes_.size(), 0.0);
        if (root_ >= 0) accumulate_probability(root_, 1.0);
    }

    // Resolves string parent references. Throws on duplicate ids, unknown
    // parents, or a missing root; numeric/structural invariants are left to
    // validate_tree.
    static ScenarioTree build(int horizon, const std::vector<NodeSpec>& specs) {
        std::unordered_map<std::string, int> index;
        std::vector<TreeNode> nodes;
        nodes.reserve(specs.size());
        for (const auto& s : specs) {
            if (index.count(s.id))
                throw std::invalid_argument("duplicate node id: " + s.id);
            index.emplace(s.id, static_cast<int>(nodes.size()));
            TreeNode n;
            n.id = s.id;
            n.time = s.time;
            n.prob = s.parent.empty() ? 1.0 : s.prob;
            nodes.push_back(std::move(n));
        }
        int root = -1;
        for (int i = 0; i < static_cast<int>(specs.size()); ++i) {
            if (specs[i].parent.empty()) {
                if (root >= 0)
                    throw std::invalid_argument("multiple roots: " + specs[i].id);
                root = i;
                continue;
            }
            auto it = index.find(specs[i].parent);
            if (it == index.end())
                throw std::invalid_argument("unknown parent id: " + specs[i].parent);
            nodes[i].parent = it->second;
            nodes[it->second].children.push_back(i);
        }
        if (root < 0) throw std::invalid_argument("tree has no root");
        return ScenarioTree(horizon, std::move(nodes), root);
    }

    int horizon() const { return horizon_; }
    int size() const { return static_cast<int>(nodes_.size()); }
    int root() const { return root_; }
    const TreeNode& node(int i) const { return nodes_[i]; }
    const std::vector<int>& leaves() const { return leaves_; }
    bool is_leaf(int i) const { return nodes_[i].children.empty(); }

    int node_index(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) throw std::invalid_argument("unknown node id: " + id);
        return it->second;
    }

    std::vector<int> nodes_at_time(int t) const {
        std::vector<int> out;
        for (int i = 0; i < size(); ++i)
            if (nodes_[i].time == t) out.push_back(i);
        return out;
    }

    // Product of transition probabilities along the root path; 1 at the root.
    double node_probability(int i) const { return prob_[i]; }

  private:
    void accumulate_probability(int n, double p) {
        prob_[n] = p;
        for (int c : nodes_[n].children) accumulate_probability(c, p * nodes_[c].prob);
    }

    int horizon_;
    std::vector<TreeNode> nodes_;
    int root_;
    std::vector<int> leaves_;
    std::vector<double> prob_;
    std::unordered_map<std::string, int> index_;
};

// One value per node; adaptedness is structural (node-indexed = F_t-measurable).
template <typename T>
struct AdaptedProcess {
    std::vector<T> values;

    AdaptedProcess() = default;
    explicit AdaptedProcess(int n) : values(n) {}
    AdaptedProcess(int n, const T& init) : values(n, init) {}

    T& operator[](int i) { return values[i]; }
    const T& operator[](int i) const { return values[i]; }
    int size() const { return static_cast<int>(values.size()); }
};

inline ValidationReport validate_tree(const ScenarioTree& tree) {
    ValidationReport report;
    int roots = 0;
    for (int i = 0; i < tree.size(); ++i) {
        const TreeNode& n = tree.node(i);
        if (n.parent < 0) {
            ++roots;
            if (n.time != 0) report.add(n.id, "root must have time 0");
        } else {
            const TreeNode& p = tree.node(n.parent);
            if (n.time != p.time + 1)
                report.add(n.id, "time gap: node time " + std::to_string(n.time) +
                                     " under parent time " + std::to_string(p.time));
        }
        if (n.children.empty()) {
            if (n.time != tree.horizon())
                report.add(n.id, "leaf not at horizon T=" + std::to_string(tree.horizon()));
        } else {
            double sum = 0.0;
            for (int c : n.children) {
                sum += tree.node(c).prob;
                if (!(tree.node(c).prob > 0.0))
                    report.add(tree.node(c).id, "transition probability not strictly positive");
            }
            if (std::abs(sum - 1.0) > 1e-12)
                report.add(n.id, "probabilities sum to " + std::to_string(sum) + " != 1 at node " + n.id);
        }
    }
    if (roots != 1) report.add("tree", "expected exactly one root, found " + std::to_string(roots));
    return report;
}

// E_P[terminal | F_t] at every node, computed bottom-up so the tower property
// holds by construction (identical summation order at every level).
inline std::vector<double> condexp_all(const ScenarioTree& tree,
                                       const std::vector<double>& terminal) {
    if (static_cast<int>(terminal.size()) != tree.size())
        throw std::invalid_argument("terminal vector must be node-indexed");
    std::vector<double> value(tree.size(), 0.0);
    // nodes are reachable from the root; recurse explicitly to avoid ordering assumptions
    struct Rec {
        const ScenarioTree& tree;
        const std::vector<double>& terminal;
        std::vector<double>& value;
        double run(int n) {
            if (tree.is_leaf(n)) return value[n] = terminal[n];
            double acc = 0.0;
            for (int c : tree.node(n).children) acc += tree.node(c).prob * run(c);
            return value[n] = acc;
        }
    } rec{tree, terminal, value};
    rec.run(tree.root());
    return value;
}

// Values at all time-t nodes, aligned with tree.nodes_at_time(t).
inline std::vector<double> conditional_expectation(const ScenarioTree& tree,
                                                   const std::vector<double>& terminal,
                                                   int t) {
    if (t < 0 || t > tree.horizon())
        throw std::invalid_argument("conditional expectation time out of range");
    const std::vector<double> all = condexp_all(tree, terminal);
    std::vector<double> out;
    for (int n : tree.nodes_at_time(t)) out.push_back(all[n]);
    return out;
}

inline ScenarioTree generate_random_tree(std::uint64_t seed, int branching, int horizon) {
    if (branching < 1 || branching > 19)
        throw std::invalid_argument("branching must be in [1, 19]");
    if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
    Rng rng(seed);
    std::vector<TreeNode> nodes;
    nodes.push_back({"n0", 0, -1, 1.0, {}});
    std::vector<int> frontier{0};
    for (int t = 0; t < horizon; ++t) {
        std::vector<int> next;
        for (int parent : frontier) {
            const int k = branching == 1 ? 1 : rng.uniform_int(2, branching);
            std::vector<double> raw(k);
            double total = 0.0;
            for (double& u : raw) total += (u = rng.uniform(0.1, 1.0));
            for (int c = 0; c < k; ++c) {
                // floor at 0.05, remainder proportional to the raw draw
                const double p = k == 1 ? 1.0 : 0.05 + (1.0 - 0.05 * k) * (raw[c] / total);
                const int idx = static_cast<int>(nodes.size());
                nodes.push_back({"n" + std::to_string(idx), t + 1, parent, p, {}});
                nodes[parent].children.push_back(idx);
                next.push_back(idx);
            }
        }
        frontier = std::move(next);
    }
    return ScenarioTree(horizon, std::move(nodes), 0);
}

}  // namespace conemkt
