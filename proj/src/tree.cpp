#include "mixtree/tree.hpp"

#include "mixtree/error.hpp"
#include "mixtree/math.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace mixtree {

namespace {

struct SplitScan {
    int feature = -1;
    double cut = 0.0;
    double gain = 0.0;
    // t-test ingredients for the gate
    double mean_left = 0.0, mean_right = 0.0;
    double var_left = 0.0, var_right = 0.0;
    int n_left = 0, n_right = 0;
    int n_cuts = 0;  // candidates scanned for the winning feature
};

struct Workspace {
    std::vector<int> order;
    std::vector<double> xs, ts, ws;
    std::vector<double> cw, cwt, cwt2;  // prefix sums (weight, w*t, w*t^2)
    std::vector<int> boundaries;
};

// Scan one feature on the node's rows; rows' targets/weights are aligned with
// `rows` ordering. Returns false when no admissible split exists.
bool scan_feature(const Eigen::MatrixXd& x, int feature, const std::vector<int>& rows,
                  const std::vector<double>& target, const std::vector<double>& weight,
                  int min_leaf, int max_cuts, Workspace& ws, SplitScan& best) {
    const int n = static_cast<int>(rows.size());
    ws.order.resize(n);
    std::iota(ws.order.begin(), ws.order.end(), 0);
    ws.xs.resize(n);
    for (int i = 0; i < n; ++i) ws.xs[i] = x(rows[i], feature);
    std::sort(ws.order.begin(), ws.order.end(),
              [&](int a, int b) { return ws.xs[a] < ws.xs[b]; });

    ws.ts.resize(n);
    ws.ws.resize(n);
    ws.cw.assign(n + 1, 0.0);
    ws.cwt.assign(n + 1, 0.0);
    ws.cwt2.assign(n + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        const int o = ws.order[i];
        ws.ts[i] = target[o];
        ws.ws[i] = weight[o];
        ws.cw[i + 1] = ws.cw[i] + ws.ws[i];
        ws.cwt[i + 1] = ws.cwt[i] + ws.ws[i] * ws.ts[i];
        ws.cwt2[i + 1] = ws.cwt2[i] + ws.ws[i] * ws.ts[i] * ws.ts[i];
    }

    // Positions p such that x[order[p-1]] < x[order[p]]: cutting there puts
    // p rows on the left.
    ws.boundaries.clear();
    for (int p = min_leaf; p <= n - min_leaf; ++p) {
        if (ws.xs[ws.order[p - 1]] < ws.xs[ws.order[p]]) ws.boundaries.push_back(p);
    }
    if (ws.boundaries.empty()) return false;

    // Cap the number of candidate cuts, keeping them quantile-spaced.
    std::vector<int>* cand = &ws.boundaries;
    std::vector<int> reduced;
    if (static_cast<int>(ws.boundaries.size()) > max_cuts) {
        reduced.reserve(max_cuts);
        const double step = static_cast<double>(ws.boundaries.size()) / max_cuts;
        for (int i = 0; i < max_cuts; ++i) {
            reduced.push_back(ws.boundaries[static_cast<int>((i + 0.5) * step)]);
        }
        reduced.erase(std::unique(reduced.begin(), reduced.end()), reduced.end());
        cand = &reduced;
    }

    const double w_total = ws.cw[n];
    const double s_total = ws.cwt[n];
    const double base = s_total * s_total / w_total;
    const int n_cuts = static_cast<int>(cand->size());
    bool found = false;
    for (int p : *cand) {
        const double wl = ws.cw[p];
        const double wr = w_total - wl;
        if (wl <= 0.0 || wr <= 0.0) continue;
        const double sl = ws.cwt[p];
        const double sr = s_total - sl;
        const double gain = sl * sl / wl + sr * sr / wr - base;
        if (gain > best.gain + 1e-12) {
            best.gain = gain;
            best.feature = feature;
            best.cut = 0.5 * (ws.xs[ws.order[p - 1]] + ws.xs[ws.order[p]]);
            best.n_left = p;
            best.n_right = n - p;
            best.mean_left = sl / wl;
            best.mean_right = sr / wr;
            const double ql = ws.cwt2[p];
            const double qr = ws.cwt2[n] - ql;
            best.var_left = std::max(0.0, ql / wl - best.mean_left * best.mean_left);
            best.var_right = std::max(0.0, qr / wr - best.mean_right * best.mean_right);
            best.n_cuts = n_cuts;
            found = true;
        }
    }
    return found;
}

// Welch two-sample test of the selected split. The p-value is Bonferroni
// adjusted for the candidate cuts scanned (the split location was optimized),
// and optionally for the number of variables considered.
bool passes_gate(const SplitScan& s, double alpha, bool bonferroni, int n_features) {
    if (alpha >= 1.0) return true;
    const double denom = s.var_left / std::max(1, s.n_left - 1) + s.var_right / std::max(1, s.n_right - 1);
    if (denom <= 0.0) return s.mean_left != s.mean_right;
    const double t = (s.mean_left - s.mean_right) / std::sqrt(denom);
    double p = normal_p_value(t) * std::max(1, s.n_cuts);
    if (bonferroni) p *= std::max(1, n_features);
    return p <= alpha;
}

}  // namespace

TreeModel fit_regression_tree(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              const Eigen::VectorXd* offset, const Eigen::VectorXd* weights,
                              const LearnerSpec& spec, Rng* rng, const std::vector<int>* rows_in) {
    spec.validate();
    const int n_total = static_cast<int>(x.rows());
    const int n_features = static_cast<int>(x.cols());
    if (y.size() != n_total) throw ConfigError("fit_regression_tree: y length mismatch");

    std::vector<int> root_rows;
    if (rows_in != nullptr) {
        root_rows = *rows_in;
    } else {
        root_rows.resize(n_total);
        std::iota(root_rows.begin(), root_rows.end(), 0);
    }

    TreeModel model;
    auto& nodes = model.nodes_;
    nodes.push_back(TreeNode{});

    Workspace ws;
    struct Pending {
        int node;
        std::vector<int> rows;
        int depth;
    };
    std::vector<Pending> stack;
    stack.push_back({0, std::move(root_rows), 0});

    const int k_sub = (spec.feature_fraction < 1.0 && n_features > 1)
                          ? std::max(1, static_cast<int>(std::ceil(spec.feature_fraction * n_features)))
                          : n_features;

    std::vector<double> target, weight;
    std::vector<int> feat_ids(n_features);
    std::iota(feat_ids.begin(), feat_ids.end(), 0);

    while (!stack.empty()) {
        Pending p = std::move(stack.back());
        stack.pop_back();
        const auto& rows = p.rows;
        const int n = static_cast<int>(rows.size());

        target.resize(n);
        weight.resize(n);
        double sw = 0.0, swt = 0.0;
        for (int i = 0; i < n; ++i) {
            const int r = rows[i];
            target[i] = y[r] - (offset != nullptr ? (*offset)[r] : 0.0);
            weight[i] = (weights != nullptr) ? (*weights)[r] : 1.0;
            sw += weight[i];
            swt += weight[i] * target[i];
        }
        TreeNode& node = nodes[p.node];
        node.value = swt / sw;
        node.count = n;

        if (p.depth >= spec.max_depth || n < 2 * spec.min_leaf) continue;

        std::vector<int> considered;
        if (k_sub < n_features) {
            std::vector<int> perm = rng != nullptr ? rng->permutation(n_features) : feat_ids;
            considered.assign(perm.begin(), perm.begin() + k_sub);
            std::sort(considered.begin(), considered.end());
        } else {
            considered = feat_ids;
        }

        SplitScan best;
        for (int j : considered) {
            scan_feature(x, j, rows, target, weight, spec.min_leaf, spec.max_cuts, ws, best);
        }
        if (best.feature < 0) continue;
        if (!passes_gate(best, spec.alpha, spec.bonferroni, static_cast<int>(considered.size()))) continue;

        std::vector<int> left_rows, right_rows;
        left_rows.reserve(best.n_left);
        right_rows.reserve(best.n_right);
        for (int r : rows) {
            (x(r, best.feature) < best.cut ? left_rows : right_rows).push_back(r);
        }

        const int li = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{});
        const int ri = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{});
        TreeNode& nd = nodes[p.node];
        nd.feature = best.feature;
        nd.cut = best.cut;
        nd.left = li;
        nd.right = ri;
        stack.push_back({li, std::move(left_rows), p.depth + 1});
        stack.push_back({ri, std::move(right_rows), p.depth + 1});
    }
    return model;
}

Eigen::VectorXd TreeModel::predict_link(const Eigen::MatrixXd& x) const {
    const int n = static_cast<int>(x.rows());
    Eigen::VectorXd out(n);
    for (int i = 0; i < n; ++i) {
        int node = 0;
        while (nodes_[node].feature >= 0) {
            node = x(i, nodes_[node].feature) < nodes_[node].cut ? nodes_[node].left : nodes_[node].right;
        }
        out[i] = nodes_[node].value;
    }
    return out;
}

int TreeModel::n_leaves() const {
    int count = 0;
    for (const TreeNode& n : nodes_) {
        if (n.feature < 0) ++count;
    }
    return count;
}

void TreeModel::collect_regions(const std::vector<std::string>& names, bool leaves_only,
                                std::vector<RectRegion>& out) const {
    if (!has_split()) return;
    struct Frame {
        int node;
        std::vector<Clause> path;  // one tightened clause per variable seen
    };
    auto tighten = [](std::vector<Clause> path, const std::string& var, double cut, bool right) {
        for (Clause& c : path) {
            if (c.var == var) {
                if (right) {
                    if (cut > c.lower) c.lower = cut;
                } else {
                    if (cut < c.upper) c.upper = cut;
                }
                return path;
            }
        }
        Clause c;
        c.var = var;
        if (right) {
            c.lower = cut;
        } else {
            c.upper = cut;
        }
        path.push_back(std::move(c));
        return path;
    };

    std::vector<Frame> stack;
    stack.push_back({0, {}});
    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        const TreeNode& node = nodes_[f.node];
        const bool is_leaf = node.feature < 0;
        if (!f.path.empty() && (is_leaf || !leaves_only)) {
            out.emplace_back(f.path);
        }
        if (!is_leaf) {
            const std::string& var = names.at(node.feature);
            stack.push_back({node.right, tighten(f.path, var, node.cut, true)});
            stack.push_back({node.left, tighten(f.path, var, node.cut, false)});
        }
    }
}

std::vector<RectRegion> TreeModel::leaf_regions(const std::vector<std::string>& names) const {
    std::vector<RectRegion> out;
    collect_regions(names, true, out);
    return out;
}

std::vector<RectRegion> TreeModel::node_regions(const std::vector<std::string>& names) const {
    std::vector<RectRegion> out;
    collect_regions(names, false, out);
    return out;
}

}  // namespace mixtree
