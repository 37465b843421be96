#include "mixtree/dataset.hpp"

#include "mixtree/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mixtree {

namespace {

void check_finite(const Eigen::MatrixXd& m, const std::string& what) {
    if (!m.allFinite()) throw SchemaError(what + " contains missing or non-finite values");
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    fields.push_back(field);
    return fields;
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

}  // namespace

int Dataset::exposure_index(const std::string& name) const {
    for (int j = 0; j < n_exposures(); ++j) {
        if (a_names[j] == name) return j;
    }
    throw SchemaError("unknown exposure column: " + name);
}

Dataset Dataset::subset(const std::vector<int>& rows) const {
    Dataset out;
    const int k = static_cast<int>(rows.size());
    out.w.resize(k, w.cols());
    out.a.resize(k, a.cols());
    out.y.resize(k);
    out.weights.resize(k);
    for (int i = 0; i < k; ++i) {
        out.w.row(i) = w.row(rows[i]);
        out.a.row(i) = a.row(rows[i]);
        out.y[i] = y[rows[i]];
        out.weights[i] = weights[rows[i]];
    }
    out.w_names = w_names;
    out.a_names = a_names;
    return out;
}

Dataset Dataset::make(Eigen::MatrixXd w, Eigen::MatrixXd a, Eigen::VectorXd y,
                      std::vector<std::string> w_names, std::vector<std::string> a_names,
                      Eigen::VectorXd weights) {
    const int n = static_cast<int>(y.size());
    if (w.rows() != n || a.rows() != n) throw SchemaError("Dataset: row count mismatch");
    if (static_cast<int>(w_names.size()) != w.cols()) throw SchemaError("Dataset: covariate name count mismatch");
    if (static_cast<int>(a_names.size()) != a.cols()) throw SchemaError("Dataset: exposure name count mismatch");
    if (a.cols() == 0) throw SchemaError("Dataset: no exposure columns");
    check_finite(w, "covariates");
    check_finite(a, "exposures");
    check_finite(y, "outcome");
    std::set<std::string> seen;
    for (const auto& nm : w_names) {
        if (!seen.insert(nm).second) throw SchemaError("duplicate column name: " + nm);
    }
    for (const auto& nm : a_names) {
        if (!seen.insert(nm).second) throw SchemaError("duplicate column name: " + nm);
    }
    Dataset d;
    d.w = std::move(w);
    d.a = std::move(a);
    d.y = std::move(y);
    d.w_names = std::move(w_names);
    d.a_names = std::move(a_names);
    if (weights.size() == 0) {
        d.weights = Eigen::VectorXd::Ones(n);
    } else {
        if (static_cast<int>(weights.size()) != n) throw SchemaError("Dataset: weight length mismatch");
        if ((weights.array() <= 0.0).any()) throw SchemaError("Dataset: weights must be positive");
        d.weights = std::move(weights);
    }
    return d;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open file: " + path);
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty file: " + path);
    table.header = split_csv_line(line);
    for (auto& h : table.header) h = trim(h);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        table.rows.push_back(split_csv_line(line));
    }
    return table;
}

Dataset read_csv_dataset(const std::string& path, const ColumnRoles& roles) {
    if (roles.outcome.empty()) throw ConfigError("no outcome column configured");
    if (roles.exposures.empty()) throw ConfigError("no exposure columns configured");
    {
        std::set<std::string> all;
        all.insert(roles.outcome);
        for (const auto& e : roles.exposures) {
            if (!all.insert(e).second) throw ConfigError("column used in two roles: " + e);
        }
        for (const auto& c : roles.covariates) {
            if (!all.insert(c).second) throw ConfigError("column used in two roles: " + c);
        }
    }

    CsvTable table = read_csv(path);
    auto col_index = [&](const std::string& name) {
        for (std::size_t j = 0; j < table.header.size(); ++j) {
            if (table.header[j] == name) return static_cast<int>(j);
        }
        throw SchemaError("column not found in " + path + ": " + name);
    };

    const int y_col = col_index(roles.outcome);
    std::vector<int> a_cols, w_cols;
    for (const auto& nm : roles.exposures) a_cols.push_back(col_index(nm));
    for (const auto& nm : roles.covariates) w_cols.push_back(col_index(nm));

    const int n = static_cast<int>(table.rows.size());
    if (n == 0) throw SchemaError("no data rows in " + path);

    auto parse_cell = [&](int i, int j) {
        if (j >= static_cast<int>(table.rows[i].size())) {
            throw SchemaError("row " + std::to_string(i + 2) + " is short in " + path);
        }
        const std::string cell = trim(table.rows[i][j]);
        if (cell.empty() || cell == "NA" || cell == "nan" || cell == "NaN") {
            throw SchemaError("missing value at row " + std::to_string(i + 2) + ", column " +
                              table.header[j]);
        }
        std::size_t pos = 0;
        double v;
        try {
            v = std::stod(cell, &pos);
        } catch (const std::exception&) {
            throw SchemaError("non-numeric cell at row " + std::to_string(i + 2) + ", column " +
                              table.header[j] + ": '" + cell + "'");
        }
        if (pos != cell.size() || !std::isfinite(v)) {
            throw SchemaError("non-numeric cell at row " + std::to_string(i + 2) + ", column " +
                              table.header[j] + ": '" + cell + "'");
        }
        return v;
    };

    Eigen::MatrixXd w(n, static_cast<int>(w_cols.size()));
    Eigen::MatrixXd a(n, static_cast<int>(a_cols.size()));
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        y[i] = parse_cell(i, y_col);
        for (std::size_t j = 0; j < a_cols.size(); ++j) a(i, j) = parse_cell(i, a_cols[j]);
        for (std::size_t j = 0; j < w_cols.size(); ++j) w(i, j) = parse_cell(i, w_cols[j]);
    }
    return Dataset::make(std::move(w), std::move(a), std::move(y), roles.covariates, roles.exposures);
}

}  // namespace mixtree
