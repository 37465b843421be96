#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace mixtree {

// Observed data: covariates W (n x p), exposures A (n x m), outcome Y (n).
// Immutable after construction; no missing values are allowed in.
struct Dataset {
    Eigen::MatrixXd w;
    Eigen::MatrixXd a;
    Eigen::VectorXd y;
    Eigen::VectorXd weights;
    std::vector<std::string> w_names;
    std::vector<std::string> a_names;

    int n() const { return static_cast<int>(y.size()); }
    int n_covariates() const { return static_cast<int>(w.cols()); }
    int n_exposures() const { return static_cast<int>(a.cols()); }

    int exposure_index(const std::string& name) const;

    Dataset subset(const std::vector<int>& rows) const;

    // Validates shapes, finiteness, and name uniqueness.
    static Dataset make(Eigen::MatrixXd w, Eigen::MatrixXd a, Eigen::VectorXd y,
                        std::vector<std::string> w_names, std::vector<std::string> a_names,
                        Eigen::VectorXd weights = Eigen::VectorXd());
};

// Which columns of a CSV play which role.
struct ColumnRoles {
    std::string outcome;
    std::vector<std::string> exposures;
    std::vector<std::string> covariates;
};

// Strict numeric CSV ingestion: header row required, every referenced cell must
// parse as a finite number. Errors carry row/column locations.
Dataset read_csv_dataset(const std::string& path, const ColumnRoles& roles);

// Parsed CSV table (used by ingestion and by tests).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};
CsvTable read_csv(const std::string& path);

}  // namespace mixtree
