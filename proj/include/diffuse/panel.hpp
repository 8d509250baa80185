#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace diffuse {

// A T x N predictor panel: rows are time periods, columns are series.
// Column names are optional (empty, or one per column).
struct Panel {
    Eigen::MatrixXd values;
    std::vector<std::string> names;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
};

// Throws DataError unless all entries are finite, rows >= 2, cols >= 1 and
// names (when present) match the column count.
void validate_panel(const Panel& panel);

} // namespace diffuse
