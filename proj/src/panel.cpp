#include "diffuse/panel.hpp"

#include "diffuse/errors.hpp"

namespace diffuse {

void validate_panel(const Panel& panel) {
    if (panel.rows() < 2)
        throw DataError("panel must have at least 2 rows, got " +
                        std::to_string(panel.rows()));
    if (panel.cols() < 1)
        throw DataError("panel must have at least 1 column");
    if (!panel.values.allFinite())
        throw DataError("panel contains non-finite entries");
    if (!panel.names.empty() &&
        panel.names.size() != static_cast<std::size_t>(panel.cols()))
        throw DataError("panel has " + std::to_string(panel.names.size()) +
                        " names for " + std::to_string(panel.cols()) +
                        " columns");
}

} // namespace diffuse
