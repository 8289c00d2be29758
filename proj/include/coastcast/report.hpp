#pragma once

#include <array>
#include <string>
#include <vector>

#include "coastcast/data.hpp"
#include "coastcast/model.hpp"

namespace coastcast {

struct EvalRow {
    std::string model;
    std::string season;    // spring/summer/autumn/winter or ALL
    std::size_t horizon_h = 0;
    std::string variable;  // variable name or ALL
    double mse = 0.0;      // over all pixels of the scaled grids
    double sea_mse = 0.0;  // restricted to sea pixels (reporting extra)
    std::size_t samples = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
};

// Per-season, per-variable and combined MSE of a model on the scaled series.
// Seasons with no windows are skipped; an all-empty split is an error.
// per_season_rows=false collapses the report to the combined ALL rows
// (index-based splits have no season identity).
EvalReport evaluate_model(ModelF& model, const GridSeries& scaled,
                          const std::array<std::vector<std::size_t>, 4>& season_windows,
                          const WindowSpec& spec, const std::string& model_label,
                          std::size_t batch_size = 16, bool per_season_rows = true);

std::string report_csv(const EvalReport& report, bool include_sea_column = false);

// 8-bit binary PGM plus a JSON sidecar recording the value range used for
// normalization, so the dump can be mapped back to values.
void write_pgm_with_sidecar(const TensorF& image, const std::string& base_path);
TensorF read_pgm_with_sidecar(const std::string& base_path);

}  // namespace coastcast
