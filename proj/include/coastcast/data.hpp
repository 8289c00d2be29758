#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "coastcast/tensor.hpp"
#include "coastcast/training.hpp"

namespace coastcast {

// UTC civil-time helpers. Timestamps are seconds since the Unix epoch.
std::int64_t utc_from_civil(int year, unsigned month, unsigned day,
                            unsigned hour = 0, unsigned minute = 0, unsigned second = 0);
// Accepts "YYYY-MM-DD" or "YYYY-MM-DDTHH:MM:SS" with an optional trailing 'Z'.
std::int64_t parse_iso_time(const std::string& text);
std::string format_iso_time(std::int64_t seconds);

// The (L,H,W,V) dataset: gridded hourly fields, a land/sea mask, timestamps.
struct GridSeries {
    TensorF values;  // (L,H,W,V) row-major
    std::int64_t start_time = 0;
    std::int64_t step_seconds = 3600;
    std::vector<std::string> variable_names;
    std::vector<std::uint8_t> mask;  // H*W entries, 1 = sea, 0 = land

    std::size_t steps() const { return values.shape[0]; }
    std::size_t height() const { return values.shape[1]; }
    std::size_t width() const { return values.shape[2]; }
    std::size_t vars() const { return values.shape[3]; }
    bool is_sea(std::size_t row, std::size_t col) const { return mask[row * width() + col] != 0; }
    float& at(std::size_t t, std::size_t r, std::size_t c, std::size_t v) {
        return values[((t * height() + r) * width() + c) * vars() + v];
    }
    float at(std::size_t t, std::size_t r, std::size_t c, std::size_t v) const {
        return values[((t * height() + r) * width() + c) * vars() + v];
    }
    void validate() const;
};

void write_container(const GridSeries& series, const std::string& path);
GridSeries read_container(const std::string& path);

struct StepRange {
    std::size_t begin = 0, end = 0;  // half-open step indices
    std::size_t count() const { return end - begin; }
};

struct ScalerParams {
    std::vector<double> x_min, x_max;  // per variable, over sea pixels of the training range

    std::string to_json_string() const;
    static ScalerParams from_json_string(const std::string& text);
};

ScalerParams fit_scaler(const GridSeries& series, StepRange train_range);
// Sea pixels map to 0.1 + (x - min) * 0.9 / (max - min); land pixels become 0.
GridSeries apply_scale(const GridSeries& series, const ScalerParams& params);
GridSeries inverse_scale(const GridSeries& series, const ScalerParams& params);

// Keeps rows [0, target_h) and cols [0, target_w): the crop removes the
// high-index (bottom/right) rows and columns. The mask is cropped alike.
GridSeries crop_spatial(const GridSeries& series, std::size_t target_h, std::size_t target_w);

struct WindowSpec {
    std::size_t lags = 10;
    std::size_t horizon = 12;
};

// Sample i: inputs [i, i+lags), target step i+lags-1+horizon.
std::size_t window_count(std::size_t steps, const WindowSpec& spec);
std::size_t window_target_step(std::size_t index, const WindowSpec& spec);
TensorF window_input(const GridSeries& series, std::size_t index, const WindowSpec& spec);
TensorF window_target(const GridSeries& series, std::size_t index, const WindowSpec& spec);

// SampleSource over a subset of a series' windows.
class WindowDataset : public SampleSource {
public:
    WindowDataset(const GridSeries& series, WindowSpec spec, std::vector<std::size_t> ids)
        : series_(&series), spec_(spec), ids_(std::move(ids)) {}
    std::size_t size() const override { return ids_.size(); }
    void fetch(std::size_t index, TensorF& input, TensorF& target) const override {
        input = window_input(*series_, ids_[index], spec_);
        target = window_target(*series_, ids_[index], spec_);
    }
    const std::vector<std::size_t>& ids() const { return ids_; }

private:
    const GridSeries* series_;
    WindowSpec spec_;
    std::vector<std::size_t> ids_;
};

struct DateRange {
    std::int64_t begin = 0, end = 0;  // [begin, end) in UTC seconds
};

inline constexpr std::array<const char*, 4> kSeasonNames{"spring", "summer", "autumn", "winter"};

struct SplitSpec {
    DateRange train;
    std::array<DateRange, 4> validation;  // spring, summer, autumn, winter
    std::array<DateRange, 4> test;

    // The paper protocol: one year of training from 2017-03-01, four 21-day
    // validation and test periods per season.
    static SplitSpec paper_defaults();
};

struct SplitIndices {
    StepRange train_steps;
    std::array<StepRange, 4> validation_steps;
    std::array<StepRange, 4> test_steps;
    std::vector<std::size_t> train_windows;
    std::array<std::vector<std::size_t>, 4> validation_windows;
    std::array<std::vector<std::size_t>, 4> test_windows;

    std::vector<std::size_t> all_validation_windows() const;
    std::vector<std::size_t> all_test_windows() const;
};

StepRange steps_for_range(const GridSeries& series, DateRange range);
// Windows whose input or target steps leave [range.begin, range.end) are excluded.
std::vector<std::size_t> windows_within(StepRange range, std::size_t total_steps, const WindowSpec& spec);
SplitIndices split_by_dates(const GridSeries& series, const SplitSpec& split, const WindowSpec& spec);
SplitIndices split_by_fractions(const GridSeries& series, double train_frac, double val_frac,
                                const WindowSpec& spec);

// Deterministic synthetic coastal fields: rotational-plus-drift currents, an
// advected salinity scalar, a diurnal-tide surface height, and a rectangular
// land region. Extents must be >= 8.
GridSeries synth_generate(std::uint64_t seed, std::size_t steps, std::size_t height, std::size_t width);

}  // namespace coastcast
