#include "coastcast/data.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

#include "coastcast/detail/binio.hpp"

namespace coastcast {

using nlohmann::json;

namespace {

// Howard Hinnant's civil-from-days algorithms; proleptic Gregorian, UTC.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    y = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y += m <= 2;
}

}  // namespace

std::int64_t utc_from_civil(int year, unsigned month, unsigned day,
                            unsigned hour, unsigned minute, unsigned second) {
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60) {
        throw ValueError("invalid civil time");
    }
    return days_from_civil(year, month, day) * 86400 + hour * 3600 + minute * 60 + second;
}

std::int64_t parse_iso_time(const std::string& text) {
    int y = 0;
    unsigned mo = 0, d = 0, h = 0, mi = 0, s = 0;
    if (std::sscanf(text.c_str(), "%d-%u-%uT%u:%u:%u", &y, &mo, &d, &h, &mi, &s) >= 3) {
        return utc_from_civil(y, mo, d, h, mi, s);
    }
    throw FormatError("cannot parse ISO-8601 time: '" + text + "'");
}

std::string format_iso_time(std::int64_t seconds) {
    std::int64_t days = seconds / 86400;
    std::int64_t rem = seconds % 86400;
    if (rem < 0) {
        rem += 86400;
        days -= 1;
    }
    std::int64_t y;
    unsigned mo, d;
    civil_from_days(days, y, mo, d);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02uT%02lld:%02lld:%02lldZ",
                  static_cast<long long>(y), mo, d, static_cast<long long>(rem / 3600),
                  static_cast<long long>((rem % 3600) / 60), static_cast<long long>(rem % 60));
    return buf;
}

void GridSeries::validate() const {
    if (values.rank() != 4) throw ShapeError("GridSeries values must be (L,H,W,V), got " + shape_str(values.shape));
    if (variable_names.size() != vars()) {
        throw ValueError("GridSeries has " + std::to_string(vars()) + " variables but " +
                         std::to_string(variable_names.size()) + " names");
    }
    if (mask.size() != height() * width()) throw ShapeError("GridSeries mask size mismatch");
    for (std::uint8_t m : mask) {
        if (m > 1) throw ValueError("GridSeries mask entries must be 0 or 1");
    }
    if (step_seconds <= 0) throw ValueError("GridSeries step_seconds must be positive");
}

void write_container(const GridSeries& series, const std::string& path) {
    series.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open container for writing: " + path);
    out.write("CTEN", 4);
    detail::write_le<std::uint32_t>(out, 1);
    detail::write_le<std::uint8_t>(out, 0);  // dtype f32
    for (std::size_t d : series.values.shape) detail::write_le<std::uint64_t>(out, d);

    json meta;
    meta["start_time"] = format_iso_time(series.start_time);
    meta["step_seconds"] = series.step_seconds;
    meta["variables"] = series.variable_names;
    detail::write_string(out, meta.dump());

    out.write(reinterpret_cast<const char*>(series.mask.data()),
              static_cast<std::streamsize>(series.mask.size()));
    if (!out) throw IoError("container write failed: " + path);
    detail::write_f32_block(out, series.values.ptr(), series.values.numel());
    if (!out) throw IoError("container write failed: " + path);
}

GridSeries read_container(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open container: " + path);
    detail::expect_magic(in, "CTEN", "container");
    const auto version = detail::read_le<std::uint32_t>(in, "container version");
    if (version != 1) throw FormatError("unsupported container version " + std::to_string(version));
    const auto dtype = detail::read_le<std::uint8_t>(in, "container dtype");
    if (dtype != 0) throw FormatError("unsupported container dtype " + std::to_string(dtype));

    Shape shape(4);
    std::size_t n = 1;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto e = detail::read_le<std::uint64_t>(in, "container dims");
        if (e == 0 || e > (std::uint64_t(1) << 32)) throw FormatError("container dimension out of range");
        shape[i] = static_cast<std::size_t>(e);
        if (n > (std::size_t(1) << 33) / shape[i]) throw FormatError("container dimension overflow");
        n *= shape[i];
    }

    GridSeries s;
    const std::string meta_text = detail::read_string(in, "container metadata");
    try {
        json meta = json::parse(meta_text);
        s.start_time = parse_iso_time(meta.at("start_time").get<std::string>());
        s.step_seconds = meta.at("step_seconds").get<std::int64_t>();
        s.variable_names = meta.at("variables").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad container metadata: ") + e.what());
    }

    s.mask.resize(shape[1] * shape[2]);
    in.read(reinterpret_cast<char*>(s.mask.data()), static_cast<std::streamsize>(s.mask.size()));
    if (!in) throw FormatError("truncated file while reading container mask");

    s.values = TensorF::zeros(shape);
    detail::read_f32_block(in, s.values.ptr(), s.values.numel(), "container payload");
    s.validate();
    return s;
}

std::string ScalerParams::to_json_string() const {
    json j;
    j["x_min"] = x_min;
    j["x_max"] = x_max;
    return j.dump();
}

ScalerParams ScalerParams::from_json_string(const std::string& text) {
    ScalerParams p;
    try {
        json j = json::parse(text);
        p.x_min = j.at("x_min").get<std::vector<double>>();
        p.x_max = j.at("x_max").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad scaler JSON: ") + e.what());
    }
    if (p.x_min.size() != p.x_max.size()) throw FormatError("scaler min/max length mismatch");
    return p;
}

ScalerParams fit_scaler(const GridSeries& series, StepRange train_range) {
    if (train_range.begin >= train_range.end || train_range.end > series.steps()) {
        throw ValueError("scaler training range is empty or out of bounds");
    }
    const std::size_t V = series.vars();
    ScalerParams p;
    p.x_min.assign(V, std::numeric_limits<double>::infinity());
    p.x_max.assign(V, -std::numeric_limits<double>::infinity());
    for (std::size_t t = train_range.begin; t < train_range.end; ++t) {
        for (std::size_t r = 0; r < series.height(); ++r) {
            for (std::size_t c = 0; c < series.width(); ++c) {
                if (!series.is_sea(r, c)) continue;
                for (std::size_t v = 0; v < V; ++v) {
                    const double x = static_cast<double>(series.at(t, r, c, v));
                    p.x_min[v] = std::min(p.x_min[v], x);
                    p.x_max[v] = std::max(p.x_max[v], x);
                }
            }
        }
    }
    for (std::size_t v = 0; v < V; ++v) {
        if (!std::isfinite(p.x_min[v])) throw ValueError("scaler saw no sea pixels");
        if (p.x_max[v] <= p.x_min[v]) {
            throw ValueError("variable '" + series.variable_names[v] + "' is constant over the training range");
        }
    }
    return p;
}

namespace {

GridSeries scale_impl(const GridSeries& series, const ScalerParams& params, bool inverse) {
    if (params.x_min.size() != series.vars()) {
        throw ValueError("scaler was fitted for " + std::to_string(params.x_min.size()) + " variables");
    }
    GridSeries out = series;
    const std::size_t V = series.vars();
    for (std::size_t t = 0; t < series.steps(); ++t) {
        for (std::size_t r = 0; r < series.height(); ++r) {
            for (std::size_t c = 0; c < series.width(); ++c) {
                const bool sea = series.is_sea(r, c);
                for (std::size_t v = 0; v < V; ++v) {
                    if (!sea) {
                        out.at(t, r, c, v) = 0.0f;
                        continue;
                    }
                    const double span = params.x_max[v] - params.x_min[v];
                    const double x = static_cast<double>(series.at(t, r, c, v));
                    const double y = inverse ? (x - 0.1) * span / 0.9 + params.x_min[v]
                                             : 0.1 + (x - params.x_min[v]) * 0.9 / span;
                    out.at(t, r, c, v) = static_cast<float>(y);
                }
            }
        }
    }
    return out;
}

}  // namespace

GridSeries apply_scale(const GridSeries& series, const ScalerParams& params) {
    return scale_impl(series, params, false);
}

GridSeries inverse_scale(const GridSeries& series, const ScalerParams& params) {
    return scale_impl(series, params, true);
}

GridSeries crop_spatial(const GridSeries& series, std::size_t target_h, std::size_t target_w) {
    if (target_h > series.height() || target_w > series.width() || target_h == 0 || target_w == 0) {
        throw ShapeError("crop target " + std::to_string(target_h) + "x" + std::to_string(target_w) +
                         " exceeds grid " + std::to_string(series.height()) + "x" + std::to_string(series.width()));
    }
    GridSeries out = series;
    out.values = tensor_crop(series.values, {{0, series.steps()}, {0, target_h}, {0, target_w}, {0, series.vars()}});
    out.mask.resize(target_h * target_w);
    for (std::size_t r = 0; r < target_h; ++r) {
        for (std::size_t c = 0; c < target_w; ++c) out.mask[r * target_w + c] = series.mask[r * series.width() + c];
    }
    return out;
}

std::size_t window_count(std::size_t steps, const WindowSpec& spec) {
    if (spec.lags == 0 || spec.horizon == 0) throw ValueError("window lags and horizon must be >= 1");
    if (steps < spec.lags + spec.horizon) {
        throw ValueError("series too short for windows: " + std::to_string(steps) + " steps < lags " +
                         std::to_string(spec.lags) + " + horizon " + std::to_string(spec.horizon));
    }
    return steps - spec.lags - spec.horizon + 1;
}

std::size_t window_target_step(std::size_t index, const WindowSpec& spec) {
    return index + spec.lags - 1 + spec.horizon;
}

TensorF window_input(const GridSeries& series, std::size_t index, const WindowSpec& spec) {
    const std::size_t pix = series.height() * series.width() * series.vars();
    TensorF out = TensorF::zeros({spec.lags, series.height(), series.width(), series.vars()});
    std::copy(series.values.data.begin() + static_cast<std::ptrdiff_t>(index * pix),
              series.values.data.begin() + static_cast<std::ptrdiff_t>((index + spec.lags) * pix),
              out.data.begin());
    return out;
}

TensorF window_target(const GridSeries& series, std::size_t index, const WindowSpec& spec) {
    const std::size_t pix = series.height() * series.width() * series.vars();
    const std::size_t t = window_target_step(index, spec);
    TensorF out = TensorF::zeros({1, series.height(), series.width(), series.vars()});
    std::copy(series.values.data.begin() + static_cast<std::ptrdiff_t>(t * pix),
              series.values.data.begin() + static_cast<std::ptrdiff_t>((t + 1) * pix), out.data.begin());
    return out;
}

StepRange steps_for_range(const GridSeries& series, DateRange range) {
    if (range.end <= range.begin) throw ValueError("date range is empty");
    const std::int64_t span_end = series.start_time + static_cast<std::int64_t>(series.steps()) * series.step_seconds;
    if (range.begin < series.start_time || range.end > span_end) {
        throw ValueError("date range [" + format_iso_time(range.begin) + ", " + format_iso_time(range.end) +
                         ") lies outside the series span [" + format_iso_time(series.start_time) + ", " +
                         format_iso_time(span_end) + ")");
    }
    const auto to_index = [&](std::int64_t t) {
        return static_cast<std::size_t>((t - series.start_time + series.step_seconds - 1) / series.step_seconds);
    };
    StepRange r{to_index(range.begin), to_index(range.end)};
    if (r.begin >= r.end) throw ValueError("date range resolves to no steps");
    return r;
}

std::vector<std::size_t> windows_within(StepRange range, std::size_t total_steps, const WindowSpec& spec) {
    std::vector<std::size_t> ids;
    if (range.count() < spec.lags + spec.horizon) return ids;
    const std::size_t max_index = total_steps - spec.lags - spec.horizon;  // inclusive
    for (std::size_t i = range.begin; i <= max_index; ++i) {
        if (window_target_step(i, spec) >= range.end) break;
        ids.push_back(i);
    }
    return ids;
}

std::vector<std::size_t> SplitIndices::all_validation_windows() const {
    std::vector<std::size_t> out;
    for (const auto& v : validation_windows) out.insert(out.end(), v.begin(), v.end());
    return out;
}

std::vector<std::size_t> SplitIndices::all_test_windows() const {
    std::vector<std::size_t> out;
    for (const auto& v : test_windows) out.insert(out.end(), v.begin(), v.end());
    return out;
}

SplitSpec SplitSpec::paper_defaults() {
    SplitSpec s;
    s.train = {utc_from_civil(2017, 3, 1), utc_from_civil(2018, 3, 1)};
    s.validation[0] = {utc_from_civil(2018, 4, 1), utc_from_civil(2018, 4, 22)};
    s.validation[1] = {utc_from_civil(2018, 7, 1), utc_from_civil(2018, 7, 22)};
    s.validation[2] = {utc_from_civil(2018, 10, 1), utc_from_civil(2018, 10, 22)};
    s.validation[3] = {utc_from_civil(2019, 1, 1), utc_from_civil(2019, 1, 22)};
    // 21 full days per season starting the day after validation ends
    s.test[0] = {utc_from_civil(2018, 4, 23), utc_from_civil(2018, 5, 14)};
    s.test[1] = {utc_from_civil(2018, 7, 23), utc_from_civil(2018, 8, 13)};
    s.test[2] = {utc_from_civil(2018, 10, 23), utc_from_civil(2018, 11, 13)};
    s.test[3] = {utc_from_civil(2019, 1, 23), utc_from_civil(2019, 2, 13)};
    return s;
}

SplitIndices split_by_dates(const GridSeries& series, const SplitSpec& split, const WindowSpec& spec) {
    SplitIndices out;
    out.train_steps = steps_for_range(series, split.train);
    out.train_windows = windows_within(out.train_steps, series.steps(), spec);
    for (std::size_t s = 0; s < 4; ++s) {
        out.validation_steps[s] = steps_for_range(series, split.validation[s]);
        out.validation_windows[s] = windows_within(out.validation_steps[s], series.steps(), spec);
        out.test_steps[s] = steps_for_range(series, split.test[s]);
        out.test_windows[s] = windows_within(out.test_steps[s], series.steps(), spec);
    }
    return out;
}

SplitIndices split_by_fractions(const GridSeries& series, double train_frac, double val_frac,
                                const WindowSpec& spec) {
    if (train_frac <= 0.0 || val_frac <= 0.0 || train_frac + val_frac >= 1.0) {
        throw ValueError("split fractions must be positive with train+val < 1");
    }
    const std::size_t L = series.steps();
    const auto train_end = static_cast<std::size_t>(static_cast<double>(L) * train_frac);
    const auto val_end = train_end + static_cast<std::size_t>(static_cast<double>(L) * val_frac);
    if (train_end == 0 || val_end <= train_end || val_end >= L) {
        throw ValueError("split fractions leave an empty subset");
    }
    SplitIndices out;
    out.train_steps = {0, train_end};
    out.train_windows = windows_within(out.train_steps, L, spec);
    // single pseudo-season; the remaining three stay empty
    out.validation_steps[0] = {train_end, val_end};
    out.validation_windows[0] = windows_within(out.validation_steps[0], L, spec);
    out.test_steps[0] = {val_end, L};
    out.test_windows[0] = windows_within(out.test_steps[0], L, spec);
    return out;
}

GridSeries synth_generate(std::uint64_t seed, std::size_t steps, std::size_t height, std::size_t width) {
    if (steps < 8 || height < 8 || width < 8) throw ValueError("synth_generate needs extents >= 8");

    std::mt19937_64 rng(seed);
    auto unif = [&](double lo, double hi) { return lo + detail::unit_uniform(rng) * (hi - lo); };
    auto normal = [&]() {
        // Box-Muller on the portable uniform; avoids libstdc++-specific draws
        const double u1 = std::max(detail::unit_uniform(rng), 1e-12);
        const double u2 = detail::unit_uniform(rng);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    };

    // three rotational streamfunction modes plus a constant drift
    double amp[3], wx[3], wy[3], om[3], ph[3];
    for (int k = 0; k < 3; ++k) {
        amp[k] = unif(0.25, 0.8);
        wx[k] = (1.0 + std::floor(unif(0.0, 3.0)));
        wy[k] = (1.0 + std::floor(unif(0.0, 3.0)));
        om[k] = 2.0 * M_PI / unif(96.0, 240.0);
        ph[k] = unif(0.0, 2.0 * M_PI);
    }
    const double drift_u = unif(0.1, 0.4), drift_v = unif(-0.4, -0.1);

    // advected salinity modes
    const double sal_g1 = unif(1.0, 2.0), sal_g2 = unif(1.0, 2.0);
    const double sal_om = 2.0 * M_PI / unif(120.0, 200.0);
    const double sal_ph = unif(0.0, 2.0 * M_PI), sal_ph2 = unif(0.0, 2.0 * M_PI);

    // diurnal tide with spatially varying amplitude and phase
    const double ssh_ax = unif(0.5, 1.5), ssh_ay = unif(0.5, 1.5), ssh_pa = unif(0.0, 2.0 * M_PI);
    const double ssh_px = unif(0.5, 1.5), ssh_py = unif(0.5, 1.5), ssh_pp = unif(0.0, 2.0 * M_PI);
    const double tide_omega = 2.0 * M_PI / 24.0;

    // seeded AR(1) phase meanders make the far future genuinely less
    // predictable, the way real weather is; decorrelation ~200 h
    std::vector<std::array<double, 3>> flow_wander(steps);
    std::vector<double> sal_wander(steps), tide_wander(steps);
    {
        std::array<double, 3> fw{0.0, 0.0, 0.0};
        double sw = 0.0, tw = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
            for (int k = 0; k < 3; ++k) {
                fw[k] = 0.9 * fw[k] + 0.3 * normal();
                flow_wander[t][k] = fw[k];
            }
            sw = 0.92 * sw + 0.2 * normal();
            sal_wander[t] = sw;
            tw = 0.99 * tw + 0.05 * normal();
            tide_wander[t] = tw;
        }
    }

    GridSeries s;
    s.values = TensorF::zeros({steps, height, width, 4});
    s.start_time = utc_from_civil(2017, 3, 1);
    s.step_seconds = 3600;
    s.variable_names = {"EastCUR", "NorthCUR", "SAL", "SSH"};
    s.mask.assign(height * width, 1);

    const std::size_t land_rows = std::max<std::size_t>(2, height / 4);
    const std::size_t land_cols = std::max<std::size_t>(2, width / 4);
    for (std::size_t r = 0; r < land_rows; ++r) {
        for (std::size_t c = 0; c < land_cols; ++c) s.mask[r * width + c] = 0;
    }

    for (std::size_t t = 0; t < steps; ++t) {
        const double td = static_cast<double>(t);
        for (std::size_t r = 0; r < height; ++r) {
            const double y = 2.0 * M_PI * static_cast<double>(r) / static_cast<double>(height);
            for (std::size_t c = 0; c < width; ++c) {
                if (!s.is_sea(r, c)) continue;
                const double x = 2.0 * M_PI * static_cast<double>(c) / static_cast<double>(width);

                double u = drift_u, v = drift_v;
                for (int k = 0; k < 3; ++k) {
                    const double phase = wx[k] * x + wy[k] * y + om[k] * td + ph[k] + flow_wander[t][k];
                    const double cph = std::cos(phase);
                    u += amp[k] * wy[k] * cph;
                    v -= amp[k] * wx[k] * cph;
                }

                const double sal = 32.0 + 1.2 * (y / (2.0 * M_PI)) +
                                   1.5 * std::sin(sal_g1 * x + sal_g2 * y - sal_om * td + sal_ph + sal_wander[t]) +
                                   0.8 * std::sin(2.0 * x - 0.7 * sal_om * td + sal_ph2);

                const double ssh_amp = 1.0 + 0.3 * std::sin(ssh_ax * x + ssh_ay * y + ssh_pa);
                const double ssh_phase = 0.6 * std::sin(ssh_px * x + ssh_py * y + ssh_pp);
                const double ssh = ssh_amp * std::sin(tide_omega * td + ssh_phase + tide_wander[t]);

                s.at(t, r, c, 0) = static_cast<float>(u);
                s.at(t, r, c, 1) = static_cast<float>(v);
                s.at(t, r, c, 2) = static_cast<float>(sal);
                s.at(t, r, c, 3) = static_cast<float>(ssh);
            }
        }
    }
    return s;
}

}  // namespace coastcast
