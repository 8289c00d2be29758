#include "coastcast/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace coastcast {

using nlohmann::json;

namespace {

struct SqAccum {
    // per variable plus combined, for all pixels and sea-only pixels
    std::vector<double> var_sq;
    std::vector<std::size_t> var_n;
    std::vector<double> var_sq_sea;
    std::vector<std::size_t> var_n_sea;
    std::size_t samples = 0;

    explicit SqAccum(std::size_t vars)
        : var_sq(vars, 0.0), var_n(vars, 0), var_sq_sea(vars, 0.0), var_n_sea(vars, 0) {}

    void add(const SqAccum& o) {
        for (std::size_t v = 0; v < var_sq.size(); ++v) {
            var_sq[v] += o.var_sq[v];
            var_n[v] += o.var_n[v];
            var_sq_sea[v] += o.var_sq_sea[v];
            var_n_sea[v] += o.var_n_sea[v];
        }
        samples += o.samples;
    }
    double mse_all() const {
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t v = 0; v < var_sq.size(); ++v) {
            s += var_sq[v];
            n += var_n[v];
        }
        return s / static_cast<double>(n);
    }
    double mse_all_sea() const {
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t v = 0; v < var_sq.size(); ++v) {
            s += var_sq_sea[v];
            n += var_n_sea[v];
        }
        return n ? s / static_cast<double>(n) : 0.0;
    }
};

}  // namespace

EvalReport evaluate_model(ModelF& model, const GridSeries& scaled,
                          const std::array<std::vector<std::size_t>, 4>& season_windows,
                          const WindowSpec& spec, const std::string& model_label,
                          std::size_t batch_size, bool per_season_rows) {
    if (batch_size == 0) throw ValueError("evaluation batch size must be >= 1");
    std::size_t total_windows = 0;
    for (const auto& w : season_windows) total_windows += w.size();
    if (total_windows == 0) throw ValueError("evaluation split contains no windows");

    const std::size_t V = scaled.vars();
    const std::size_t H = scaled.height(), W = scaled.width();

    std::vector<SqAccum> per_season;
    SqAccum combined(V);

    for (std::size_t season = 0; season < 4; ++season) {
        SqAccum acc(V);
        const auto& ids = season_windows[season];
        for (std::size_t begin = 0; begin < ids.size(); begin += batch_size) {
            const std::size_t end = std::min(ids.size(), begin + batch_size);
            TensorF batch = TensorF::zeros({end - begin, spec.lags, H, W, V});
            const std::size_t stride = spec.lags * H * W * V;
            for (std::size_t k = begin; k < end; ++k) {
                TensorF in = window_input(scaled, ids[k], spec);
                std::copy(in.data.begin(), in.data.end(),
                          batch.data.begin() + static_cast<std::ptrdiff_t>((k - begin) * stride));
            }
            TensorF pred = model.forward(batch, Mode::Eval);
            for (std::size_t k = begin; k < end; ++k) {
                TensorF target = window_target(scaled, ids[k], spec);
                const float* pp = pred.ptr() + (k - begin) * H * W * V;
                for (std::size_t r = 0; r < H; ++r) {
                    for (std::size_t c = 0; c < W; ++c) {
                        const bool sea = scaled.is_sea(r, c);
                        for (std::size_t v = 0; v < V; ++v) {
                            const std::size_t off = (r * W + c) * V + v;
                            const double d = static_cast<double>(pp[off]) - static_cast<double>(target[off]);
                            acc.var_sq[v] += d * d;
                            acc.var_n[v] += 1;
                            if (sea) {
                                acc.var_sq_sea[v] += d * d;
                                acc.var_n_sea[v] += 1;
                            }
                        }
                    }
                }
            }
        }
        acc.samples = ids.size();
        combined.add(acc);
        per_season.push_back(std::move(acc));
    }

    EvalReport report;
    auto emit_rows = [&](const std::string& season_name, const SqAccum& acc) {
        if (acc.samples == 0) return;
        for (std::size_t v = 0; v < V; ++v) {
            EvalRow row;
            row.model = model_label;
            row.season = season_name;
            row.horizon_h = spec.horizon;
            row.variable = scaled.variable_names[v];
            row.mse = acc.var_sq[v] / static_cast<double>(acc.var_n[v]);
            row.sea_mse = acc.var_n_sea[v] ? acc.var_sq_sea[v] / static_cast<double>(acc.var_n_sea[v]) : 0.0;
            row.samples = acc.samples;
            report.rows.push_back(row);
        }
        EvalRow all;
        all.model = model_label;
        all.season = season_name;
        all.horizon_h = spec.horizon;
        all.variable = "ALL";
        all.mse = acc.mse_all();
        all.sea_mse = acc.mse_all_sea();
        all.samples = acc.samples;
        report.rows.push_back(all);
    };

    if (per_season_rows) {
        for (std::size_t season = 0; season < 4; ++season) {
            emit_rows(kSeasonNames[season], per_season[season]);
        }
    }
    emit_rows("ALL", combined);
    return report;
}

std::string report_csv(const EvalReport& report, bool include_sea_column) {
    std::ostringstream os;
    os << "model,season,horizon_h,variable,mse";
    if (include_sea_column) os << ",sea_mse";
    os << '\n';
    char buf[64];
    for (const EvalRow& row : report.rows) {
        os << row.model << ',' << row.season << ',' << row.horizon_h << ',' << row.variable << ',';
        std::snprintf(buf, sizeof(buf), "%.10e", row.mse);
        os << buf;
        if (include_sea_column) {
            std::snprintf(buf, sizeof(buf), ",%.10e", row.sea_mse);
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

void write_pgm_with_sidecar(const TensorF& image, const std::string& base_path) {
    if (image.rank() != 2) throw ShapeError("PGM dump expects an (H,W) image, got " + shape_str(image.shape));
    double mn = std::numeric_limits<double>::infinity();
    double mx = -std::numeric_limits<double>::infinity();
    for (float v : image.data) {
        if (!std::isfinite(v)) throw NumericError("PGM dump with non-finite pixel values");
        mn = std::min(mn, static_cast<double>(v));
        mx = std::max(mx, static_cast<double>(v));
    }
    const double span = mx > mn ? mx - mn : 1.0;

    const std::size_t H = image.shape[0], W = image.shape[1];
    std::ofstream out(base_path + ".pgm", std::ios::binary);
    if (!out) throw IoError("cannot open PGM for writing: " + base_path + ".pgm");
    out << "P5\n" << W << ' ' << H << "\n255\n";
    std::vector<unsigned char> bytes(image.numel());
    for (std::size_t i = 0; i < image.numel(); ++i) {
        const double norm = (static_cast<double>(image[i]) - mn) / span;
        bytes[i] = static_cast<unsigned char>(std::lround(norm * 255.0));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("PGM write failed: " + base_path + ".pgm");

    json side;
    side["min"] = mn;
    side["max"] = mx;
    side["width"] = W;
    side["height"] = H;
    std::ofstream js(base_path + ".json");
    if (!js) throw IoError("cannot open sidecar for writing: " + base_path + ".json");
    js << side.dump(2) << '\n';
}

TensorF read_pgm_with_sidecar(const std::string& base_path) {
    std::ifstream js(base_path + ".json");
    if (!js) throw IoError("cannot open sidecar: " + base_path + ".json");
    json side;
    try {
        js >> side;
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad PGM sidecar: ") + e.what());
    }
    const double mn = side.at("min").get<double>();
    const double mx = side.at("max").get<double>();

    std::ifstream in(base_path + ".pgm", std::ios::binary);
    if (!in) throw IoError("cannot open PGM: " + base_path + ".pgm");
    std::string magic;
    in >> magic;
    if (magic != "P5") throw FormatError("not a binary PGM: " + base_path + ".pgm");
    std::size_t w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    if (maxval != 255) throw FormatError("PGM maxval must be 255");
    in.get();  // single whitespace after the header
    std::vector<unsigned char> bytes(w * h);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!in) throw FormatError("truncated PGM payload: " + base_path + ".pgm");

    TensorF img = TensorF::zeros({h, w});
    const double span = mx > mn ? mx - mn : 1.0;
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        img[i] = static_cast<float>(mn + (static_cast<double>(bytes[i]) / 255.0) * span);
    }
    return img;
}

}  // namespace coastcast
