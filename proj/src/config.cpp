#include "sgf/config.hpp"

#include <cstdio>
#include <fstream>

namespace sgf {

std::uint64_t hash_json(const Json& j) {
    std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string fmt_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

CsvWriter::CsvWriter(std::uint64_t config_hash, std::vector<std::string> columns)
    : ncols_(columns.size()) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_hash));
    body_ = std::string("# config_hash=") + buf + "\n";
    for (size_t i = 0; i < columns.size(); ++i)
        body_ += columns[i] + (i + 1 < columns.size() ? "," : "\n");
}

void CsvWriter::row(const std::vector<double>& values) {
    if (values.size() != ncols_) throw ConfigError("csv row width mismatch");
    for (size_t i = 0; i < values.size(); ++i)
        body_ += fmt_g17(values[i]) + (i + 1 < values.size() ? "," : "\n");
}

void CsvWriter::write(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path);
    f << body_;
}

namespace {

Vec parse_vec(const Json& j, int d, const std::string& name) {
    if (!j.is_array() || int(j.size()) != d)
        throw ConfigError(name + " must be an array of length " + std::to_string(d));
    Vec v(d);
    for (int i = 0; i < d; ++i) v[i] = j[i].get<double>();
    return v;
}

double positive(const Json& j, const std::string& name) {
    double v = j.get<double>();
    if (!(v > 0)) throw ConfigError(name + " must be positive");
    return v;
}

}  // namespace

RunConfig parse_config(const Json& j) {
    RunConfig cfg;
    cfg.raw = j;
    cfg.config_hash = hash_json(j);

    if (!j.contains("metric")) throw ConfigError("missing metric block");
    const Json& mj = j.at("metric");
    cfg.dim = mj.at("dim").get<int>();
    if (cfg.dim < 1 || cfg.dim > 4) throw ConfigError("metric.dim must be in [1,4]");
    std::string kind = mj.value("kind", "flat");
    if (kind == "flat") {
        cfg.metric = MetricModel::flat(cfg.dim);
    } else if (kind == "quadratic") {
        QuadTensor tens(cfg.dim);
        if (mj.contains("tensor")) {
            for (const auto& row : mj.at("tensor")) {
                if (!row.is_array() || row.size() != 5)
                    throw ConfigError("tensor entries are [i,j,k,l,value] (1-based indices)");
                int i = row[0].get<int>() - 1, jj = row[1].get<int>() - 1,
                    k = row[2].get<int>() - 1, l = row[3].get<int>() - 1;
                if (i < 0 || jj < 0 || k < 0 || l < 0 || i >= cfg.dim || jj >= cfg.dim ||
                    k >= cfg.dim || l >= cfg.dim)
                    throw ConfigError("tensor index out of range");
                tens.set(i, jj, k, l, row[4].get<double>());
            }
        }
        cfg.metric = MetricModel::quadratic(cfg.dim, tens);
    } else {
        throw ConfigError("metric.kind must be flat or quadratic");
    }

    const Json sj = j.value("scenario", Json::object());
    cfg.t = sj.contains("t") ? positive(sj.at("t"), "scenario.t") : 0.5;
    cfg.h = sj.contains("h") ? positive(sj.at("h"), "scenario.h") : 1.0;
    cfg.x0 = sj.contains("x0") ? parse_vec(sj.at("x0"), cfg.dim, "scenario.x0")
                               : Vec::Zero(cfg.dim);
    cfg.y0 = sj.contains("y0") ? parse_vec(sj.at("y0"), cfg.dim, "scenario.y0")
                               : Vec::Zero(cfg.dim);
    if (sj.contains("x")) cfg.x_target = parse_vec(sj.at("x"), cfg.dim, "scenario.x");
    if (sj.contains("y")) cfg.y_target = parse_vec(sj.at("y"), cfg.dim, "scenario.y");
    cfg.q0 = sj.contains("q0") ? parse_vec(sj.at("q0"), cfg.dim, "scenario.q0")
                               : Vec::Zero(cfg.dim);
    cfg.p0 = sj.contains("p0") ? parse_vec(sj.at("p0"), cfg.dim, "scenario.p0")
                               : Vec::Zero(cfg.dim);
    if (sj.contains("points"))
        for (const auto& row : sj.at("points"))
            cfg.points.push_back(parse_vec(row, 2 * cfg.dim, "scenario.points[]"));
    if (sj.contains("t_grid"))
        for (const auto& v : sj.at("t_grid")) cfg.t_grid.push_back(positive(v, "t_grid"));
    if (sj.contains("h_grid"))
        for (const auto& v : sj.at("h_grid")) cfg.h_grid.push_back(positive(v, "h_grid"));

    const Json oj = j.value("solver", Json::object());
    cfg.solver.flow.rtol = oj.value("rtol", 1e-10);
    cfg.solver.flow.atol = oj.value("atol", 1e-12);
    cfg.solver.flow.blowup_norm = oj.value("blowup", 1e6);
    cfg.solver.tol = oj.value("bvp_tol", 1e-10);
    cfg.solver.max_iter = oj.value("max_iter", 30);
    cfg.polydisk_c = oj.value("c", 0.1);
    cfg.polydisk_r = oj.value("r", 0.25);
    cfg.t0_max = oj.value("t0", 0.5);
    cfg.threads = oj.value("threads", 1);
    if (cfg.solver.flow.rtol <= 0 || cfg.solver.tol <= 0 || cfg.threads < 1)
        throw ConfigError("solver tolerances and threads must be positive");

    const Json rj = j.value("oracle", Json::object());
    cfg.n_paths = rj.value("n_paths", std::int64_t(100000));
    cfg.dt = rj.value("dt", 0.0);
    if (rj.contains("seed")) cfg.seed = rj.at("seed").get<std::uint64_t>();
    cfg.bandwidth_scale = rj.value("bandwidth_scale", 1.0);
    if (cfg.n_paths < 1 || cfg.bandwidth_scale <= 0)
        throw ConfigError("oracle.n_paths and bandwidth_scale must be positive");

    const Json outj = j.value("output", Json::object());
    cfg.out_dir = outj.value("dir", ".");
    cfg.write_samples = outj.value("samples", false);
    cfg.compare_assert = j.value("compare", Json::object()).value("assert", false);
    return cfg;
}

namespace {

void apply_override(Json& j, const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
    std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
    Json* node = &j;
    size_t pos = 0;
    while (true) {
        size_t dot = key.find('.', pos);
        std::string part = key.substr(pos, dot == std::string::npos ? dot : dot - pos);
        if (dot == std::string::npos) {
            Json parsed = Json::parse(val, nullptr, false);
            (*node)[part] = parsed.is_discarded() ? Json(val) : parsed;
            break;
        }
        node = &(*node)[part];
        pos = dot + 1;
    }
}

}  // namespace

RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config " + path);
    Json j = Json::parse(f, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON: " + path);
    for (const auto& kv : overrides) apply_override(j, kv);
    return parse_config(j);
}

}  // namespace sgf
