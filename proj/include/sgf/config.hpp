#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

#include "sgf/bvp.hpp"
#include "sgf/geometry.hpp"

namespace sgf {

using Json = nlohmann::ordered_json;

/// Validated run configuration.  See README for the canonical example.
struct RunConfig {
    Json raw;

    MetricModel metric = MetricModel::flat(1);
    int dim = 1;

    // scenario
    double t = 0.5;
    double h = 1.0;
    Vec x0, y0, x_target, y_target;
    Vec q0, p0;                   // flow subcommand initial momenta
    std::vector<Vec> points;      // kernel probe points, length-2d rows (x|y)
    std::vector<double> t_grid, h_grid;

    // solver
    BvpOptions solver;
    double polydisk_c = 0.1, polydisk_r = 0.25, t0_max = 0.5;
    int threads = 1;

    // oracle
    std::int64_t n_paths = 100000;
    double dt = 0;  // 0 = t/200
    std::optional<std::uint64_t> seed;
    double bandwidth_scale = 1.0;

    // output / modes
    std::string out_dir = ".";
    bool write_samples = false;   // mc: also write the binary columnar file
    bool compare_assert = false;  // compare: exit 4 on oracle mismatch

    std::uint64_t config_hash = 0;
};

/// Parses and validates a config JSON; throws ConfigError on violations.
RunConfig parse_config(const Json& j);
RunConfig load_config(const std::string& path,
                      const std::vector<std::string>& overrides = {});

/// FNV-1a 64 over the canonical serialization.
std::uint64_t hash_json(const Json& j);

/// 17-significant-digit formatting, '.' decimal, no locale.
std::string fmt_g17(double v);

/// CSV writer: "# config_hash=..." comment, header row, %.17g cells.
class CsvWriter {
public:
    CsvWriter(std::uint64_t config_hash, std::vector<std::string> columns);
    void row(const std::vector<double>& values);
    const std::string& body() const { return body_; }
    void write(const std::string& path) const;

private:
    size_t ncols_;
    std::string body_;
};

}  // namespace sgf
