#pragma once

#include <string>
#include <vector>

#include "yolocs/tensor.hpp"

namespace yolocs {

struct ProfileRow {
    int index = 0;
    std::string name;
    std::string kind;
    std::string out_shape;
    i64 params = 0;
    double flops = 0.0;
};

// Static per-layer cost accounting at one input size. Totals equal the row
// sums by construction; FLOPs are spatial-size dependent, params are not.
struct ProfileReport {
    std::string config_name;
    i64 img_size = 0;
    std::vector<ProfileRow> rows;
    i64 total_params = 0;
    double total_flops = 0.0;

    double params_m() const { return static_cast<double>(total_params) / 1e6; }
    double gflops() const { return total_flops / 1e9; }
};

// Human-readable aligned table: one row per layer plus totals in raw counts,
// millions (2 dp), and GFLOPs (1 dp).
std::string render_text(const ProfileReport& r);

// Machine-diffable form, one "key=value" pair per line.
std::string render_kv(const ProfileReport& r);

// Side-by-side totals with signed deltas against the first report.
std::string render_compare_text(const std::vector<ProfileReport>& reports);
std::string render_compare_kv(const std::vector<ProfileReport>& reports);

}  // namespace yolocs
