#include "yolocs/profile.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace yolocs {

namespace {

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), spec, v);
    return buf;
}

std::string pad_left(const std::string& s, size_t w) {
    return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, size_t w) {
    return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace

std::string render_text(const ProfileReport& r) {
    size_t name_w = 4, kind_w = 4, shape_w = 9;
    for (const ProfileRow& row : r.rows) {
        name_w = std::max(name_w, row.name.size());
        kind_w = std::max(kind_w, row.kind.size());
        shape_w = std::max(shape_w, row.out_shape.size());
    }
    std::ostringstream out;
    out << "config: " << r.config_name << "  img: " << r.img_size << "\n";
    out << pad_left("idx", 4) << "  " << pad_right("name", name_w) << "  "
        << pad_right("kind", kind_w) << "  " << pad_right("out_shape", shape_w) << "  "
        << pad_left("params", 10) << "  " << pad_left("gflops", 9) << "\n";
    for (const ProfileRow& row : r.rows) {
        out << pad_left(std::to_string(row.index), 4) << "  " << pad_right(row.name, name_w)
            << "  " << pad_right(row.kind, kind_w) << "  " << pad_right(row.out_shape, shape_w)
            << "  " << pad_left(std::to_string(row.params), 10) << "  "
            << pad_left(fmt("%.3f", row.flops / 1e9), 9) << "\n";
    }
    out << "total: params " << r.total_params << " (" << fmt("%.2f", r.params_m())
        << "M)  flops " << fmt("%.1f", r.gflops()) << " GFLOPs @" << r.img_size << "\n";
    return out.str();
}

std::string render_kv(const ProfileReport& r) {
    std::ostringstream out;
    out << "config=" << r.config_name << "\n";
    out << "img_size=" << r.img_size << "\n";
    for (const ProfileRow& row : r.rows) {
        std::string p = "layer." + std::to_string(row.index) + ".";
        out << p << "name=" << row.name << "\n";
        out << p << "kind=" << row.kind << "\n";
        out << p << "out_shape=" << row.out_shape << "\n";
        out << p << "params=" << row.params << "\n";
        out << p << "flops=" << fmt("%.0f", row.flops) << "\n";
    }
    out << "total.params=" << r.total_params << "\n";
    out << "total.params_m=" << fmt("%.2f", r.params_m()) << "\n";
    out << "total.flops=" << fmt("%.0f", r.total_flops) << "\n";
    out << "total.gflops=" << fmt("%.1f", r.gflops()) << "\n";
    return out.str();
}

std::string render_compare_text(const std::vector<ProfileReport>& reports) {
    if (reports.empty()) return "";
    const ProfileReport& base = reports.front();
    size_t name_w = 6;
    for (const ProfileReport& r : reports) name_w = std::max(name_w, r.config_name.size());
    std::ostringstream out;
    out << "baseline: " << base.config_name << "  img: " << base.img_size << "\n";
    out << pad_right("config", name_w) << "  " << pad_left("params", 10) << "  "
        << pad_left("params(M)", 10) << "  " << pad_left("d_params(M)", 12) << "  "
        << pad_left("gflops", 8) << "  " << pad_left("d_gflops", 9) << "\n";
    for (const ProfileReport& r : reports) {
        double dp = (static_cast<double>(r.total_params) -
                     static_cast<double>(base.total_params)) / 1e6;
        double dg = r.gflops() - base.gflops();
        out << pad_right(r.config_name, name_w) << "  "
            << pad_left(std::to_string(r.total_params), 10) << "  "
            << pad_left(fmt("%.2f", r.params_m()), 10) << "  "
            << pad_left(fmt("%+.2f", dp), 12) << "  " << pad_left(fmt("%.1f", r.gflops()), 8)
            << "  " << pad_left(fmt("%+.1f", dg), 9) << "\n";
    }
    return out.str();
}

std::string render_compare_kv(const std::vector<ProfileReport>& reports) {
    if (reports.empty()) return "";
    const ProfileReport& base = reports.front();
    std::ostringstream out;
    out << "baseline=" << base.config_name << "\n";
    out << "img_size=" << base.img_size << "\n";
    for (size_t i = 0; i < reports.size(); ++i) {
        const ProfileReport& r = reports[i];
        std::string p = "model." + std::to_string(i) + ".";
        out << p << "name=" << r.config_name << "\n";
        out << p << "params=" << r.total_params << "\n";
        out << p << "flops=" << fmt("%.0f", r.total_flops) << "\n";
        out << p << "delta_params=" << (r.total_params - base.total_params) << "\n";
        out << p << "delta_gflops=" << fmt("%+.3f", r.gflops() - base.gflops()) << "\n";
    }
    return out.str();
}

}  // namespace yolocs
