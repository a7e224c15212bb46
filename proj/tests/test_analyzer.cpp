#include <cmath>
#include <map>
#include <string>

#include "doctest.h"
#include "yolocs/config.hpp"
#include "yolocs/graph.hpp"
#include "yolocs/profile.hpp"

using namespace yolocs;

namespace {

const std::string kConfigDir = std::string(YOLOCS_SOURCE_DIR) + "/configs";

struct Frozen {
    const char* name;
    i64 params;
    double flops640;
    double target_params_m;
    double target_gflops;
    double tol_params;
    double tol_gflops;
};

// Reference totals for 640px inputs, frozen from an independent closed-form
// tally of the same layer tables. Params must match exactly; flop totals are
// integer-valued and must match exactly as well.
const Frozen kFrozen[] = {
    {"v5l-baseline", 46563709, 109307178800.0, 46.5, 109.1, 0.02, 0.03},
    {"v5l-dcfs", 53126205, 114745028400.0, 52.4, 113.1, 0.15, 0.15},
    {"dcfs-3x3", 55780477, 120626884400.0, 56.9, 121.3, 0.15, 0.15},
    {"dcfs-1x1", 43656317, 93783338800.0, 44.8, 94.5, 0.15, 0.15},
    {"v5l-adh", 49639229, 126525790000.0, 50.9, 117.4, 0.15, 0.15},
    {"v5l-dh", 53846909, 150088798000.0, 53.8, 150.1, 0.15, 0.15},
    {"yolocs-s", 9165904, 25734472400.0, 10.6, 22.9, 0.15, 0.15},
    {"yolocs-m", 26442237, 67690590000.0, 29.9, 64.1, 0.15, 0.15},
    {"yolocs-l", 56201725, 131963639600.0, 56.8, 121.2, 0.15, 0.15},
};

ProfileReport profile_model(const std::string& name, i64 img) {
    ModelConfig cfg = load_config_file(resolve_config_path(name, kConfigDir));
    Graph<float> g(cfg);
    return g.profile(img);
}

}  // namespace

TEST_CASE("profile totals match the frozen reference tally exactly") {
    for (const Frozen& f : kFrozen) {
        CAPTURE(f.name);
        ProfileReport rep = profile_model(f.name, 640);
        CHECK(rep.total_params == f.params);
        CHECK(rep.total_flops == f.flops640);
    }
}

TEST_CASE("profile totals land inside the published tolerance bands") {
    for (const Frozen& f : kFrozen) {
        CAPTURE(f.name);
        ProfileReport rep = profile_model(f.name, 640);
        CHECK(std::abs(rep.params_m() - f.target_params_m) <= f.tol_params * f.target_params_m);
        CHECK(std::abs(rep.gflops() - f.target_gflops) <= f.tol_gflops * f.target_gflops);
    }
}

TEST_CASE("module orderings hold at full-model scale") {
    auto p = [&](const char* n) { return profile_model(n, 640); };
    ProfileReport base = p("v5l-baseline");
    ProfileReport ocj = p("v5l-dcfs");
    ProfileReport k3 = p("dcfs-3x3");
    ProfileReport k1 = p("dcfs-1x1");
    ProfileReport adh = p("v5l-adh");
    ProfileReport dh = p("v5l-dh");

    CHECK(k1.total_params < ocj.total_params);
    CHECK(ocj.total_params < k3.total_params);
    CHECK(k1.total_flops < ocj.total_flops);
    CHECK(ocj.total_flops < k3.total_flops);

    CHECK(adh.total_params < dh.total_params);
    CHECK(adh.total_flops < dh.total_flops);

    // the 1x1 rewiring undercuts even the plain baseline on compute
    CHECK(k1.total_flops < base.total_flops);

    // scale family is monotone
    ProfileReport s = p("yolocs-s"), m = p("yolocs-m"), l = p("yolocs-l");
    CHECK(s.total_params < m.total_params);
    CHECK(m.total_params < l.total_params);
    CHECK(s.total_flops < m.total_flops);
    CHECK(m.total_flops < l.total_flops);
}

TEST_CASE("flops scale with input area and rows sum to the totals") {
    ProfileReport r640 = profile_model("yolocs-l", 640);
    ProfileReport r320 = profile_model("yolocs-l", 320);
    CHECK(r640.total_flops == 4.0 * r320.total_flops);

    i64 params = 0;
    double flops = 0.0;
    for (const ProfileRow& row : r640.rows) {
        params += row.params;
        flops += row.flops;
    }
    CHECK(params == r640.total_params);
    CHECK(flops == r640.total_flops);
}

TEST_CASE("profile parameter totals agree with the runtime registry") {
    for (const char* name : {"micro", "yolocs-s", "v5l-adh"}) {
        CAPTURE(name);
        ModelConfig cfg = load_config_file(resolve_config_path(name, kConfigDir));
        Graph<float> g(cfg);
        ProfileReport rep = g.profile(640);
        CHECK(g.total_params() == rep.total_params);
        i64 via_views = 0;
        for (const auto& v : g.params()) via_views += v.count;
        CHECK(via_views == rep.total_params);
    }
}

TEST_CASE("report renderers emit the expected fields") {
    ProfileReport rep = profile_model("micro", 96);
    std::string text = render_text(rep);
    CHECK(text.find("config: micro") != std::string::npos);
    CHECK(text.find("img: 96") != std::string::npos);
    CHECK(text.find("HeadADH") != std::string::npos);
    CHECK(text.find("total:") != std::string::npos);

    std::string kv = render_kv(rep);
    CHECK(kv.find("config=micro") != std::string::npos);
    CHECK(kv.find("img_size=96") != std::string::npos);
    CHECK(kv.find("total.params=" + std::to_string(rep.total_params)) != std::string::npos);
    CHECK(kv.find("layer.0.kind=CBS") != std::string::npos);

    ProfileReport other = profile_model("yolocs-s", 640);
    std::string cmp = render_compare_text({other, profile_model("yolocs-m", 640)});
    CHECK(cmp.find("yolocs-s") != std::string::npos);
    CHECK(cmp.find("yolocs-m") != std::string::npos);
}
