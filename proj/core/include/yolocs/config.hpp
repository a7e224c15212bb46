#pragma once

#include <string>
#include <utility>
#include <vector>

#include "yolocs/tensor.hpp"

namespace yolocs {

// One argument token from a layer line: integer, real, boolean, or bare word.
struct Arg {
    enum class Kind { integer, real, boolean, word } kind = Kind::integer;
    i64 i = 0;
    double d = 0.0;
    bool b = false;
    std::string s;

    static Arg make_int(i64 v) { return Arg{Kind::integer, v, static_cast<double>(v), false, ""}; }
    static Arg make_real(double v) { return Arg{Kind::real, 0, v, false, ""}; }
    static Arg make_bool(bool v) { return Arg{Kind::boolean, 0, 0.0, v, ""}; }
    static Arg make_word(std::string v) { return Arg{Kind::word, 0, 0.0, false, std::move(v)}; }
};

enum class Section { backbone, head };

// One layer line: [from, repeats, Module, [args...]]
struct LayerSpec {
    std::vector<int> from;   // -1 = previous layer (layer 0: the network input)
    int repeats = 1;         // bottleneck count for CSP_C3 / DCFS, must be 1 elsewhere
    std::string module;
    std::vector<Arg> args;
    Section section = Section::backbone;
    int line = 0;            // source line, for error messages
};

struct ModelConfig {
    std::string name;
    int nc = 80;
    double depth_multiple = 1.0;
    double width_multiple = 1.0;
    // per level, per anchor: (width, height) in input pixels
    std::vector<std::vector<std::pair<double, double>>> anchors;
    std::vector<LayerSpec> layers;

    int na() const { return anchors.empty() ? 0 : static_cast<int>(anchors[0].size()); }
};

// Round a scaled channel count to the nearest multiple of 8, floor 8.
i64 round_channels(double c);

// Parse config text. `origin` names the source in error messages
// ("file.cfg:12: ..."). Validates structure: known modules, in-range `from`
// references, multipliers in (0, 1.5], exactly one terminal head layer.
ModelConfig parse_config(const std::string& text, const std::string& origin);

ModelConfig load_config_file(const std::string& path);

// Resolve a config name against a search directory: tries the path as given,
// with a ".cfg" suffix, then the same two relative to config_dir.
std::string resolve_config_path(const std::string& name, const std::string& config_dir);

// Apply depth/width multipliers, producing a config whose multipliers are 1.0:
// channel args of width-scaled modules are rounded to multiples of 8, repeat
// counts become max(1, round(n * depth_multiple)) where nominal n > 1. Head
// stem widths are absolute and not scaled.
ModelConfig apply_multipliers(const ModelConfig& cfg);

}  // namespace yolocs
