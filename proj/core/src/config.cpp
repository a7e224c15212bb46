#include "yolocs/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace yolocs {

namespace {

const std::set<std::string> kModules = {
    "CBS",  "BottleneckV5", "CSP_C3",      "DCFS",   "SPPF",
    "Concat", "Upsample",   "HeadCoupled", "HeadDH", "HeadADH"};

const std::set<std::string> kHeadModules = {"HeadCoupled", "HeadDH", "HeadADH"};

[[noreturn]] void parse_fail(const std::string& origin, int line, const std::string& msg) {
    fail(origin + ":" + std::to_string(line) + ": " + msg);
}

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Split on top-level commas, respecting [] nesting.
std::vector<std::string> split_top(const std::string& s, const std::string& origin, int line) {
    std::vector<std::string> out;
    int depth = 0;
    std::string cur;
    for (char ch : s) {
        if (ch == '[') ++depth;
        if (ch == ']') {
            --depth;
            if (depth < 0) parse_fail(origin, line, "unbalanced ']'");
        }
        if (ch == ',' && depth == 0) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += ch;
        }
    }
    if (depth != 0) parse_fail(origin, line, "unbalanced '['");
    out.push_back(trim(cur));
    return out;
}

bool looks_like_int(const std::string& s) {
    if (s.empty()) return false;
    size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
    if (i == s.size()) return false;
    return std::all_of(s.begin() + static_cast<long>(i), s.end(),
                       [](unsigned char c) { return std::isdigit(c); });
}

bool looks_like_real(const std::string& s) {
    if (s.empty()) return false;
    char* end = nullptr;
    std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size();
}

Arg parse_arg(const std::string& tok, const std::string& origin, int line) {
    if (tok == "true" || tok == "True") return Arg::make_bool(true);
    if (tok == "false" || tok == "False") return Arg::make_bool(false);
    if (looks_like_int(tok)) return Arg::make_int(std::stoll(tok));
    if (looks_like_real(tok)) return Arg::make_real(std::stod(tok));
    if (tok.empty()) parse_fail(origin, line, "empty argument");
    return Arg::make_word(tok);
}

std::vector<int> parse_from(const std::string& tok, const std::string& origin, int line) {
    std::vector<int> out;
    std::string body = tok;
    if (!body.empty() && body.front() == '[') {
        if (body.back() != ']') parse_fail(origin, line, "malformed from list");
        body = body.substr(1, body.size() - 2);
        for (const std::string& p : split_top(body, origin, line)) {
            if (!looks_like_int(p)) parse_fail(origin, line, "from index is not an integer: " + p);
            out.push_back(std::stoi(p));
        }
    } else {
        if (!looks_like_int(body)) parse_fail(origin, line, "from index is not an integer: " + body);
        out.push_back(std::stoi(body));
    }
    if (out.empty()) parse_fail(origin, line, "empty from list");
    return out;
}

std::vector<std::vector<std::pair<double, double>>> parse_anchors(const std::string& value,
                                                                  const std::string& origin,
                                                                  int line) {
    std::vector<std::vector<std::pair<double, double>>> levels;
    std::stringstream groups(value);
    std::string group;
    while (std::getline(groups, group, ';')) {
        std::vector<double> nums;
        std::stringstream ss(group);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok = trim(tok);
            if (tok.empty()) continue;
            if (!looks_like_real(tok)) parse_fail(origin, line, "bad anchor value: " + tok);
            nums.push_back(std::stod(tok));
        }
        if (nums.empty() || nums.size() % 2 != 0)
            parse_fail(origin, line, "anchor group needs an even number of values");
        std::vector<std::pair<double, double>> lvl;
        for (size_t i = 0; i < nums.size(); i += 2) lvl.emplace_back(nums[i], nums[i + 1]);
        levels.push_back(std::move(lvl));
    }
    if (levels.empty()) parse_fail(origin, line, "empty anchors");
    for (const auto& lvl : levels)
        if (lvl.size() != levels[0].size())
            parse_fail(origin, line, "anchor groups must have equal anchor counts");
    return levels;
}

// COCO-calibrated defaults for P3/P4/P5; used when a config omits `anchors:`.
std::vector<std::vector<std::pair<double, double>>> default_anchors() {
    return {{{10, 13}, {16, 30}, {33, 23}},
            {{30, 61}, {62, 45}, {59, 119}},
            {{116, 90}, {156, 198}, {373, 326}}};
}

void validate(ModelConfig& cfg, const std::string& origin) {
    if (!(cfg.depth_multiple > 0.0 && cfg.depth_multiple <= 1.5))
        fail(origin + ": depth_multiple must be in (0, 1.5]");
    if (!(cfg.width_multiple > 0.0 && cfg.width_multiple <= 1.5))
        fail(origin + ": width_multiple must be in (0, 1.5]");
    if (cfg.nc < 1) fail(origin + ": nc must be >= 1");
    if (cfg.layers.empty()) fail(origin + ": no layers");

    for (size_t i = 0; i < cfg.layers.size(); ++i) {
        LayerSpec& l = cfg.layers[i];
        if (!kModules.count(l.module))
            parse_fail(origin, l.line, "unknown module '" + l.module + "'");
        for (int f : l.from) {
            bool ok = f == -1 || (f >= 0 && f < static_cast<int>(i));
            if (!ok)
                parse_fail(origin, l.line,
                           "dangling from reference " + std::to_string(f) + " on layer " +
                               std::to_string(i));
        }
        if (l.module == "Concat" && l.from.size() < 2)
            parse_fail(origin, l.line, "Concat needs at least two sources");
        if (l.repeats < 1) parse_fail(origin, l.line, "repeats must be >= 1");
        if (l.repeats > 1 && l.module != "CSP_C3" && l.module != "DCFS")
            parse_fail(origin, l.line, "repeats > 1 is only meaningful for CSP_C3 / DCFS");
        bool is_head = kHeadModules.count(l.module) > 0;
        if (is_head && i + 1 != cfg.layers.size())
            parse_fail(origin, l.line, "head layer must be terminal");
    }
    const LayerSpec& last = cfg.layers.back();
    if (!kHeadModules.count(last.module))
        fail(origin + ": last layer must be a head module");
    if (last.from.size() != cfg.anchors.size())
        parse_fail(origin, last.line,
                   "head consumes " + std::to_string(last.from.size()) + " levels but " +
                       std::to_string(cfg.anchors.size()) + " anchor groups are configured");
}

}  // namespace

i64 round_channels(double c) {
    i64 r = static_cast<i64>(std::llround(c / 8.0)) * 8;
    return std::max<i64>(8, r);
}

ModelConfig parse_config(const std::string& text, const std::string& origin) {
    ModelConfig cfg;
    cfg.name = origin;
    cfg.anchors = default_anchors();
    std::stringstream in(text);
    std::string raw;
    int lineno = 0;
    bool in_layers = false;
    Section section = Section::backbone;
    while (std::getline(in, raw)) {
        ++lineno;
        size_t hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        std::string line = trim(raw);
        if (line.empty()) continue;

        if (line == "backbone:") {
            in_layers = true;
            section = Section::backbone;
            continue;
        }
        if (line == "head:") {
            in_layers = true;
            section = Section::head;
            continue;
        }

        if (!in_layers) {
            size_t colon = line.find(':');
            if (colon == std::string::npos)
                parse_fail(origin, lineno, "expected 'key: value' before the first section");
            std::string key = trim(line.substr(0, colon));
            std::string value = trim(line.substr(colon + 1));
            if (key == "nc") {
                if (!looks_like_int(value)) parse_fail(origin, lineno, "nc must be an integer");
                cfg.nc = std::stoi(value);
            } else if (key == "depth_multiple") {
                if (!looks_like_real(value))
                    parse_fail(origin, lineno, "depth_multiple must be a number");
                cfg.depth_multiple = std::stod(value);
            } else if (key == "width_multiple") {
                if (!looks_like_real(value))
                    parse_fail(origin, lineno, "width_multiple must be a number");
                cfg.width_multiple = std::stod(value);
            } else if (key == "anchors") {
                cfg.anchors = parse_anchors(value, origin, lineno);
            } else {
                parse_fail(origin, lineno, "unknown header key '" + key + "'");
            }
            continue;
        }

        // layer line: [from, repeats, Module, [args...]]
        if (line.front() != '[' || line.back() != ']')
            parse_fail(origin, lineno, "layer line must be bracketed");
        std::vector<std::string> fields = split_top(line.substr(1, line.size() - 2), origin, lineno);
        if (fields.size() != 4)
            parse_fail(origin, lineno, "layer line needs exactly [from, repeats, Module, [args]]");

        LayerSpec spec;
        spec.line = lineno;
        spec.section = section;
        spec.from = parse_from(fields[0], origin, lineno);
        if (!looks_like_int(fields[1])) parse_fail(origin, lineno, "repeats must be an integer");
        spec.repeats = std::stoi(fields[1]);
        spec.module = fields[2];
        std::string args = fields[3];
        if (args.empty() || args.front() != '[' || args.back() != ']')
            parse_fail(origin, lineno, "args must be a bracketed list");
        std::string body = trim(args.substr(1, args.size() - 2));
        if (!body.empty())
            for (const std::string& tok : split_top(body, origin, lineno))
                spec.args.push_back(parse_arg(tok, origin, lineno));
        cfg.layers.push_back(std::move(spec));
    }

    validate(cfg, origin);
    return cfg;
}

ModelConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    std::string stem = std::filesystem::path(path).stem().string();
    ModelConfig cfg = parse_config(ss.str(), path);
    cfg.name = stem;
    return cfg;
}

std::string resolve_config_path(const std::string& name, const std::string& config_dir) {
    namespace fs = std::filesystem;
    std::vector<std::string> candidates = {name, name + ".cfg"};
    if (!config_dir.empty()) {
        candidates.push_back((fs::path(config_dir) / name).string());
        candidates.push_back((fs::path(config_dir) / (name + ".cfg")).string());
    }
    for (const std::string& c : candidates)
        if (fs::exists(c) && fs::is_regular_file(c)) return c;
    fail("config not found: " + name + " (searched: " + candidates[0] + ", " + candidates[1] +
         (config_dir.empty() ? "" : ", " + candidates[2] + ", " + candidates[3]) + ")");
}

ModelConfig apply_multipliers(const ModelConfig& cfg) {
    ModelConfig out = cfg;
    out.depth_multiple = 1.0;
    out.width_multiple = 1.0;
    for (LayerSpec& l : out.layers) {
        bool width_scaled = l.module == "CBS" || l.module == "BottleneckV5" ||
                            l.module == "CSP_C3" || l.module == "DCFS" || l.module == "SPPF";
        if (width_scaled) {
            if (l.args.empty() || l.args[0].kind != Arg::Kind::integer)
                parse_fail(cfg.name, l.line, l.module + " needs an integer channel argument");
            l.args[0] = Arg::make_int(
                round_channels(static_cast<double>(l.args[0].i) * cfg.width_multiple));
        }
        if ((l.module == "CSP_C3" || l.module == "DCFS") && l.repeats > 1)
            l.repeats = std::max(
                1, static_cast<int>(std::lround(l.repeats * cfg.depth_multiple)));
    }
    return out;
}

}  // namespace yolocs
