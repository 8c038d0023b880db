#include "difflab/config.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "difflab/errors.hpp"

namespace difflab {

namespace {

struct Entry {
    std::string path;
    std::string value;
    std::size_t line = 0;    // 0 for command-line overrides
    std::size_t column = 0;  // of the value
    std::size_t key_column = 0;
};

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void fail(const Entry& e, const std::string& what) {
    if (e.line == 0) throw ValidationError(e.path, what);
    throw ParseError(e.path + ": " + what, e.line, e.column);
}

[[noreturn]] void unknown_key(const Entry& e) {
    if (e.line == 0) throw ValidationError(e.path, "unknown key");
    throw ParseError(e.path + ": unknown key", e.line, e.key_column);
}

double to_double(const Entry& e, std::string_view text) {
    const std::string s = trim(text);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) fail(e, "expected a number, got '" + s + "'");
    return v;
}

double to_double(const Entry& e) { return to_double(e, e.value); }

std::uint64_t to_unsigned(const Entry& e) {
    const std::string s = trim(e.value);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
        fail(e, "expected a non-negative integer, got '" + s + "'");
    }
    return v;
}

bool to_bool(const Entry& e) {
    const std::string s = trim(e.value);
    if (s == "true" || s == "yes" || s == "1") return true;
    if (s == "false" || s == "no" || s == "0") return false;
    fail(e, "expected true or false, got '" + s + "'");
}

std::vector<double> to_list(const Entry& e) {
    std::vector<double> out;
    std::string_view rest = e.value;
    while (true) {
        const auto comma = rest.find(',');
        out.push_back(to_double(e, rest.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
    }
    return out;
}

std::vector<std::string> split(const std::string& path) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : path) {
        if (c == '.') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    parts.push_back(cur);
    return parts;
}

// Where an entry lands; decides application order so that phase defaults
// and kinds are in place before the keys that refine them.
int stage(const std::vector<std::string>& p) {
    if (p.size() == 3 && p[0] == "algorithm" && p[2] == "kind") return 0;
    if (p.size() == 4 && p[0] == "noise" && p[1] == "before") return p[2] == "all" ? 1 : 2;
    if (p.size() == 4 && p[0] == "noise" && p[1] == "after") return p[2] == "all" ? 3 : 4;
    return 5;
}

AlgorithmConfig& algorithm_slot(ExperimentConfig& cfg, const std::string& label) {
    for (auto& a : cfg.algorithms)
        if (a.label == label) return a;
    AlgorithmConfig a;
    a.label = label;
    cfg.algorithms.push_back(a);
    return cfg.algorithms.back();
}

void apply_gmm_field(GmmSpec& g, const std::string& field, const Entry& e) {
    if (field == "c") g.c = to_double(e);
    else if (field == "sigma_a2") g.sigma_a2 = to_double(e);
    else if (field == "sigma_b2") g.sigma_b2 = to_double(e);
    else unknown_key(e);
}

void apply_channel(ChannelSpecs& ch, const std::string& channel, const std::string& field, const Entry& e) {
    if (channel == "all") {
        apply_gmm_field(ch.x, field, e);
        apply_gmm_field(ch.y, field, e);
        apply_gmm_field(ch.phi, field, e);
    } else if (channel == "x") {
        apply_gmm_field(ch.x, field, e);
    } else if (channel == "y") {
        apply_gmm_field(ch.y, field, e);
    } else if (channel == "phi") {
        apply_gmm_field(ch.phi, field, e);
    } else {
        unknown_key(e);
    }
}

void apply_algorithm(AlgorithmConfig& a, const std::string& key, const Entry& e) {
    if (key == "kind") {
        const auto kind = parse_estimator_kind(trim(e.value));
        if (!kind) fail(e, "unknown algorithm kind '" + trim(e.value) + "'");
        a.kind = *kind;
        if (a.kind == EstimatorKind::NonCoopLMS) a.share_data = a.share_weights = false;
    } else if (key == "adaptive") {
        a.adaptive = to_bool(e);
    } else if (key == "share_data") {
        a.share_data = to_bool(e);
    } else if (key == "share_weights") {
        a.share_weights = to_bool(e);
    } else if (key == "step_size") {
        a.step_size = to_double(e);
    } else if (key == "step_rule") {
        const std::string v = trim(e.value);
        if (v == "plain") a.step_rule = StepRule::Plain;
        else if (v == "tls") a.step_rule = StepRule::Tls;
        else if (v == "matched") a.step_rule = StepRule::Matched;
        else fail(e, "step_rule must be plain, tls or matched");
    } else if (key == "kernel_before") {
        a.kernel_before = to_double(e);
    } else if (key == "kernel_after") {
        a.kernel_after = to_double(e);
    } else if (key == "kernel_after_scale") {
        a.kernel_after_scale = to_double(e);
    } else if (key == "kernel_switch") {
        a.kernel_switch = to_unsigned(e);
    } else if (key == "chi") {
        a.chi = to_double(e);
    } else if (key == "epsilon") {
        a.epsilon = to_double(e);
    } else {
        unknown_key(e);
    }
}

void apply(ExperimentConfig& cfg, const Entry& e) {
    const auto p = split(e.path);
    const auto& head = p[0];
    if (p.size() == 1) {
        if (head == "iterations") cfg.iterations = to_unsigned(e);
        else if (head == "runs") cfg.runs = to_unsigned(e);
        else if (head == "seed") cfg.seed = to_unsigned(e);
        else if (head == "per_node_msd") cfg.per_node_msd = to_bool(e);
        else if (head == "tail_fraction") cfg.tail_fraction = to_double(e);
        else unknown_key(e);
        return;
    }
    if (head == "graph" && p.size() == 2) {
        if (p[1] == "edge_list") cfg.graph.edge_list = trim(e.value);
        else if (p[1] == "nodes") cfg.graph.nodes = to_unsigned(e);
        else if (p[1] == "avg_degree") cfg.graph.avg_degree = to_double(e);
        else if (p[1] == "seed") cfg.graph.seed = to_unsigned(e);
        else unknown_key(e);
        return;
    }
    if (head == "signal" && p.size() == 2) {
        if (p[1] == "h") cfg.h = to_list(e);
        else if (p[1] == "input_variance") cfg.input_variance = to_list(e);
        else if (p[1] == "observation_variance") cfg.observation_variance = to_list(e);
        else unknown_key(e);
        return;
    }
    if (head == "noise") {
        if (p.size() == 2 && p[1] == "switch_iteration") {
            cfg.noise_switch = to_unsigned(e);
            return;
        }
        if (p.size() == 4 && p[1] == "before") {
            apply_channel(cfg.noise_before, p[2], p[3], e);
            return;
        }
        if (p.size() == 4 && p[1] == "after") {
            if (!cfg.noise_after) cfg.noise_after = cfg.noise_before;
            apply_channel(*cfg.noise_after, p[2], p[3], e);
            return;
        }
        unknown_key(e);
    }
    if (head == "algorithm" && p.size() == 3 && !p[1].empty()) {
        apply_algorithm(algorithm_slot(cfg, p[1]), p[2], e);
        return;
    }
    if (head == "sweep" && p.size() == 2) {
        if (p[1] == "param") cfg.sweep.param = trim(e.value);
        else if (p[1] == "values") cfg.sweep.values = to_list(e);
        else unknown_key(e);
        return;
    }
    if (head == "compare" && p.size() == 2 && p[1] == "algorithm") {
        cfg.compare_algorithm = trim(e.value);
        return;
    }
    unknown_key(e);
}

struct Document {
    std::vector<Entry> entries;
    std::vector<std::string> algorithm_order;
};

Document tokenize(std::istream& in) {
    Document doc;
    std::string section;
    std::string raw;
    std::size_t line_no = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(std::string_view(raw).substr(0, hash));
        if (line.empty()) continue;
        const std::size_t indent = raw.find_first_not_of(" \t") + 1;
        if (line.front() == '[') {
            if (line.back() != ']' || line.size() < 3) throw ParseError("malformed section header", line_no, indent);
            section = trim(std::string_view(line).substr(1, line.size() - 2));
            if (section.empty() || section.find_first_of(" \t=") != std::string::npos) {
                throw ParseError("malformed section name '" + section + "'", line_no, indent + 1);
            }
            const auto parts = split(section);
            if (parts[0] == "algorithm" && parts.size() == 2 &&
                std::find(doc.algorithm_order.begin(), doc.algorithm_order.end(), parts[1]) == doc.algorithm_order.end()) {
                doc.algorithm_order.push_back(parts[1]);
            }
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected 'key = value'", line_no, indent);
        const std::string key = trim(std::string_view(line).substr(0, eq));
        if (key.empty()) throw ParseError("missing key before '='", line_no, indent);
        Entry e;
        e.path = section.empty() ? key : section + "." + key;
        e.value = trim(std::string_view(line).substr(eq + 1));
        e.line = line_no;
        e.column = raw.find('=') + 2;
        e.key_column = indent;
        if (e.value.empty()) throw ParseError("missing value for '" + e.path + "'", line_no, e.column);
        if (auto it = seen.find(e.path); it != seen.end()) {
            throw ParseError("duplicate key '" + e.path + "' (first set on line " + std::to_string(it->second) + ")",
                             line_no, indent);
        }
        seen.emplace(e.path, line_no);
        doc.entries.push_back(std::move(e));
    }
    if (doc.entries.empty()) throw ParseError("configuration is empty", line_no == 0 ? 1 : line_no, 1);
    return doc;
}

ExperimentConfig build(Document doc, const std::vector<Override>& overrides) {
    for (const auto& [path, value] : overrides) {
        auto it = std::find_if(doc.entries.begin(), doc.entries.end(), [&](const Entry& e) { return e.path == path; });
        if (it != doc.entries.end()) {
            it->value = value;
            it->line = 0;
            continue;
        }
        // Keys absent from the file are accepted if the schema knows them;
        // applying the override to a scratch config checks that.
        Entry e{path, value, 0, 0, 0};
        const auto parts = split(path);
        if (parts.size() == 3 && parts[0] == "algorithm" &&
            std::find(doc.algorithm_order.begin(), doc.algorithm_order.end(), parts[1]) == doc.algorithm_order.end()) {
            throw ValidationError(path, "unknown key (no algorithm labelled '" + parts[1] + "')");
        }
        ExperimentConfig scratch;
        apply(scratch, e);
        doc.entries.push_back(std::move(e));
    }

    ExperimentConfig cfg;
    cfg.h.clear();
    for (const auto& label : doc.algorithm_order) algorithm_slot(cfg, label);
    std::stable_sort(doc.entries.begin(), doc.entries.end(),
                     [](const Entry& a, const Entry& b) { return stage(split(a.path)) < stage(split(b.path)); });
    for (const auto& e : doc.entries) apply(cfg, e);

    for (const auto& label : doc.algorithm_order) {
        const bool has_kind = std::any_of(doc.entries.begin(), doc.entries.end(), [&](const Entry& e) {
            return e.path == "algorithm." + label + ".kind";
        });
        if (!has_kind) throw ValidationError("algorithm." + label + ".kind", "missing");
    }
    cfg.validate();
    return cfg;
}

std::string fmt(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

std::string fmt_list(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + fmt(v[i]);
    return out;
}

void emit_channels(std::ostream& out, const std::string& phase, const ChannelSpecs& ch) {
    const std::pair<const char*, const GmmSpec*> items[] = {{"x", &ch.x}, {"y", &ch.y}, {"phi", &ch.phi}};
    for (const auto& [name, g] : items) {
        out << "\n[noise." << phase << '.' << name << "]\n";
        out << "c = " << fmt(g->c) << '\n';
        out << "sigma_a2 = " << fmt(g->sigma_a2) << '\n';
        out << "sigma_b2 = " << fmt(g->sigma_b2) << '\n';
    }
}

}  // namespace

Override parse_override(const std::string& text) {
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ParseError("override must look like key=value: '" + text + "'", 1, 1);
    return {trim(std::string_view(text).substr(0, eq)), trim(std::string_view(text).substr(eq + 1))};
}

ExperimentConfig parse_config(std::istream& in, const std::vector<Override>& overrides) {
    return build(tokenize(in), overrides);
}

ExperimentConfig parse_config_text(const std::string& text, const std::vector<Override>& overrides) {
    std::istringstream in(text);
    return parse_config(in, overrides);
}

ExperimentConfig load_config(const std::string& path, const std::vector<Override>& overrides) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open config '" + path + "'", 0, 0);
    ExperimentConfig cfg = parse_config(in, overrides);
    if (!cfg.graph.edge_list.empty()) {
        namespace fs = std::filesystem;
        fs::path edges(cfg.graph.edge_list);
        if (edges.is_relative()) cfg.graph.edge_list = (fs::path(path).parent_path() / edges).lexically_normal().string();
    }
    return cfg;
}

std::string emit_config(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "iterations = " << c.iterations << '\n';
    out << "runs = " << c.runs << '\n';
    out << "seed = " << c.seed << '\n';
    out << "per_node_msd = " << (c.per_node_msd ? "true" : "false") << '\n';
    out << "tail_fraction = " << fmt(c.tail_fraction) << '\n';

    out << "\n[graph]\n";
    if (!c.graph.edge_list.empty()) out << "edge_list = " << c.graph.edge_list << '\n';
    out << "nodes = " << c.graph.nodes << '\n';
    out << "avg_degree = " << fmt(c.graph.avg_degree) << '\n';
    out << "seed = " << c.graph.seed << '\n';

    out << "\n[signal]\n";
    out << "h = " << fmt_list(c.h) << '\n';
    out << "input_variance = " << fmt_list(c.input_variance) << '\n';
    out << "observation_variance = " << fmt_list(c.observation_variance) << '\n';

    out << "\n[noise]\n";
    out << "switch_iteration = " << c.noise_switch << '\n';
    emit_channels(out, "before", c.noise_before);
    if (c.noise_after) emit_channels(out, "after", *c.noise_after);

    for (const auto& a : c.algorithms) {
        out << "\n[algorithm." << a.label << "]\n";
        out << "kind = " << to_string(a.kind) << '\n';
        out << "adaptive = " << (a.adaptive ? "true" : "false") << '\n';
        out << "share_data = " << (a.share_data ? "true" : "false") << '\n';
        out << "share_weights = " << (a.share_weights ? "true" : "false") << '\n';
        out << "step_size = " << fmt(a.step_size) << '\n';
        out << "step_rule = "
            << (a.step_rule == StepRule::Tls ? "tls" : a.step_rule == StepRule::Matched ? "matched" : "plain") << '\n';
        out << "kernel_before = " << fmt(a.kernel_before) << '\n';
        if (a.kernel_after) out << "kernel_after = " << fmt(*a.kernel_after) << '\n';
        if (a.kernel_after_scale) out << "kernel_after_scale = " << fmt(*a.kernel_after_scale) << '\n';
        out << "kernel_switch = " << a.kernel_switch << '\n';
        out << "chi = " << fmt(a.chi) << '\n';
        out << "epsilon = " << fmt(a.epsilon) << '\n';
    }
    if (!c.sweep.param.empty() || !c.sweep.values.empty()) {
        out << "\n[sweep]\n";
        if (!c.sweep.param.empty()) out << "param = " << c.sweep.param << '\n';
        if (!c.sweep.values.empty()) out << "values = " << fmt_list(c.sweep.values) << '\n';
    }
    if (!c.compare_algorithm.empty()) out << "\n[compare]\nalgorithm = " << c.compare_algorithm << '\n';
    return out.str();
}

}  // namespace difflab
