#include "maskd/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace maskd {
namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

[[noreturn]] void fail(const std::string& name, std::size_t line, const std::string& msg) {
    throw std::runtime_error("config: " + name + ":" + std::to_string(line) + ": " + msg);
}

using Setter = std::function<void(DistillConfig&, const std::string&, const std::string&, std::size_t)>;

long long parse_int(const std::string& v, const std::string& name, std::size_t line) {
    char* end = nullptr;
    const long long x = std::strtoll(v.c_str(), &end, 10);
    if (end == v.c_str() || *end != '\0') fail(name, line, "expected an integer, got '" + v + "'");
    return x;
}

double parse_real(const std::string& v, const std::string& name, std::size_t line) {
    char* end = nullptr;
    const double x = std::strtod(v.c_str(), &end);
    if (end == v.c_str() || *end != '\0') fail(name, line, "expected a number, got '" + v + "'");
    return x;
}

const std::map<std::string, Setter>& schema() {
    auto set_int = [](int DistillConfig::* field) {
        return [field](DistillConfig& c, const std::string& v, const std::string& n, std::size_t l) {
            c.*field = static_cast<int>(parse_int(v, n, l));
        };
    };
    auto set_real = [](double DistillConfig::* field) {
        return [field](DistillConfig& c, const std::string& v, const std::string& n, std::size_t l) {
            c.*field = parse_real(v, n, l);
        };
    };
    static const std::map<std::string, Setter> table = {
        {"seed",
         [](DistillConfig& c, const std::string& v, const std::string& n, std::size_t l) {
             c.seed = static_cast<std::uint64_t>(parse_int(v, n, l));
         }},
        {"tokens", set_int(&DistillConfig::tokens)},
        {"mu", set_real(&DistillConfig::mu)},
        {"lambda1", set_real(&DistillConfig::lambda1)},
        {"lambda2", set_real(&DistillConfig::lambda2)},
        {"batch", set_int(&DistillConfig::batch_size)},
        {"log_every", set_int(&DistillConfig::log_every)},
        {"eval_every", set_int(&DistillConfig::eval_every)},
        {"mode",
         [](DistillConfig& c, const std::string& v, const std::string& n, std::size_t l) {
             try {
                 c.mode = mode_from_name(v);
             } catch (const std::exception& e) {
                 fail(n, l, e.what());
             }
         }},
        {"data.height", set_int(&DistillConfig::height)},
        {"data.width", set_int(&DistillConfig::width)},
        {"data.classes", set_int(&DistillConfig::classes)},
        {"data.train", set_int(&DistillConfig::train_samples)},
        {"data.val", set_int(&DistillConfig::val_samples)},
        {"teacher.channels", set_int(&DistillConfig::teacher_channels)},
        {"teacher.iters", set_int(&DistillConfig::teacher_iters)},
        {"teacher.lr", set_real(&DistillConfig::teacher_lr)},
        {"student.channels", set_int(&DistillConfig::student_channels)},
        {"stage1.iters", set_int(&DistillConfig::stage1_iters)},
        {"stage1.lr", set_real(&DistillConfig::stage1_lr)},
        {"stage1.weight_decay", set_real(&DistillConfig::stage1_weight_decay)},
        {"stage2.iters", set_int(&DistillConfig::stage2_iters)},
        {"stage2.lr", set_real(&DistillConfig::stage2_lr)},
        {"stage2.warmup_fraction", set_real(&DistillConfig::warmup_fraction)},
    };
    return table;
}

}  // namespace

void apply_config_text(const std::string& text, const std::string& name, DistillConfig& into) {
    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    std::string section;
    while (std::getline(in, raw)) {
        ++lineno;
        const auto hash = raw.find('#');
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;

        if (line == "}") {
            if (section.empty()) fail(name, lineno, "unmatched '}'");
            section.clear();
            continue;
        }
        if (line.size() > 1 && line.back() == '{') {
            if (!section.empty()) fail(name, lineno, "sections cannot nest");
            section = trim(line.substr(0, line.size() - 1));
            if (section.empty()) fail(name, lineno, "section name missing before '{'");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(name, lineno, "expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) fail(name, lineno, "empty key or value");

        const std::string full = section.empty() ? key : section + "." + key;
        const auto it = schema().find(full);
        if (it == schema().end()) fail(name, lineno, "unknown key '" + full + "'");
        it->second(into, value, name, lineno);
    }
    if (!section.empty())
        throw std::runtime_error("config: " + name + ": unterminated section '" + section + "'");
}

void apply_config_file(const std::string& path, DistillConfig& into) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    apply_config_text(ss.str(), path, into);
}

}  // namespace maskd
