#include "maskd/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace maskd::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Kernels* pick_auto() {
    if (cpu_has_avx2() && avx2() != nullptr) return avx2();
    return &scalar();
}

const Kernels* resolve(const std::string& name) {
    if (name == "auto") return pick_auto();
    if (name == "scalar") return &scalar();
    if (name == "avx2") {
        if (!cpu_has_avx2() || avx2() == nullptr)
            throw std::runtime_error("kernel variant 'avx2' not supported on this CPU/build");
        return avx2();
    }
    throw std::runtime_error("unknown kernel variant '" + name + "' (expected scalar|avx2|auto)");
}

struct Active {
    const Kernels* table;
    std::string name;
};

Active& active_state() {
    static Active state = [] {
        const char* env = std::getenv("MASKD_KERNELS");
        const std::string name = env && *env ? env : "auto";
        const Kernels* t = resolve(name);
        return Active{t, t == &scalar() ? "scalar" : "avx2"};
    }();
    return state;
}

}  // namespace

const Kernels& dispatch() { return *active_state().table; }

void force_variant(const std::string& name) {
    const Kernels* t = resolve(name);
    active_state() = {t, t == &scalar() ? "scalar" : "avx2"};
}

std::string active_variant() { return active_state().name; }

}  // namespace maskd::kernels
