#include "maskd/pgm.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace maskd {

void write_pgm(const std::string& path, const double* values, int h, int w) {
    const std::size_t n = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    std::vector<unsigned char> bytes(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = values[i];
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("write_pgm: value " + std::to_string(v) +
                                        " outside [0,1] at index " + std::to_string(i));
        bytes[i] = static_cast<unsigned char>(std::floor(255.0 * v + 0.5));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("write_pgm: cannot open '" + path + "' for writing");
    f << "P5\n" << w << ' ' << h << "\n255\n";
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw std::runtime_error("write_pgm: write failed for '" + path + "'");
}

void export_mask_images(const MaskSet& masks, int h, int w, const std::string& dir, int stage_id) {
    if (masks.positions() != h * w)
        throw std::invalid_argument("export_mask_images: mask positions " +
                                    std::to_string(masks.positions()) + " do not match " +
                                    std::to_string(h) + "x" + std::to_string(w));
    for (int t = 0; t < masks.count(); ++t) {
        const std::string path = dir + "/mask_" + std::to_string(stage_id) + "_" + std::to_string(t) + ".pgm";
        write_pgm(path, masks.m.data() + static_cast<std::size_t>(t) * masks.positions(), h, w);
    }
}

}  // namespace maskd
