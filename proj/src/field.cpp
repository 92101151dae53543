#include "ghostdiff/field.hpp"

namespace gd {

IntensityMap intensity(const ComplexField& f) {
    IntensityMap m(f.grid);
    for (std::size_t i = 0; i < f.samples.size(); ++i) m.values[i] = std::norm(f.samples[i]);
    return m;
}

double total_power(const IntensityMap& m) {
    double s = 0.0, c = 0.0;  // compensated sum
    for (double v : m.values) {
        double y = v - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s * m.grid.cell();
}

double total_power(const ComplexField& f) { return total_power(intensity(f)); }

}  // namespace gd
