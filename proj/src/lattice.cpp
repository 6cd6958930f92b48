#include "illiquid/lattice.hpp"

#include "illiquid/errors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

namespace illiquid {

void GridSpec::validate() const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw InvalidParameter(what);
    };
    require(n_t >= 2 && n_x >= 2 && n_y >= 2 && n_r >= 2, "grid resolutions must be >= 2");
    require(t_max > 0.0 && x_max > 0.0 && y_max > 0.0 && r_max > 0.0, "grid extents must be > 0");
}

GridSpec GridSpec::with_radial_cover(double t_max, int n_t, double x_max, double y_max, int n_x,
                                     int n_y) {
    GridSpec g;
    g.t_max = t_max;
    g.n_t = n_t;
    g.x_max = x_max;
    g.y_max = y_max;
    g.n_x = n_x;
    g.n_y = n_y;
    g.r_max = x_max + y_max;
    g.n_r = n_x + n_y;
    return g;
}

ValueField::ValueField(const GridSpec& grid, double envelope_exponent, double fill)
    : grid_(grid), exponent_(envelope_exponent) {
    grid_.validate();
    values_.assign(std::size_t(grid_.n_t + 1) * grid_.layer_size(), fill);
}

std::span<double> ValueField::layer(int k) {
    return std::span<double>(values_).subspan(std::size_t(k) * grid_.layer_size(),
                                              grid_.layer_size());
}

std::span<const double> ValueField::layer(int k) const {
    return std::span<const double>(values_).subspan(std::size_t(k) * grid_.layer_size(),
                                                    grid_.layer_size());
}

LayerView ValueField::view(int k) const {
    return {layer(k), grid_.n_x, grid_.n_y, grid_.x_max, grid_.y_max, exponent_};
}

RadialField::RadialField(double r_max, int n_r, double envelope_exponent, double fill)
    : r_max_(r_max), n_r_(n_r), exponent_(envelope_exponent) {
    if (!(r_max > 0.0) || n_r < 2) throw InvalidParameter("radial grid needs r_max > 0, n_r >= 2");
    values_.assign(std::size_t(n_r) + 1, fill);
}

namespace {

double bilinear(const LayerView& v, double x, double y) {
    const double hx = v.hx();
    const double hy = v.hy();
    const double fx = x / hx;
    const double fy = y / hy;
    int i = std::min(int(fx), v.n_x - 1);
    int j = std::min(int(fy), v.n_y - 1);
    i = std::max(i, 0);
    j = std::max(j, 0);
    const double u = fx - i;
    const double w = fy - j;
    const double f00 = v.at(i, j);
    const double f10 = v.at(i + 1, j);
    const double f01 = v.at(i, j + 1);
    const double f11 = v.at(i + 1, j + 1);
    return (1.0 - u) * ((1.0 - w) * f00 + w * f01) + u * ((1.0 - w) * f10 + w * f11);
}

double bilinear_homogeneous(const LayerView& v, double x, double y) {
    const double e = v.envelope_exponent;
    const double hx = v.hx();
    const double hy = v.hy();
    const double fx = x / hx;
    const double fy = y / hy;
    const int i = std::clamp(int(fx), 0, v.n_x - 1);
    const int j = std::clamp(int(fy), 0, v.n_y - 1);
    const double u = fx - i;
    const double w = fy - j;
    const double wt[4] = {(1.0 - u) * (1.0 - w), (1.0 - u) * w, u * (1.0 - w), u * w};
    const int di[4] = {0, 0, 1, 1};
    const int dj[4] = {0, 1, 0, 1};
    const double s = x + y;
    if (i == 0 && j == 0) {
        const double f00 = v.at(0, 0);
        if (s <= 0.0) return f00;
        double acc = 0.0;
        double mass = 0.0;
        for (int k = 1; k < 4; ++k) {
            const double sk = di[k] * hx + dj[k] * hy;
            acc += wt[k] * (v.at(di[k], dj[k]) - f00) / std::pow(sk, e);
            mass += wt[k];
        }
        return f00 + acc / mass * std::pow(s, e);
    }
    double q = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double sk = (i + di[k]) * hx + (j + dj[k]) * hy;
        q += wt[k] * v.at(i + di[k], j + dj[k]) / std::pow(sk, e);
    }
    return q * std::pow(s, e);
}

}  // namespace

double interp2_homogeneous(const LayerView& layer, double x, double y) {
    x = std::max(x, 0.0);
    y = std::max(y, 0.0);
    if (x <= layer.x_max && y <= layer.y_max) return bilinear_homogeneous(layer, x, y);
    const double xb = std::min(x, layer.x_max);
    const double yb = std::min(y, layer.y_max);
    const double base = bilinear_homogeneous(layer, xb, yb);
    return base * std::pow((x + y) / (xb + yb), layer.envelope_exponent);
}

double interp2_homogeneous(const ValueField& field, int layer, double x, double y) {
    return interp2_homogeneous(field.view(layer), x, y);
}

double interp1_homogeneous(const RadialField& field, double r) {
    const auto v = field.values();
    const double e = field.envelope_exponent();
    if (r <= 0.0) return v[0];
    if (r >= field.r_max()) return interp1(field, r);
    const double h = field.hr();
    const double f = r / h;
    const int i = std::min(int(f), field.n_r() - 1);
    if (i == 0) return v[0] + (v[1] - v[0]) * std::pow(f, e);
    const double u = f - i;
    const double lo = v[i] / std::pow(i * h, e);
    const double hi = v[i + 1] / std::pow(field.r(i + 1), e);
    return ((1.0 - u) * lo + u * hi) * std::pow(r, e);
}

double interp2(const LayerView& layer, double x, double y) {
    x = std::max(x, 0.0);
    y = std::max(y, 0.0);
    if (x <= layer.x_max && y <= layer.y_max) return bilinear(layer, x, y);
    const double xb = std::min(x, layer.x_max);
    const double yb = std::min(y, layer.y_max);
    const double base = bilinear(layer, xb, yb);
    return base * std::pow((x + y) / (xb + yb), layer.envelope_exponent);
}

double interp2(const ValueField& field, int layer, double x, double y) {
    return interp2(field.view(layer), x, y);
}

double interp1(const RadialField& field, double r) {
    const auto v = field.values();
    if (r <= 0.0) return v[0];
    if (r >= field.r_max()) {
        const double top = v[field.n_r()];
        if (r == field.r_max()) return top;
        return top * std::pow(r / field.r_max(), field.envelope_exponent());
    }
    const double f = r / field.hr();
    const int i = std::min(int(f), field.n_r() - 1);
    const double u = f - i;
    return (1.0 - u) * v[i] + u * v[i + 1];
}

double ShapeReport::worst() const {
    return std::max({monotone_x, monotone_y, concave_x, concave_y, concave_diag, concave_anti});
}

ShapeReport shape_check(const LayerView& v, double tol) {
    ShapeReport rep;
    rep.tol = tol;
    const int nx = v.n_x;
    const int ny = v.n_y;
    for (int i = 0; i <= nx; ++i) {
        for (int j = 0; j <= ny; ++j) {
            const double c = v.at(i, j);
            if (i < nx) rep.monotone_x = std::max(rep.monotone_x, c - v.at(i + 1, j));
            if (j < ny) rep.monotone_y = std::max(rep.monotone_y, c - v.at(i, j + 1));
            const bool ix = i > 0 && i < nx;
            const bool iy = j > 0 && j < ny;
            if (ix)
                rep.concave_x = std::max(rep.concave_x, 0.5 * (v.at(i - 1, j) + v.at(i + 1, j)) - c);
            if (iy)
                rep.concave_y = std::max(rep.concave_y, 0.5 * (v.at(i, j - 1) + v.at(i, j + 1)) - c);
            if (ix && iy) {
                rep.concave_diag = std::max(rep.concave_diag,
                                            0.5 * (v.at(i - 1, j - 1) + v.at(i + 1, j + 1)) - c);
                rep.concave_anti = std::max(rep.concave_anti,
                                            0.5 * (v.at(i - 1, j + 1) + v.at(i + 1, j - 1)) - c);
            }
        }
    }
    return rep;
}

ShapeReport shape_check(const RadialField& field, double tol) {
    ShapeReport rep;
    rep.tol = tol;
    const auto v = field.values();
    for (int i = 0; i < field.n_r(); ++i) {
        rep.monotone_x = std::max(rep.monotone_x, v[i] - v[i + 1]);
        if (i > 0) rep.concave_x = std::max(rep.concave_x, 0.5 * (v[i - 1] + v[i + 1]) - v[i]);
    }
    return rep;
}

double cell_truncation_estimate(const LayerView& v) {
    std::vector<double> d2;
    d2.reserve(std::size_t(v.n_x) * v.n_y);
    for (int i = 1; i < v.n_x; ++i)
        for (int j = 1; j < v.n_y; ++j) {
            const double dx = std::abs(v.at(i - 1, j) - 2.0 * v.at(i, j) + v.at(i + 1, j));
            const double dy = std::abs(v.at(i, j - 1) - 2.0 * v.at(i, j) + v.at(i, j + 1));
            d2.push_back(std::max(dx, dy));
        }
    if (d2.empty()) return 0.0;
    auto mid = d2.begin() + d2.size() / 2;
    std::nth_element(d2.begin(), mid, d2.end());
    return *mid;
}

// --- serialisation ----------------------------------------------------------

namespace {

constexpr const char* kMagic = "ILLIQUID-FIELD 1";

void write_doubles(std::ostream& os, std::span<const double> xs) {
    static_assert(std::endian::native == std::endian::little, "payload is little-endian");
    os.write(reinterpret_cast<const char*>(xs.data()), std::streamsize(xs.size() * sizeof(double)));
}

void read_doubles(std::istream& is, std::span<double> xs) {
    is.read(reinterpret_cast<char*>(xs.data()), std::streamsize(xs.size() * sizeof(double)));
    if (!is) throw FormatError("truncated field payload");
}

std::map<std::string, std::string> read_header(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line != kMagic) throw FormatError("not a field file");
    std::map<std::string, std::string> kv;
    while (std::getline(is, line)) {
        if (line == "end") return kv;
        const auto eq = line.find(" = ");
        if (eq == std::string::npos) throw FormatError("malformed header line: " + line);
        kv[line.substr(0, eq)] = line.substr(eq + 3);
    }
    throw FormatError("missing end of header");
}

double num(const std::map<std::string, std::string>& kv, const std::string& key) {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("header lacks key " + key);
    return std::stod(it->second);
}

std::ostream& header_line(std::ostream& os, const char* key, double v) {
    return os << key << " = " << std::setprecision(17) << v << '\n';
}

}  // namespace

void write_binary(std::ostream& os, const ValueField& f) {
    const auto& g = f.grid();
    os << kMagic << '\n' << "kind = value\n";
    header_line(os, "t_max", g.t_max);
    header_line(os, "n_t", g.n_t);
    header_line(os, "x_max", g.x_max);
    header_line(os, "y_max", g.y_max);
    header_line(os, "n_x", g.n_x);
    header_line(os, "n_y", g.n_y);
    header_line(os, "r_max", g.r_max);
    header_line(os, "n_r", g.n_r);
    header_line(os, "envelope_exponent", f.envelope_exponent());
    header_line(os, "count", double(f.values().size()));
    os << "end\n";
    write_doubles(os, f.values());
}

void write_binary(std::ostream& os, const RadialField& f) {
    os << kMagic << '\n' << "kind = radial\n";
    header_line(os, "r_max", f.r_max());
    header_line(os, "n_r", f.n_r());
    header_line(os, "envelope_exponent", f.envelope_exponent());
    header_line(os, "count", double(f.values().size()));
    os << "end\n";
    write_doubles(os, f.values());
}

ValueField read_value_field(std::istream& is) {
    const auto kv = read_header(is);
    if (kv.at("kind") != "value") throw FormatError("expected a value field");
    GridSpec g;
    g.t_max = num(kv, "t_max");
    g.n_t = int(num(kv, "n_t"));
    g.x_max = num(kv, "x_max");
    g.y_max = num(kv, "y_max");
    g.n_x = int(num(kv, "n_x"));
    g.n_y = int(num(kv, "n_y"));
    g.r_max = num(kv, "r_max");
    g.n_r = int(num(kv, "n_r"));
    ValueField f(g, num(kv, "envelope_exponent"));
    if (std::size_t(num(kv, "count")) != f.values().size()) throw FormatError("count mismatch");
    read_doubles(is, f.values());
    return f;
}

RadialField read_radial_field(std::istream& is) {
    const auto kv = read_header(is);
    if (kv.at("kind") != "radial") throw FormatError("expected a radial field");
    RadialField f(num(kv, "r_max"), int(num(kv, "n_r")), num(kv, "envelope_exponent"));
    if (std::size_t(num(kv, "count")) != f.values().size()) throw FormatError("count mismatch");
    read_doubles(is, f.values());
    return f;
}

namespace {

template <class T>
void save_impl(const std::string& path, const T& f) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open " + path);
    write_binary(os, f);
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open " + path);
    return is;
}

}  // namespace

void save(const std::string& path, const ValueField& f) { save_impl(path, f); }
void save(const std::string& path, const RadialField& f) { save_impl(path, f); }

ValueField load_value_field(const std::string& path) {
    auto is = open_in(path);
    return read_value_field(is);
}

RadialField load_radial_field(const std::string& path) {
    auto is = open_in(path);
    return read_radial_field(is);
}

void write_csv(std::ostream& os, const ValueField& f, int layer) {
    const auto& g = f.grid();
    os << "t,x,y,value\n" << std::setprecision(12);
    const int k0 = layer < 0 ? 0 : layer;
    const int k1 = layer < 0 ? g.n_t : layer;
    for (int k = k0; k <= k1; ++k)
        for (int i = 0; i <= g.n_x; ++i)
            for (int j = 0; j <= g.n_y; ++j)
                os << g.t(k) << ',' << g.x(i) << ',' << g.y(j) << ',' << f.at(k, i, j) << '\n';
}

void write_csv(std::ostream& os, const RadialField& f) {
    os << "r,value\n" << std::setprecision(12);
    for (int i = 0; i <= f.n_r(); ++i) os << f.r(i) << ',' << f[i] << '\n';
}

}  // namespace illiquid
