#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace illiquid {

/// Uniform discretisation of [0, t_max] x [0, x_max] x [0, y_max] plus the
/// radial wealth grid [0, r_max]. Counts are numbers of intervals, so every
/// axis has count + 1 nodes and contains 0 exactly.
struct GridSpec {
    double t_max = 1.0;
    int n_t = 50;
    double x_max = 2.0;
    double y_max = 2.0;
    int n_x = 40;
    int n_y = 40;
    double r_max = 4.0;
    int n_r = 80;

    void validate() const;

    double dt() const { return t_max / n_t; }
    double hx() const { return x_max / n_x; }
    double hy() const { return y_max / n_y; }
    double hr() const { return r_max / n_r; }
    double t(int k) const { return k == n_t ? t_max : k * dt(); }
    double x(int i) const { return i == n_x ? x_max : i * hx(); }
    double y(int j) const { return j == n_y ? y_max : j * hy(); }
    double r(int i) const { return i == n_r ? r_max : i * hr(); }

    std::size_t layer_size() const { return std::size_t(n_x + 1) * std::size_t(n_y + 1); }

    /// Grid whose radial axis spans the whole (x, y) box: r_max = x_max +
    /// y_max with n_x + n_y intervals.
    static GridSpec with_radial_cover(double t_max, int n_t, double x_max, double y_max,
                                      int n_x, int n_y);

    bool operator==(const GridSpec&) const = default;
};

/// Read-only view of one time layer of a ValueField, row-major in x.
struct LayerView {
    std::span<const double> values;  // (n_x + 1) * (n_y + 1)
    int n_x;
    int n_y;
    double x_max;
    double y_max;
    double envelope_exponent;

    double at(int i, int j) const { return values[std::size_t(i) * (n_y + 1) + j]; }
    double hx() const { return x_max / n_x; }
    double hy() const { return y_max / n_y; }
};

/// A function of (t, x, y) sampled on a GridSpec lattice.
class ValueField {
public:
    ValueField() = default;
    explicit ValueField(const GridSpec& grid, double envelope_exponent = 0.5, double fill = 0.0);

    const GridSpec& grid() const { return grid_; }
    double envelope_exponent() const { return exponent_; }

    double& at(int k, int i, int j) { return values_[index(k, i, j)]; }
    double at(int k, int i, int j) const { return values_[index(k, i, j)]; }

    std::span<double> layer(int k);
    std::span<const double> layer(int k) const;
    LayerView view(int k) const;

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }

    /// Fill every node from f(t, x, y).
    template <class F>
    void fill(F&& f) {
        for (int k = 0; k <= grid_.n_t; ++k)
            for (int i = 0; i <= grid_.n_x; ++i)
                for (int j = 0; j <= grid_.n_y; ++j) at(k, i, j) = f(grid_.t(k), grid_.x(i), grid_.y(j));
    }

private:
    std::size_t index(int k, int i, int j) const {
        return std::size_t(k) * grid_.layer_size() + std::size_t(i) * (grid_.n_y + 1) + j;
    }

    GridSpec grid_{};
    double exponent_ = 0.5;
    std::vector<double> values_;
};

/// A function of scalar wealth on the uniform grid [0, r_max].
class RadialField {
public:
    RadialField() = default;
    RadialField(double r_max, int n_r, double envelope_exponent, double fill = 0.0);

    template <class F>
    static RadialField sample(double r_max, int n_r, double envelope_exponent, F&& f) {
        RadialField out(r_max, n_r, envelope_exponent);
        for (int i = 0; i <= n_r; ++i) out.values_[i] = f(out.r(i));
        return out;
    }

    double r_max() const { return r_max_; }
    int n_r() const { return n_r_; }
    double hr() const { return r_max_ / n_r_; }
    double r(int i) const { return i == n_r_ ? r_max_ : i * hr(); }
    double envelope_exponent() const { return exponent_; }

    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    double operator[](int i) const { return values_[i]; }
    double& operator[](int i) { return values_[i]; }

private:
    double r_max_ = 1.0;
    int n_r_ = 1;
    double exponent_ = 0.5;
    std::vector<double> values_;
};

/// Bilinear inside the box; beyond it the value at the clamped boundary
/// point scaled by ((x + y) / (x_b + y_b))^exponent.
double interp2(const LayerView& layer, double x, double y);
double interp2(const ValueField& field, int layer, double x, double y);

/// Piecewise linear on [0, r_max], power envelope (r / r_max)^exponent beyond.
double interp1(const RadialField& field, double r);

/// Linear in f / r^exponent instead of f, so exact on A + B r^exponent in the
/// first cell and on B r^exponent everywhere. Same envelope beyond r_max.
double interp1_homogeneous(const RadialField& field, double r);
/// Bilinear in f / (x + y)^exponent; the cell at the origin interpolates
/// f - f(0, 0) the same way. Same envelope beyond the box as interp2.
double interp2_homogeneous(const LayerView& layer, double x, double y);
double interp2_homogeneous(const ValueField& field, int layer, double x, double y);

enum class Interpolation { linear, homogeneous };

inline double interp1(const RadialField& field, double r, Interpolation mode) {
    return mode == Interpolation::linear ? interp1(field, r) : interp1_homogeneous(field, r);
}
inline double interp2(const LayerView& layer, double x, double y, Interpolation mode) {
    return mode == Interpolation::linear ? interp2(layer, x, y) : interp2_homogeneous(layer, x, y);
}

struct ShapeReport {
    double monotone_x = 0.0;   // largest decrease along +x
    double monotone_y = 0.0;
    double concave_x = 0.0;    // largest midpoint-convexity excess
    double concave_y = 0.0;
    double concave_diag = 0.0;
    double concave_anti = 0.0;
    double tol = 0.0;

    double worst() const;
    bool passed() const { return worst() <= tol; }
};

ShapeReport shape_check(const LayerView& layer, double tol);
ShapeReport shape_check(const RadialField& field, double tol);

/// Median over interior nodes of the larger axis second difference; the
/// typical change a first-order scheme makes per cell.
double cell_truncation_estimate(const LayerView& layer);

// Serialisation: a text header of key = value lines closed by "end", then
// the payload as little-endian 64-bit floats in row-major order.
void write_binary(std::ostream& os, const ValueField& field);
void write_binary(std::ostream& os, const RadialField& field);
ValueField read_value_field(std::istream& is);
RadialField read_radial_field(std::istream& is);

void save(const std::string& path, const ValueField& field);
void save(const std::string& path, const RadialField& field);
ValueField load_value_field(const std::string& path);
RadialField load_radial_field(const std::string& path);

/// CSV with columns t,x,y,value (one row per node of the given layers, all
/// layers when layer < 0).
void write_csv(std::ostream& os, const ValueField& field, int layer = -1);
/// CSV with columns r,value.
void write_csv(std::ostream& os, const RadialField& field);

}  // namespace illiquid
