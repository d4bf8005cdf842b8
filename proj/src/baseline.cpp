#include "urbandiff/baseline.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <tuple>
#include <vector>

namespace urbandiff {

namespace {

enum class State : std::uint8_t { known, band, inside };

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Front {
    int rows = 0, cols = 0;
    std::vector<State> state;
    std::vector<double> dist;
    std::vector<float> value;

    std::size_t idx(int r, int c) const { return static_cast<std::size_t>(r) * cols + c; }
    bool inside_grid(int r, int c) const { return r >= 0 && r < rows && c >= 0 && c < cols; }
    bool has_value(int r, int c) const {
        return inside_grid(r, c) && state[idx(r, c)] != State::inside;
    }
};

// First-order eikonal update on the 4-neighborhood, unit speed and spacing.
double solve_quadrant(const Front& f, int r1, int c1, int r2, int c2) {
    const bool v1 = f.has_value(r1, c1);
    const bool v2 = f.has_value(r2, c2);
    if (v1 && v2) {
        const double t1 = f.dist[f.idx(r1, c1)];
        const double t2 = f.dist[f.idx(r2, c2)];
        if (std::abs(t1 - t2) < 1.0) {
            const double s = 2.0 - (t1 - t2) * (t1 - t2);
            return 0.5 * (t1 + t2 + std::sqrt(s));
        }
        return std::min(t1, t2) + 1.0;
    }
    if (v1) return f.dist[f.idx(r1, c1)] + 1.0;
    if (v2) return f.dist[f.idx(r2, c2)] + 1.0;
    return kInf;
}

double solve_distance(const Front& f, int r, int c) {
    double t = kInf;
    t = std::min(t, solve_quadrant(f, r, c - 1, r - 1, c));
    t = std::min(t, solve_quadrant(f, r, c + 1, r - 1, c));
    t = std::min(t, solve_quadrant(f, r, c - 1, r + 1, c));
    t = std::min(t, solve_quadrant(f, r, c + 1, r + 1, c));
    return t;
}

// Gradient from whichever neighbors currently carry a value (central where
// both sides do, one-sided otherwise, zero if neither).
template <typename Field>
double directional_gradient(const Front& f, Field&& field, int r, int c, int dr, int dc) {
    const bool plus = f.has_value(r + dr, c + dc);
    const bool minus = f.has_value(r - dr, c - dc);
    if (plus && minus) return 0.5 * (field(r + dr, c + dc) - field(r - dr, c - dc));
    if (plus) return field(r + dr, c + dc) - field(r, c);
    if (minus) return field(r, c) - field(r - dr, c - dc);
    return 0.0;
}

void fill_pixel(Front& f, int r, int c, int radius) {
    const auto dist_at = [&f](int rr, int cc) { return f.dist[f.idx(rr, cc)]; };
    const auto value_at = [&f](int rr, int cc) {
        return static_cast<double>(f.value[f.idx(rr, cc)]);
    };

    // Front normal at the target from the distance field.
    double nx = directional_gradient(f, dist_at, r, c, 0, 1);
    double ny = directional_gradient(f, dist_at, r, c, 1, 0);
    const double nlen = std::sqrt(nx * nx + ny * ny);
    if (nlen > 0.0) {
        nx /= nlen;
        ny /= nlen;
    }

    const double t_q = f.dist[f.idx(r, c)];
    double num = 0.0, den = 0.0;
    for (int dr = -radius; dr <= radius; ++dr) {
        for (int dc = -radius; dc <= radius; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int pr = r + dr;
            const int pc = c + dc;
            if (!f.has_value(pr, pc)) continue;
            const double len2 = static_cast<double>(dr) * dr + static_cast<double>(dc) * dc;
            if (len2 > static_cast<double>(radius) * radius) continue;
            const double len = std::sqrt(len2);

            // r points from contributor p to target q.
            const double rx = -dc;
            const double ry = -dr;
            const double dir = std::abs(rx * nx + ry * ny) / len;
            const double dst = 1.0 / len2;
            const double lev = 1.0 / (1.0 + std::abs(f.dist[f.idx(pr, pc)] - t_q));
            const double w = (dir + 1e-6) * dst * lev;

            const double gx = directional_gradient(f, value_at, pr, pc, 0, 1);
            const double gy = directional_gradient(f, value_at, pr, pc, 1, 0);
            num += w * (value_at(pr, pc) + gx * rx + gy * ry);
            den += w;
        }
    }
    // The popped seed pixel adjacent to q always contributes, so den > 0.
    f.value[f.idx(r, c)] = static_cast<float>(num / den);
}

}  // namespace

Grid inpaint_fmm(const Grid& observed, const Grid& mask, int radius, FmmTrace* trace) {
    require_same_shape(observed, mask, "inpaint_fmm");
    if (radius < 1) throw ParameterError("inpaint radius must be >= 1");

    Front f;
    f.rows = observed.rows();
    f.cols = observed.cols();
    f.state.resize(observed.size());
    f.dist.resize(observed.size());
    f.value.assign(observed.data(), observed.data() + observed.size());

    std::size_t revealed = 0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
        if (mask[i] != 0.0f) {
            f.state[i] = State::known;
            f.dist[i] = 0.0;
            ++revealed;
        } else {
            f.state[i] = State::inside;
            f.dist[i] = kInf;
        }
    }
    if (revealed == 0) throw BaselineError("inpaint_fmm requires at least one revealed pixel");

    using HeapItem = std::tuple<double, std::size_t>;  // (distance, index)
    std::priority_queue<HeapItem, std::vector<HeapItem>, std::greater<>> heap;

    // Seed the band with revealed pixels bordering the hidden region.
    const int dr4[] = {-1, 1, 0, 0};
    const int dc4[] = {0, 0, -1, 1};
    for (int r = 0; r < f.rows; ++r)
        for (int c = 0; c < f.cols; ++c) {
            if (f.state[f.idx(r, c)] != State::known) continue;
            for (int k = 0; k < 4; ++k) {
                const int nr = r + dr4[k];
                const int nc = c + dc4[k];
                if (f.inside_grid(nr, nc) && f.state[f.idx(nr, nc)] == State::inside) {
                    heap.emplace(0.0, f.idx(r, c));
                    break;
                }
            }
        }

    std::vector<bool> consumed(observed.size(), false);
    while (!heap.empty()) {
        const auto [t, i] = heap.top();
        heap.pop();
        if (consumed[i]) continue;  // stale heap entry
        consumed[i] = true;
        f.state[i] = State::known;
        if (trace) trace->pop_distances.push_back(t);

        const int r = static_cast<int>(i / f.cols);
        const int c = static_cast<int>(i % f.cols);
        for (int k = 0; k < 4; ++k) {
            const int nr = r + dr4[k];
            const int nc = c + dc4[k];
            if (!f.inside_grid(nr, nc)) continue;
            const std::size_t ni = f.idx(nr, nc);
            if (f.state[ni] == State::known) continue;
            const double nt = solve_distance(f, nr, nc);
            if (f.state[ni] == State::inside) {
                f.dist[ni] = nt;
                fill_pixel(f, nr, nc, radius);
                f.state[ni] = State::band;
                if (trace) ++trace->filled;
                heap.emplace(nt, ni);
            } else if (nt < f.dist[ni]) {
                f.dist[ni] = nt;
                heap.emplace(nt, ni);
            }
        }
    }

    Grid out(observed.rows(), observed.cols());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f.value[i];
    return out;
}

}  // namespace urbandiff
