#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace ssc {

struct Vec3f {
    float x = 0.0f, y = 0.0f, z = 0.0f;

    constexpr Vec3f() = default;
    constexpr Vec3f(float x_, float y_, float z_) : x(x_), y(y_), z(z_) {}

    float& operator[](int i) { return (&x)[i]; }
    float operator[](int i) const { return (&x)[i]; }

    friend constexpr Vec3f operator+(Vec3f a, Vec3f b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend constexpr Vec3f operator-(Vec3f a, Vec3f b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend constexpr Vec3f operator*(Vec3f a, float s) { return {a.x * s, a.y * s, a.z * s}; }
    friend constexpr Vec3f operator*(float s, Vec3f a) { return a * s; }
    friend constexpr Vec3f operator/(Vec3f a, float s) { return {a.x / s, a.y / s, a.z / s}; }
    Vec3f& operator+=(Vec3f b) { x += b.x; y += b.y; z += b.z; return *this; }
    Vec3f& operator-=(Vec3f b) { x -= b.x; y -= b.y; z -= b.z; return *this; }
    friend constexpr bool operator==(Vec3f a, Vec3f b) { return a.x == b.x && a.y == b.y && a.z == b.z; }

    friend constexpr Vec3f mul(Vec3f a, Vec3f b) { return {a.x * b.x, a.y * b.y, a.z * b.z}; }
    friend constexpr Vec3f div(Vec3f a, Vec3f b) { return {a.x / b.x, a.y / b.y, a.z / b.z}; }
    friend constexpr float dot(Vec3f a, Vec3f b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
    friend float norm(Vec3f a) { return std::sqrt(dot(a, a)); }
    friend constexpr float norm_sq(Vec3f a) { return dot(a, a); }
    friend float dist(Vec3f a, Vec3f b) { return norm(a - b); }
    friend constexpr float dist_sq(Vec3f a, Vec3f b) { return norm_sq(a - b); }
};

inline Vec3f normalized(Vec3f v) {
    float n = norm(v);
    if (n <= 0.0f) throw std::invalid_argument("cannot normalize zero vector");
    return v / n;
}

/// Row-major 3x3 matrix; used for camera rotations.
struct Mat3f {
    std::array<float, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Mat3f identity() { return {}; }

    float operator()(int r, int c) const { return m[r * 3 + c]; }
    float& operator()(int r, int c) { return m[r * 3 + c]; }

    Vec3f operator*(Vec3f v) const {
        return {m[0] * v.x + m[1] * v.y + m[2] * v.z,
                m[3] * v.x + m[4] * v.y + m[5] * v.z,
                m[6] * v.x + m[7] * v.y + m[8] * v.z};
    }

    Mat3f transposed() const {
        Mat3f t;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
        return t;
    }

    float det() const {
        return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
               m[2] * (m[3] * m[7] - m[4] * m[6]);
    }

    /// True when R^T R == I and det == +1, both to the given tolerance.
    bool is_rotation(float tol = 1e-6f) const {
        for (int r = 0; r < 3; ++r) {
            for (int c = 0; c < 3; ++c) {
                float v = 0.0f;
                for (int k = 0; k < 3; ++k) v += (*this)(k, r) * (*this)(k, c);
                float want = (r == c) ? 1.0f : 0.0f;
                if (std::fabs(v - want) > tol) return false;
            }
        }
        return std::fabs(det() - 1.0f) <= tol;
    }
};

/// Axis-aligned box, the proposal/box primitive.
struct Box3f {
    Vec3f center;
    Vec3f size;  // full extents per axis, > 0

    Vec3f min() const { return center - size * 0.5f; }
    Vec3f max() const { return center + size * 0.5f; }
    float volume() const { return size.x * size.y * size.z; }

    bool contains(Vec3f p, float eps = 0.0f) const {
        Vec3f lo = min(), hi = max();
        return p.x >= lo.x - eps && p.x <= hi.x + eps && p.y >= lo.y - eps &&
               p.y <= hi.y + eps && p.z >= lo.z - eps && p.z <= hi.z + eps;
    }
};

/// Intersection-over-union of two axis-aligned boxes.
inline double box_iou(const Box3f& a, const Box3f& b) {
    Vec3f alo = a.min(), ahi = a.max(), blo = b.min(), bhi = b.max();
    double ix = std::max(0.0f, std::min(ahi.x, bhi.x) - std::max(alo.x, blo.x));
    double iy = std::max(0.0f, std::min(ahi.y, bhi.y) - std::max(alo.y, blo.y));
    double iz = std::max(0.0f, std::min(ahi.z, bhi.z) - std::max(alo.z, blo.z));
    double inter = ix * iy * iz;
    double uni = double(a.volume()) + double(b.volume()) - inter;
    return uni > 0.0 ? inter / uni : 0.0;
}

/// Huber / smooth-L1 with transition delta (default 1).
inline double smooth_l1(double e, double delta = 1.0) {
    double a = std::fabs(e);
    return a <= delta ? 0.5 * e * e / delta : a - 0.5 * delta;
}

inline double smooth_l1_deriv(double e, double delta = 1.0) {
    if (std::fabs(e) <= delta) return e / delta;
    return e > 0 ? 1.0 : -1.0;
}

/// Small deterministic PRNG (pcg32). All randomized operations take an
/// explicit seed so outputs are byte-stable across runs and platforms;
/// std::mt19937 distributions are not portable enough for that.
class Rng {
public:
    explicit Rng(uint64_t seed) { state_ = 0u; next_u32(); state_ += seed + 0x853c49e6748fea9bULL; next_u32(); }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + 0xda3e39cb94b95bdbULL;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
    }

    /// Uniform integer in [0, n). n must be >= 1.
    uint32_t uniform_u32(uint32_t n) { return static_cast<uint32_t>((uint64_t(next_u32()) * n) >> 32); }

    /// Uniform double in [0, 1).
    double uniform() { return next_u32() * (1.0 / 4294967296.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Deterministic substream: same (seed, tag) always yields the same stream.
    Rng fork(uint64_t tag) const { return Rng(state_ ^ (tag * 0x9e3779b97f4a7c15ULL + 0x1234abcdULL)); }

private:
    uint64_t state_ = 0;
};

/// CRC32 (IEEE, reflected) of a byte buffer; used for file checksums.
uint32_t crc32(const void* data, size_t n, uint32_t seed = 0);

}  // namespace ssc
