#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "qsmulti/errors.hpp"

namespace qsmulti {

/// Dense square matrix, row-major.
class Matrix {
public:
    Matrix() = default;
    explicit Matrix(std::size_t n, double fill = 0.0) : n_(n), a_(n * n, fill) {}
    Matrix(std::initializer_list<std::initializer_list<double>> rows) : n_(rows.size()), a_(n_ * n_, 0.0) {
        std::size_t i = 0;
        for (const auto& r : rows) {
            if (r.size() != n_) throw DomainError("Matrix: rows must have equal length n");
            std::copy(r.begin(), r.end(), a_.begin() + static_cast<std::ptrdiff_t>(i * n_));
            ++i;
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix diagonal(const std::vector<double>& d) {
        Matrix m(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
        return m;
    }

    std::size_t size() const noexcept { return n_; }
    double& operator()(std::size_t i, std::size_t j) noexcept { return a_[i * n_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return a_[i * n_ + j]; }

    double frobenius_norm() const noexcept {
        double s = 0.0;
        for (double v : a_) s += v * v;
        return std::sqrt(s);
    }

    Matrix submatrix(const std::vector<std::size_t>& index) const {
        Matrix m(index.size());
        for (std::size_t i = 0; i < index.size(); ++i)
            for (std::size_t j = 0; j < index.size(); ++j) m(i, j) = (*this)(index[i], index[j]);
        return m;
    }

    bool operator==(const Matrix&) const = default;

private:
    std::size_t n_ = 0;
    std::vector<double> a_;
};

inline std::vector<double> operator*(const Matrix& m, const std::vector<double>& x) {
    std::vector<double> y(m.size(), 0.0);
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j) y[i] += m(i, j) * x[j];
    return y;
}

inline constexpr double kZeroEigenTol = 1e-7;
inline constexpr std::size_t kMaxEigenDim = 16;

struct Spectrum {
    /// Sorted by descending real part; within a conjugate pair the positive imaginary part comes first.
    std::vector<std::complex<double>> eigenvalues;
    double zero_tol = kZeroEigenTol;
    std::size_t n_unstable = 0, n_center = 0, n_stable = 0;

    std::size_t size() const noexcept { return eigenvalues.size(); }
    /// Largest real part among eigenvalues outside the center band, if any.
    std::optional<std::complex<double>> leading_noncenter() const {
        for (const auto& l : eigenvalues)
            if (std::abs(l.real()) > zero_tol) return l;
        return std::nullopt;
    }
    bool stable_transversally() const noexcept { return n_unstable == 0; }
};

/// Sorts, counts, and packages raw eigenvalues.
inline Spectrum make_spectrum(std::vector<std::complex<double>> values, double zero_tol = kZeroEigenTol) {
    std::sort(values.begin(), values.end(), [](const auto& a, const auto& b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    Spectrum s;
    s.eigenvalues = std::move(values);
    s.zero_tol = zero_tol;
    for (const auto& l : s.eigenvalues) {
        if (l.real() > zero_tol) ++s.n_unstable;
        else if (l.real() < -zero_tol) ++s.n_stable;
        else ++s.n_center;
    }
    return s;
}

inline Spectrum make_spectrum(const std::vector<double>& real_values, double zero_tol = kZeroEigenTol) {
    std::vector<std::complex<double>> v(real_values.begin(), real_values.end());
    return make_spectrum(std::move(v), zero_tol);
}

namespace detail {

/// Strongly connected components of the nonzero pattern (edge i -> j when m(i,j) != 0).
/// The eigenvalues of a reducible matrix are the union of those of its component blocks.
inline std::vector<std::vector<std::size_t>> strong_components(const Matrix& m) {
    const std::size_t n = m.size();
    constexpr std::size_t unset = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> index(n, unset), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> comps;
    std::size_t counter = 0;

    std::function<void(std::size_t)> visit = [&](std::size_t v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack[v] = true;
        for (std::size_t w = 0; w < n; ++w) {
            if (w == v || m(v, w) == 0.0) continue;
            if (index[w] == unset) {
                visit(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack[w]) {
                low[v] = std::min(low[v], index[w]);
            }
        }
        if (low[v] == index[v]) {
            std::vector<std::size_t> comp;
            std::size_t w;
            do {
                w = stack.back();
                stack.pop_back();
                on_stack[w] = false;
                comp.push_back(w);
            } while (w != v);
            std::sort(comp.begin(), comp.end());
            comps.push_back(std::move(comp));
        }
    };
    for (std::size_t v = 0; v < n; ++v)
        if (index[v] == unset) visit(v);
    return comps;
}

/// Parlett-Reinsch balancing by powers of the radix.
inline void balance(Matrix& a) {
    const std::size_t n = a.size();
    constexpr double radix = std::numeric_limits<double>::radix;
    constexpr double sqrdx = radix * radix;
    bool done = false;
    while (!done) {
        done = true;
        for (std::size_t i = 0; i < n; ++i) {
            double r = 0.0, c = 0.0;
            for (std::size_t j = 0; j < n; ++j)
                if (j != i) {
                    c += std::abs(a(j, i));
                    r += std::abs(a(i, j));
                }
            if (c == 0.0 || r == 0.0) continue;
            double g = r / radix, f = 1.0;
            const double s = c + r;
            while (c < g) {
                f *= radix;
                c *= sqrdx;
            }
            g = r * radix;
            while (c > g) {
                f /= radix;
                c /= sqrdx;
            }
            if ((c + r) / f < 0.95 * s) {
                done = false;
                g = 1.0 / f;
                for (std::size_t j = 0; j < n; ++j) a(i, j) *= g;
                for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
            }
        }
    }
}

/// Orthogonal reduction to upper Hessenberg form with Householder reflectors.
inline void hessenberg(Matrix& a) {
    const std::size_t n = a.size();
    if (n < 3) return;
    std::vector<double> v(n);
    for (std::size_t k = 0; k + 2 < n; ++k) {
        double alpha = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) alpha += a(i, k) * a(i, k);
        alpha = std::sqrt(alpha);
        if (alpha == 0.0) continue;
        if (a(k + 1, k) > 0.0) alpha = -alpha;
        double vnorm2 = 0.0;
        for (std::size_t i = k + 1; i < n; ++i) {
            v[i] = a(i, k) - (i == k + 1 ? alpha : 0.0);
            vnorm2 += v[i] * v[i];
        }
        if (vnorm2 == 0.0) continue;
        const double beta = 2.0 / vnorm2;
        // A <- (I - beta v v^T) A
        for (std::size_t j = k; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t i = k + 1; i < n; ++i) dot += v[i] * a(i, j);
            dot *= beta;
            for (std::size_t i = k + 1; i < n; ++i) a(i, j) -= dot * v[i];
        }
        // A <- A (I - beta v v^T)
        for (std::size_t i = 0; i < n; ++i) {
            double dot = 0.0;
            for (std::size_t j = k + 1; j < n; ++j) dot += a(i, j) * v[j];
            dot *= beta;
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= dot * v[j];
        }
        a(k + 1, k) = alpha;
        for (std::size_t i = k + 2; i < n; ++i) a(i, k) = 0.0;
    }
}

/// Francis double-shift QR on an upper Hessenberg matrix (destroys a).
inline std::vector<std::complex<double>> hessenberg_qr(Matrix& a, int max_iter_per_value = 60) {
    const int n = static_cast<int>(a.size());
    std::vector<std::complex<double>> w(static_cast<std::size_t>(n));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    auto sign = [](double x, double y) { return y >= 0.0 ? std::abs(x) : -std::abs(x); };
    auto A = [&a](int i, int j) -> double& { return a(static_cast<std::size_t>(i), static_cast<std::size_t>(j)); };

    double anorm = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(A(i, j));

    int nn = n - 1;
    double t = 0.0;
    double p = 0.0, q = 0.0, r = 0.0, s = 0.0, x = 0.0, y = 0.0, z = 0.0, ww = 0.0;
    while (nn >= 0) {
        int its = 0, l = 0;
        do {
            for (l = nn; l > 0; --l) {
                s = std::abs(A(l - 1, l - 1)) + std::abs(A(l, l));
                if (s == 0.0) s = anorm;
                if (std::abs(A(l, l - 1)) <= eps * s) {
                    A(l, l - 1) = 0.0;
                    break;
                }
            }
            x = A(nn, nn);
            if (l == nn) {
                w[static_cast<std::size_t>(nn--)] = x + t;
            } else {
                y = A(nn - 1, nn - 1);
                ww = A(nn, nn - 1) * A(nn - 1, nn);
                if (l == nn - 1) {
                    p = 0.5 * (y - x);
                    q = p * p + ww;
                    z = std::sqrt(std::abs(q));
                    x += t;
                    if (q >= 0.0) {
                        z = p + sign(z, p);
                        w[static_cast<std::size_t>(nn - 1)] = w[static_cast<std::size_t>(nn)] = x + z;
                        if (z != 0.0) w[static_cast<std::size_t>(nn)] = x - ww / z;
                    } else {
                        w[static_cast<std::size_t>(nn)] = {x + p, -z};
                        w[static_cast<std::size_t>(nn - 1)] = {x + p, z};
                    }
                    nn -= 2;
                } else {
                    if (its == max_iter_per_value) throw NumericError("eigenvalues: QR iteration did not converge");
                    if (its > 0 && its % 10 == 0) {
                        // Exceptional shift.
                        t += x;
                        for (int i = 0; i <= nn; ++i) A(i, i) -= x;
                        s = std::abs(A(nn, nn - 1)) + std::abs(A(nn - 1, nn - 2));
                        y = x = 0.75 * s;
                        ww = -0.4375 * s * s;
                    }
                    ++its;
                    int m = nn - 2;
                    for (; m >= l; --m) {
                        z = A(m, m);
                        r = x - z;
                        s = y - z;
                        p = (r * s - ww) / A(m + 1, m) + A(m, m + 1);
                        q = A(m + 1, m + 1) - z - r - s;
                        r = A(m + 2, m + 1);
                        s = std::abs(p) + std::abs(q) + std::abs(r);
                        p /= s;
                        q /= s;
                        r /= s;
                        if (m == l) break;
                        const double u = std::abs(A(m, m - 1)) * (std::abs(q) + std::abs(r));
                        const double v = std::abs(p) * (std::abs(A(m - 1, m - 1)) + std::abs(z) + std::abs(A(m + 1, m + 1)));
                        if (u <= eps * v) break;
                    }
                    for (int i = m; i < nn - 1; ++i) {
                        A(i + 2, i) = 0.0;
                        if (i != m) A(i + 2, i - 1) = 0.0;
                    }
                    for (int k = m; k < nn; ++k) {
                        if (k != m) {
                            p = A(k, k - 1);
                            q = A(k + 1, k - 1);
                            r = 0.0;
                            if (k + 1 != nn) r = A(k + 2, k - 1);
                            if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                                p /= x;
                                q /= x;
                                r /= x;
                            }
                        }
                        if ((s = sign(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
                            if (k == m) {
                                if (l != m) A(k, k - 1) = -A(k, k - 1);
                            } else {
                                A(k, k - 1) = -s * x;
                            }
                            p += s;
                            x = p / s;
                            y = q / s;
                            z = r / s;
                            q /= p;
                            r /= p;
                            for (int j = k; j <= nn; ++j) {
                                p = A(k, j) + q * A(k + 1, j);
                                if (k + 1 != nn) {
                                    p += r * A(k + 2, j);
                                    A(k + 2, j) -= p * z;
                                }
                                A(k + 1, j) -= p * y;
                                A(k, j) -= p * x;
                            }
                            const int mmin = nn < k + 3 ? nn : k + 3;
                            for (int i = l; i <= mmin; ++i) {
                                p = x * A(i, k) + y * A(i, k + 1);
                                if (k + 1 != nn) {
                                    p += z * A(i, k + 2);
                                    A(i, k + 2) -= p * r;
                                }
                                A(i, k + 1) -= p * q;
                                A(i, k) -= p;
                            }
                        }
                    }
                }
            }
        } while (l + 1 < nn);
    }
    return w;
}

inline std::vector<std::complex<double>> block_eigenvalues(Matrix a) {
    if (a.size() == 1) return {a(0, 0)};
    balance(a);
    hessenberg(a);
    return hessenberg_qr(a);
}

} // namespace detail

/// Eigenvalues of a small dense real matrix: reducible structure is split into
/// strongly connected blocks, each balanced, Hessenberg-reduced and solved by
/// shifted QR with deflation.
inline Spectrum eigenvalues(const Matrix& m, double zero_tol = kZeroEigenTol) {
    if (m.size() == 0) throw DomainError("eigenvalues: empty matrix");
    if (m.size() > kMaxEigenDim) throw DomainError("eigenvalues: dimension exceeds 16");
    for (std::size_t i = 0; i < m.size(); ++i)
        for (std::size_t j = 0; j < m.size(); ++j)
            if (!std::isfinite(m(i, j))) throw NumericError("eigenvalues: non-finite matrix entry");

    std::vector<std::complex<double>> all;
    all.reserve(m.size());
    for (const auto& comp : detail::strong_components(m)) {
        const auto w = detail::block_eigenvalues(m.submatrix(comp));
        all.insert(all.end(), w.begin(), w.end());
    }
    return make_spectrum(std::move(all), zero_tol);
}

/// Eigenvector for an (approximate) eigenvalue by inverse iteration in complex arithmetic.
inline std::vector<std::complex<double>> inverse_iteration(const Matrix& m, std::complex<double> lambda,
                                                           int iterations = 4) {
    using cd = std::complex<double>;
    const std::size_t n = m.size();
    const double scale = std::max(m.frobenius_norm(), 1.0);
    const cd shift = lambda + cd(scale * 1e-12, scale * 1e-12 * (lambda.imag() != 0.0 ? 1.0 : 0.0));

    std::vector<cd> lu(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) lu[i * n + j] = m(i, j) - (i == j ? shift : cd{});
    std::vector<std::size_t> piv(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t best = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(lu[i * n + k]) > std::abs(lu[best * n + k])) best = i;
        piv[k] = best;
        if (best != k)
            for (std::size_t j = 0; j < n; ++j) std::swap(lu[k * n + j], lu[best * n + j]);
        if (std::abs(lu[k * n + k]) < scale * 1e-300 + std::numeric_limits<double>::min())
            lu[k * n + k] = scale * std::numeric_limits<double>::epsilon();
        for (std::size_t i = k + 1; i < n; ++i) {
            lu[i * n + k] /= lu[k * n + k];
            for (std::size_t j = k + 1; j < n; ++j) lu[i * n + j] -= lu[i * n + k] * lu[k * n + j];
        }
    }
    std::vector<cd> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = cd(1.0 + 0.1 * static_cast<double>(i), 0.05 * static_cast<double>(i % 3));
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t k = 0; k < n; ++k) std::swap(x[k], x[piv[k]]);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j) x[i] -= lu[i * n + j] * x[j];
        for (std::size_t i = n; i-- > 0;) {
            for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu[i * n + j] * x[j];
            x[i] /= lu[i * n + i];
        }
        double norm = 0.0;
        for (const auto& c : x) norm += std::norm(c);
        norm = std::sqrt(norm);
        if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError("inverse_iteration: breakdown");
        for (auto& c : x) c /= norm;
    }
    return x;
}

/// ||m v - lambda v|| / ||v||.
inline double eigen_residual(const Matrix& m, std::complex<double> lambda, const std::vector<std::complex<double>>& v) {
    const std::size_t n = m.size();
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::complex<double> acc{};
        for (std::size_t j = 0; j < n; ++j) acc += m(i, j) * v[j];
        num += std::norm(acc - lambda * v[i]);
        den += std::norm(v[i]);
    }
    return std::sqrt(num / den);
}

} // namespace qsmulti
