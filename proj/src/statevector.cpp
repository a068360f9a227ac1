#include "qig/statevector.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstring>
#include <fstream>
#include <ostream>

namespace qig::sv {

double QuantumState::norm_sq() const {
    double s = 0.0;
    for (const cdouble& a : amps) {
        s += std::norm(a);
    }
    return s;
}

void apply_single(QuantumState& s, int q, const cdouble m[4]) {
    const std::size_t step = s.bit(q);
    const std::size_t dim = s.dim();
    for (std::size_t hi = 0; hi < dim; hi += 2 * step) {
        for (std::size_t lo = 0; lo < step; ++lo) {
            const std::size_t i0 = hi + lo;
            const std::size_t i1 = i0 + step;
            const cdouble a0 = s.amps[i0];
            const cdouble a1 = s.amps[i1];
            s.amps[i0] = m[0] * a0 + m[1] * a1;
            s.amps[i1] = m[2] * a0 + m[3] * a1;
        }
    }
}

void apply_hadamard(QuantumState& s, int q) {
    static const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const cdouble m[4] = {inv_sqrt2, inv_sqrt2, inv_sqrt2, -inv_sqrt2};
    apply_single(s, q, m);
}

namespace {

void rotation_matrix(Axis axis, double angle, cdouble m[4]) {
    const double c = std::cos(0.5 * angle);
    const double v = std::sin(0.5 * angle);
    switch (axis) {
    case Axis::X:
        m[0] = c;
        m[1] = cdouble{0.0, -v};
        m[2] = cdouble{0.0, -v};
        m[3] = c;
        return;
    case Axis::Y:
        m[0] = c;
        m[1] = -v;
        m[2] = v;
        m[3] = c;
        return;
    case Axis::Z:
        m[0] = cdouble{c, -v};
        m[1] = 0.0;
        m[2] = 0.0;
        m[3] = cdouble{c, v};
        return;
    }
}

} // namespace

void apply_rotation(QuantumState& s, Axis axis, int q, double angle) {
    cdouble m[4];
    rotation_matrix(axis, angle, m);
    apply_single(s, q, m);
}

void apply_cnot(QuantumState& s, int control, int target) {
    QIG_CHECK(control != target, "cnot control equals target (", control, ")");
    const std::size_t cbit = s.bit(control);
    const std::size_t tbit = s.bit(target);
    const std::size_t dim = s.dim();
    for (std::size_t i = 0; i < dim; ++i) {
        if ((i & cbit) != 0 && (i & tbit) == 0) {
            std::swap(s.amps[i], s.amps[i | tbit]);
        }
    }
}

void apply_controlled_rotation(QuantumState& s, Axis axis, int control, int target,
                               double angle) {
    QIG_CHECK(control != target, "controlled rotation control equals target (", control,
              ")");
    cdouble m[4];
    rotation_matrix(axis, angle, m);
    const std::size_t cbit = s.bit(control);
    const std::size_t tbit = s.bit(target);
    const std::size_t dim = s.dim();
    for (std::size_t i = 0; i < dim; ++i) {
        if ((i & cbit) != 0 && (i & tbit) == 0) {
            const std::size_t j = i | tbit;
            const cdouble a0 = s.amps[i];
            const cdouble a1 = s.amps[j];
            s.amps[i] = m[0] * a0 + m[1] * a1;
            s.amps[j] = m[2] * a0 + m[3] * a1;
        }
    }
}

void apply_entangler(QuantumState& s, EntanglerKind kind, int qa, int qb,
                     std::span<const double> params, bool inverse) {
    const int dist = qa > qb ? qa - qb : qb - qa;
    const int want = kind == EntanglerKind::N2 ? 1 : 2;
    QIG_CHECK(dist == want, kind == EntanglerKind::N2 ? "N2" : "N3",
              " entangler needs pair distance ", want, ", got qubits ", qa, " and ", qb);
    const int arity = kind == EntanglerKind::N2 ? kN2ParamCount : kN3ParamCount;
    QIG_CHECK(static_cast<int>(params.size()) == arity, "entangler expects ", arity,
              " parameters, got ", params.size());
    const double sign = inverse ? -1.0 : 1.0;
    if (kind == EntanglerKind::N2) {
        if (!inverse) {
            apply_rotation(s, Axis::Y, qa, params[0]);
            apply_rotation(s, Axis::Y, qb, params[1]);
            apply_cnot(s, qa, qb);
            apply_rotation(s, Axis::Y, qa, params[2]);
            apply_rotation(s, Axis::Y, qb, params[3]);
            apply_cnot(s, qa, qb);
            apply_rotation(s, Axis::Y, qa, params[4]);
            apply_rotation(s, Axis::Y, qb, params[5]);
        } else {
            apply_rotation(s, Axis::Y, qb, -params[5]);
            apply_rotation(s, Axis::Y, qa, -params[4]);
            apply_cnot(s, qa, qb);
            apply_rotation(s, Axis::Y, qb, -params[3]);
            apply_rotation(s, Axis::Y, qa, -params[2]);
            apply_cnot(s, qa, qb);
            apply_rotation(s, Axis::Y, qb, -params[1]);
            apply_rotation(s, Axis::Y, qa, -params[0]);
        }
    } else {
        apply_cnot(s, qa, qb);
        apply_rotation(s, Axis::Y, qa, sign * params[0]);
        apply_rotation(s, Axis::Y, qb, sign * params[1]);
        apply_cnot(s, qa, qb);
    }
}

std::vector<double> probabilities(const QuantumState& s) {
    std::vector<double> p(s.dim());
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::norm(s.amps[i]);
    }
    return p;
}

ReducedState reduced_density(const QuantumState& s, std::span<const int> subsystem) {
    QIG_CHECK(!subsystem.empty(), "reduced_density needs a non-empty subsystem");
    std::vector<bool> in_subsystem(static_cast<std::size_t>(s.n_qubits), false);
    for (int q : subsystem) {
        QIG_CHECK(q >= 0 && q < s.n_qubits, "subsystem qubit ", q, " out of range");
        QIG_CHECK(!in_subsystem[static_cast<std::size_t>(q)], "duplicate subsystem qubit ",
                  q);
        in_subsystem[static_cast<std::size_t>(q)] = true;
    }
    const int k = static_cast<int>(subsystem.size());
    std::vector<std::size_t> sub_bits;
    sub_bits.reserve(static_cast<std::size_t>(k));
    for (int q : subsystem) {
        sub_bits.push_back(s.bit(q));
    }
    std::vector<std::size_t> env_bits;
    for (int q = 0; q < s.n_qubits; ++q) {
        if (!in_subsystem[static_cast<std::size_t>(q)]) {
            env_bits.push_back(s.bit(q));
        }
    }
    const std::size_t dim_s = std::size_t{1} << k;
    const std::size_t dim_e = std::size_t{1} << env_bits.size();
    const auto compose = [&](std::size_t sub, std::size_t env) {
        std::size_t idx = 0;
        for (int i = 0; i < k; ++i) {
            if ((sub >> (k - 1 - i)) & 1u) {
                idx |= sub_bits[static_cast<std::size_t>(i)];
            }
        }
        for (std::size_t i = 0; i < env_bits.size(); ++i) {
            if ((env >> (env_bits.size() - 1 - i)) & 1u) {
                idx |= env_bits[i];
            }
        }
        return idx;
    };

    ReducedState rho;
    rho.subsystem.assign(subsystem.begin(), subsystem.end());
    rho.dim = static_cast<int>(dim_s);
    rho.matrix.assign(dim_s * dim_s, cdouble{0.0, 0.0});
    for (std::size_t a = 0; a < dim_s; ++a) {
        for (std::size_t b = 0; b < dim_s; ++b) {
            cdouble acc{0.0, 0.0};
            for (std::size_t e = 0; e < dim_e; ++e) {
                acc += s.amps[compose(a, e)] * std::conj(s.amps[compose(b, e)]);
            }
            rho.matrix[a * dim_s + b] = acc;
        }
    }
    return rho;
}

double entropy_bits(const ReducedState& rho) {
    const int d = rho.dim;
    Eigen::MatrixXcd m(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) {
            m(i, j) = rho.matrix[static_cast<std::size_t>(i) * d + j];
        }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m);
    QIG_CHECK(solver.info() == Eigen::Success, "eigendecomposition failed");
    double entropy = 0.0;
    for (int i = 0; i < d; ++i) {
        const double lambda = solver.eigenvalues()[i];
        if (lambda > 1e-12) {
            entropy -= lambda * std::log2(lambda);
        }
    }
    return entropy;
}

double imag_inner_generator(const QuantumState& w, const QuantumState& phi, Axis axis,
                            int q, int control) {
    QIG_CHECK(w.n_qubits == phi.n_qubits, "state size mismatch in generator inner product");
    const std::size_t qbit = phi.bit(q);
    const std::size_t cbit = control >= 0 ? phi.bit(control) : 0;
    const std::size_t dim = phi.dim();
    cdouble acc{0.0, 0.0};
    for (std::size_t i = 0; i < dim; ++i) {
        if ((i & qbit) != 0) {
            continue;
        }
        if (control >= 0 && (i & cbit) == 0) {
            continue;
        }
        const std::size_t j = i | qbit;
        const cdouble w0 = std::conj(w.amps[i]);
        const cdouble w1 = std::conj(w.amps[j]);
        const cdouble p0 = phi.amps[i];
        const cdouble p1 = phi.amps[j];
        switch (axis) {
        case Axis::X:
            acc += w0 * p1 + w1 * p0;
            break;
        case Axis::Y:
            acc += w0 * cdouble{0.0, -1.0} * p1 + w1 * cdouble{0.0, 1.0} * p0;
            break;
        case Axis::Z:
            acc += w0 * p0 - w1 * p1;
            break;
        }
    }
    return acc.imag();
}

void save_qsv(const QuantumState& s, std::ostream& os) {
    const std::uint64_t n = static_cast<std::uint64_t>(s.n_qubits);
    char header[8];
    std::memcpy(header, &n, 8);
    os.write(header, 8);
    for (const cdouble& a : s.amps) {
        const double re = a.real();
        const double im = a.imag();
        char buf[16];
        std::memcpy(buf, &re, 8);
        std::memcpy(buf + 8, &im, 8);
        os.write(buf, 16);
    }
    QIG_CHECK(os.good(), "qsv write failed");
}

QuantumState load_qsv(std::istream& is) {
    char header[8];
    is.read(header, 8);
    QIG_CHECK(is.gcount() == 8, "qsv truncated: missing qubit-count header");
    std::uint64_t n = 0;
    std::memcpy(&n, header, 8);
    QIG_CHECK(n >= 1 && n <= 30, "qsv qubit count ", n, " out of range");
    QuantumState s;
    s.n_qubits = static_cast<int>(n);
    s.amps.resize(std::size_t{1} << n);
    for (std::size_t i = 0; i < s.amps.size(); ++i) {
        char buf[16];
        is.read(buf, 16);
        QIG_CHECK(is.gcount() == 16, "qsv truncated at amplitude ", i, ": expected ",
                  (std::size_t{1} << n) * 16 + 8, " bytes total");
        double re = 0.0;
        double im = 0.0;
        std::memcpy(&re, buf, 8);
        std::memcpy(&im, buf + 8, 8);
        s.amps[i] = cdouble{re, im};
    }
    return s;
}

void save_qsv_file(const QuantumState& s, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    QIG_CHECK(os.is_open(), "cannot open ", path, " for writing");
    save_qsv(s, os);
}

QuantumState load_qsv_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    QIG_CHECK(is.is_open(), "cannot open ", path);
    return load_qsv(is);
}

} // namespace qig::sv
