#pragma once

#include "qig/common.hpp"

#include <complex>
#include <iosfwd>
#include <span>
#include <vector>

namespace qig::sv {

using cdouble = std::complex<double>;

/// Dense n-qubit state. Qubit 0 is the most significant bit of the basis
/// index, so an FRQI state |c> (x) |j> has the color qubit at index 0 and the
/// address qubits following in Morton significance order; the decoded pixel
/// index is the low A bits of the basis index.
struct QuantumState {
    int n_qubits = 0;
    std::vector<cdouble> amps;

    static QuantumState zero(int n) {
        QIG_CHECK(n >= 1 && n <= 30, "qubit count ", n, " out of supported range");
        QuantumState s;
        s.n_qubits = n;
        s.amps.assign(std::size_t{1} << n, cdouble{0.0, 0.0});
        s.amps[0] = 1.0;
        return s;
    }

    std::size_t dim() const { return amps.size(); }

    /// Bit mask of qubit q within a basis index.
    std::size_t bit(int q) const {
        QIG_CHECK(q >= 0 && q < n_qubits, "qubit index ", q, " out of range for ",
                  n_qubits, " qubits");
        return std::size_t{1} << (n_qubits - 1 - q);
    }

    double norm_sq() const;
};

enum class Axis : std::uint8_t { X, Y, Z };

enum class EntanglerKind : std::uint8_t { N2, N3 };

/// Parameter arity of the configured N2/N3 decompositions. These are the
/// module's ladder configuration constants; the generator's parameter
/// counting is written against them.
constexpr int kN2ParamCount = 6; // Ry(a) Ry(b) CNOT Ry(a) Ry(b) CNOT Ry(a) Ry(b)
constexpr int kN3ParamCount = 2; // CNOT Ry(a) Ry(b) CNOT
constexpr int kLadderCapParamCount = 2; // trailing Ry (x) Ry on the last N3 pair

void apply_single(QuantumState& s, int q, const cdouble m[4]);
void apply_hadamard(QuantumState& s, int q);
void apply_rotation(QuantumState& s, Axis axis, int q, double angle);
void apply_cnot(QuantumState& s, int control, int target);
void apply_controlled_rotation(QuantumState& s, Axis axis, int control, int target,
                               double angle);

/// Real orthogonal two-qubit entangler on the (qa, qb) pair. The pair
/// distance |qa - qb| must be 1 for N2 and 2 for N3. All-zero parameters give
/// the identity. `inverse` applies the parameter-negated adjoint.
void apply_entangler(QuantumState& s, EntanglerKind kind, int qa, int qb,
                     std::span<const double> params, bool inverse = false);

std::vector<double> probabilities(const QuantumState& s);

struct ReducedState {
    std::vector<int> subsystem;  // ordered qubit indices
    int dim = 0;                 // 2^|subsystem|
    std::vector<cdouble> matrix; // row-major dim x dim, Hermitian, trace 1
};

ReducedState reduced_density(const QuantumState& s, std::span<const int> subsystem);

/// Von Neumann entropy -Tr[rho log2 rho] in bits. Eigenvalues below 1e-12
/// are treated as exact zeros.
double entropy_bits(const ReducedState& rho);

/// Imag part of <w| G |phi> for a rotation generator G: the Pauli on `q`, or
/// |1><1|_c (x) Pauli for a controlled rotation (control >= 0). This is the
/// per-gate term of the adjoint-method gradient sweep.
double imag_inner_generator(const QuantumState& w, const QuantumState& phi, Axis axis,
                            int q, int control = -1);

/// .qsv dump: 8-byte little-endian qubit count, then interleaved (re, im)
/// little-endian 64-bit floats.
void save_qsv(const QuantumState& s, std::ostream& os);
QuantumState load_qsv(std::istream& is);
void save_qsv_file(const QuantumState& s, const std::string& path);
QuantumState load_qsv_file(const std::string& path);

} // namespace qig::sv
