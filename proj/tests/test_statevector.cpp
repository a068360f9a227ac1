#include "doctest.h"

#include "qig/statevector.hpp"
#include "test_util.hpp"

#include <cmath>
#include <sstream>

using namespace qig;
using namespace qig::sv;

namespace {

QuantumState random_state(int n, Rng& rng) {
    QuantumState s = QuantumState::zero(n);
    double norm_sq = 0.0;
    for (auto& a : s.amps) {
        a = cdouble{rng.normal(), rng.normal()};
        norm_sq += std::norm(a);
    }
    const double inv = 1.0 / std::sqrt(norm_sq);
    for (auto& a : s.amps) {
        a *= inv;
    }
    return s;
}

// 4x4 matrix of the entangler, built column by column from basis states of a
// 2-qubit register.
std::array<std::array<cdouble, 4>, 4> entangler_matrix(EntanglerKind kind, int qa, int qb,
                                                       std::span<const double> params,
                                                       bool inverse = false) {
    std::array<std::array<cdouble, 4>, 4> m{};
    const int dist = kind == EntanglerKind::N2 ? 1 : 2;
    const int n = dist + 1;
    for (int col = 0; col < 4; ++col) {
        QuantumState s = QuantumState::zero(n);
        s.amps[0] = 0.0;
        // place the two logical bits on qubits qa, qb
        std::size_t idx = 0;
        if (col & 2) {
            idx |= s.bit(qa);
        }
        if (col & 1) {
            idx |= s.bit(qb);
        }
        s.amps[idx] = 1.0;
        apply_entangler(s, kind, qa, qb, params, inverse);
        for (int row = 0; row < 4; ++row) {
            std::size_t ridx = 0;
            if (row & 2) {
                ridx |= s.bit(qa);
            }
            if (row & 1) {
                ridx |= s.bit(qb);
            }
            // project out any amplitude on the middle qubit of an N3 pair
            m[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] = s.amps[ridx];
        }
    }
    return m;
}

} // namespace

TEST_CASE("hadamard on |0> gives the equal superposition") {
    QuantumState s = QuantumState::zero(1);
    apply_hadamard(s, 0);
    CHECK(s.amps[0].real() == doctest::Approx(1.0 / std::sqrt(2.0)));
    CHECK(s.amps[1].real() == doctest::Approx(1.0 / std::sqrt(2.0)));
}

TEST_CASE("Rx(pi) maps |0> to -i|1>") {
    QuantumState s = QuantumState::zero(1);
    apply_rotation(s, Axis::X, 0, 3.14159265358979323846);
    CHECK(std::abs(s.amps[0]) < 1e-12);
    CHECK(s.amps[1].real() == doctest::Approx(0.0));
    CHECK(s.amps[1].imag() == doctest::Approx(-1.0));
}

TEST_CASE("cnot flips the target when the control is set") {
    // |10> with qubit 0 = control (most significant bit)
    QuantumState s = QuantumState::zero(2);
    s.amps[0] = 0.0;
    s.amps[2] = 1.0; // |10>
    apply_cnot(s, 0, 1);
    CHECK(std::abs(s.amps[3] - cdouble{1.0, 0.0}) < 1e-12); // |11>
}

TEST_CASE("gate errors: bad indices and equal control/target") {
    QuantumState s = QuantumState::zero(2);
    CHECK_THROWS_AS(apply_hadamard(s, 2), Error);
    CHECK_THROWS_AS(apply_hadamard(s, -1), Error);
    CHECK_THROWS_AS(apply_cnot(s, 1, 1), Error);
}

TEST_CASE("every gate preserves the norm") {
    Rng rng(5);
    QuantumState s = random_state(4, rng);
    apply_hadamard(s, 1);
    apply_rotation(s, Axis::X, 0, 0.7);
    apply_rotation(s, Axis::Y, 2, -1.3);
    apply_rotation(s, Axis::Z, 3, 2.9);
    apply_cnot(s, 0, 3);
    apply_controlled_rotation(s, Axis::Y, 2, 0, 0.4);
    CHECK(s.norm_sq() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gate then inverse returns the input state") {
    Rng rng(6);
    const QuantumState original = random_state(3, rng);
    QuantumState s = original;
    apply_rotation(s, Axis::Y, 1, 0.9);
    apply_rotation(s, Axis::Y, 1, -0.9);
    apply_cnot(s, 0, 2);
    apply_cnot(s, 0, 2);
    apply_hadamard(s, 2);
    apply_hadamard(s, 2);
    apply_controlled_rotation(s, Axis::X, 1, 2, 0.31);
    apply_controlled_rotation(s, Axis::X, 1, 2, -0.31);
    for (std::size_t i = 0; i < s.dim(); ++i) {
        CHECK(std::abs(s.amps[i] - original.amps[i]) < 1e-10);
    }
}

TEST_CASE("entanglers at zero parameters are the identity") {
    Rng rng(7);
    const QuantumState original = random_state(4, rng);
    QuantumState s = original;
    const std::vector<double> z2(kN2ParamCount, 0.0);
    const std::vector<double> z3(kN3ParamCount, 0.0);
    apply_entangler(s, EntanglerKind::N2, 1, 2, z2);
    apply_entangler(s, EntanglerKind::N3, 0, 2, z3);
    for (std::size_t i = 0; i < s.dim(); ++i) {
        CHECK(std::abs(s.amps[i] - original.amps[i]) < 1e-12);
    }
}

TEST_CASE("entangler matrices are real orthogonal") {
    Rng rng(8);
    for (int trial = 0; trial < 10; ++trial) {
        for (const EntanglerKind kind : {EntanglerKind::N2, EntanglerKind::N3}) {
            const int arity = kind == EntanglerKind::N2 ? kN2ParamCount : kN3ParamCount;
            const std::vector<double> params = test::random_vector(
                static_cast<std::size_t>(arity), rng, 2.0);
            const int qb = kind == EntanglerKind::N2 ? 1 : 2;
            const auto m = entangler_matrix(kind, 0, qb, params);
            for (int i = 0; i < 4; ++i) {
                for (int j = 0; j < 4; ++j) {
                    CHECK(std::abs(m[i][j].imag()) < 1e-12);
                    // orthogonality M^T M = I
                    cdouble dot{0.0, 0.0};
                    for (int k = 0; k < 4; ++k) {
                        dot += std::conj(m[k][i]) * m[k][j];
                    }
                    CHECK(std::abs(dot - (i == j ? 1.0 : 0.0)) < 1e-10);
                }
            }
        }
    }
}

TEST_CASE("entangler followed by its parameter-negated adjoint is the identity") {
    Rng rng(9);
    const QuantumState original = random_state(5, rng);
    for (const EntanglerKind kind : {EntanglerKind::N2, EntanglerKind::N3}) {
        const int arity = kind == EntanglerKind::N2 ? kN2ParamCount : kN3ParamCount;
        const std::vector<double> params =
            test::random_vector(static_cast<std::size_t>(arity), rng, 2.0);
        QuantumState s = original;
        const int qb = kind == EntanglerKind::N2 ? 2 : 3;
        apply_entangler(s, kind, 1, qb, params);
        apply_entangler(s, kind, 1, qb, params, /*inverse=*/true);
        for (std::size_t i = 0; i < s.dim(); ++i) {
            CHECK(std::abs(s.amps[i] - original.amps[i]) < 1e-10);
        }
    }
}

TEST_CASE("entangler rejects wrong arity and wrong pair distance") {
    QuantumState s = QuantumState::zero(4);
    const std::vector<double> three(3, 0.1);
    CHECK_THROWS_AS(apply_entangler(s, EntanglerKind::N2, 0, 1, three), Error);
    const std::vector<double> ok2(kN2ParamCount, 0.1);
    CHECK_THROWS_AS(apply_entangler(s, EntanglerKind::N2, 0, 2, ok2), Error);
    const std::vector<double> ok3(kN3ParamCount, 0.1);
    CHECK_THROWS_AS(apply_entangler(s, EntanglerKind::N3, 0, 1, ok3), Error);
}

TEST_CASE("probabilities square the amplitudes and sum to one") {
    QuantumState s = QuantumState::zero(1);
    CHECK(probabilities(s)[0] == doctest::Approx(1.0));
    CHECK(probabilities(s)[1] == doctest::Approx(0.0));
    apply_hadamard(s, 0);
    const auto p = probabilities(s);
    CHECK(p[0] == doctest::Approx(0.5));
    CHECK(p[1] == doctest::Approx(0.5));

    Rng rng(10);
    const QuantumState r = random_state(5, rng);
    const auto pr = probabilities(r);
    double total = 0.0;
    for (std::size_t i = 0; i < pr.size(); ++i) {
        CHECK(pr[i] == doctest::Approx(std::norm(r.amps[i])).epsilon(1e-14));
        total += pr[i];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("product and Bell states give the expected single-qubit entropies") {
    QuantumState product = QuantumState::zero(2); // |00>
    const int q0[1] = {0};
    CHECK(entropy_bits(reduced_density(product, q0)) == doctest::Approx(0.0).epsilon(1e-12));

    QuantumState bell = QuantumState::zero(2);
    apply_hadamard(bell, 0);
    apply_cnot(bell, 0, 1);
    CHECK(entropy_bits(reduced_density(bell, q0)) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("reduced density matches the brute-force partial trace") {
    Rng rng(12);
    const QuantumState s = random_state(4, rng);
    // brute force: rho_full = |psi><psi|, trace out qubits {0, 1}, keep {2, 3}
    // (qubit q occupies bit 3-q of the index)
    const std::vector<int> keep{2, 3};
    std::array<std::array<cdouble, 4>, 4> brute{};
    for (std::size_t i = 0; i < 16; ++i) {
        for (std::size_t j = 0; j < 16; ++j) {
            if ((i & 0b1100) != (j & 0b1100)) {
                continue; // environment bits must agree
            }
            const std::size_t a = i & 0b0011;
            const std::size_t b = j & 0b0011;
            brute[a][b] += s.amps[i] * std::conj(s.amps[j]);
        }
    }
    const ReducedState rho = reduced_density(s, keep);
    REQUIRE(rho.dim == 4);
    double trace = 0.0;
    for (int a = 0; a < 4; ++a) {
        trace += rho.matrix[static_cast<std::size_t>(a) * 4 + a].real();
        for (int b = 0; b < 4; ++b) {
            CHECK(std::abs(rho.matrix[static_cast<std::size_t>(a) * 4 + b] -
                           brute[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) <
                  1e-12);
            // hermiticity
            CHECK(std::abs(rho.matrix[static_cast<std::size_t>(a) * 4 + b] -
                           std::conj(rho.matrix[static_cast<std::size_t>(b) * 4 + a])) <
                  1e-10);
        }
    }
    CHECK(trace == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("pure-state entropy is symmetric under complementation and bounded") {
    Rng rng(13);
    for (int trial = 0; trial < 5; ++trial) {
        const QuantumState s = random_state(5, rng);
        const std::vector<int> subset{1, 3};
        const std::vector<int> complement{0, 2, 4};
        const double sa = entropy_bits(reduced_density(s, subset));
        const double sb = entropy_bits(reduced_density(s, complement));
        CHECK(sa == doctest::Approx(sb).epsilon(1e-8));
        CHECK(sa >= 0.0);
        CHECK(sa <= 2.0 + 1e-9);
    }
}

TEST_CASE("full-system entropy of a pure state is zero; empty subsystem errors") {
    Rng rng(14);
    const QuantumState s = random_state(3, rng);
    const std::vector<int> all{0, 1, 2};
    CHECK(entropy_bits(reduced_density(s, all)) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK_THROWS_AS((void)reduced_density(s, std::vector<int>{}), Error);
}

TEST_CASE("qsv dump roundtrips bit-exactly and rejects truncation") {
    Rng rng(15);
    const QuantumState s = random_state(3, rng);
    std::stringstream buf;
    save_qsv(s, buf);
    const std::string bytes = buf.str();
    CHECK(bytes.size() == 8 + 16 * s.dim());
    std::stringstream in(bytes);
    const QuantumState loaded = load_qsv(in);
    CHECK(loaded.n_qubits == 3);
    for (std::size_t i = 0; i < s.dim(); ++i) {
        CHECK(loaded.amps[i] == s.amps[i]);
    }
    std::stringstream truncated(bytes.substr(0, bytes.size() - 5));
    CHECK_THROWS_AS((void)load_qsv(truncated), Error);
}
