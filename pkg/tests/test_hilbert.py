from functools import reduce

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from iontfim.couplings import CouplingMatrix, power_law_matrix
from iontfim.errors import StepBoundError
from iontfim.hilbert import (
    HamiltonianSpec,
    IsingXX,
    ModulatedField,
    Propagator,
    SiteFields,
    SpinState,
    UniformField,
    apply_hamiltonian,
    basis_state,
    build_state,
    evolve,
    evolve_many,
    evolve_times,
    expectation,
    krylov_expm,
    magnetizations,
    matvec,
    measure,
    neel_spec,
    taylor_expm,
    to_dense,
)
from iontfim.errors import ConvergenceError
from iontfim.hilbert.basis import hadamard_all

# Oracle: textbook Pauli matrices in the (|up>, |down>) basis, permuted to the
# package convention (bit 1 = up, site 1 least significant) by explicit index
# bookkeeping rather than by reusing package code.
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {"x": SX, "y": SY, "z": SZ}


def kron_op(ops_by_site, n):
    """Operator acting with ops_by_site[i] on site i (0-based) in up/down order."""
    big = reduce(np.kron, [ops_by_site.get(i, np.eye(2)) for i in range(n)])
    # big is indexed by (s_0, ..., s_{n-1}) with s=0 meaning up, site 0 most significant
    dim = 1 << n
    perm = np.empty(dim, dtype=int)
    for k in range(dim):
        bits = [(k >> i) & 1 for i in range(n)]  # package: bit 1 = up
        perm[k] = sum((1 - b) << (n - 1 - i) for i, b in enumerate(bits))
    return big[np.ix_(perm, perm)]


def oracle_dense(spec, t=0.0):
    n = spec.n_spins
    h = np.zeros((1 << n, 1 << n), dtype=complex)
    for term in spec.terms:
        if isinstance(term, IsingXX):
            for i in range(n):
                for j in range(i + 1, n):
                    h += term.matrix.values[i, j] * kron_op({i: SX, j: SX}, n)
        elif isinstance(term, UniformField):
            for i in range(n):
                h += term.coefficient * kron_op({i: PAULI[term.axis]}, n)
        elif isinstance(term, SiteFields):
            for i in range(n):
                h += term.values[i] * kron_op({i: PAULI[term.axis]}, n)
        elif isinstance(term, ModulatedField):
            c = term.static + term.amplitude * np.sin(2 * np.pi * term.frequency * t)
            for i in range(n):
                h += c * kron_op({i: PAULI[term.axis]}, n)
    return h


def random_spec(rng, n, modulated=False, ising=True):
    terms = []
    if ising:
        a = rng.normal(size=(n, n))
        terms.append(IsingXX(CouplingMatrix.from_upper(a)))
    for axis in "xyz":
        terms.append(UniformField(axis, rng.normal()))
        terms.append(SiteFields(axis, rng.normal(size=n)))
    if modulated:
        terms.append(ModulatedField("y", rng.normal() * 0.3, rng.normal() * 0.3, abs(rng.normal())))
    return HamiltonianSpec(n, tuple(terms))


def random_state(rng, n):
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return SpinState(n, v / np.linalg.norm(v))


class TestStates:
    def test_all_down_z(self):
        s = build_state(3, "ddd")
        assert s.amplitudes[0] == 1 and np.count_nonzero(s.amplitudes) == 1

    def test_down_x_convention(self):
        np.testing.assert_allclose(build_state(1, "d", axis="x").amplitudes, [1 / np.sqrt(2), -1 / np.sqrt(2)])

    def test_neel_single_amplitude(self):
        s = build_state(10, neel_spec(10))
        nz = np.flatnonzero(s.amplitudes)
        assert nz.tolist() == [sum(1 << i for i in range(1, 10, 2))]

    @pytest.mark.parametrize("axis", "xyz")
    @pytest.mark.parametrize("tok,sign", [("u", 1), ("d", -1)])
    def test_local_eigenstates(self, axis, tok, sign):
        s = build_state(1, tok, axis=axis)
        np.testing.assert_allclose(oracle_dense(HamiltonianSpec(1, (UniformField(axis, 1.0),))) @ s.amplitudes, sign * s.amplitudes, atol=1e-14)

    def test_token_forms_agree(self):
        a = build_state(3, ["+x", "-z", "+y"])
        b = np.kron(build_state(1, "u", axis="y").amplitudes, np.kron(build_state(1, "d").amplitudes, build_state(1, "u", axis="x").amplitudes))
        np.testing.assert_allclose(a.amplitudes, b)

    @pytest.mark.parametrize("bad", ["ddq", ["+w", "-z"], "dd"])
    def test_malformed(self, bad):
        with pytest.raises(ValueError):
            build_state(3, bad)

    def test_norm_enforced(self):
        with pytest.raises(ValueError):
            SpinState(1, np.array([1.0, 1.0]))

    def test_measure_examples(self):
        assert measure(build_state(1, "d"), 1, "z") == -1
        assert measure(build_state(1, "d", axis="x"), 1, "z") == pytest.approx(0, abs=1e-15)
        np.testing.assert_array_equal(magnetizations(build_state(4, "dudu"), "z"), [-1, 1, -1, 1])
        with pytest.raises(IndexError):
            measure(build_state(2, "dd"), 3, "z")
        with pytest.raises(IndexError):
            measure(build_state(2, "dd"), 0, "z")

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5))
    def test_measure_matches_oracle(self, seed, n):
        rng = np.random.default_rng(seed)
        s = random_state(rng, n)
        for axis in "xyz":
            mags = magnetizations(s, axis)
            for i in range(n):
                ref = np.vdot(s.amplitudes, kron_op({i: PAULI[axis]}, n) @ s.amplitudes)
                assert abs(ref.imag) < 1e-12
                assert measure(s, i + 1, axis) == pytest.approx(ref.real, abs=1e-12)
                assert mags[i] == pytest.approx(ref.real, abs=1e-12)

    def test_basis_state(self):
        s = basis_state(7, [7])
        assert s.amplitudes[1 << 6] == 1
        assert measure(s, 7, "z") == 1 and measure(s, 1, "z") == -1


class TestApply:
    def test_empty_spec(self):
        out = apply_hamiltonian(HamiltonianSpec(3), build_state(3, "udu"))
        assert np.all(out == 0)

    def test_field_eigenstate(self):
        out = apply_hamiltonian(HamiltonianSpec(1, (UniformField("z", 0.35),)), build_state(1, "u"))
        np.testing.assert_allclose(out, [0, 0.35])

    def test_xx_flips_both(self):
        out = apply_hamiltonian(HamiltonianSpec(2, (IsingXX(power_law_matrix(2, 0, j0=0.8)),)), build_state(2, "dd"))
        np.testing.assert_allclose(out, 0.8 * build_state(2, "uu").amplitudes)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 5), t=st.floats(0, 10))
    def test_matches_dense_oracle(self, seed, n, t):
        rng = np.random.default_rng(seed)
        spec = random_spec(rng, n, modulated=True)
        s = random_state(rng, n)
        ref = oracle_dense(spec, t)
        np.testing.assert_allclose(apply_hamiltonian(spec, s, t), ref @ s.amplitudes, atol=1e-12)
        np.testing.assert_allclose(to_dense(spec, t), ref, atol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6))
    def test_hermitian(self, seed, n):
        rng = np.random.default_rng(seed)
        spec = random_spec(rng, n)
        a, b = random_state(rng, n), random_state(rng, n)
        lhs = np.vdot(a.amplitudes, apply_hamiltonian(spec, b))
        rhs = np.conj(np.vdot(b.amplitudes, apply_hamiltonian(spec, a)))
        assert abs(lhs - rhs) < 1e-12

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            HamiltonianSpec(3, (IsingXX(power_law_matrix(4, 1.0)),))
        with pytest.raises(ValueError):
            HamiltonianSpec(3, (SiteFields("z", [1.0, 2.0]),))
        with pytest.raises(ValueError):
            HamiltonianSpec(2, (ModulatedField("y", 0, 1, 1), ModulatedField("x", 0, 1, 1)))
        with pytest.raises(ValueError):
            UniformField("w", 1.0)


class TestEvolve:
    def test_rabi_pi_rotation(self):
        b = 0.7
        spec = HamiltonianSpec(1, (UniformField("y", b / 2),))
        out = evolve(build_state(1, "d"), spec, np.pi / b)
        assert measure(out, 1, "z") == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("method", ["exact", "krylov"])
    def test_two_spin_flopping(self, method):
        j = 0.9
        spec = HamiltonianSpec(2, (IsingXX(power_law_matrix(2, 0, j0=j)),))
        s0 = build_state(2, "dd")
        for t in np.linspace(0, 5, 11):
            out = evolve(s0, spec, t, Propagator(method=method))
            assert abs(out.amplitudes[3]) ** 2 == pytest.approx(np.sin(j * t) ** 2, abs=1e-8)

    def test_zero_duration_identity(self, rng):
        s = random_state(rng, 4)
        out = evolve(s, random_spec(rng, 4, modulated=True), 0.0)
        np.testing.assert_array_equal(out.amplitudes, s.amplitudes)

    @settings(max_examples=15, deadline=None)
    @given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 6), t=st.floats(0.01, 3.0))
    def test_dense_vs_krylov(self, seed, n, t):
        rng = np.random.default_rng(seed)
        spec = random_spec(rng, n)
        s = random_state(rng, n)
        ref = expm(-1j * t * oracle_dense(spec)) @ s.amplitudes
        kry = evolve(s, spec, t, Propagator(method="krylov"))
        exa = evolve(s, spec, t, Propagator(method="exact"))
        assert np.linalg.norm(kry.amplitudes - ref) < 1e-10
        assert np.linalg.norm(exa.amplitudes - ref) < 1e-10

    @pytest.mark.parametrize("ising,axes", [(False, "xyz"), (True, "x"), (False, "z")])
    def test_fast_paths(self, rng, ising, axes):
        n = 5
        terms = [IsingXX(CouplingMatrix.from_upper(rng.normal(size=(n, n))))] if ising else []
        for axis in axes:
            terms.append(SiteFields(axis, rng.normal(size=n)))
        spec = HamiltonianSpec(n, tuple(terms))
        s = random_state(rng, n)
        ref = expm(-1j * 1.3 * oracle_dense(spec)) @ s.amplitudes
        np.testing.assert_allclose(evolve(s, spec, 1.3).amplitudes, ref, atol=1e-11)

    def test_commuting_pieces(self, rng):
        n = 6
        ising = HamiltonianSpec(n, (IsingXX(power_law_matrix(n, 1.5)),))
        fields = HamiltonianSpec(n, (SiteFields("x", rng.uniform(-1, 1, n)),))
        s = build_state(n, "d", axis="z")
        seq = evolve(evolve(s, fields, 0.8), ising, 0.8)
        both = evolve(s, fields + ising, 0.8, Propagator(method="exact"))
        dense = expm(-0.8j * oracle_dense(fields + ising)) @ s.amplitudes
        assert np.linalg.norm(seq.amplitudes - both.amplitudes) < 1e-10
        assert np.linalg.norm(both.amplitudes - dense) < 1e-10

    def test_energy_and_norm_conservation(self, rng):
        n = 8
        spec = HamiltonianSpec(n, (IsingXX(power_law_matrix(n, 1.0)), UniformField("z", 2.0), SiteFields("z", rng.uniform(-2, 2, n))))
        s = build_state(n, neel_spec(n))
        e0 = expectation(spec, s)
        states = evolve_times(s, spec, np.linspace(0, 25, 51))
        for psi in states:
            assert abs(np.linalg.norm(psi) - 1) < 1e-10
            assert np.vdot(psi, apply_hamiltonian(spec, psi)).real == pytest.approx(e0, abs=1e-9)
        kry = evolve(s, spec, 25.0, Propagator(method="krylov"))
        assert abs(np.linalg.norm(kry.amplitudes) - 1) < 1e-10
        assert expectation(spec, kry) == pytest.approx(e0, abs=1e-9)

    def test_evolve_times_matches_evolve(self, rng):
        n = 5
        spec = random_spec(rng, n)
        s = random_state(rng, n)
        times = [0.0, 0.7, 0.2, 2.5]
        for prop in (Propagator(method="exact"), Propagator(method="krylov")):
            out = evolve_times(s, spec, times, prop)
            for k, t in enumerate(times):
                np.testing.assert_allclose(out[k], evolve(s, spec, t, Propagator(method="exact")).amplitudes, atol=1e-10)

    def test_large_chain_krylov_default(self, rng):
        n = 11
        spec = HamiltonianSpec(n, (IsingXX(power_law_matrix(n, 1.0)), UniformField("z", 1.0)))
        s = build_state(n, neel_spec(n))
        auto = evolve(s, spec, 1.5)
        exact = evolve(s, spec, 1.5, Propagator(method="exact"))
        assert np.linalg.norm(auto.amplitudes - exact.amplitudes) < 1e-9

    def test_krylov_invariant_subspace(self):
        # |dd> spans a 2-dim invariant subspace: happy breakdown must still be exact
        spec = HamiltonianSpec(2, (IsingXX(power_law_matrix(2, 0, j0=1.0)),))
        out = krylov_expm(matvec(spec), build_state(2, "dd").amplitudes, 0.4, m=30)
        np.testing.assert_allclose(abs(out[3]) ** 2, np.sin(0.4) ** 2, atol=1e-14)


class TestModulated:
    def spec(self, n=3):
        return HamiltonianSpec(n, (IsingXX(power_law_matrix(n, 1.0)), ModulatedField("y", 0.1, 0.3, 0.4)))

    def test_integrator_second_order(self):
        spec = self.spec()
        s = build_state(3, "d", axis="x")
        duration = 3.0
        ref = evolve(s, spec, duration, Propagator(steps_per_unit=3200)).amplitudes
        errs = []
        hs = []
        for f in (0.5, 1, 2, 4):
            prop = Propagator(steps_per_unit=f)
            from iontfim.hilbert import step_count

            hs.append(duration / step_count(spec, duration, prop))
            errs.append(np.linalg.norm(evolve(s, spec, duration, prop).amplitudes - ref))
        order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert order >= 1.9

    def test_matches_fine_dense_reference(self):
        spec = self.spec()
        s = build_state(3, "d", axis="x")
        # independent reference: many tiny steps with scipy expm on the oracle matrix
        h = 3.0 / 6000
        psi = s.amplitudes
        for k in range(6000):
            psi = expm(-1j * h * oracle_dense(spec, (k + 0.5) * h)) @ psi
        out = evolve(s, spec, 3.0)
        assert np.linalg.norm(out.amplitudes - psi) < 1e-5

    def test_step_bound_violation(self):
        with pytest.raises(StepBoundError):
            evolve(build_state(3, "ddd"), self.spec(), 1.0, Propagator(max_step=1.0))

    def test_evolve_many_matches_single(self):
        s = build_state(3, "d", axis="x")
        specs = [HamiltonianSpec(3, (IsingXX(power_law_matrix(3, 1.0)), ModulatedField("y", 0.0, 0.2, f))) for f in (0.2, 0.5)]
        specs.append(HamiltonianSpec(3, (IsingXX(power_law_matrix(3, 1.0)),)))
        outs = evolve_many(s, specs, 2.0)
        for spec, out in zip(specs, outs):
            np.testing.assert_allclose(out.amplitudes, evolve(s, spec, 2.0).amplitudes, atol=1e-5)

    def test_krylov_path(self):
        s = build_state(3, "d", axis="x")
        a = evolve(s, self.spec(), 1.0, Propagator(method="krylov"))
        b = evolve(s, self.spec(), 1.0, Propagator(method="exact"))
        assert np.linalg.norm(a.amplitudes - b.amplitudes) < 1e-9


class TestKernels:
    def test_taylor_expm_matches_expm(self):
        rng = np.random.default_rng(11)
        spec = random_spec(rng, 4)
        h = oracle_dense(spec)
        psi = random_state(rng, 4).amplitudes
        batch = np.stack([psi, psi[::-1]], axis=1)
        out = taylor_expm(lambda v: h @ v, batch, 0.05)
        np.testing.assert_allclose(out, expm(-0.05j * h) @ batch, atol=1e-13)

    def test_taylor_expm_refuses_long_steps(self):
        h = 50 * np.eye(2)
        with pytest.raises(ConvergenceError):
            taylor_expm(lambda v: h @ v, np.array([1, 0], dtype=complex), 10.0, max_terms=10)

    def test_hadamard_all_batched(self):
        n = 3
        hd = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
        full = reduce(np.kron, [hd] * n)
        rng = np.random.default_rng(5)
        cols = rng.normal(size=(1 << n, 4)) + 1j * rng.normal(size=(1 << n, 4))
        np.testing.assert_allclose(hadamard_all(cols, n), full @ cols, atol=1e-14)
        np.testing.assert_allclose(hadamard_all(cols[:, 0], n), full @ cols[:, 0], atol=1e-14)
