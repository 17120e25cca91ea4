import math

import numpy as np
import pytest

from fastjl import rip
from fastjl.errors import ParameterRangeError, ResourceError
from fastjl.randomness import BitSource


def two_by_two_delta(m):
    """Closed-form oracle for delta_2: solve every 2x2 Gram eigenproblem
    through the trace/determinant quadratic."""
    n = m.shape[1]
    worst = -1.0
    for i in range(n):
        for j in range(i + 1, n):
            cols = m[:, [i, j]]
            g = cols.T @ cols
            tr, det = g[0, 0] + g[1, 1], g[0, 0] * g[1, 1] - g[0, 1] * g[1, 0]
            disc = math.sqrt(max(tr * tr / 4.0 - det, 0.0))
            lam_lo, lam_hi = tr / 2.0 - disc, tr / 2.0 + disc
            worst = max(worst, lam_hi - 1.0, 1.0 - lam_lo)
    return worst


class TestRipConstant:
    def test_identity_is_exact_isometry(self):
        for k in (1, 2, 3):
            d, support = rip.rip_constant(np.eye(6), k)
            assert d < 1e-12
            assert len(support) == k

    def test_k1_unit_columns(self):
        m = BitSource(1).draw_gaussian(12).reshape(3, 4)
        m /= np.linalg.norm(m, axis=0)
        d, _ = rip.rip_constant(m, 1)
        assert d < 1e-10

    def test_k1_column_norms(self):
        m = np.diag([1.0, 2.0, 0.5])
        d, support = rip.rip_constant(m, 1)
        assert d == pytest.approx(3.0)  # |2^2 - 1|
        assert support == (1,)

    def test_matches_closed_form_2x2_oracle(self):
        m = BitSource(2).draw_gaussian(32).reshape(4, 8) / 2.0
        d, _ = rip.rip_constant(m, 2)
        assert d == pytest.approx(two_by_two_delta(m), abs=1e-10)

    def test_monotone_in_k(self):
        m = BitSource(3).draw_gaussian(40).reshape(5, 8) / math.sqrt(5)
        deltas = [rip.rip_constant(m, k)[0] for k in (1, 2, 3)]
        assert deltas[0] <= deltas[1] <= deltas[2]

    def test_invariant_under_column_permutation_and_signs(self):
        m = BitSource(4).draw_gaussian(24).reshape(4, 6) / 2.0
        base, _ = rip.rip_constant(m, 2)
        perm = BitSource(5).sample_permutation(6)
        signs = BitSource(6).draw_rademacher(6).astype(float)
        shuffled = m[:, perm] * signs
        d, _ = rip.rip_constant(shuffled, 2)
        assert d == pytest.approx(base, abs=1e-10)

    def test_coherence_lower_bound(self):
        m = BitSource(7).draw_gaussian(24).reshape(4, 6)
        m /= np.linalg.norm(m, axis=0)
        d1, _ = rip.rip_constant(m, 1)
        d2, _ = rip.rip_constant(m, 2)
        gram = np.abs(m.T @ m)
        np.fill_diagonal(gram, 0.0)
        assert d1 < 1e-10
        assert d2 >= gram.max() - 1e-12

    def test_enumeration_guard(self):
        with pytest.raises(ResourceError) as exc:
            rip.rip_constant(np.zeros((4, 200)), 5)
        assert "supports" in str(exc.value)

    def test_k_out_of_range(self):
        with pytest.raises(ParameterRangeError):
            rip.rip_constant(np.eye(3), 4)


class TestRipSurvey:
    def test_square_case_beats_random_sign_matrix(self):
        # At r = n the block construction collapses to a signed permuted
        # Hadamard matrix, hence orthogonal: delta_k = 0, always below a
        # random +-1/sqrt(n) matrix of the same size.
        new = rip.rip_survey("new-rademacher", 16, 16, 2, 5, seed=3)
        signs = rip.rip_survey("achlioptas-dense", 16, 16, 2, 5, seed=3)
        assert new.delta_quantiles["max"] < 1e-10
        assert new.delta_quantiles["50"] <= signs.delta_quantiles["50"]

    def test_deterministic_report(self):
        a = rip.rip_survey("dense-gaussian", 16, 8, 2, 5, seed=1)
        b = rip.rip_survey("dense-gaussian", 16, 8, 2, 5, seed=1)
        assert a == b
        assert a.seeds_evaluated == 5
        assert len(a.worst_support) == 2

    def test_quantiles_ordered(self):
        rep = rip.rip_survey("new-rademacher", 16, 4, 2, 5, seed=2)
        q = rep.delta_quantiles
        assert q["10"] <= q["50"] <= q["90"] <= q["max"]
