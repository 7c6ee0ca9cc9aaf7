import json

import numpy as np
import pytest

from abl_lab import ablengine as ae
from abl_lab import ensemble as en
from abl_lab import qcore
from abl_lab.randomstream import stream


def test_run_trial_deterministic(spin_protocol):
    a = en.run_trial(spin_protocol, stream(3, 8))
    b = en.run_trial(spin_protocol, stream(3, 8))
    assert a == b
    assert a.outcomes[0] == "z+"  # |z+> always gives z+
    assert len(a.outcomes) == spin_protocol.n + 2


def test_loop_batch_parallel_identical(spin_protocol):
    loop = en.sample_outcomes(spin_protocol, 3000, 4, method="loop")
    batch = en.sample_outcomes(spin_protocol, 3000, 4)
    par = en.sample_outcomes(spin_protocol, 3000, 4, workers=4, chunk_size=700)
    np.testing.assert_array_equal(loop, batch)
    np.testing.assert_array_equal(batch, par)


def test_mixed_initial_state_paths_agree(pauli):
    rho = qcore.mixed_state(np.array([[0.7, 0.2], [0.2, 0.3]]))
    p = ae.Protocol(pauli["z"], "z+", (pauli["x"],), pauli["y"], "y+", rho)
    np.testing.assert_array_equal(
        en.sample_outcomes(p, 500, 1, method="loop"), en.sample_outcomes(p, 500, 1, chunk_size=128)
    )


def test_chunk_size_does_not_matter(spin_protocol):
    a = en.run_ensemble(spin_protocol, 5000, 2, chunk_size=5000)
    b = en.run_ensemble(spin_protocol, 5000, 2, chunk_size=333, workers=3)
    assert en.report_json(a, spin_protocol) == en.report_json(b, spin_protocol)


def test_counts_consistent(spin_protocol):
    s = en.run_ensemble(spin_protocol, 10_000, 0)
    assert s.n_pre == 10_000
    assert sum(s.seq_counts.values()) == s.n_selected
    assert sum(s.marginal_counts.values()) == s.n_pre
    assert abs(sum(s.ratios().values()) - 1) < 1e-12


def test_undefined_when_nothing_selected(pauli):
    p = ae.Protocol(pauli["z"], "z+", (pauli["z"],), pauli["z"], "z-")
    s = en.run_ensemble(p, 200, 0)
    assert s.n_selected == 0
    assert all(r is en.UNDEFINED for r in s.ratios().values())
    d = en.report_dict(s, p)
    assert all(r["ratio"] == "undefined" and r["exact"] == "n/a" for r in d["rows"])
    assert "undefined" in en.report_text(s, p)


def test_undefined_sentinel():
    assert not en.UNDEFINED
    assert repr(en.UNDEFINED) == "undefined"
    assert en.UNDEFINED is type(en.UNDEFINED)()


def test_protocol_mismatch(spin_protocol, aad_xx):
    s = en.run_ensemble(spin_protocol, 100, 0)
    with pytest.raises(ValueError):
        en.compare_mc_exact(s, aad_xx)


def test_no_postselect_aad(aad_xx, aad_zz):
    for p, lab in ((aad_xx, "x+"), (aad_zz, "z+")):
        s = en.run_ensemble(p, 10_000, 7, postselect=False)
        assert abs(s.ratio((lab,)) - 0.5) <= 0.02
        post = en.run_ensemble(p, 10_000, 7)
        assert post.ratio((lab,)) == 1.0


def test_report_json_shape(spin_protocol):
    s = en.run_ensemble(spin_protocol, 1000, 1)
    d = json.loads(en.report_json(s, spin_protocol))
    assert d["flags"] == {"post_selected": True, "ensemble_level": True}
    assert len(d["rows"]) == 4 and len(d["marginal_rows"]) == 4
    assert {"labels", "count", "ratio", "exact", "deviation", "ci_pass"} <= set(d["rows"][0])


def test_rejects_zero_trials(spin_protocol):
    with pytest.raises(ValueError):
        en.run_ensemble(spin_protocol, 0, 0)


@pytest.mark.parametrize("n", [1_000, 10_000, 100_000])
def test_convergence(spin_protocol, n):
    exact = ae.abl_distribution(spin_protocol)
    passes = 0
    for seed in range(20):
        rows = en.compare_mc_exact(en.run_ensemble(spin_protocol, n, seed), spin_protocol)
        passes += all(r.ci_pass for r in rows)
        assert {r.labels: r.exact for r in rows} == exact
    # four rows per seed at 3 sigma: expect about 1% of seeds to miss
    assert passes >= 18


def test_random_protocol_agreement():
    from abl_lab.verification import random_protocol

    rng = np.random.default_rng(12)
    for _ in range(5):
        p = random_protocol(3, 1, rng)
        s = en.run_ensemble(p, 20_000, 3)
        rows = en.compare_mc_exact(s, p)
        assert sum(not r.ci_pass for r in rows) <= 1


def test_repeated_measurement_trial():
    z = qcore.observable_from_operator(np.diag([1.0, -1.0]), name="Z")
    p = ae.Protocol(z, "+1", (), z, "+1")
    for i in range(50):
        assert en.run_trial(p, stream(0, i)).outcomes == ("+1", "+1")


def test_middle_repeats_first(pauli):
    p = ae.Protocol(pauli["z"], "z+", (pauli["z"],), pauli["x"], "x+", qcore.pure_state([0.6, 0.8]))
    out = en.sample_outcomes(p, 2000, 9)
    np.testing.assert_array_equal(out[:, 0], out[:, 1])


def test_n_zero_ratio_is_one(pauli):
    p = ae.Protocol(pauli["z"], "z+", (), pauli["x"], "x+")
    rows = en.compare_mc_exact(en.run_ensemble(p, 1000, 0), p)
    assert len(rows) == 1 and rows[0].ratio == 1.0 and rows[0].exact == 1.0 and rows[0].ci_pass


def test_median_error_shrinks(spin_protocol):
    exact = ae.abl_distribution(spin_protocol)
    medians = []
    for n in (1_000, 10_000, 100_000):
        errs = [
            max(abs(s.ratio(q) - exact[q]) for q in exact)
            for s in (en.run_ensemble(spin_protocol, n, seed) for seed in range(20))
        ]
        medians.append(float(np.median(errs)))
    assert medians[0] > medians[1] > medians[2]
    # roughly 1/sqrt(10) per decade
    assert medians[2] < medians[0] / 4
