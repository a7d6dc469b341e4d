"""Smoke test for the killed_chains_py extension.

Build and install first:
    pip install --no-build-isolation ./crates/killed-chains-py
"""

import math

import killed_chains_py as kc


def main():
    dom = kc.Domain.family("diamond_ball", 10)
    k = kc.Kernel.dirichlet(dom)
    pair = k.perron_pair()
    exact = dom.closed_form_beta0()
    assert abs(pair.beta0 - exact) < 1e-12, (pair.beta0, exact)
    assert all(v > 0 for v in pair.phi0)
    assert abs(sum(pair.pi_phi0) - 1.0) < 1e-12

    doob = k.doob(pair)
    assert max(abs(s - 1.0) for s in doob.row_sums()) < 1e-12
    left = doob.apply_left(pair.pi_phi0)
    assert max(abs(a - b) for a, b in zip(left, pair.pi_phi0)) < 1e-12

    x = dom.index_of([5, 0])
    t = 25
    exact_survival = k.survival(x, t)[t]
    sim = k.simulate(x, t, trials=200_000, seed=11)
    assert abs(sim["survival"] - exact_survival) < 3 * sim["std_error"], (sim, exact_survival)
    assert sim == k.simulate(x, t, trials=200_000, seed=11)

    five = kc.Kernel.dirichlet(kc.Domain.family("five_path"))
    assert five.period == 2
    assert abs(five.perron_pair().beta0 - math.sqrt(0.5)) < 1e-12
    assert abs(five.lazy(0.5).survival(1, 2)[2] - 0.875) < 1e-15

    cone = kc.Domain.family("cone45", 12)
    assert cone.john_alpha(cone.index_of([12, 6])) >= 1 / 3 - 1e-12
    assert 0 < cone.path_bound() < 1

    try:
        kc.Domain.family("no_such_family", 4)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown family accepted")

    print(f"beta0(diamond 10) = {pair.beta0:.15f}; P(tau > {t}) = {exact_survival:.5f}, "
          f"simulated {sim['survival']:.5f} +/- {sim['std_error']:.5f}")
    print("smoke test passed")


if __name__ == "__main__":
    main()
