"""Quick check of the Python bindings.

Build and install first:

    pip install maturin
    maturin develop --release -m crates/py/Cargo.toml
    python python/smoke_test.py
"""

import math

import abrikosov

TRIANGULAR = (0.5, math.sqrt(3) / 2)


def main():
    assert abrikosov.normalize_tau(0.0, 0.5) == (0.0, 2.0)

    b_square = abrikosov.beta(0.0, 1.0)
    b_tri = abrikosov.beta(*TRIANGULAR)
    assert abs(b_square - 1.1803406) < 1e-6, b_square
    assert abs(b_tri - 1.1595952) < 1e-6, b_tri
    # modular invariance
    assert abs(abrikosov.beta(1.0, 1.0) - abrikosov.beta(0.5, 0.5)) < 1e-12

    kc = abrikosov.kappa_c(*TRIANGULAR)
    assert abs(kc - math.sqrt(0.5 * (1 - 1 / b_tri))) < 1e-12

    kinds = sorted(p["kind"] for p in abrikosov.critical_points())
    assert "minimum" in kinds and "saddle" in kinds, kinds

    points = abrikosov.branch(2.0, [0.02, 0.04])
    assert [p["s"] for p in points] == [0.02, 0.04]
    for p in points:
        assert p["lambda"] > 1.0
        assert abs(p["flux"] - 2 * math.pi) < 1e-12
        assert p["residual_psi"] < 1e-7

    report = abrikosov.expansion(2.0, [0.02, 0.04, 0.06, 0.08, 0.1])
    assert report["lambda1_relative_error"] < 1e-3, report

    state = abrikosov.canonical_state(2.0, 0.1, grid=32, levels=8)
    assert state["path_residual"] < 1e-8
    assert abs(state["psi"][0].imag) < 1e-12 and state["psi"][0].real >= 0
    assert abs(sum(state["alpha1"]) / len(state["alpha1"])) < 1e-10

    try:
        abrikosov.branch(-1.0, [0.1])
    except ValueError:
        pass
    else:
        raise AssertionError("negative kappa2 accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
