"""Smoke test for the romcut_py extension on a coarse Poisson run."""

import sys
import tempfile

import romcut_py


def main() -> int:
    assert romcut_py.halton(1, [0.0], [1.0], 0) == [[0.5]]
    assert romcut_py.energy_rank([10.0, 1.0, 0.1], 0.05) == 2

    cfg = romcut_py.Config("poisson")
    for key, value in [("cells", "8,8"), ("n_offline", "6"), ("n_clusters", "2"), ("n_clusters_hyper", "2"), ("tolerances", "1e-2"), ("n_online", "2")]:
        cfg.set(key, value)
    try:
        cfg.set("tolerances", "2")
    except romcut_py.ConfigError:
        pass
    else:
        raise AssertionError("invalid tolerance accepted")

    with tempfile.TemporaryDirectory() as out:
        cfg.output = out
        fields = romcut_py.run_fom(cfg, [0.1, 0.3])
        assert len(fields) == 1 and len(fields[0]) > 0
        _, _, holding, total = romcut_py.run_offline(cfg)
        assert holding == total > 0
        results, report = romcut_py.run_online(cfg)
        for eps, records in results:
            for mu, errors in records:
                assert all(e < 10 * eps for e in errors), (eps, mu, errors)
        print(report)
        try:
            romcut_py.run_fom(cfg, [0.35, 0.8])
        except romcut_py.NumericalError as e:
            print(f"expected failure: {e}")
        else:
            raise AssertionError("folded map accepted")
    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
