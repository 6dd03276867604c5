import numpy as np
import pytest

from causal_bald.data import IHDP_COLUMNS


def write_ihdp(path, n_rows=747, n_treated=139, seed=0):
    """Write a format-conformant IHDP-style file with simulated values."""
    rng = np.random.default_rng(seed)
    t = np.zeros(n_rows, dtype=int)
    t[rng.choice(n_rows, n_treated, replace=False)] = 1
    x = rng.standard_normal((n_rows, 25))
    mu0 = x[:, 0] + 0.5 * x[:, 1]
    mu1 = mu0 + 4.0 + x[:, 2]
    yf = np.where(t == 1, mu1, mu0) + rng.standard_normal(n_rows)
    ycf = np.where(t == 1, mu0, mu1) + rng.standard_normal(n_rows)
    table = np.column_stack([t, yf, ycf, mu0, mu1, x])
    with open(path, "w") as fh:
        fh.write(",".join(IHDP_COLUMNS) + "\n")
        for row in table:
            fh.write(",".join([str(int(row[0]))] + [f"{v:.6f}" for v in row[1:]]) + "\n")
    return path


@pytest.fixture
def ihdp_file(tmp_path):
    return write_ihdp(tmp_path / "ihdp.csv")


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_report(request):
    """Record one ``PASS``/``FAIL`` line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def report(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} ({detail})"
        lines.append(line)
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
