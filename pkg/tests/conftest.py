import numpy as np
import pytest

from poisson_lab import gallery

FD_STEP = 1e-5


def central_difference(f, p, h=FD_STEP):
    """Partials of a scalar or array valued f by central differences, derivative index last."""
    p = np.asarray(p, dtype=float)
    cols = []
    for k in range(p.size):
        e = np.zeros_like(p)
        e[k] = h
        cols.append((np.asarray(f(p + e)) - np.asarray(f(p - e))) / (2 * h))
    return np.stack(cols, axis=-1)


def rel_err(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b), initial=0.0) / max(1.0, float(np.max(np.abs(b), initial=0.0))))


STRUCTURE_LABELS = [label for label, _ in gallery.all_structures()]


@pytest.fixture(scope="session")
def gallery_structures():
    return dict(gallery.all_structures())


@pytest.fixture
def so3():
    return gallery.get_structure("so3_euclid")


@pytest.fixture
def euclid():
    return gallery.get_structure("euclid_rn_rs")


def make_text(name, coords, pi=(), metric=None, extra=""):
    """Structure file text; pi and metric are (i, j, expr) triples, metric defaults to Euclidean."""
    n = len(coords)
    if metric is None:
        metric = [(c, c, "1") for c in coords]
    lines = [f"name = {name}", f"dim = {n}", "coords = " + ", ".join(coords)]
    lines += [f"pi {i} {j} = {e}" for i, j, e in pi]
    lines += [f"metric {i} {j} = {e}" for i, j, e in metric]
    lines.append("base = " + ", ".join(["0.5"] * n))
    lines.append("box = " + " x ".join(["[-2, 2]"] * n))
    if extra:
        lines.append(extra)
    return "\n".join(lines) + "\n"


# acceptance criteria report one line each; collected here for the terminal summary
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[k])
