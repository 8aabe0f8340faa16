"""Built-in structures and submersions with expected classifications.

Every entry is stored as structure-file (or submersion-file) text, so the
gallery exercises the same loaders as user input. Expected annotations map
check ids to ``"pass"``, ``"fail"`` or ``"measure"``; measure-only checks
are reported but never decide an exit code.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

from .errors import UnknownEntry
from .structure import Structure, load_structure
from .submersion import SubmersionSpec, parse_submersion

PASS, FAIL, MEASURE = "pass", "fail", "measure"


@dataclass(frozen=True)
class GalleryEntry:
    id: str
    kind: str  # "structure" or "submersion"
    text: str
    expected: dict
    reference: str
    notes: tuple = ()
    allow_non_poisson: bool = False
    tolerances: dict = field(default_factory=dict)

    def load(self):
        if self.kind == "structure":
            return load_structure(self.text, allow_non_poisson=self.allow_non_poisson)
        return parse_submersion(self.text, allow_non_poisson=self.allow_non_poisson)

    def expected_table(self) -> list:
        return sorted(self.expected.items())


# structure texts ------------------------------------------------------------------------

def euclid_rn_rs_text(n: int = 3, r: int = 1, s: int = 2) -> str:
    if not (n >= 2 and 1 <= r < s <= n):
        raise ValueError("need n >= 2 and 1 <= r < s <= n")
    coords = ", ".join(f"x{i}" for i in range(1, n + 1))
    box = " x ".join(["[-2, 2]"] * n)
    return f"""\
name = euclid_rn_rs:{n},{r},{s}
description = pi = d_{r} ^ d_{s} on R^{n} with the Euclidean cometric
dim = {n}
coords = {coords}
pi x{r} x{s} = 1
J x{r} x{s} = 1
J x{s} x{r} = -1
base = {", ".join(["0"] * n)}
box = {box}
""" + "".join(f"casimir = x{k}\n" for k in range(1, n + 1) if k not in (r, s))


SO3_PI = """\
pi x y = z
pi y z = x
pi z x = y
"""

SO3_TEXT = f"""\
name = so3_euclid
description = Lie-Poisson structure of so3* with the Euclidean cometric
dim = 3
coords = x, y, z
{SO3_PI}casimir = x^2 + y^2 + z^2
base = 0, 0, 1
box = [-2, 2] x [-2, 2] x [-2, 2]
exclude = sqrt(x^2 + y^2 + z^2) - 0.1 <= 0
"""

SO3_RESCALED_TEXT = """\
name = so3_rescaled
description = r times the so3* bivector, Euclidean cometric
dim = 3
coords = x, y, z
pi x y = sqrt(x^2 + y^2 + z^2) * z
pi y z = sqrt(x^2 + y^2 + z^2) * x
pi z x = sqrt(x^2 + y^2 + z^2) * y
casimir = x^2 + y^2 + z^2
base = 0, 0, 1
box = [-2, 2] x [-2, 2] x [-2, 2]
exclude = sqrt(x^2 + y^2 + z^2) - 0.1 <= 0
"""

SL2_RESCALED_TEXT = """\
name = sl2_rescaled
description = rho times the sl2* bivector, Lorentzian cometric
dim = 3
coords = x, y, z
signature = 2, 1
pi x y = -sqrt(abs(x^2 + y^2 - z^2)) * z
pi z x = sqrt(abs(x^2 + y^2 - z^2)) * y
pi y z = sqrt(abs(x^2 + y^2 - z^2)) * x
metric x x = 1
metric y y = 1
metric z z = -1
casimir = x^2 + y^2 - z^2
base = 1, 0, 0
box = [-2, 2] x [-2, 2] x [-2, 2]
exclude = abs(x^2 + y^2 - z^2) - 0.1 <= 0
"""


def _conformal_text(name, desc, pi_lines, factor, diag, casimir, base, box, exclude, signature=None, J=None):
    lines = [f"name = {name}", f"description = {desc}", "dim = 3", "coords = x, y, z"]
    if signature:
        lines.append(f"signature = {signature}")
    lines += pi_lines
    for c, sgn in zip("xyz", diag):
        lines.append(f"metric {c} {c} = {'-' if sgn < 0 else ''}{factor}")
    if J:
        lines += J
    lines += [f"casimir = {casimir}", f"base = {base}", f"box = {box}", f"exclude = {exclude}"]
    return "\n".join(lines) + "\n"


R = "sqrt(x^2 + y^2 + z^2)"
RHO = "sqrt(abs(x^2 + y^2 - z^2))"


def _so3_reg(variant: str) -> str:
    rescale = variant.endswith("_rpi")
    reading = variant.removesuffix("_rpi")
    # the metric r^-1 <,> has cometric r <,>; the other reading puts r^-1 on the cometric
    factor = R if reading == "metric" else f"1/{R}"
    pref = f"{R} * " if rescale else ""
    pi = [f"pi x y = {pref}z", f"pi y z = {pref}x", f"pi z x = {pref}y"]
    return _conformal_text(
        f"so3_reg_conformal@{variant}",
        f"so3* bivector{' times r' if rescale else ''} with cometric {factor} times Euclidean",
        pi, factor, (1, 1, 1), "x^2 + y^2 + z^2", "0, 0, 1",
        "[-2, 2] x [-2, 2] x [-2, 2]", f"{R} - 0.1 <= 0",
    )


def _sl2_reg(variant: str) -> str:
    rescale = variant.endswith("_rpi")
    reading = variant.removesuffix("_rpi")
    factor = RHO if reading == "metric" else f"1/{RHO}"
    pref = f"{RHO} * " if rescale else ""
    pi = [f"pi x y = -{pref}z", f"pi z x = {pref}y", f"pi y z = {pref}x"]
    return _conformal_text(
        f"sl2_reg_conformal@{variant}",
        f"sl2* bivector{' times rho' if rescale else ''} with cometric {factor} times dx^2 + dy^2 - dz^2",
        pi, factor, (1, 1, -1), "x^2 + y^2 - z^2", "1, 0, 0",
        "[-2, 2] x [-2, 2] x [-2, 2]", "abs(x^2 + y^2 - z^2) - 0.1 <= 0", signature="2, 1",
    )


# verbatim J_reg of the regular so3/sl2 examples: (coefficient sign, vector index, covector index, coefficient coord)
J_REG_TERMS = {
    "so3_reg_conformal": ((1, 0, 1, 2), (-1, 2, 0, 1), (1, 1, 2, 0)),
    "sl2_reg_conformal": ((-1, 0, 1, 2), (1, 2, 0, 1), (-1, 1, 2, 0)),
}


def verbatim_J_reg(family: str, p, reading: str = "tensor"):
    """The displayed J_reg as a matrix J[i, j] = J_i^j acting on covectors.

    ``c d_a ^ db`` is read as the tensor c d_a (x) db, i.e. alpha -> c alpha_a db
    (``reading="tensor"``), or antisymmetrized as c (d_a (x) db - d_b (x) da)
    (``reading="skew"``).
    """
    import numpy as np

    J = np.zeros((3, 3))
    for sign, a, b, k in J_REG_TERMS[family]:
        c = sign * float(p[k])
        J[b, a] += c
        if reading == "skew":
            J[a, b] -= c
    return J


def j_reg_deviation(entry_id: str, p) -> dict:
    """max |canonical J - verbatim J_reg| at p under both readings of the display."""
    import numpy as np

    from .connections import canonical_J

    family = entry_id.split("@")[0]
    J, _ = canonical_J(get_structure(entry_id).at(p))
    return {r: float(np.max(np.abs(J - verbatim_J_reg(family, p, r)))) for r in ("tensor", "skew")}


SL2_TEXT = """\
name = sl2_lorentz
description = Lie-Poisson structure of sl2* with the Lorentzian cometric of dx^2 + dy^2 - dz^2
dim = 3
coords = x, y, z
signature = 2, 1
pi x y = -z
pi z x = y
pi y z = x
metric x x = 1
metric y y = 1
metric z z = -1
casimir = x^2 + y^2 - z^2
base = 1, 0, 0
box = [-100, 100] x [-100, 100] x [-100, 100]
exclude = abs(x^2 + y^2 - z^2) - 0.1 <= 0
"""


def _symplectic_r2(variant: str = "") -> str:
    # metric e^x (dx^2 + dy^2) has volume rho dx^dy with rho = e^x
    pi = {"": "1", "rescaled": "exp(-x)", "literal_exponent": "1"}[variant]
    cometric = {"": "exp(-x)", "rescaled": "exp(-x)", "literal_exponent": "exp(-3*x)"}[variant]
    name = "symplectic_r2_conformal" + (f"@{variant}" if variant else "")
    return f"""\
name = {name}
description = pi = {pi} d_x ^ d_y, cometric {cometric} (dx^2 + dy^2)
dim = 2
coords = x, y
pi x y = {pi}
metric x x = {cometric}
metric y y = {cometric}
base = 0, 0
box = [-2, 2] x [-2, 2]
"""


ZERO_PI_TEXT = """\
name = zero_pi_curved
description = pi = 0 on a curved metric
dim = 3
coords = x, y, z
metric x x = 1 + y^2
metric x y = 0.25 * sin(z)
metric y y = exp(0.5 * z)
metric z z = 1 + 0.5 * x^2
casimir = x
casimir = y
casimir = z
base = 0, 0, 0
box = [-1, 1] x [-1, 1] x [-1, 1]
"""

NONPOISSON_TEXT = """\
name = nonpoisson_demo
description = pi = d_x ^ d_y + x d_x ^ d_z fails the Jacobi identity
dim = 3
coords = x, y, z
pi x y = 1
pi x z = x
base = 1, 0, 0
box = [-2, 2] x [-2, 2] x [-2, 2]
"""

FLAT_R2_TEXT = """\
name = flat_r2
description = the standard symplectic plane
dim = 2
coords = x, y
pi x y = 1
J x y = 1
J y x = -1
base = 0, 0
box = [-2, 2] x [-2, 2]
"""


# submersion texts ----------------------------------------------------------------------

R4_TO_R3_TEXT = """\
name = r4_to_r3
description = projection of the Kaehler R^4 onto R^3 with pi_M = d_1 ^ d_2
begin P
name = kaehler_r4
dim = 4
coords = x1, x2, x3, x4
pi x1 x2 = 1
pi x3 x4 = 1
J x1 x2 = 1
J x2 x1 = -1
J x3 x4 = 1
J x4 x3 = -1
base = 0, 0, 0, 0
box = [-2, 2] x [-2, 2] x [-2, 2] x [-2, 2]
end P
begin M
name = r3_12
dim = 3
coords = y1, y2, y3
pi y1 y2 = 1
J y1 y2 = 1
J y2 y1 = -1
base = 0, 0, 0
box = [-2, 2] x [-2, 2] x [-2, 2]
end M
map y1 = x1
map y2 = x2
map y3 = x3
"""

TRANSLATION_TEXT = """\
name = translation_quotient
description = quotient of R^4_(12) by translations along x3
P = euclid_rn_rs:4,1,2
M = euclid_rn_rs:3,1,2
map x1 = x1
map x2 = x2
map x3 = x4
"""

PRODUCT_TEXT = """\
name = product_proj
description = projection of (conformal symplectic plane) x (flat plane) onto the first factor
begin P
name = conformal_x_flat
dim = 4
coords = x, y, u, v
pi x y = exp(-x)
pi u v = 1
metric x x = exp(-x)
metric y y = exp(-x)
metric u u = 1
metric v v = 1
base = 0, 0, 0, 0
box = [-2, 2] x [-2, 2] x [-2, 2] x [-2, 2]
end P
M = symplectic_r2_conformal@rescaled
map x = x
map y = y
"""

COSYMPLECTIC_TEXT = """\
name = cosymplectic_r3
description = R^3 with omega = dx ^ dy, eta = dz lifted to R^4
lift = cosymplectic
begin M
name = cosymplectic_r3
dim = 3
coords = x, y, z
omega x y = 1
eta z = 1
base = 0, 0, 0
box = [-2, 2] x [-2, 2] x [-2, 2]
end M
"""


# expected annotations ----------------------------------------------------------------

ALL_PASS = {
    c: PASS
    for c in (
        "jacobi", "almost_kp", "riemann_poisson", "kahler_poisson", "div_free",
        "casimir_invariance", "killing_poisson", "involutivity", "strong_transversal",
        "nijenhuis", "bundle_like", "mean_curvature",
    )
}

NOTE_SO3_RP = (
    "riemann_poisson is annotated fail: for the Levi-Civita contravariant connection of a constant "
    "bi-invariant metric on a Lie-Poisson space, (nabla^a pi)(b, c) = 1/2 mu([a, [b, c]]), "
    "which does not vanish for so3 or sl2"
)
NOTE_RESCALING = "the rescaled bivector r pi passes casimir_invariance and div_free (see so3_rescaled)"
NOTE_NOT_MINIMAL = (
    "strong_transversal passes while the sphere leaves have |H| = 2/r: the frame-level transversal "
    "invariance does not force minimal leaves here"
)
NOTE_REG = (
    "contested example: all defects measured under both metric readings (cometric r <,> versus r^-1 <,>) "
    "and for the rescaled bivector, without a pass/fail verdict; J is the canonical g_cov pi"
)
NOTE_RESCALED_RP = "the rescaled bivector is contravariantly parallel (riemann_poisson passes) although the unrescaled one is not"
NOTE_INDEFINITE = "mean_curvature skips points on one-sheeted hyperboloids, where the induced leaf metric is Lorentzian"
NOTE_KERNEL = (
    "kernel_containment is a hypothesis of the transport statement for Kaehler-Poisson structures, not a consequence; here "
    "pi_P#(t*gamma) is nonzero for the kernel covector gamma of pi_M"
)
NOTE_EXPONENT = (
    "the literal exponent |rho|^(2/n) multiplies the volume by rho^2 instead of removing rho; "
    "|rho|^(-1/n) pi (the @rescaled variant) is divergence free"
)


def _entries() -> dict:
    E = {}

    def add(*args, **kw):
        e = GalleryEntry(*args, **kw)
        E[e.id] = e

    add("euclid_rn_rs", "structure", euclid_rn_rs_text(3, 1, 2), dict(ALL_PASS),
        "flat Kaehler-Poisson R^n with pi = d_r ^ d_s, (n, r, s) = (3, 1, 2); parametrize as euclid_rn_rs:n,r,s")
    so3 = dict(ALL_PASS)
    so3.update(almost_kp=FAIL, riemann_poisson=FAIL, kahler_poisson=FAIL, casimir_invariance=FAIL,
               killing_poisson=FAIL, involutivity=FAIL, strong_transversal=FAIL, nijenhuis=MEASURE,
               mean_curvature=FAIL)
    add("so3_euclid", "structure", SO3_TEXT, so3, "Lie-Poisson so3* with the Euclidean cometric", (NOTE_SO3_RP, NOTE_RESCALING))
    resc = dict(ALL_PASS)
    resc.update(almost_kp=FAIL, kahler_poisson=FAIL, nijenhuis=MEASURE, mean_curvature=FAIL)
    add("so3_rescaled", "structure", SO3_RESCALED_TEXT, resc, "Lie-Poisson so3*, Killing-Poisson rescaling r pi",
        (NOTE_NOT_MINIMAL, NOTE_RESCALED_RP), tolerances={"casimir_invariance": 1e-8})
    reg = {c: MEASURE for c in ALL_PASS}
    reg["jacobi"] = PASS
    for v in ("metric", "cometric", "metric_rpi", "cometric_rpi"):
        add(f"so3_reg_conformal@{v}", "structure", _so3_reg(v), dict(reg), "so3* with a radially conformal metric (contested)", (NOTE_REG,))
        add(f"sl2_reg_conformal@{v}", "structure", _sl2_reg(v), dict(reg), "sl2* with a conformal Lorentzian metric (contested)", (NOTE_REG,))
    sl2 = dict(ALL_PASS)
    sl2.update(almost_kp=FAIL, riemann_poisson=FAIL, kahler_poisson=FAIL, casimir_invariance=FAIL,
               killing_poisson=FAIL, involutivity=FAIL, strong_transversal=FAIL, nijenhuis=MEASURE,
               mean_curvature=FAIL)
    add("sl2_lorentz", "structure", SL2_TEXT, sl2, "Lie-Poisson sl2* with the Lorentzian cometric", (NOTE_SO3_RP, NOTE_INDEFINITE))
    sl2r = dict(resc)
    add("sl2_rescaled", "structure", SL2_RESCALED_TEXT, sl2r, "Lie-Poisson sl2*, rescaling rho pi",
        (NOTE_NOT_MINIMAL, NOTE_RESCALED_RP, NOTE_INDEFINITE), tolerances={"casimir_invariance": 1e-8})
    sym = dict(ALL_PASS)
    sym.update(almost_kp=FAIL, riemann_poisson=FAIL, kahler_poisson=FAIL, div_free=FAIL,
               killing_poisson=FAIL, nijenhuis=MEASURE, nabla_omega=FAIL)
    add("symplectic_r2_conformal", "structure", _symplectic_r2(), sym, "conformally flat symplectic plane with volume density rho = e^x")
    symr = dict(ALL_PASS)
    symr["nabla_omega"] = PASS
    add("symplectic_r2_conformal@rescaled", "structure", _symplectic_r2("rescaled"), symr,
        "conformally flat symplectic plane, rescaled bivector |rho|^(-1/n) pi", (NOTE_EXPONENT,))
    add("symplectic_r2_conformal@literal_exponent", "structure", _symplectic_r2("literal_exponent"), dict(sym),
        "conformally flat symplectic plane, metric |rho|^(2/n) <,> as printed", (NOTE_EXPONENT,))
    flat = dict(ALL_PASS)
    flat["nabla_omega"] = PASS
    add("flat_r2", "structure", FLAT_R2_TEXT, flat, "flat Kaehler-Poisson plane")
    zero = dict(ALL_PASS)
    add("zero_pi_curved", "structure", ZERO_PI_TEXT, zero, "trivial Kaehler-Poisson structure pi = 0")
    add("nonpoisson_demo", "structure", NONPOISSON_TEXT, {"jacobi": FAIL}, "non-Poisson override demo",
        allow_non_poisson=True)

    sub_all = {c: PASS for c in (
        "rank", "poisson_map", "riem_submersion", "pullback_J", "pullback_metric_conn", "pullback_poisson_conn",
        "kernel_containment", "gradient_related", "horizontal", "basic_condition", "induced_J_compat",
        "J_roundtrip", "transport",
    )}
    r43 = dict(sub_all)
    r43.update(basic_condition=FAIL, kernel_containment=FAIL)
    del r43["J_roundtrip"]
    add("r4_to_r3", "submersion", R4_TO_R3_TEXT, r43, "Kaehler R^4 projected onto R^3 with pi_M = d_1 ^ d_2",
        ("J_P t*dy^3 is not basic, so the J round trip does not apply", NOTE_KERNEL))
    add("translation_quotient", "submersion", TRANSLATION_TEXT, dict(sub_all), "quotient of R^4 by translations, n = 4, m = 1")
    add("product_proj", "submersion", PRODUCT_TEXT, dict(sub_all), "product of Kaehler-Poisson factors projected onto one factor")
    cos = dict(sub_all)
    cos.update(basic_condition=FAIL, kernel_containment=FAIL)
    del cos["J_roundtrip"]
    cos.update(cosym_image_ker_eta=PASS, cosym_J_reeb=PASS, cosym_J_squared=PASS)
    add("cosymplectic_r3", "submersion", COSYMPLECTIC_TEXT, cos, "cosymplectic R^3 lifted to a symplectic R^4",
        (NOTE_KERNEL,))
    return E


_ENTRIES = _entries()
_PARAM = re.compile(r"^euclid_rn_rs:(\d+),(\d+),(\d+)$")


def ids() -> list:
    return list(_ENTRIES)


def list_entries() -> list:
    return [_ENTRIES[k] for k in _ENTRIES]


def get(entry_id: str) -> GalleryEntry:
    """Look up an entry; ``euclid_rn_rs:n,r,s`` builds the parametric family."""
    if entry_id in _ENTRIES:
        return _ENTRIES[entry_id]
    m = _PARAM.match(entry_id)
    if m:
        n, r, s = (int(g) for g in m.groups())
        try:
            text = euclid_rn_rs_text(n, r, s)
        except ValueError as exc:
            raise UnknownEntry(entry_id) from exc
        expected = dict(ALL_PASS)
        if n == 2:
            expected["nabla_omega"] = PASS
        base = _ENTRIES["euclid_rn_rs"]
        return GalleryEntry(entry_id, "structure", text, expected, f"flat Kaehler-Poisson R^n with pi = d_r ^ d_s, (n, r, s) = ({n}, {r}, {s})",
                            base.notes)
    raise UnknownEntry(entry_id)


@lru_cache(maxsize=None)
def load(entry_id: str):
    """The loaded Structure or SubmersionSpec for an entry."""
    return get(entry_id).load()


def get_structure(entry_id: str) -> Structure:
    obj = load(entry_id)
    if not isinstance(obj, Structure):
        raise UnknownEntry(entry_id)
    return obj


def get_submersion(entry_id: str) -> SubmersionSpec:
    obj = load(entry_id)
    if not isinstance(obj, SubmersionSpec):
        raise UnknownEntry(entry_id)
    return obj


def all_structures(include_non_poisson: bool = False, include_submersions: bool = True) -> list:
    """(label, Structure) for every structure entry and both sides of each submersion."""
    out = []
    for e in list_entries():
        if e.allow_non_poisson and not include_non_poisson:
            continue
        obj = load(e.id)
        if isinstance(obj, Structure):
            out.append((e.id, obj))
        elif include_submersions:
            out.append((f"{e.id}.P", obj.P))
            out.append((f"{e.id}.M", obj.M))
    out.append(("euclid_rn_rs:5,2,4", load("euclid_rn_rs:5,2,4")))
    return out


def entry_for(obj_id: str) -> Optional[GalleryEntry]:
    try:
        return get(obj_id)
    except UnknownEntry:
        return None
