"""Model coefficients of the growth-fragmentation-coagulation system.

Four rate functions drive the dynamics: the overall fragmentation rate a(x),
the daughter distribution b(x, y) of fragment sizes, the deterministic growth
speed r(x) and the binary coagulation kernel k(x, y), plus an auxiliary
absorption rate a1(x) = beta*(1 + x^alpha) used by the positive-splitting
machinery.  Each coefficient carries the structural hypotheses it is supposed
to satisfy; `validate_kernel_set` probes all of them on a sampling plan and
returns a pass/fail report instead of raising.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

__all__ = [
    "FragmentationRate",
    "DaughterDistribution",
    "GrowthRate",
    "CoagulationKernel",
    "AbsorptionRate",
    "KernelSet",
    "SamplePlan",
    "CheckResult",
    "ValidationReport",
    "QuadratureError",
    "daughter_moment",
    "moment_deficit",
    "compute_beta",
    "validate_kernel_set",
    "daughter_tail_diagnostics",
]

REACHABLE = "reachable"
UNREACHABLE = "unreachable"


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to meet its tolerance."""


class KernelConfigError(ValueError):
    """Inconsistent kernel parameters."""


def _quad(fun, lo, hi, points=None, epsabs=1e-10, epsrel=1e-8) -> float:
    val, err = integrate.quad(fun, lo, hi, points=points, limit=200,
                              epsabs=epsabs, epsrel=epsrel)
    if not np.isfinite(val) or err > max(epsabs, epsrel * abs(val)) * 50:
        raise QuadratureError(
            f"quadrature on [{lo}, {hi}] reported error {err:.2e} for value {val:.6e}"
        )
    return val


def _interp1d_flat(xs: np.ndarray, ys: np.ndarray):
    """Piecewise-linear interpolant with constant extension outside the table."""

    def f(x):
        return np.interp(np.asarray(x, dtype=float), xs, ys)

    return f


@dataclass(frozen=True)
class FragmentationRate:
    """Overall breakup rate a(x).

    kinds: 'power-law' a0*x^gamma0, 'linear' (a0*x), 'table'.
    Hypotheses: a >= 0 locally bounded, and a(x) >= a0*x^gamma0 for x >= x0.
    """

    kind: str = "power-law"
    a0: float = 1.0
    gamma0: float = 1.0
    x0: float = 1.0
    table_x: Optional[np.ndarray] = None
    table_a: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("power-law", "linear", "table"):
            raise KernelConfigError(f"unknown fragmentation kind {self.kind!r}")
        if self.kind == "linear":
            object.__setattr__(self, "gamma0", 1.0)
        if self.a0 < 0:
            raise KernelConfigError("fragmentation amplitude a0 must be >= 0")
        if self.kind == "table":
            if self.table_x is None or self.table_a is None:
                raise KernelConfigError("table fragmentation needs table_x/table_a")
            object.__setattr__(self, "table_x", np.asarray(self.table_x, float))
            object.__setattr__(self, "table_a", np.asarray(self.table_a, float))

    @property
    def is_zero(self) -> bool:
        return self.kind != "table" and self.a0 == 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "table":
            return np.interp(x, self.table_x, self.table_a)
        return self.a0 * np.power(x, self.gamma0)


@dataclass(frozen=True)
class DaughterDistribution:
    """Fragment size distribution b(x, y) for a parent of size y.

    kinds:
      'uniform-binary'  b = 2/y                       (n0 = 2)
      'power-law'       b = (nu+2) x^nu / y^(nu+1)    (n0 = (nu+2)/(nu+1))
      'table'           b = s * phi(x/y) / y, with s fixed so that the local
                        mass conservation integral is exact.

    All built-ins satisfy int_0^y x b(x,y) dx = y identically.
    """

    kind: str = "uniform-binary"
    nu: float = 0.0
    table_u: Optional[np.ndarray] = None
    table_phi: Optional[np.ndarray] = None
    _scale: float = field(default=1.0, repr=False)

    def __post_init__(self):
        if self.kind not in ("uniform-binary", "power-law", "table"):
            raise KernelConfigError(f"unknown daughter kind {self.kind!r}")
        if self.kind == "power-law" and self.nu <= -1:
            raise KernelConfigError("power-law daughter exponent must exceed -1")
        if self.kind == "table":
            if self.table_u is None or self.table_phi is None:
                raise KernelConfigError("table daughter needs table_u/table_phi")
            u = np.asarray(self.table_u, float)
            phi = np.asarray(self.table_phi, float)
            if u[0] != 0.0 or u[-1] != 1.0 or np.any(np.diff(u) <= 0):
                raise KernelConfigError("table_u must increase from 0 to 1")
            if np.any(phi < 0):
                raise KernelConfigError("table_phi must be nonnegative")
            object.__setattr__(self, "table_u", u)
            object.__setattr__(self, "table_phi", phi)
            # exact first moment of the piecewise-linear phi: per-segment
            # int u*(c0 + c1 u) du has a closed form; renormalize so that
            # the discrete mass-conservation identity holds exactly.
            m1 = self._pl_moment(1.0)
            if m1 <= 0:
                raise KernelConfigError("table daughter carries no mass")
            object.__setattr__(self, "_scale", 1.0 / m1)

    def _pl_moment(self, m: float) -> float:
        """Exact int_0^1 u^m * phi(u) du for the raw piecewise-linear table."""
        u, phi = self.table_u, self.table_phi
        total = 0.0
        for i in range(len(u) - 1):
            ua, ub = u[i], u[i + 1]
            pa, pb = phi[i], phi[i + 1]
            if ub == ua:
                continue
            c1 = (pb - pa) / (ub - ua)
            c0 = pa - c1 * ua
            total += c0 * (ub ** (m + 1) - ua ** (m + 1)) / (m + 1)
            total += c1 * (ub ** (m + 2) - ua ** (m + 2)) / (m + 2)
        return total

    @property
    def n0_bound_amplitude(self) -> float:
        """b0 in the daughter-number bound n0(y) <= b0*(1 + y^l)."""
        return self.number_of_daughters()

    @property
    def n0_bound_exponent(self) -> float:
        """l in the daughter-number bound; 0 for every homogeneous kind."""
        return 0.0

    def number_of_daughters(self) -> float:
        """n0: mean fragment count per breakup (size independent here)."""
        if self.kind == "uniform-binary":
            return 2.0
        if self.kind == "power-law":
            return (self.nu + 2.0) / (self.nu + 1.0)
        return self._scale * self._pl_moment(0.0)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore", under="ignore"):
            if self.kind == "uniform-binary":
                out = np.broadcast_to(2.0 / y, np.broadcast_shapes(x.shape, y.shape)).copy()
            elif self.kind == "power-law":
                out = (self.nu + 2.0) * np.power(x, self.nu) / np.power(y, self.nu + 1.0)
            else:
                u = np.clip(x / y, 0.0, 1.0)
                out = self._scale * np.interp(u, self.table_u, self.table_phi) / y
        return np.where(x > y, 0.0, out)

    def partial_mass(self, y: float, up_to: float) -> float:
        """int_0^min(up_to, y) x b(x, y) dx, exact for the built-in kinds."""
        z = min(up_to, y)
        if z <= 0:
            return 0.0
        if self.kind == "uniform-binary":
            return z * z / y
        if self.kind == "power-law":
            return (z / y) ** (self.nu + 1.0) * z
        u = z / y
        # exact piecewise-linear integral of s*u*phi(u) up to u, rescaled by y
        total = 0.0
        for i in range(len(self.table_u) - 1):
            ua, ub = self.table_u[i], min(self.table_u[i + 1], u)
            if ub <= ua:
                break
            pa = np.interp(ua, self.table_u, self.table_phi)
            pb = np.interp(ub, self.table_u, self.table_phi)
            c1 = (pb - pa) / (ub - ua)
            c0 = pa - c1 * ua
            total += c0 * (ub**2 - ua**2) / 2 + c1 * (ub**3 - ua**3) / 3
        return self._scale * total * y

    def partial_number(self, y: float, up_to: float) -> float:
        """int_0^min(up_to, y) b(x, y) dx, exact for the built-in kinds."""
        z = min(up_to, y)
        if z <= 0:
            return 0.0
        if self.kind == "uniform-binary":
            return 2.0 * z / y
        if self.kind == "power-law":
            return (self.nu + 2.0) / (self.nu + 1.0) * (z / y) ** (self.nu + 1.0)
        u = z / y
        total = 0.0
        for i in range(len(self.table_u) - 1):
            ua, ub = self.table_u[i], min(self.table_u[i + 1], u)
            if ub <= ua:
                break
            pa = np.interp(ua, self.table_u, self.table_phi)
            pb = np.interp(ub, self.table_u, self.table_phi)
            c1 = (pb - pa) / (ub - ua)
            c0 = pa - c1 * ua
            total += c0 * (ub - ua) + c1 * (ub**2 - ua**2) / 2
        return self._scale * total


@dataclass(frozen=True)
class GrowthRate:
    """Deterministic growth speed r(x) <= r0 + r1*x.

    kinds: 'constant' (r0), 'linear' (r1*x), 'affine' (r0 + r1*x), 'table'.
    A constant rate of 0 switches growth off entirely (desk-scale oracle
    scenarios); the structural hypotheses are then reported not-applicable.
    The origin is reachable by backward characteristics iff 1/r is integrable
    at 0, which is decidable from the kind.
    """

    kind: str = "constant"
    r0: float = 1.0
    r1: float = 0.0
    table_x: Optional[np.ndarray] = None
    table_r: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("constant", "linear", "affine", "table"):
            raise KernelConfigError(f"unknown growth kind {self.kind!r}")
        if self.kind == "constant":
            object.__setattr__(self, "r1", 0.0)
        if self.kind == "linear":
            object.__setattr__(self, "r0", 0.0)
        if self.r0 < 0 or self.r1 < 0:
            raise KernelConfigError("growth coefficients must be nonnegative")
        if self.kind == "linear" and self.r1 == 0:
            raise KernelConfigError("linear growth needs r1 > 0")
        if self.kind == "table":
            if self.table_x is None or self.table_r is None:
                raise KernelConfigError("table growth needs table_x/table_r")
            xs = np.asarray(self.table_x, float)
            rs = np.asarray(self.table_r, float)
            if np.any(rs <= 0):
                raise KernelConfigError("table growth must be strictly positive")
            object.__setattr__(self, "table_x", xs)
            object.__setattr__(self, "table_r", rs)
            # default affine majorant for tables unless supplied: constant cap
            if self.r0 == 0.0 and self.r1 == 0.0:
                object.__setattr__(self, "r0", float(np.max(rs)))

    @property
    def rtilde(self) -> float:
        return max(self.r0, self.r1)

    @property
    def is_zero(self) -> bool:
        return self.kind == "constant" and self.r0 == 0.0

    @property
    def origin_class(self) -> str:
        # int_0+ dx/r converges unless r vanishes at least linearly at 0;
        # tables extend with a positive constant, so only 'linear' diverges.
        if self.is_zero:
            return UNREACHABLE
        return UNREACHABLE if self.kind == "linear" else REACHABLE

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "table":
            return np.interp(x, self.table_x, self.table_r)
        return self.r0 + self.r1 * x


@dataclass(frozen=True)
class CoagulationKernel:
    """Symmetric merge rate k(x, y).

    kinds: 'constant' k0, 'product' k0*(1+x^a)(1+y^a),
    'sum' k0*(1+x^a+y^a), 'table'.  `bound_class` declares which structural
    bound the kernel is validated against: 'local' for the product bound,
    'global' for the sum bound required by the global-existence theory.
    """

    kind: str = "constant"
    k0: float = 1.0
    alpha: float = 0.5
    bound_class: str = "global"
    table_x: Optional[np.ndarray] = None
    table_k: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in ("constant", "product", "sum", "table"):
            raise KernelConfigError(f"unknown coagulation kind {self.kind!r}")
        if self.bound_class not in ("local", "global"):
            raise KernelConfigError(f"unknown coagulation bound class {self.bound_class!r}")
        if self.k0 < 0:
            raise KernelConfigError("coagulation amplitude k0 must be >= 0")
        if self.alpha <= 0:
            raise KernelConfigError("coagulation exponent alpha must be positive")
        if self.kind == "table":
            if self.table_x is None or self.table_k is None:
                raise KernelConfigError("table coagulation needs table_x/table_k")
            xs = np.asarray(self.table_x, float)
            ks = np.asarray(self.table_k, float)
            if ks.shape != (len(xs), len(xs)):
                raise KernelConfigError("table_k must be square over table_x")
            ks = 0.5 * (ks + ks.T)  # enforce symmetry exactly
            object.__setattr__(self, "table_x", xs)
            object.__setattr__(self, "table_k", ks)

    @property
    def is_zero(self) -> bool:
        return self.kind != "table" and self.k0 == 0.0

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "constant":
            return np.broadcast_to(self.k0, np.broadcast_shapes(x.shape, y.shape)).copy()
        if self.kind == "product":
            return self.k0 * (1.0 + np.power(x, self.alpha)) * (1.0 + np.power(y, self.alpha))
        if self.kind == "sum":
            return self.k0 * (1.0 + np.power(x, self.alpha) + np.power(y, self.alpha))
        ix = np.interp(x, self.table_x, np.arange(len(self.table_x), dtype=float))
        iy = np.interp(y, self.table_x, np.arange(len(self.table_x), dtype=float))
        ix0 = np.clip(np.floor(ix).astype(int), 0, len(self.table_x) - 2)
        iy0 = np.clip(np.floor(iy).astype(int), 0, len(self.table_x) - 2)
        tx = np.clip(ix - ix0, 0.0, 1.0)
        ty = np.clip(iy - iy0, 0.0, 1.0)
        K = self.table_k
        return ((1 - tx) * (1 - ty) * K[ix0, iy0] + tx * (1 - ty) * K[ix0 + 1, iy0]
                + (1 - tx) * ty * K[ix0, iy0 + 1] + tx * ty * K[ix0 + 1, iy0 + 1])

    def class_bound(self, x, y):
        """Structural upper bound for the declared class."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.bound_class == "local":
            return self.k0 * (1.0 + np.power(x, self.alpha)) * (1.0 + np.power(y, self.alpha))
        return self.k0 * (1.0 + np.power(x, self.alpha) + np.power(y, self.alpha))


@dataclass(frozen=True)
class AbsorptionRate:
    """Auxiliary absorption a1(x) = beta*(1 + x^alpha), beta >= 0."""

    beta: float = 0.0
    alpha: float = 0.5

    def __post_init__(self):
        if self.beta < 0:
            raise KernelConfigError("absorption strength beta must be >= 0")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.beta == 0.0:
            return np.zeros_like(x)
        return self.beta * (1.0 + np.power(x, self.alpha))


@dataclass(frozen=True)
class KernelSet:
    """The coefficient bundle (a, b, r, k, a1) for one scenario."""

    a: FragmentationRate
    b: DaughterDistribution
    r: GrowthRate
    k: CoagulationKernel
    a1: AbsorptionRate

    def q(self, x):
        """Total linear loss rate a + a1 entering the transport generator."""
        return self.a(x) + self.a1(x)


def compute_beta(k0: float, ball_radius: float) -> float:
    """Absorption strength that dominates the coagulation loss term on the
    invariant ball of radius 1 + ball_radius."""
    if k0 < 0 or ball_radius < 0:
        raise KernelConfigError("compute_beta needs nonnegative arguments")
    return 2.0 * k0 * (1.0 + ball_radius)


def daughter_moment(b: DaughterDistribution, m: float, y: float) -> float:
    """m-th moment n_m(y) of the daughter distribution for a size-y parent.

    Closed form for the homogeneous built-ins, adaptive quadrature otherwise.

    Raises
    ------
    QuadratureError
        if the adaptive integration cannot meet its tolerance.
    """
    if y <= 0:
        raise ValueError(f"parent size must be positive, got {y}")
    if m < 0:
        raise ValueError(f"moment order must be nonnegative, got {m}")
    if b.kind == "uniform-binary":
        return 2.0 / (m + 1.0) * y**m
    if b.kind == "power-law":
        return (b.nu + 2.0) / (b.nu + m + 1.0) * y**m
    knots = None
    if getattr(b, "table_u", None) is not None:
        knots = [float(u * y) for u in b.table_u]
    return _quad(lambda x: b(x, y) * x**m, 0.0, y, points=knots)


def moment_deficit(b: DaughterDistribution, m: float, y: float) -> float:
    """N_m(y) = y^m - n_m(y): positive for m > 1, zero at m = 1, negative below."""
    return y**m - daughter_moment(b, m, y)


def daughter_tail_diagnostics(b: DaughterDistribution, m: float,
                              ys: Sequence[float]) -> tuple[Optional[float], Optional[float]]:
    """Smallest probed y with n_m(y)/y^m < 1 and the supremum of that ratio beyond.

    Diagnostic only: such a threshold is guaranteed to exist, but its value
    is scenario dependent.
    """
    y_m = None
    sup_ratio = None
    for y in ys:
        ratio = daughter_moment(b, m, y) / y**m
        if ratio < 1.0 and y_m is None:
            y_m = float(y)
        if y_m is not None:
            sup_ratio = ratio if sup_ratio is None else max(sup_ratio, ratio)
    return y_m, sup_ratio


@dataclass(frozen=True)
class SamplePlan:
    """Where the kernel hypotheses are probed.

    Sizes are sampled geometrically over [xmin, xmax]; the liminf check uses
    [y_probe, 100*y_probe].  The weight order m (and the coagulation solver
    requirement m > alpha + max{1, l}) is reported when m is supplied.
    """

    xmin: float = 1e-3
    xmax: float = 1e2
    n_sizes: int = 50
    m: Optional[float] = None
    m0: float = 2.0
    liminf_threshold: float = 0.01
    y_probe: float = 10.0
    seed: int = 0

    def sizes(self) -> np.ndarray:
        return np.geomspace(self.xmin, self.xmax, self.n_sizes)

    def liminf_sizes(self) -> np.ndarray:
        return np.geomspace(self.y_probe, 100.0 * self.y_probe, 25)


@dataclass
class CheckResult:
    name: str
    status: str  # 'pass' | 'fail' | 'n/a'
    worst: float = float("nan")
    bound: float = float("nan")
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "fail"


@dataclass
class ValidationReport:
    checks: list[CheckResult] = field(default_factory=list)

    def add(self, *args, **kwargs) -> CheckResult:
        res = CheckResult(*args, **kwargs)
        self.checks.append(res)
        return res

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed_names(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def validate_kernel_set(ks: KernelSet, plan: SamplePlan) -> ValidationReport:
    """Probe every structural hypothesis of the coefficient bundle.

    Failures are report rows, never exceptions.  Checks that do not apply to
    the scenario (for instance growth positivity with growth switched off)
    are reported 'n/a'.
    """
    rep = ValidationReport()
    xs = plan.sizes()

    a_vals = ks.a(xs)
    rep.add("frag-nonnegative", "pass" if np.all(a_vals >= 0) else "fail",
            float(np.min(a_vals)), 0.0)

    mask = xs >= ks.a.x0
    if np.any(mask):
        lower = ks.a.a0 * np.power(xs[mask], ks.a.gamma0)
        resid = float(np.min(a_vals[mask] - lower))
        rep.add("frag-lower-bound", "pass" if resid >= -1e-12 * max(1.0, ks.a.a0) else "fail",
                resid, 0.0, f"a(x) >= a0*x^gamma0 for x >= {ks.a.x0}")

    bvals = ks.b(xs[:, None], xs[None, :])
    rep.add("daughter-nonnegative", "pass" if np.all(bvals >= 0) else "fail",
            float(np.min(bvals)), 0.0)
    il, jl = np.tril_indices(len(xs), k=-1)
    above = bvals[il, jl]  # rows are x, columns are y: i > j means x > y
    rep.add("daughter-support", "pass" if np.all(above == 0) else "fail",
            float(np.max(above)) if above.size else 0.0, 0.0,
            "b(x, y) = 0 for x > y")

    worst = 0.0
    status = "pass"
    for y in xs:
        try:
            knots = [float(u * y) for u in ks.b.table_u] if ks.b.kind == "table" else None
            mass = _quad(lambda x: ks.b(x, y) * x, 0.0, float(y), points=knots)
        except QuadratureError:
            status = "fail"
            break
        worst = max(worst, abs(mass - y) / y)
        if worst > 1e-8:
            status = "fail"
    rep.add("daughter-mass-conservation", status, worst, 1e-8,
            "relative residual of int x*b(x,y) dx = y")

    b0, ell = ks.b.n0_bound_amplitude, ks.b.n0_bound_exponent
    n0 = np.array([daughter_moment(ks.b, 0.0, float(y)) for y in xs])
    excess = float(np.max(n0 - b0 * (1.0 + xs**ell)))
    rep.add("daughter-number-bound", "pass" if excess <= 1e-8 * b0 else "fail",
            excess, 0.0, f"n0(y) <= {b0}*(1 + y^{ell})")

    ratios = np.array([moment_deficit(ks.b, plan.m0, float(y)) / y**plan.m0
                       for y in plan.liminf_sizes()])
    rep.add("daughter-liminf", "pass" if np.min(ratios) >= plan.liminf_threshold else "fail",
            float(np.min(ratios)), plan.liminf_threshold,
            f"N_m0(y)/y^m0 at m0 = {plan.m0} over [{plan.y_probe}, {100 * plan.y_probe}]")

    if ks.r.is_zero:
        rep.add("growth-positive", "n/a", detail="growth disabled")
        rep.add("growth-origin-class", "n/a", detail="growth disabled")
    else:
        r_vals = ks.r(xs)
        rep.add("growth-positive", "pass" if np.all(r_vals > 0) else "fail",
                float(np.min(r_vals)), 0.0)
        affine = ks.r.r0 + ks.r.r1 * xs
        cap = ks.r.rtilde * (1.0 + xs)
        ok = np.all(r_vals <= affine * (1 + 1e-12) + 1e-300) and np.all(affine <= cap * (1 + 1e-12))
        rep.add("growth-affine-bound", "pass" if ok else "fail",
                float(np.max(r_vals - affine)), 0.0,
                f"r <= {ks.r.r0} + {ks.r.r1}*x <= rtilde*(1+x)")
        # 1/r integrability at the origin, probed on a shrinking bracket
        eps = np.geomspace(1e-2, 1e-8, 7)
        tails = np.array([_quad(lambda s: 1.0 / ks.r(s), float(e), 1.0, epsabs=1e-9, epsrel=1e-7)
                          for e in eps])
        growth_factor = tails[-1] / tails[0]
        bounded = growth_factor < 1.5
        consistent = bounded == (ks.r.origin_class == REACHABLE)
        rep.add("growth-origin-class", "pass" if consistent else "fail",
                float(growth_factor), 1.5,
                f"declared {ks.r.origin_class}; int_eps^1 dx/r growth factor over eps sweep")

    kxy = ks.k(xs[:, None], xs[None, :])
    sym = float(np.max(np.abs(kxy - kxy.T)))
    rep.add("coag-symmetric", "pass" if sym <= 1e-12 * max(1.0, ks.k.k0) else "fail", sym, 0.0)
    rep.add("coag-nonnegative", "pass" if np.all(kxy >= 0) else "fail", float(np.min(kxy)), 0.0)
    over = float(np.max(kxy - ks.k.class_bound(xs[:, None], xs[None, :])))
    rep.add("coag-class-bound", "pass" if over <= 1e-12 * max(1.0, ks.k.k0) else "fail",
            over, 0.0, f"declared class {ks.k.bound_class!r}")

    rep.add("absorption-nonnegative", "pass" if ks.a1.beta >= 0 else "fail", ks.a1.beta, 0.0)
    if ks.k.is_zero and ks.a1.beta == 0.0:
        rep.add("absorption-exponent", "n/a", detail="no coagulation, no absorption")
    else:
        ok = ks.k.alpha < ks.a.gamma0
        rep.add("absorption-exponent", "pass" if ok else "fail",
                ks.k.alpha, ks.a.gamma0, "alpha < gamma0 keeps a1/a bounded at infinity")

    if plan.m is not None:
        lmax = max(1.0, ell)
        rep.add("weight-order", "pass" if plan.m > lmax else "fail",
                plan.m, lmax, "m > max{1, l}")
        if not ks.k.is_zero:
            need = ks.k.alpha + lmax
            rep.add("weight-order-coagulation", "pass" if plan.m > need else "fail",
                    plan.m, need, "m > alpha + max{1, l}")
    return rep
