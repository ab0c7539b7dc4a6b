"""Minimax polynomial approximation via the Remez exchange algorithm.

Fits are done in Chebyshev basis with extended-precision (80-bit longdouble)
internal arithmetic; stored coefficients are float64. The certified error is
the dense grid-scanned maximum deviation, and every fit carries its
equioscillation reference points as a certificate.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ApproximationError

LD = np.longdouble


def _sigmoid(x):
    # split by sign to avoid exp overflow at longdouble extremes
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_TARGETS = {
    "sigmoid": _sigmoid,
    "sine2pi": lambda x: np.sin(2 * np.pi * np.asarray(x, dtype=LD)) / LD(2 * np.pi),
    "linear": lambda x: np.asarray(x, dtype=LD),
    "exp": lambda x: np.exp(np.asarray(x, dtype=LD)),
}


def target_function(name):
    if callable(name):
        return name
    if name not in _TARGETS:
        raise ApproximationError(f"unknown target {name!r} (have {sorted(_TARGETS)})")
    return _TARGETS[name]


@dataclass
class MinimaxPoly:
    """Chebyshev-basis approximant with its certified maximum error."""

    cheb_coeffs: np.ndarray
    domain: tuple
    degree: int
    certified_max_error: float
    target_name: str
    equioscillation_points: np.ndarray = field(default=None, repr=False)

    def scaled(self, factor):
        """Same polynomial times a scalar (certificate does not transfer)."""
        return MinimaxPoly(
            cheb_coeffs=np.asarray(self.cheb_coeffs) * factor,
            domain=self.domain,
            degree=self.degree,
            certified_max_error=self.certified_max_error * abs(factor),
            target_name=f"{factor}*{self.target_name}",
            equioscillation_points=self.equioscillation_points,
        )


def _cheb_vander(t, degree):
    """Columns T_0(t)..T_degree(t); t in [-1,1], any float dtype."""
    v = np.empty((t.size, degree + 1), dtype=t.dtype)
    v[:, 0] = 1
    if degree >= 1:
        v[:, 1] = t
    for j in range(2, degree + 1):
        v[:, j] = 2 * t * v[:, j - 1] - v[:, j - 2]
    return v


def _solve_ld(a, b):
    """Gaussian elimination with partial pivoting in longdouble."""
    a = a.astype(LD).copy()
    b = b.astype(LD).copy()
    n = a.shape[0]
    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if a[piv, col] == 0:
            raise ApproximationError("singular exchange system")
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        factors = a[col + 1 :, col] / a[col, col]
        a[col + 1 :] -= factors[:, None] * a[col]
        b[col + 1 :] -= factors * b[col]
    x = np.empty(n, dtype=LD)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1 :] @ x[row + 1 :]) / a[row, row]
    return x


def _clenshaw(coeffs, t):
    b1 = np.zeros_like(t)
    b2 = np.zeros_like(t)
    for c in coeffs[:0:-1]:
        b1, b2 = 2 * t * b1 - b2 + c, b1
    return t * b1 - b2 + coeffs[0]


def eval_cheb(poly, x):
    """Evaluate (Clenshaw); out-of-domain inputs allowed but unguaranteed."""
    a, b = poly.domain
    xs = np.asarray(x, dtype=np.float64)
    t = (2 * xs - (a + b)) / (b - a)
    out = _clenshaw(np.asarray(poly.cheb_coeffs, dtype=np.float64), t)
    return float(out) if np.isscalar(x) else out


def to_monomial(poly):
    """Monomial coefficients in x (test oracle; degree <= 31 stays stable)."""
    from numpy.polynomial import chebyshev as C

    a, b = poly.domain
    mono_t = C.cheb2poly(np.asarray(poly.cheb_coeffs, dtype=np.float64))
    p = np.polynomial.Polynomial(mono_t)
    # substitute t = (2x - (a+b))/(b-a)
    lin = np.polynomial.Polynomial([-(a + b) / (b - a), 2.0 / (b - a)])
    return p(lin).coef


def _cheb_grid(a, b, points, dtype=np.float64):
    k = np.arange(points, dtype=dtype)
    t = np.cos(np.pi * k / (points - 1))[::-1]
    return (a + b) / 2 + (b - a) / 2 * t


def max_error_scan(poly, target, grid_points=1_000_000):
    """Max |poly - target| over a Chebyshev-spaced grid on the domain."""
    if grid_points < 10 * max(poly.degree, 1):
        raise ApproximationError("grid too coarse: need >= 10*degree points")
    f = target_function(target)
    a, b = poly.domain
    x = _cheb_grid(a, b, grid_points, dtype=np.float64)
    err = eval_cheb(poly, x) - np.asarray(f(x.astype(LD)), dtype=np.float64)
    return float(np.max(np.abs(err)))


def _alternating_extrema(t_grid, err, count):
    """One extremum per sign run of err, trimmed to `count` alternating points."""
    signs = np.sign(err)
    signs[signs == 0] = 1
    boundaries = np.flatnonzero(np.diff(signs)) + 1
    runs = np.split(np.arange(err.size), boundaries)
    picks = []
    for run in runs:
        i = run[np.argmax(np.abs(err[run]))]
        picks.append(i)
    if len(picks) < count:
        return None
    # keep the strongest window of `count` consecutive alternating extrema
    vals = np.abs(err[picks])
    while len(picks) > count:
        if vals[0] <= vals[-1]:
            picks, vals = picks[1:], vals[1:]
        else:
            picks, vals = picks[:-1], vals[:-1]
    return t_grid[picks]


def _exchange(f, degree, max_iterations, tol):
    """Remez exchange on [-1, 1]; returns (coeffs, refs) or raises.

    Returns None on the parity-degenerate outcome (the levelled error
    collapses to interpolation noise, which happens when the target's
    symmetry demands an even alternant but degree+2 is odd).
    """
    n_ref = degree + 2
    refs = np.cos(np.pi * np.arange(n_ref, dtype=LD) / (n_ref - 1))[::-1]
    grid_n = max(1 << 13, 64 * n_ref)
    t_grid = np.cos(np.pi * np.arange(grid_n, dtype=LD) / (grid_n - 1))[::-1]
    f_grid = np.asarray(f(t_grid), dtype=LD)
    floor = 64 * float(np.finfo(LD).eps) * max(1.0, float(np.max(np.abs(f_grid))))

    history = []
    for _ in range(max_iterations):
        vander = _cheb_vander(refs, degree)
        system = np.empty((n_ref, n_ref), dtype=LD)
        system[:, :-1] = vander
        system[:, -1] = (-1.0) ** np.arange(n_ref)
        sol = _solve_ld(system, np.asarray(f(refs), dtype=LD))
        coeffs = sol[:-1]
        levelled = abs(float(sol[-1]))

        err_grid = _clenshaw(coeffs, t_grid) - f_grid
        max_err = float(np.max(np.abs(err_grid)))
        history.append((levelled, max_err))
        if (max_err - levelled) <= tol * max_err + floor:
            return coeffs, refs
        new_refs = _alternating_extrema(
            t_grid, np.asarray(err_grid, dtype=np.float64), n_ref
        )
        if new_refs is None or levelled <= 1e-6 * max_err + floor:
            return None  # degenerate: alternant has the wrong parity
        refs = np.asarray(new_refs, dtype=LD)
    raise ApproximationError(
        f"remez exchange did not converge at degree {degree}; "
        f"last (levelled, max) pairs: {history[-4:]}"
    )


def remez_fit(target, domain, degree, max_iterations=60, tol=1e-11):
    """Minimax polynomial of `degree` for `target` on `domain`.

    Deterministic. Parity-degenerate targets (e.g. odd functions at odd
    degree, whose minimax coincides with the next degree's) are rescued by
    fitting one degree higher and stripping the vanishing top coefficient.
    """
    if degree < 1:
        raise ApproximationError("degree must be >= 1")
    f = target_function(target)
    a, b = float(domain[0]), float(domain[1])
    if not b > a:
        raise ApproximationError("empty domain")
    name = target if isinstance(target, str) else getattr(target, "__name__", "custom")

    def f_norm(t):
        return f(LD(a + b) / 2 + LD(b - a) / 2 * np.asarray(t, dtype=LD))

    result = _exchange(f_norm, degree, max_iterations, tol)
    if result is None:
        result = _exchange(f_norm, degree + 1, max_iterations, tol)
        if result is None:
            raise ApproximationError(
                f"remez degenerate at degrees {degree} and {degree + 1} for {name}"
            )
        coeffs, refs = result
        top = abs(float(coeffs[-1]))
        scale = float(np.max(np.abs(coeffs)))
        if top > 1e-9 * scale:
            raise ApproximationError(
                f"degree-{degree} fit is parity-degenerate but degree "
                f"{degree + 1} has a significant top coefficient {top:.3e}"
            )
        coeffs = coeffs[:-1]
        refs = refs[1:]  # keep degree+2 alternating points of the certificate
    else:
        coeffs, refs = result

    poly = MinimaxPoly(
        cheb_coeffs=np.asarray(coeffs, dtype=np.float64),
        domain=(a, b),
        degree=degree,
        certified_max_error=0.0,
        target_name=name,
        equioscillation_points=np.asarray(
            (a + b) / 2 + (b - a) / 2 * refs, dtype=np.float64
        ),
    )
    scan_points = min(1_000_000, max(200_000, 100 * degree))
    poly.certified_max_error = max_error_scan(poly, target, scan_points)
    return poly


def equioscillation_check(poly, target, rel_tol=0.02):
    """True if the stored reference points alternate within rel_tol of the
    certified error; this is the classical optimality certificate."""
    f = target_function(target)
    pts = poly.equioscillation_points
    if pts is None or pts.size < poly.degree + 2:
        return False
    err = eval_cheb(poly, pts) - np.asarray(f(pts.astype(LD)), dtype=np.float64)
    e = poly.certified_max_error
    if np.any(np.abs(np.abs(err) - e) > rel_tol * e):
        return False
    signs = np.sign(err)
    return bool(np.all(signs[1:] * signs[:-1] == -1))


# -- text artifact (checked into the repo for reproducibility) ---------------


def export_text(poly):
    lines = [
        "hebert-approximant v1",
        f"target {poly.target_name}",
        f"domain {float(poly.domain[0]).hex()} {float(poly.domain[1]).hex()}",
        f"degree {poly.degree}",
        f"certified_max_error {float(poly.certified_max_error).hex()}",
    ]
    for c in poly.cheb_coeffs:
        lines.append(f"coeff {float(c).hex()}")
    return "\n".join(lines) + "\n"


def import_text(text):
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if lines[0] != "hebert-approximant v1":
        raise ApproximationError("unrecognized approximant header")
    fields = {}
    coeffs = []
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        if key == "coeff":
            coeffs.append(float.fromhex(rest))
        else:
            fields[key] = rest
    lo, hi = fields["domain"].split()
    return MinimaxPoly(
        cheb_coeffs=np.array(coeffs),
        domain=(float.fromhex(lo), float.fromhex(hi)),
        degree=int(fields["degree"]),
        certified_max_error=float.fromhex(fields["certified_max_error"]),
        target_name=fields["target"],
    )
