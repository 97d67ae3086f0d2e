"""Stationary distributions, exact TV convergence curves, spectra, and the
automated inequality/rate checkers for the sweep family.

All checks run on dense matrices, so "verified" means verified to the stated
floating-point slack, state by state and step by step:

  * the two total-variation inequality chains linking the block sweep, its
    z-marginal, the out-of-order sweep, the xy-marginal, and the rotated
    sweep (``check_prop1``);
  * equality of the nonzero spectra of the four valid chains plus equality
    of the out-of-order sweep's convergence rate (``check_rate_equality``);
  * which distribution the out-of-order sweep actually preserves
    (``check_pistar_invariance``), and on which marginals that distribution
    still agrees with the target (``check_marginal_agreement``).

On finite irreducible aperiodic chains the geometric convergence rate is the
second largest eigenvalue modulus (slem), which is how rates are certified
here; no explicit multiplicative bound function is constructed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .finite_model import JointPmf3, marginal, pi_star, tv
from .kernels import (
    InitialMeasure,
    Kernel,
    block_kernel,
    flatten_to_codec,
    marginal_xy_kernel,
    marginal_z_kernel,
    nu_xz,
    nu_z,
    ooo_kernel,
    rotated_block_kernel,
)

#: |eigenvalue - 1| below this counts as the unit eigenvalue.
UNIT_EIG_TOL = 1e-9

#: Absolute slack for the inequality chains (accumulated float error in
#: repeated matrix-vector products).
INEQ_SLACK = 1e-12

#: Tolerance for spectral agreement across kernels.
RATE_TOL = 1e-8

STATIONARY_RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class SpectrumSummary:
    """Eigenvalue moduli (descending), the second largest eigenvalue modulus,
    and the multiplicity of the unit eigenvalue."""

    moduli: np.ndarray
    slem: float
    unit_multiplicity: int
    eigenvalues: np.ndarray = field(repr=False)

    def to_json_dict(self) -> dict:
        return {
            "moduli": [float(m) for m in self.moduli],
            "slem": float(self.slem),
            "unit_multiplicity": int(self.unit_multiplicity),
        }


def spectrum(kernel: Kernel, tol: float = UNIT_EIG_TOL) -> SpectrumSummary:
    """Full dense eigenvalue summary. The slem is the largest modulus among
    eigenvalues with |lambda - 1| > tol."""
    eigs = np.linalg.eigvals(kernel.matrix)
    moduli = np.sort(np.abs(eigs))[::-1]
    non_unit = eigs[np.abs(eigs - 1.0) > tol]
    slem = float(np.abs(non_unit).max()) if non_unit.size else 0.0
    unit_multiplicity = int(np.count_nonzero(np.abs(eigs - 1.0) <= tol))
    return SpectrumSummary(moduli, slem, unit_multiplicity, np.sort_complex(eigs))


def stationary(kernel: Kernel) -> np.ndarray:
    """Unique probability vector v with v M = v.

    Solves (M^T - I) v = 0 with a normalization row appended, after checking
    that the unit eigenvalue is simple (it always is for kernels built from
    strictly positive pmfs).
    """
    m = kernel.matrix
    n = m.shape[0]
    unit_mult = int(np.count_nonzero(np.abs(np.linalg.eigvals(m) - 1.0) <= UNIT_EIG_TOL))
    if unit_mult != 1:
        raise ValueError(
            f"unit eigenvalue has multiplicity {unit_mult}; kernel is not ergodic"
        )
    a = np.vstack([m.T - np.eye(n), np.ones((1, n))])
    b = np.zeros(n + 1)
    b[-1] = 1.0
    v, *_ = np.linalg.lstsq(a, b, rcond=None)
    v = np.maximum(v, 0.0)
    v /= v.sum()
    residual = float(np.abs(v @ m - v).sum())
    if residual > STATIONARY_RESIDUAL_TOL:
        raise RuntimeError(f"stationary solve residual {residual:.3g} exceeds tolerance")
    return v


def _as_vector(kernel: Kernel, init) -> np.ndarray:
    """Accept an InitialMeasure, a flat state index, a state tuple, or a raw
    probability vector."""
    if isinstance(init, InitialMeasure):
        if init.codec != kernel.codec:
            raise ValueError("initial measure codec does not match kernel codec")
        return np.array(init.vector, dtype=float)
    if isinstance(init, (int, np.integer)):
        v = np.zeros(kernel.codec.size)
        v[int(init)] = 1.0
        return v
    if isinstance(init, tuple):
        v = np.zeros(kernel.codec.size)
        v[kernel.codec.encode(init)] = 1.0
        return v
    v = np.asarray(init, dtype=float)
    if v.shape != (kernel.codec.size,):
        raise ValueError("initial vector length does not match kernel size")
    return v.copy()


def tv_curve(kernel: Kernel, init, target: np.ndarray, nmax: int) -> np.ndarray:
    """Exact distance-to-target curve: entry n is tv(init M^n, target) for
    n = 0..nmax, via iterated vector-matrix products."""
    if nmax < 1:
        raise ValueError("nmax must be >= 1")
    target = np.asarray(target, dtype=float)
    v = _as_vector(kernel, init)
    curve = np.empty(nmax + 1)
    curve[0] = tv(v, target)
    for n in range(1, nmax + 1):
        v = v @ kernel.matrix
        curve[n] = tv(v, target)
    return curve


def _tv_rows(mat: np.ndarray, target: np.ndarray) -> np.ndarray:
    return 0.5 * np.abs(mat - target[None, :]).sum(axis=1)


@dataclass
class Prop1Report:
    """Per-step record of the two total-variation inequality chains.

    ``chain1`` rows are worst-case (over start states) triples
    (block sweep at n, z-marginal at n-1, out-of-order from nu_z at n-2),
    verified for n >= 3; the n = 2 triple is reported without a verdict
    because its rightmost term depends on the dummy Y slot of nu_z.
    ``chain2`` rows are (out-of-order at n, xy-marginal from nu_xz at n-1,
    rotated from lifted nu_xz at n-1), verified for n >= 1. Verification is
    per start state, not on the worst-case aggregates.
    """

    nmax: int
    tol: float
    n_values: np.ndarray
    chain1: np.ndarray  # (nmax, 3), NaN where a term is undefined
    chain2: np.ndarray  # (nmax, 3)
    chain1_ok: list  # per n: True/False for n >= 3, None below
    chain2_ok: list  # per n: True/False
    chain1_verdict: bool
    chain2_verdict: bool
    max_violation: float  # most positive (lhs - rhs) over all checked pairs
    violations: list  # dicts: chain, n, state, lhs, rhs

    @property
    def verdict(self) -> bool:
        return self.chain1_verdict and self.chain2_verdict

    def to_json_dict(self) -> dict:
        def cell(x: float):
            return None if np.isnan(x) else float(x)

        return {
            "nmax": self.nmax,
            "tol": self.tol,
            "verdict": self.verdict,
            "chain1_verdict": self.chain1_verdict,
            "chain2_verdict": self.chain2_verdict,
            "max_violation": float(self.max_violation),
            "violations": self.violations,
            "rows": [
                {
                    "n": int(n),
                    "chain1": [cell(x) for x in self.chain1[i]],
                    "chain1_ok": self.chain1_ok[i],
                    "chain2": [cell(x) for x in self.chain2[i]],
                    "chain2_ok": self.chain2_ok[i],
                }
                for i, n in enumerate(self.n_values)
            ],
        }


def check_prop1(pmf: JointPmf3, nmax: int, tol: float = INEQ_SLACK) -> Prop1Report:
    """Verify both inequality chains from every start state for n up to nmax.

    Chain 1, for every start (x, y, z) and n >= 3:
        tv(block^n from state, target)
          <= tv(z-marginal^(n-1) from z, z-target)
          <= tv(nu_z * ooo^(n-2), ooo-target)
    Chain 2, for every start (y, z, x) and n >= 1:
        tv(ooo^n from state, ooo-target)
          <= tv(nu_xz * xy-marginal^(n-1), xy-target)
          <= tv(lifted nu_xz * rotated^(n-1), target)
    """
    if nmax < 3:
        raise ValueError("nmax must be >= 3")
    dims = pmf.dims
    k_block = block_kernel(pmf)
    k_z = marginal_z_kernel(pmf)
    k_ooo = ooo_kernel(pmf)
    k_xy = marginal_xy_kernel(pmf)
    k_rot = rotated_block_kernel(pmf)

    star = pi_star(pmf)
    pi_xyz = flatten_to_codec(pmf, k_block.codec)
    pi_z = flatten_to_codec(pmf, k_z.codec)
    pi_star_yzx = flatten_to_codec(star, k_ooo.codec)
    pi_xy = flatten_to_codec(pmf, k_xy.codec)
    pi_zxy = flatten_to_codec(pmf, k_rot.codec)

    # tv arrays indexed [n, start]; powers built by iterated products
    def power_curves(mat: np.ndarray, rows0: np.ndarray, target: np.ndarray, top: int):
        out = np.empty((top + 1, rows0.shape[0]))
        cur = rows0.copy()
        out[0] = _tv_rows(cur, target)
        for n in range(1, top + 1):
            cur = cur @ mat
            out[n] = _tv_rows(cur, target)
        return out

    s = k_block.codec.size
    tv_block = power_curves(k_block.matrix, np.eye(s), pi_xyz, nmax)
    tv_z = power_curves(k_z.matrix, np.eye(dims.nz), pi_z, nmax - 1)
    nu_z_bank = np.vstack([nu_z(pmf, z).vector for z in range(dims.nz)])
    tv_nu_z = power_curves(k_ooo.matrix, nu_z_bank, pi_star_yzx, nmax - 2)

    tv_ooo = power_curves(k_ooo.matrix, np.eye(s), pi_star_yzx, nmax)
    pairs = [(x, z) for x in range(dims.nx) for z in range(dims.nz)]
    measures = [nu_xz(pmf, x, z) for x, z in pairs]
    nu_flat_bank = np.vstack([m.flat.vector for m in measures])
    nu_lift_bank = np.vstack([m.lifted.vector for m in measures])
    tv_nu_xy = power_curves(k_xy.matrix, nu_flat_bank, pi_xy, nmax - 1)
    tv_nu_rot = power_curves(k_rot.matrix, nu_lift_bank, pi_zxy, nmax - 1)

    # coordinate maps from kernel states to the index of the bound they obey
    z_of_block_state = np.array([k_block.codec.decode(i)[2] for i in range(s)])
    pair_index = {xz: i for i, xz in enumerate(pairs)}
    ooo_states = [k_ooo.codec.decode(i) for i in range(s)]
    xz_of_ooo_state = np.array([pair_index[(x, z)] for (y, z, x) in ooo_states])

    chain1 = np.full((nmax, 3), np.nan)
    chain2 = np.full((nmax, 3), np.nan)
    chain1_ok: list = [None] * nmax
    chain2_ok: list = [None] * nmax
    max_violation = -np.inf
    violations: list = []

    def record(chain: int, n: int, codec, gaps: np.ndarray, lhs: np.ndarray, rhs: np.ndarray):
        nonlocal max_violation
        max_violation = max(max_violation, float(gaps.max()))
        if gaps.max() > tol and len(violations) < 20:
            bad = int(np.argmax(gaps))
            violations.append(
                {
                    "chain": chain,
                    "n": n,
                    "state": codec.state_label(bad) if codec is not None else bad,
                    "lhs": float(lhs[bad]),
                    "rhs": float(rhs[bad]),
                }
            )

    for n in range(1, nmax + 1):
        i = n - 1
        chain1[i, 0] = tv_block[n].max()
        chain1[i, 1] = tv_z[n - 1].max()
        if n >= 2:
            chain1[i, 2] = tv_nu_z[n - 2].max()
        if n >= 3:
            lhs = tv_block[n]
            mid = tv_z[n - 1][z_of_block_state]
            record(1, n, k_block.codec, lhs - mid, lhs, mid)
            mid_z = tv_z[n - 1]
            rhs_z = tv_nu_z[n - 2]
            record(1, n, k_z.codec, mid_z - rhs_z, mid_z, rhs_z)
            chain1_ok[i] = bool(
                (lhs - mid).max() <= tol and (mid_z - rhs_z).max() <= tol
            )

        lhs2 = tv_ooo[n]
        mid2 = tv_nu_xy[n - 1][xz_of_ooo_state]
        record(2, n, k_ooo.codec, lhs2 - mid2, lhs2, mid2)
        mid2_pair = tv_nu_xy[n - 1]
        rhs2_pair = tv_nu_rot[n - 1]
        record(2, n, None, mid2_pair - rhs2_pair, mid2_pair, rhs2_pair)
        chain2_ok[i] = bool(
            (lhs2 - mid2).max() <= tol and (mid2_pair - rhs2_pair).max() <= tol
        )
        chain2[i] = (lhs2.max(), mid2_pair.max(), rhs2_pair.max())

    return Prop1Report(
        nmax=nmax,
        tol=tol,
        n_values=np.arange(1, nmax + 1),
        chain1=chain1,
        chain2=chain2,
        chain1_ok=chain1_ok,
        chain2_ok=chain2_ok,
        chain1_verdict=all(ok for ok in chain1_ok if ok is not None),
        chain2_verdict=all(chain2_ok),
        max_violation=float(max_violation),
        violations=violations,
    )


@dataclass
class RateEqualityReport:
    """Spectral comparison across the five kernels.

    The verdict asserts (a) the nonzero eigenvalue multisets of the block,
    rotated, xy-marginal, and z-marginal kernels agree, and (b) the
    out-of-order kernel's slem equals their common slem.
    """

    verdict: bool
    tol: float
    spectra: dict  # name -> SpectrumSummary
    multiset_gap: float
    slem_gap: float

    def to_json_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "tol": self.tol,
            "multiset_gap": float(self.multiset_gap),
            "slem_gap": float(self.slem_gap),
            "slems": {k: float(v.slem) for k, v in self.spectra.items()},
            "spectra": {k: v.to_json_dict() for k, v in self.spectra.items()},
        }


def nonzero_eigs(kernel: Kernel, zero_tol: float = RATE_TOL) -> np.ndarray:
    """Eigenvalues with modulus above zero_tol, sorted by (real, imag)."""
    eigs = np.linalg.eigvals(kernel.matrix)
    return np.sort_complex(eigs[np.abs(eigs) > zero_tol])


def _multiset_gap(a: np.ndarray, b: np.ndarray) -> float:
    """Largest matched-pair distance between two eigenvalue multisets, after
    padding the shorter one with zeros (borderline-tiny eigenvalues then
    still pair up within tolerance)."""
    n = max(a.size, b.size)
    if n == 0:
        return 0.0
    a = np.sort_complex(np.concatenate([a, np.zeros(n - a.size)]))
    b = np.sort_complex(np.concatenate([b, np.zeros(n - b.size)]))
    return float(np.abs(a - b).max())


def check_rate_equality(pmf: JointPmf3, tol: float = RATE_TOL) -> RateEqualityReport:
    """Check that all five kernels converge at the same geometric rate."""
    kernels = {
        "block": block_kernel(pmf),
        "rotated": rotated_block_kernel(pmf),
        "marginal_xy": marginal_xy_kernel(pmf),
        "marginal_z": marginal_z_kernel(pmf),
        "ooo": ooo_kernel(pmf),
    }
    spectra = {name: spectrum(k) for name, k in kernels.items()}
    base = nonzero_eigs(kernels["block"], tol)
    multiset_gap = max(
        _multiset_gap(base, nonzero_eigs(kernels[name], tol))
        for name in ("rotated", "marginal_xy", "marginal_z")
    )
    slem_gap = abs(spectra["ooo"].slem - spectra["block"].slem)
    return RateEqualityReport(
        verdict=bool(multiset_gap <= tol and slem_gap <= tol),
        tol=tol,
        spectra=spectra,
        multiset_gap=multiset_gap,
        slem_gap=float(slem_gap),
    )


def check_pistar_invariance(pmf: JointPmf3) -> tuple[float, float]:
    """L1 residuals (pi_star under the out-of-order kernel, pmf under the
    out-of-order kernel). The first is ~0 always; the second is the
    wrongness demonstration and is strictly positive for generic pmfs."""
    k_ooo = ooo_kernel(pmf)
    star_vec = flatten_to_codec(pi_star(pmf), k_ooo.codec)
    pi_vec = flatten_to_codec(pmf, k_ooo.codec)
    r_star = float(np.abs(star_vec @ k_ooo.matrix - star_vec).sum())
    r_pi = float(np.abs(pi_vec @ k_ooo.matrix - pi_vec).sum())
    return r_star, r_pi


#: Marginal subsets compared by check_marginal_agreement; all but the last
#: are preserved exactly by pi_star.
MARGINAL_SUBSETS = (("X",), ("Y",), ("Z",), ("X", "Z"), ("Y", "Z"), ("X", "Y"))


def check_marginal_agreement(pmf: JointPmf3) -> dict[str, float]:
    """TV between the pmf and pi_star on each marginal subset."""
    star = pi_star(pmf)
    out: dict[str, float] = {}
    for subset in MARGINAL_SUBSETS:
        key = "".join(subset)
        out[key] = tv(marginal(pmf, subset).table, marginal(star, subset).table)
    return out


@dataclass
class ChainReport:
    """Everything the exact-analysis path computes for one pmf."""

    dims: tuple[int, int, int]
    stationary_residuals: dict  # kernel name -> ||v M - v||_1
    stationary_target_gap: dict  # kernel name -> ||v - expected target||_1
    rate: RateEqualityReport
    invariance: tuple[float, float]
    marginal_tv: dict
    prop1: Prop1Report

    def to_json_dict(self) -> dict:
        return {
            "dims": list(self.dims),
            "stationary_residuals": {k: float(v) for k, v in self.stationary_residuals.items()},
            "stationary_target_gap": {k: float(v) for k, v in self.stationary_target_gap.items()},
            "rates": self.rate.to_json_dict(),
            "invariance": {
                "pistar_residual": float(self.invariance[0]),
                "pi_residual": float(self.invariance[1]),
            },
            "marginal_tv": {k: float(v) for k, v in self.marginal_tv.items()},
            "prop1": self.prop1.to_json_dict(),
        }


def analyze(pmf: JointPmf3, nmax: int = 50) -> ChainReport:
    """Run every check against one pmf and bundle the results."""
    star = pi_star(pmf)
    kernels = {
        "block": (block_kernel(pmf), pmf),
        "rotated": (rotated_block_kernel(pmf), pmf),
        "marginal_xy": (marginal_xy_kernel(pmf), pmf),
        "marginal_z": (marginal_z_kernel(pmf), pmf),
        "ooo": (ooo_kernel(pmf), star),
    }
    residuals = {}
    target_gap = {}
    for name, (kernel, target_pmf) in kernels.items():
        v = stationary(kernel)
        residuals[name] = float(np.abs(v @ kernel.matrix - v).sum())
        target_gap[name] = float(
            np.abs(v - flatten_to_codec(target_pmf, kernel.codec)).sum()
        )
    return ChainReport(
        dims=pmf.dims.shape,
        stationary_residuals=residuals,
        stationary_target_gap=target_gap,
        rate=check_rate_equality(pmf),
        invariance=check_pistar_invariance(pmf),
        marginal_tv=check_marginal_agreement(pmf),
        prop1=check_prop1(pmf, nmax),
    )
