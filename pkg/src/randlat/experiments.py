"""Experiment runners behind the CLI: verification suite, sharpness sweeps, spectra."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field, fields, replace

import numpy as np
from scipy.stats import ks_2samp

from randlat import estimators as est
from randlat.constants import rogers_constant, unit_ball_volume
from randlat.counting import brute_force_count, count_region, required_coeff_bound
from randlat.errors import ConfigError, TimeBudgetExceeded
from randlat.lattice import AffineUnimodularLattice, UnimodularLattice, shortest_vector
from randlat.regions import (
    Annulus,
    Ball,
    Box,
    RadialSet,
    annulus_of_volume,
    ball_of_volume,
    cube_of_volume,
    radial_volume,
    thin_box,
)
from randlat.sampling import SamplerSpec, sample_lattice, sample_xd_siegel, trial_rng
from randlat.spectra import verify_spectrum_bound

CSV_HEADER = "# randlat-csv v1"
CSV_COLUMNS = [
    "experiment_id", "d", "setting", "sampler", "region_json", "volume", "n_trials",
    "statistic", "estimate", "std_error", "ci_lo", "ci_hi", "theory_value_or_bound",
    "satisfied", "seed", "wall_time_ms",
]
SWEEP_COLUMNS = [
    "family", "shape_param", "d", "setting", "sampler", "volume", "n_trials", "p_hat", "se",
    "normalized", "normalized_bound", "satisfied", "seed", "wall_time_ms",
]
VERIFY_CHECKS = ("mean", "variance", "second_moment", "pair", "hole", "dim3", "regular",
                 "spectra", "ks", "oracle")
SWEEP_FAMILIES = ("ball", "thinbox", "annulus")
IDENTITY_SE = 4.0


def default_sampler(d):
    return "exact2" if d == 2 else "siegel" if d <= 4 else "hecke"


@dataclass
class ExperimentConfig:
    d: int = 2
    setting: str = "affine"
    sampler: str | None = None
    hecke_prime: int = 10007
    trials: int = 100_000
    seed: int = 42
    out: str | None = None
    plot: str | None = None
    # verify
    trials_d3: int = 10_000
    ks_trials: int = 10_000
    bootstrap: int = 1000
    checks: list = field(default_factory=lambda: list(VERIFY_CHECKS))
    corrupt_sampler: bool = False
    time_budget: float = 600.0
    workers: int = 1
    # sweep
    family: str = "ball"
    volumes: list = field(default_factory=lambda: [1, 2, 5, 10, 20, 50])
    shape_params: list | None = None
    # spectra
    radial: list | None = None
    # sample / count
    count: int = 1
    affine: bool = False
    basis: str | None = None
    offset: list | None = None
    region: dict | None = None
    list_points: bool = False

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate()
        return cfg

    def validate(self):
        if self.setting not in est.SETTINGS:
            raise ConfigError(f"setting must be one of {est.SETTINGS}")
        if self.trials < 1 or self.trials_d3 < 1 or self.ks_trials < 1:
            raise ConfigError("trial counts must be positive")
        bad = set(self.checks) - set(VERIFY_CHECKS)
        if bad:
            raise ConfigError(f"unknown checks {sorted(bad)}")
        self.sampler_spec()

    def sampler_spec(self, d=None, method=None) -> SamplerSpec:
        d = self.d if d is None else d
        method = method or (self.sampler if d == self.d and self.sampler else default_sampler(d))
        return SamplerSpec(method, d, self.hecke_prime, skip_rejection=self.corrupt_sampler)


@dataclass
class Row:
    experiment_id: str
    d: int
    setting: str
    sampler: str
    region_json: str
    volume: float
    n_trials: int
    statistic: str
    estimate: float
    std_error: float
    ci_lo: float
    ci_hi: float
    theory_value_or_bound: float
    satisfied: str
    seed: int
    wall_time_ms: int = 0


def _flag(ok):
    return "true" if ok else "false"


def _row(eid, spec, setting, region_json, volume, statistic, r: est.EstimateResult, theory, ok, t0):
    return Row(eid, spec.d, setting, spec.method, region_json, volume, r.n_trials, statistic,
               r.estimate, r.std_error, r.ci_lo, r.ci_hi, theory, _flag(ok), r.seed,
               int((time.monotonic() - t0) * 1000))


def _rjson(R):
    return json.dumps(R.to_json(), sort_keys=True)


def _skipped(eid, spec, setting, statistic, n, seed, t0):
    nan = math.nan
    return Row(eid, spec.d, setting, spec.method, "", nan, n, statistic, nan, nan, nan, nan, nan,
               "skipped", seed, int((time.monotonic() - t0) * 1000))


def identity_regions(d):
    """Ball, cube and annulus families at volumes 1, 5, 20."""
    out = []
    for fam, make in (("ball", ball_of_volume), ("box", cube_of_volume), ("annulus", annulus_of_volume)):
        for V in (1, 5, 20):
            out.append((f"{fam}.v{V}", make(V, d)))
    return out


HOLE_VOLUMES = (1, 9, 20, 50)
REGULAR_VOLUMES = (50, 100, 200)


def off_origin_ball(V, d):
    """Ball of volume V whose center sits two radii from the origin, so 0 is outside."""
    r = (V / unit_ball_volume(d)) ** (1.0 / d)
    c = np.zeros(d)
    c[0] = 2 * r
    return Ball(c, r)


def pair_configs():
    ball = Ball([0.0, 0.0], 2.0)
    return [
        ("disjoint", Box([0.0, 0.0], [3.0, 1.0]), Box([0.0, 2.0], [3.0, 3.0])),
        ("nested", Box([0.0, 0.0], [2.0, 1.0]), Box([0.0, 0.0], [2.0, 2.0])),
        ("equal", ball, Ball([0.0, 0.0], 2.0)),
    ]


# -- individual check groups ------------------------------------------------

def _affine2_block(cfg, spec, checks):
    """Checks sharing one pool of affine draws in the configured dimension."""
    rows = []
    regions = []
    idr = identity_regions(spec.d)
    want_ident = "mean" in checks or "variance" in checks
    if want_ident:
        regions += [R for _, R in idr]
    if "second_moment" in checks:
        regions.append(Ball(np.zeros(spec.d), 2.0))
    pairs = pair_configs() if "pair" in checks and spec.d == 2 else []
    for _, A, B in pairs:
        regions += [A, B]
    holes = [ball_of_volume(V, spec.d) for V in HOLE_VOLUMES] if "hole" in checks else []
    regions += holes
    if not regions:
        return rows
    n, seed = cfg.trials, cfg.seed
    t0 = time.monotonic()
    counts = est.draw_counts(spec, regions, n, seed, "affine", workers=cfg.workers,
                             time_budget=cfg.time_budget)
    col = 0
    if want_ident:
        for name, R in idr:
            c = counts[:, col]
            col += 1
            V = R.volume()
            if "mean" in checks:
                m = est.mean_result(c, seed)
                rows.append(_row(f"mean.{name}", spec, "affine", _rjson(R), V, "mean", m, V,
                                 abs(m.estimate - V) <= IDENTITY_SE * m.std_error, t0))
            if "variance" in checks:
                v = est.variance_result(c, seed, cfg.bootstrap)
                rows.append(_row(f"variance.{name}", spec, "affine", _rjson(R), V, "variance", v, V,
                                 v.ci_lo <= V <= v.ci_hi, t0))
    if "second_moment" in checks:
        R = regions[col]
        c = counts[:, col]
        col += 1
        V = R.volume()
        target = V * V + V
        m = est.mean_result(c * c, seed)
        rows.append(_row("second_moment.ball_r2", spec, "affine", _rjson(R), V, "second_moment", m,
                         target, abs(m.estimate - target) <= IDENTITY_SE * m.std_error, t0))
    for name, A, B in pairs:
        ca, cb = counts[:, col], counts[:, col + 1]
        col += 2
        target = est.pair_moment_target(A, B)
        m = est.mean_result(ca * cb, seed)
        rj = json.dumps([A.to_json(), B.to_json()], sort_keys=True)
        rows.append(_row(f"pair.{name}", spec, "affine", rj, A.volume(), "pair_moment", m, target,
                         abs(m.estimate - target) <= IDENTITY_SE * m.std_error, t0))
    for V, R in zip(HOLE_VOLUMES, holes):
        c = counts[:, col]
        col += 1
        p = est.proportion_result(c == 0, seed)
        bound = est.theoretical_bounds(R.volume(), spec.d, "affine")
        rep = est.bound_report(p, bound)
        rows.append(_row(f"hole.ball.v{V}", spec, "affine", _rjson(R), R.volume(), "hole_prob", p,
                         bound, rep.satisfied, t0))
        norm = (1 + R.volume()) * p.estimate
        nse = (1 + R.volume()) * p.std_error
        nres = est.EstimateResult(norm, nse, (1 + R.volume()) * p.ci_lo, (1 + R.volume()) * p.ci_hi,
                                  p.n_trials, seed)
        rows.append(_row(f"hole_normalized.ball.v{V}", spec, "affine", _rjson(R), R.volume(),
                         "normalized_hole", nres, 1.0, norm - 3 * nse < 1.0, t0))
    return rows


def _dim3_block(cfg):
    spec = cfg.sampler_spec(3, "siegel")
    sub = replace(cfg, trials=cfg.trials_d3)
    rows = _affine2_block(sub, spec, {"mean", "hole"})
    for r in rows:
        r.experiment_id = "dim3." + r.experiment_id
    return rows


def _regular_block(cfg):
    spec = cfg.sampler_spec(2)
    regions = [off_origin_ball(V, 2) for V in REGULAR_VOLUMES]
    t0 = time.monotonic()
    counts = est.draw_counts(spec, regions, cfg.trials, cfg.seed, "regular", workers=cfg.workers,
                             time_budget=cfg.time_budget)
    rows = []
    for j, (V, R) in enumerate(zip(REGULAR_VOLUMES, regions)):
        p = est.proportion_result(counts[:, j] == 0, cfg.seed)
        bound = est.theoretical_bounds(R.volume(), 2, "regular")
        rows.append(_row(f"regular.hole.ball.v{V}", spec, "regular", _rjson(R), R.volume(), "hole_prob",
                         p, bound, est.bound_report(p, bound).satisfied, t0))
    return rows


SPECTRA_CASES = ((2, ((0.1, 3.0),)), (3, ((0.2, 2.5),)))


def spectra_row(spec, S: RadialSet, n, seed, time_budget=None, eid=None):
    t0 = time.monotonic()
    rep = verify_spectrum_bound(spec, S, n, seed, time_budget=time_budget)
    eid = eid or f"spectra.d{spec.d}"
    return _row(eid, spec, "regular", json.dumps(S.to_json(), sort_keys=True), radial_volume(S, spec.d),
                "spectrum_hole_prob", rep.empirical, rep.bound, rep.satisfied, t0)


def _spectra_block(cfg):
    rows = []
    for d, iv in SPECTRA_CASES:
        spec = cfg.sampler_spec(d, "exact2" if d == 2 else "siegel")
        n = cfg.trials if d == 2 else cfg.trials_d3
        rows.append(spectra_row(spec, RadialSet(iv), n, cfg.seed, cfg.time_budget))
    return rows


def _ks_row(eid, spec, x, y, threshold, seed, t0, statistic):
    ks = float(ks_2samp(x, y).statistic)
    r = est.EstimateResult(ks, 0.0, ks, ks, len(x), seed)
    return _row(eid, spec, "regular", "", math.nan, statistic, r, threshold, ks < threshold, t0)


def _ks_block(cfg):
    n, seed = cfg.ks_trials, cfg.seed
    t0 = time.monotonic()
    exact = cfg.sampler_spec(2, "exact2")
    siegel = cfg.sampler_spec(2, "siegel")
    hecke = SamplerSpec("hecke", 2, cfg.hecke_prime)

    def minima(spec, stream_seed):
        return np.array([np.linalg.norm(shortest_vector(sample_lattice(spec, trial_rng(stream_seed, i))))
                         for i in range(n)])

    # independent streams per sampler: the two-sample KS test assumes independent samples
    lam_exact = minima(exact, seed)
    lam_siegel = minima(siegel, seed + 1)
    rows = [_ks_row("ks.exact2_vs_siegel.y", siegel, 1 / lam_exact**2, 1 / lam_siegel**2, 0.03, seed, t0,
                    "ks_y_marginal")]
    t0 = time.monotonic()
    lam_hecke = minima(hecke, seed + 2)
    rows.append(_ks_row("ks.exact2_vs_hecke.lambda1", hecke, lam_exact, lam_hecke, 0.05, seed, t0,
                        "ks_shortest_norm"))
    return rows


def random_count_instance(rng, d):
    """A (lattice, region) pair for oracle comparison, from a seeded generator."""
    L = sample_xd_siegel(d, rng)
    # scramble the basis with a small unimodular integer matrix so reduction has work to do
    U = np.eye(d, dtype=np.int64)
    for _ in range(d):
        i, j = rng.choice(d, size=2, replace=False)
        U[:, i] += int(rng.choice([-1, 1])) * U[:, j]
    L = UnimodularLattice(L.basis @ U)
    lat = AffineUnimodularLattice(L, rng.normal(size=d)) if rng.random() < 0.5 else L
    c = rng.uniform(-1.5, 1.5, size=d)
    kind = rng.integers(3)
    if kind == 0:
        R = Ball(c, rng.uniform(0.3, 2.5))
    elif kind == 1:
        R = Box(c, c + rng.uniform(0.3, 3.0, size=d))
    else:
        r_in = rng.uniform(0.1, 1.5)
        R = Annulus(c, r_in, r_in + rng.uniform(0.2, 1.5))
    return lat, R


def _oracle_block(cfg):
    t0 = time.monotonic()
    rng = trial_rng(cfg.seed, 2**31)
    mismatches = 0
    total = 100
    for k in range(total):
        lat, R = random_count_instance(rng, 2 if k % 2 == 0 else 3)
        K = required_coeff_bound(lat, R)
        if count_region(lat, R).count != brute_force_count(lat, R, K).count:
            mismatches += 1
    r = est.EstimateResult(float(mismatches), 0.0, float(mismatches), float(mismatches), total, cfg.seed)
    spec = SamplerSpec("siegel", 3)
    return [_row("oracle.count_region_vs_brute_force", spec, "mixed", "", math.nan, "mismatches", r, 0.0,
                 mismatches == 0, t0)]


def run_verify(cfg: ExperimentConfig):
    """Run the verification suite; returns (exit_code, rows)."""
    checks = set(cfg.checks)
    spec = cfg.sampler_spec(2)
    blocks = []
    first = checks & {"mean", "variance", "second_moment", "pair", "hole"}
    if first:
        blocks.append(("affine", lambda: _affine2_block(cfg, spec, first)))
    if "dim3" in checks:
        blocks.append(("dim3", lambda: _dim3_block(cfg)))
    if "regular" in checks:
        blocks.append(("regular", lambda: _regular_block(cfg)))
    if "spectra" in checks:
        blocks.append(("spectra", lambda: _spectra_block(cfg)))
    if "ks" in checks:
        blocks.append(("ks", lambda: _ks_block(cfg)))
    if "oracle" in checks:
        blocks.append(("oracle", lambda: _oracle_block(cfg)))
    rows = []
    for name, fn in blocks:
        t0 = time.monotonic()
        try:
            rows += fn()
        except TimeBudgetExceeded:
            rows.append(_skipped(f"{name}.timeout", spec, cfg.setting, name, cfg.trials, cfg.seed, t0))
    code = 0 if rows and all(r.satisfied == "true" for r in rows) else 1
    return code, rows


# -- sweep ------------------------------------------------------------------

@dataclass
class SweepRow:
    family: str
    shape_param: float
    d: int
    setting: str
    sampler: str
    volume: float
    n_trials: int
    p_hat: float
    se: float
    normalized: float
    normalized_bound: float
    satisfied: str
    seed: int
    wall_time_ms: int = 0


def sweep_region(family, V, shape, d, setting):
    if family == "ball":
        R = ball_of_volume(V, d)
    elif family == "thinbox":
        R = thin_box(V, shape, d)
    elif family == "annulus":
        R = annulus_of_volume(V, d, ratio=shape)
    else:
        raise ConfigError(f"family must be one of {SWEEP_FAMILIES}")
    if setting == "regular":
        # move the region off the origin: a centred symmetric convex body of
        # volume >= 2^d always holds a nonzero lattice point
        c, r = R.bounding_ball()
        shift = np.zeros(d)
        shift[-1] = 2 * r
        R = _translate(R, shift)
    return R


def _translate(R, shift):
    if isinstance(R, Ball):
        return Ball(R.center + shift, R.radius)
    if isinstance(R, Box):
        return Box(R.lo + shift, R.hi + shift)
    return Annulus(R.center + shift, R.r_in, R.r_out)


DEFAULT_SHAPES = {"ball": [1.0], "thinbox": [4.0], "annulus": [0.5]}


def run_sweep(cfg: ExperimentConfig):
    if cfg.family not in SWEEP_FAMILIES:
        raise ConfigError(f"family must be one of {SWEEP_FAMILIES}")
    vols = [float(v) for v in cfg.volumes]
    if not vols:
        raise ConfigError("volume grid is empty")
    if any(b <= a for a, b in zip(vols, vols[1:])) or vols[0] <= 0:
        raise ConfigError("volume grid must be positive and strictly ascending")
    shapes = [float(s) for s in (cfg.shape_params or DEFAULT_SHAPES[cfg.family])]
    spec = cfg.sampler_spec()
    grid = [(V, s) for s in shapes for V in vols]
    regions = [sweep_region(cfg.family, V, s, cfg.d, cfg.setting) for V, s in grid]
    t0 = time.monotonic()
    counts = est.draw_counts(spec, regions, cfg.trials, cfg.seed, cfg.setting, workers=cfg.workers,
                             time_budget=cfg.time_budget)
    ms = int((time.monotonic() - t0) * 1000)
    rows = []
    for j, ((V, s), R) in enumerate(zip(grid, regions)):
        p = est.proportion_result(counts[:, j] == 0, cfg.seed)
        vol = R.volume()
        if cfg.setting == "affine":
            scale, nbound = 1 + vol, 1.0
        else:
            scale, nbound = vol, rogers_constant(cfg.d)
        normalized = scale * p.estimate
        ok = normalized - 3 * scale * p.std_error < nbound
        rows.append(SweepRow(cfg.family, s, cfg.d, cfg.setting, spec.method, vol, p.n_trials, p.estimate,
                             p.std_error, normalized, nbound, _flag(ok), cfg.seed, ms))
    code = 0 if all(r.satisfied == "true" for r in rows) else 1
    return code, rows


def sweep_svg(rows, width=640, height=420):
    """Polyline plot of normalized hole probability against volume (log x axis)."""
    pad = 60
    xs = [math.log10(r.volume) for r in rows]
    ys = [r.normalized for r in rows]
    bound = rows[0].normalized_bound
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    y1 = max(max(ys), bound) * 1.1
    y1 = y1 if y1 > 0 else 1.0

    def px(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def py(y):
        return height - pad - y / y1 * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{py(bound):.2f}" x2="{width - pad}" y2="{py(bound):.2f}" '
           'stroke="red" stroke-dasharray="6,4"/>',
           f'<text x="{width - pad}" y="{py(bound) - 6:.2f}" text-anchor="end" font-size="12" fill="red">'
           f'bound {bound:.4g}</text>']
    for k in range(5):
        yv = y1 * k / 4
        out.append(f'<text x="{pad - 6}" y="{py(yv) + 4:.2f}" text-anchor="end" font-size="11">{yv:.3g}</text>')
    colors = ["steelblue", "darkorange", "seagreen", "purple", "brown"]
    shapes = sorted({r.shape_param for r in rows})
    for k, s in enumerate(shapes):
        sel = [r for r in rows if r.shape_param == s]
        pts = " ".join(f"{px(math.log10(r.volume)):.2f},{py(r.normalized):.2f}" for r in sel)
        col = colors[k % len(colors)]
        out.append(f'<polyline points="{pts}" fill="none" stroke="{col}" stroke-width="2"/>')
        out.append(f'<text x="{width - pad}" y="{pad + 14 * k:.0f}" text-anchor="end" font-size="12" '
                   f'fill="{col}">{sel[0].family} shape={s:g}</text>')
    for r in rows:
        out.append(f'<text x="{px(math.log10(r.volume)):.2f}" y="{height - pad + 16}" text-anchor="middle" '
                   f'font-size="11">{r.volume:g}</text>')
    out.append(f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">volume |A|</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


# -- spectra ----------------------------------------------------------------

def parse_radial(radial):
    if isinstance(radial, str):
        try:
            radial = json.loads(radial)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed radial JSON: {exc}") from exc
    try:
        return RadialSet(tuple((float(a), float(b)) for a, b in radial))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid radial set {radial!r}: {exc}") from exc


def run_spectra(cfg: ExperimentConfig):
    if cfg.radial is None:
        raise ConfigError("spectra needs --radial")
    S = parse_radial(cfg.radial)
    spec = cfg.sampler_spec()
    try:
        row = spectra_row(spec, S, cfg.trials, cfg.seed, cfg.time_budget)
    except TimeBudgetExceeded:
        row = _skipped(f"spectra.d{cfg.d}", spec, "regular", "spectrum_hole_prob", cfg.trials, cfg.seed,
                       time.monotonic())
    return (0 if row.satisfied == "true" else 1), [row]


# -- output -------------------------------------------------------------------

def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows, columns=CSV_COLUMNS):
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_fmt(getattr(r, c)) for c in columns])
    return buf.getvalue()


def strip_timing(csv_text):
    """CSV text with the wall_time_ms column removed, for determinism comparisons."""
    lines = csv_text.splitlines()
    body = list(csv.reader(lines[1:]))
    idx = body[0].index("wall_time_ms")
    return [lines[0]] + [",".join(r[:idx] + r[idx + 1:]) for r in body]
