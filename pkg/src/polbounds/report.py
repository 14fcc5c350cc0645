"""Report objects, scan tables and their serialized forms.

JSON reports are flat objects with a fixed key order; infinities are
serialized as null plus an explanatory flag so every consumer can parse
them.  CSV scans carry a comment header with the tool version and the full
argument echo, then fixed columns at 12 significant digits with LF line
endings, so identical inputs give byte-identical files.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import DegeneratePole, SingularQfi
from .holevo import hcrb_pole_limit, hcrb_stokes_grid, holevo_cost
from .polcore import (Scenario, StokesVector, grid_angles, modal_from_stokes,
                      stokes_on_sphere)
from .qfisher import qcrb_attainable, qcrb_closed_form, qcrb_cost
from .receivers import (ReceiverSpec, crb_cost, stokes_crb_grid,
                        stokes_receiver_bound, tetra_optimize_grid,
                        tetrahedron_optimize)

DOUBLE_HOMODYNE_FACTOR = 6.0
ORDERING_SLACK = 1e-9

BOUND_COLUMNS = ("crb_stokes", "crb_tetra", "tetra_x_opt", "qcrb", "hcrb")


@dataclass
class BoundReport:
    """All precision bounds evaluated at one Stokes point."""

    scenario: Scenario
    point: StokesVector
    crb_stokes: float
    crb_tetra: float
    tetra_x_opt: float
    qcrb: float
    hcrb: float
    double_homodyne_ref: float
    flags: list = field(default_factory=list)

    def ordering_violations(self, slack=ORDERING_SLACK):
        """Check qcrb <= hcrb <= 2 qcrb and hcrb <= finite receiver bounds."""
        out = []
        if self.qcrb > self.hcrb + slack:
            out.append(f"qcrb {self.qcrb} > hcrb {self.hcrb}")
        if self.hcrb > 2.0 * self.qcrb + slack:
            out.append(f"hcrb {self.hcrb} > 2*qcrb {2 * self.qcrb}")
        for name in ("crb_stokes", "crb_tetra"):
            v = getattr(self, name)
            if math.isfinite(v) and self.hcrb > v + slack:
                out.append(f"hcrb {self.hcrb} > {name} {v}")
        return out

    def to_dict(self):
        d = {
            "version": __version__,
            "power_known": self.scenario.power_known,
            "phase_known": self.scenario.phase_known,
            "s0": self.point.s0,
            "s1": self.point.s1,
            "s2": self.point.s2,
            "s3": self.point.s3,
        }
        flags = list(self.flags)
        for name in ("crb_stokes", "crb_tetra", "tetra_x_opt", "qcrb",
                     "hcrb", "double_homodyne_ref"):
            v = getattr(self, name)
            if v is not None and not math.isfinite(v):
                d[name] = None
                flags.append(f"{name}-nonfinite")
            else:
                d[name] = v
        d["flags"] = flags
        return d


def evaluate_bounds(s, scenario):
    """Evaluate every bound at ``s``, substituting analytic pole limits.

    At degenerate poles the interior engines refuse; the report then
    carries the continuous-limit values with provenance flags, and receiver
    bounds that genuinely diverge are reported infinite.
    """
    s.validate()
    p = modal_from_stokes(s)
    flags = []
    if p.phase_degenerate:
        flags.append("degenerate-pole")

    try:
        q = qcrb_cost(p, scenario)
    except (DegeneratePole, SingularQfi):
        q = qcrb_closed_form(s, scenario)
        flags.append("qcrb-analytic-limit")

    try:
        h = holevo_cost(p, scenario).cost_stokes
    except DegeneratePole:
        h = hcrb_pole_limit(s.s0, scenario)
        flags.append("hcrb-analytic-limit")

    try:
        c_st = crb_cost(p, ReceiverSpec("stokes"), scenario)
    except DegeneratePole:
        c_st = math.inf
    try:
        x_opt, c_tet = tetrahedron_optimize(p, scenario)
    except DegeneratePole:
        x_opt, c_tet = math.nan, math.inf

    if qcrb_attainable(p, scenario):
        flags.append("qcrb-attainable-pole")
    else:
        flags.append("qcrb-unattainable")

    return BoundReport(scenario, s, c_st, c_tet, x_opt, q, h,
                       DOUBLE_HOMODYNE_FACTOR * s.s0, flags)


def format_sig(x):
    """Fixed 12-significant-digit, locale-independent number format."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.11e}"


@dataclass
class ScanTable:
    """Sphere-scan results: one row per (theta, phi) grid point."""

    metadata: dict
    columns: tuple
    rows: np.ndarray

    def to_csv(self):
        header = (f"# polarimetry-bounds v{self.metadata['version']} "
                  f"{self.metadata['args']}")
        lines = [header, ",".join(self.columns)]
        for row in self.rows:
            lines.append(",".join(format_sig(v) for v in row))
        return "\n".join(lines) + "\n"

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def column(self, name):
        return self.rows[:, self.columns.index(name)]


def run_scan(n_theta, n_phi, s0, scenario, bounds=BOUND_COLUMNS, args=""):
    """Evaluate the requested bounds over a sphere grid (vectorized).

    Grid order is theta-major; assembly order is deterministic regardless
    of how the batched engines schedule their internal work.
    """
    thetas, phis = grid_angles(n_theta, n_phi)
    points = [stokes_on_sphere(t, f, s0) for t in thetas for f in phis]
    tgrid = np.repeat(thetas, n_phi)
    fgrid = np.tile(phis, n_theta)
    svals = np.array([pt.as_array() for pt in points])

    cols = {"theta": tgrid, "phi": fgrid, "s0": svals[:, 0],
            "s1": svals[:, 1], "s2": svals[:, 2], "s3": svals[:, 3]}
    want = []
    for name in bounds:
        if name in ("crb_tetra", "tetra_x_opt"):
            for pair in ("crb_tetra", "tetra_x_opt"):
                if pair not in want:
                    want.append(pair)
        elif name not in want:
            want.append(name)
    if "crb_stokes" in want:
        cols["crb_stokes"] = stokes_crb_grid(points, scenario)
    if "crb_tetra" in want:
        x_opt, c_tet = tetra_optimize_grid(points, scenario)
        cols["crb_tetra"] = c_tet
        cols["tetra_x_opt"] = x_opt
    if "qcrb" in want:
        cols["qcrb"] = np.array(
            [qcrb_cost(modal_from_stokes(pt), scenario) for pt in points])
    if "hcrb" in want:
        cols["hcrb"] = hcrb_stokes_grid(points, scenario)

    columns = ("theta", "phi", "s0", "s1", "s2", "s3") + tuple(want)
    rows = np.column_stack([cols[c] for c in columns])
    meta = {"version": __version__, "args": args,
            "scenario": scenario.label, "s0": s0,
            "grid": f"{n_theta}x{n_phi}"}
    return ScanTable(meta, columns, rows)


def render_scan_figure(table, path):
    """Render the scan's bound columns as inclination/azimuth heat maps."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    n_theta = len(np.unique(table.column("theta")))
    n_phi = len(np.unique(table.column("phi")))
    bound_cols = [c for c in table.columns
                  if c not in ("theta", "phi", "s0", "s1", "s2", "s3",
                               "tetra_x_opt")]
    fig, axes = plt.subplots(1, len(bound_cols),
                             figsize=(4.2 * len(bound_cols), 3.6),
                             squeeze=False)
    for ax, name in zip(axes[0], bound_cols):
        img = table.column(name).reshape(n_theta, n_phi)
        im = ax.imshow(img, origin="lower", aspect="auto",
                       extent=(0.0, 2.0 * math.pi, 0.0, math.pi))
        ax.set_xlabel("azimuth [rad]")
        ax.set_ylabel("inclination from S1 [rad]")
        ax.set_title(name)
        fig.colorbar(im, ax=ax)
    fig.suptitle(f"{table.metadata['scenario']}, S0={table.metadata['s0']}")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def dumps_report(obj):
    """Deterministic JSON for report dicts (insertion-ordered keys)."""
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def mse_report_dict(report, bound_report, args=""):
    """Flat serializable dict for a Monte-Carlo benchmark."""
    return {
        "version": __version__,
        "args": args,
        "estimator": report.estimator,
        "shots": report.shots,
        "seed": report.seed,
        "trials": report.trials,
        "excluded": report.excluded,
        "mse_s1": report.per_parameter_mse[0],
        "mse_s2": report.per_parameter_mse[1],
        "mse_s3": report.per_parameter_mse[2],
        "total": report.total,
        "bias_s1": report.bias[0],
        "bias_s2": report.bias[1],
        "bias_s3": report.bias[2],
        "stderr_s1": report.stderr[0],
        "stderr_s2": report.stderr[1],
        "stderr_s3": report.stderr[2],
        "bounds": bound_report.to_dict(),
    }
