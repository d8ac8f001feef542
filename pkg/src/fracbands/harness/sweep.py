"""Execute a sweep plan cell by cell and persist one record per cell."""
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
import logging
import os
from pathlib import Path
import time

from .. import __version__
from ..bands import classify_inversion, compute_band_structure, effective_mass, gap_curve
from ..exceptions import FracBandsError
from ..solver import ProblemSpec
from .records import SCHEMA_VERSION, RunRecord, write_record

log = logging.getLogger(__name__)


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="milliseconds")


def cell_params(q, geometry, n_k, n_bands, n_points, settings):
    v0, l, w = geometry
    return {"q": float(q), "v0": float(v0), "l": float(l), "w": float(w), "n_k": n_k,
            "n_bands": n_bands, "n_points": n_points, "solver": settings.to_dict(),
            "seed": settings.seed, "code_version": __version__}


def derived_quantities(structure):
    """Inversion state, k = 0 effective mass and band gaps of one structure."""
    e0 = structure.energies[0]
    inv = classify_inversion(e0, structure.k_grid)
    mass = effective_mass(e0, structure.k_grid, 0.0)
    out = {
        "inversion": {"classification": inv.classification.value, "k_min": inv.k_min},
        "effective_mass": {"k0": mass.k0, "delta_k": mass.delta_k, "curvature": mass.curvature,
                           "m_star": mass.m_star, "flagged": mass.flagged},
        "gaps": None,
    }
    if structure.n_bands >= 2:
        curve = gap_curve([structure])
        d = curve.directness[0]
        out["gaps"] = {"direct": curve.direct_gap[0], "indirect": curve.indirect_gap[0],
                       "directness": d.label, "k_valence_max": d.k_valence_max,
                       "k_conduction_min": d.k_conduction_min}
    return out


def solve_cell(q, geometry, n_k, n_bands, n_points, settings, capture_errors=True):
    """Compute one record.

    With ``capture_errors`` solver failures become a ``failed`` payload
    instead of propagating.
    """
    started, t0 = _now(), time.perf_counter()
    params = cell_params(q, geometry, n_k, n_bands, n_points, settings)
    payload = {"params": params, "status": "ok", "error": None}
    try:
        prob = ProblemSpec.from_params(q, *geometry, n_points=n_points)
        structure = compute_band_structure(prob, n_k, n_bands, settings)
    except FracBandsError as exc:
        if not capture_errors:
            raise
        payload.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    else:
        payload["k_grid"] = structure.k_grid
        payload["energies"] = structure.energies
        payload["diagnostics"] = {"iterations": structure.iterations,
                                  "residuals": structure.residuals}
        payload["derived"] = derived_quantities(structure)
    metadata = {"started": started, "finished": _now(),
                "elapsed_s": round(time.perf_counter() - t0, 6)}
    return RunRecord(payload=payload, metadata=metadata, schema_version=SCHEMA_VERSION)


def _run_cell(args):
    return solve_cell(*args)


def check_writable(directory):
    """Create ``directory`` if needed and prove a file can be written in it."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    probe = directory / ".write-probe"
    with open(probe, "wb") as fh:
        fh.write(b"")
    os.unlink(probe)


def record_path(directory, index):
    return Path(directory) / f"cell-{index:05d}.json"


def run_sweep(plan, workers=1):
    """Run every cell of ``plan``; returns the records in cell order.

    Cells are independent, so ``workers > 1`` distributes them over processes.
    Records are written by this process only, each atomically.
    """
    check_writable(plan.output_dir)
    cells = plan.cells()
    jobs = [(q, geo, plan.n_k, plan.n_bands, plan.n_points, plan.solver) for _, q, geo in cells]
    log.info("running %d cells with %d worker(s)", len(jobs), workers)
    records = []
    if workers <= 1:
        results = map(_run_cell, jobs)
        for (index, _, _), record in zip(cells, results):
            write_record(record, record_path(plan.output_dir, index))
            records.append(record)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for (index, _, _), record in zip(cells, pool.map(_run_cell, jobs)):
                write_record(record, record_path(plan.output_dir, index))
                records.append(record)
    failed = sum(not r.ok for r in records)
    if failed:
        log.warning("%d of %d cells failed", failed, len(records))
    return records
