"""Scenario runner: training cohorts, loss landscapes, coupling-shift studies,
dataset generation for the warm-start network, and prediction scoring.

Every scenario is reproducible end-to-end from (config, master seed): run i of a
cohort draws its streams from SeedSequence((master_seed, i)), so cohorts can be
extended without re-running earlier members.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from chiptrain import chip, trainer
from chiptrain.chip import (
    ChipGeometry,
    ChipParameters,
    ControlModel,
    InvariantError,
    build_planar_geometry,
    build_triangular_geometry,
    direct_control_model,
    mesh_control_model,
    sample_target_parameters,
    shift_couplings,
)
from chiptrain.photonics import single_photon_distribution, two_photon_distribution
from chiptrain.serialize import chip_to_json, dump_json, unitary_from_json, unitary_to_json
from chiptrain.trainer import (
    Instance,
    TrainerConfig,
    build_target_dataset,
    flag_stuck,
    generate_instance,
    intermediate_unitaries_train,
    mae_loss,
    train,
)
from chiptrain.unitary import (
    fidelity,
    random_unitary_noise,
    unitary_from_control,
    unitary_from_parameters,
)

WARMSTART_SUCCESS_FIDELITY = 0.69
STUCK_MEDIAN_FACTOR = 2.5
TRAJECTORY_COLUMNS = (
    "epoch",
    "i0",
    "l_prev",
    "l_up",
    "l_down",
    "action",
    "delta",
    "loss",
    "fidelity",
)


@dataclass
class CohortResult:
    runs: list  # per-run summary dicts, ordered by run index
    mean_fidelity: float
    min_fidelity: float
    discarded: list  # run indices flagged as stuck
    stuck_threshold: float


def config_hash(cfg: dict) -> str:
    """Hash of the behavior-relevant config fields (paths and worker counts excluded)."""
    stripped = {k: v for k, v in cfg.items() if k not in ("out_dir", "out_path", "workers")}
    return hashlib.sha256(json.dumps(stripped, sort_keys=True).encode()).hexdigest()[:16]


def build_geometry(cfg: dict) -> ChipGeometry:
    layout = cfg.get("layout", "planar")
    if layout == "planar":
        return build_planar_geometry(int(cfg["m"]))
    if layout == "triangular3d":
        return build_triangular_geometry(cfg.get("control", "direct"))
    raise InvariantError(f"unknown layout {layout!r}")


def build_model(cfg: dict, geom: ChipGeometry) -> ControlModel:
    if cfg.get("control", "direct") == "multi_phase":
        return mesh_control_model(geom)
    return direct_control_model()


# Random mesh starts sit up to the full control range away from the target, so
# the mesh default step is larger than the direct-control one.
MESH_BASE_DELTA = 0.06


def build_trainer_config(cfg: dict, seed, model: ControlModel | None = None) -> TrainerConfig:
    sched = cfg.get("delta_schedule")
    base_delta = cfg.get("base_delta")
    if base_delta is None:
        mesh = model is not None and model.kind == "multiplicative_mesh"
        base_delta = MESH_BASE_DELTA if mesh else trainer.DEFAULT_BASE_DELTA
    return TrainerConfig(
        epochs=int(cfg["epochs"]),
        shots=cfg.get("shots"),
        delta_schedule=tuple((t, d) for t, d in sched) if sched else None,
        pairs_per_epoch=cfg.get("pairs_per_epoch"),
        update_method=cfg.get("update_method", "fixed_step"),
        eta=cfg.get("eta", 0.5),
        base_delta=base_delta,
        stuck_loss_threshold=cfg.get("stuck_loss_threshold"),
        record_fidelity=cfg.get("record_fidelity", True),
        seed=seed,
    )


def write_trajectory_csv(path, trajectory):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for r in trajectory:
            writer.writerow(
                [
                    r.epoch,
                    r.i0,
                    repr(r.l_prev),
                    repr(r.l_up),
                    repr(r.l_down),
                    r.action,
                    repr(r.delta),
                    repr(r.loss),
                    "" if r.fidelity is None else repr(r.fidelity),
                ]
            )


def read_trajectory_csv(path) -> list:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append(
                {
                    "epoch": int(row["epoch"]),
                    "loss": float(row["loss"]),
                    "fidelity": None if row["fidelity"] == "" else float(row["fidelity"]),
                }
            )
    return rows


def _run_one_training(config: dict, run_idx: int):
    """One independent generate_instance + train cycle with derived streams."""
    geom = build_geometry(config["geometry"])
    model = build_model(config["geometry"], geom)
    master = int(config["seed"])
    inst_rng = np.random.default_rng(np.random.SeedSequence((master, run_idx, 0)))
    window = config.get("fidelity_window")
    if model.kind == "multiplicative_mesh":
        window = None
    inst = generate_instance(
        geom, model, window, inst_rng, perturb_range=config.get("perturb_range", 0.1)
    )
    tcfg = build_trainer_config(config["trainer"], seed=(master, run_idx, 1), model=model)
    result = train(inst.initial_controls, inst.u_target, geom, model, inst.couplings, tcfg)
    summary = {
        "run": run_idx,
        "initial_fidelity": inst.initial_fidelity,
        "final_fidelity": result.final_fidelity,
        "final_loss": result.final_loss,
        "final_params": [float(v) for v in result.final_params],
        "seed": [master, run_idx],
    }
    return summary, result.trajectory


def run_cohort(config: dict, out_dir=None) -> CohortResult:
    """Execute `runs` independent training cycles and aggregate fidelities.

    Runs flagged as stuck (trailing loss above the configured threshold, or
    2.5x the cohort median final loss when unset) are excluded from the mean
    and minimum but reported in `discarded`.
    """
    runs = int(config.get("runs", 1))
    workers = int(config.get("workers", 1))
    indices = list(range(runs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_cohort_worker, [(config, i) for i in indices]))
    else:
        outcomes = [_run_one_training(config, i) for i in indices]

    threshold = config.get("trainer", {}).get("stuck_loss_threshold")
    if threshold is None:
        threshold = STUCK_MEDIAN_FACTOR * float(
            np.median([s["final_loss"] for s, _ in outcomes])
        )
    summaries = []
    for summary, trajectory in outcomes:
        summary["stuck"] = flag_stuck(trajectory, threshold)
        summaries.append(summary)
        if out_dir is not None:
            write_trajectory_csv(
                os.path.join(out_dir, f"run_{summary['run']:03d}.csv"), trajectory
            )
    kept = [s for s in summaries if not s["stuck"]] or summaries
    result = CohortResult(
        runs=summaries,
        mean_fidelity=float(np.mean([s["final_fidelity"] for s in kept])),
        min_fidelity=float(np.min([s["final_fidelity"] for s in kept])),
        discarded=[s["run"] for s in summaries if s["stuck"]],
        stuck_threshold=float(threshold),
    )
    if out_dir is not None:
        dump_json(
            {
                "kind": "cohort",
                "config_hash": config_hash(config),
                "master_seed": config["seed"],
                "runs": result.runs,
                "mean_fidelity": result.mean_fidelity,
                "min_fidelity": result.min_fidelity,
                "discarded": result.discarded,
                "stuck_threshold": result.stuck_threshold,
            },
            os.path.join(out_dir, "cohort.json"),
        )
    return result


def _cohort_worker(args):
    return _run_one_training(*args)


def _exact_loss_from_beta(beta_row, couplings, geom, targets):
    """Exact full-input-set loss of an unclamped beta row (landscape probe)."""
    beta = np.tile(np.asarray(beta_row, dtype=float), (geom.n_segments, 1))
    u = unitary_from_parameters(geom, ChipParameters(beta=beta, couplings=couplings))
    dists = [single_photon_distribution(u, s[0]) for s in targets.singles]
    dists += [two_photon_distribution(u, p) for p in targets.pairs]
    return mae_loss(dists, targets)


def loss_landscape(config: dict, out_dir=None) -> list:
    """Exact-mode loss versus a +/-0.6 sweep of one pinned parameter.

    The swept parameter is pinned to the range midpoint in both the target and
    the trainable set (1.0 mm^-1 direct, 0.3 mesh); bounds are intentionally not
    enforced during the sweep so the landscape is visible beyond the control range.
    """
    geom = build_geometry(config["geometry"])
    model = build_model(config["geometry"], geom)
    k = int(config.get("parameter_index", 0))
    resolution = int(config.get("resolution", 121))
    context = config.get("context", "target")
    rng = np.random.default_rng(np.random.SeedSequence((int(config["seed"]), 0)))

    params = sample_target_parameters(geom, rng)
    mesh = model.kind == "multiplicative_mesh"
    center = 0.3 if mesh else 1.0

    if mesh:
        lo, hi = model.control_bounds
        x_t = rng.uniform(lo, hi, size=model.n_controls(geom))
        x_t[k] = center
        u_t = unitary_from_control(geom, model, params.couplings, x_t)
        base = x_t.copy() if context == "target" else rng.uniform(lo, hi, size=len(x_t))
    else:
        beta_t = params.beta[0].copy()
        beta_t[k] = center
        params_t = ChipParameters(
            beta=np.tile(beta_t, (geom.n_segments, 1)), couplings=params.couplings
        )
        u_t = unitary_from_parameters(geom, params_t)
        if context == "target":
            base = beta_t.copy()
        else:
            base = chip.perturb_parameters(
                params_t, config.get("perturb_range", 0.1), rng
            ).beta[0]
    targets = build_target_dataset(u_t, geom)

    curve = []
    for shift in np.linspace(-0.6, 0.6, resolution):
        cand = base.copy()
        cand[k] = center + shift
        if mesh:
            # per-segment mesh betas differ; probe the mesh map without clamping
            beta = np.full((geom.n_segments, geom.m), model.beta_base)
            for r_idx, res in enumerate(geom.resistors):
                beta[res.segment] += model.weights[:, r_idx] * cand[r_idx]
            u = unitary_from_parameters(
                geom, ChipParameters(beta=beta, couplings=params.couplings)
            )
            dists = [single_photon_distribution(u, s[0]) for s in targets.singles]
            dists += [two_photon_distribution(u, p) for p in targets.pairs]
            loss = mae_loss(dists, targets)
        else:
            loss = _exact_loss_from_beta(cand, params.couplings, geom, targets)
        curve.append((float(shift), float(loss)))

    if out_dir is not None:
        with open(os.path.join(out_dir, "landscape.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["shift", "loss"])
            for shift, loss in curve:
                writer.writerow([repr(shift), repr(loss)])
    return curve


def offdiag_experiment(config: dict, out_dir=None) -> dict:
    """Coupling-shift study: how much training recovers when the forward model
    uses shifted couplings C^s but the targets come from the true C^t.

    Per run: F_base compares the target controls under C^s vs C^t; F_noise
    compares the trained controls under C^s vs the true target; dF = F_noise - F_base.
    """
    geom = build_geometry(config["geometry"])
    model = build_model(config["geometry"], geom)
    delta_c = float(config.get("coupling_shift", 0.01))
    runs = int(config.get("runs", 1))
    master = int(config["seed"])
    window = config.get("fidelity_window", [0.68, 0.72])
    rows = []
    for i in range(runs):
        rng = np.random.default_rng(np.random.SeedSequence((master, i, 0)))
        params_t = sample_target_parameters(geom, rng)
        params_s = shift_couplings(params_t, delta_c, rng)
        if model.kind == "multiplicative_mesh":
            lo, hi = model.control_bounds
            x_t = rng.uniform(lo, hi, size=model.n_controls(geom))
            u_tt = unitary_from_control(geom, model, params_t.couplings, x_t)
            f_base = fidelity(u_tt, unitary_from_control(geom, model, params_s.couplings, x_t))
            x_0 = rng.uniform(lo, hi, size=len(x_t))
        else:
            u_tt = unitary_from_parameters(geom, params_t)
            x_t = params_t.beta[0]
            f_base = fidelity(
                u_tt,
                unitary_from_parameters(
                    geom, ChipParameters(beta=params_t.beta, couplings=params_s.couplings)
                ),
            )
            x_0 = None
            for _ in range(trainer.INSTANCE_RETRY_CAP):
                cand = chip.perturb_parameters(params_t, config.get("perturb_range", 0.1), rng)
                f0 = fidelity(
                    u_tt, unitary_from_control(geom, model, params_s.couplings, cand.beta[0])
                )
                if window[0] <= f0 <= window[1]:
                    x_0 = cand.beta[0]
                    break
            if x_0 is None:
                raise trainer.WindowUnreachableError(f"run {i}: starting window unreachable")
        tcfg = build_trainer_config(config["trainer"], seed=(master, i, 1), model=model)
        result = train(x_0, u_tt, geom, model, params_s.couplings, tcfg)
        f_noise = fidelity(
            u_tt, unitary_from_control(geom, model, params_s.couplings, result.final_params)
        )
        rows.append(
            {"run": i, "f_base": f_base, "f_noise": f_noise, "delta_f": f_noise - f_base}
        )
    table = {
        "coupling_shift": delta_c,
        "rows": rows,
        "mean_f_base": float(np.mean([r["f_base"] for r in rows])),
        "mean_f_noise": float(np.mean([r["f_noise"] for r in rows])),
        "mean_delta_f": float(np.mean([r["delta_f"] for r in rows])),
    }
    if out_dir is not None:
        dump_json(table, os.path.join(out_dir, "offdiag.json"))
    return table


def geodesic_cohort(config: dict, out_dir=None) -> dict:
    """Train a cohort through geodesic intermediate targets from random starts."""
    geom = build_geometry(config["geometry"])
    model = build_model(config["geometry"], geom)
    steps = int(config.get("steps", 3))
    runs = int(config.get("runs", 1))
    master = int(config["seed"])
    rows = []
    for i in range(runs):
        rng = np.random.default_rng(np.random.SeedSequence((master, i, 0)))
        params_t = sample_target_parameters(geom, rng)
        lo, hi = model.control_bounds
        if model.kind == "multiplicative_mesh":
            x_t = rng.uniform(lo, hi, size=model.n_controls(geom))
            u_t = unitary_from_control(geom, model, params_t.couplings, x_t)
        else:
            u_t = unitary_from_parameters(geom, params_t)
        x_0 = rng.uniform(lo, hi, size=model.n_controls(geom))
        run_seed = int(np.random.SeedSequence((master, i, 1)).generate_state(1)[0])
        tcfg = build_trainer_config(config["trainer"], seed=run_seed, model=model)
        staged = intermediate_unitaries_train(
            x_0, u_t, steps, geom, model, params_t.couplings, tcfg
        )
        rows.append(
            {
                "run": i,
                "step_fidelities": staged.step_fidelities,
                "final_fidelity": staged.final_fidelity,
                "success": staged.success,
                "aborted_at": staged.aborted_at,
            }
        )
    summary = {
        "steps": steps,
        "rows": rows,
        "success_rate": float(np.mean([r["success"] for r in rows])),
        "mean_fidelity": float(np.mean([r["final_fidelity"] for r in rows])),
    }
    if out_dir is not None:
        dump_json(summary, os.path.join(out_dir, "geodesic.json"))
    return summary


def _load_dataset_meta(path) -> dict:
    with open(path) as fh:
        first = json.loads(fh.readline())
    if "meta" not in first:
        raise InvariantError(f"{path} has no leading meta record")
    return first["meta"]


def _geometry_from_meta(meta: dict) -> ChipGeometry:
    if meta["layout"] == "planar":
        return build_planar_geometry(int(meta["m"]))
    return build_triangular_geometry(meta.get("control", "direct"))


def _couplings_from_meta(meta: dict) -> dict:
    return {(int(e["i"]), int(e["j"])): float(e["c"]) for e in meta["couplings"]}


def gen_dataset(config: dict) -> str:
    """Generate a warm-start dataset: one shared coupling set, random betas per record.

    Writes JSON-lines: a leading meta record carrying the shared couplings, then
    one record per unitary ({id, beta, re, im}). With noise_eps set, each stored
    unitary is right-multiplied by exp(i eps H) for a fresh random Hermitian H;
    the stored betas remain the true generating parameters.
    """
    geom = build_geometry(config["geometry"])
    count = int(config["count"])
    if count < 1:
        raise InvariantError("count must be >= 1")
    eps = config.get("noise_eps")
    out_path = config["out_path"]
    rng = np.random.default_rng(np.random.SeedSequence((int(config["seed"]), 0)))

    if config.get("reuse_couplings"):
        couplings = _couplings_from_meta(_load_dataset_meta(config["reuse_couplings"]))
    else:
        couplings = sample_target_parameters(geom, rng).couplings
    meta = {
        "layout": geom.layout,
        "m": geom.m,
        "count": count,
        "noise_eps": eps,
        "seed": config["seed"],
        "couplings": [
            {"i": i, "j": j, "c": couplings[(i, j)]} for i, j in sorted(couplings)
        ],
    }
    model = direct_control_model()
    with open(out_path, "w") as fh:
        fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
        for idx in range(count):
            beta = rng.uniform(*chip.BETA_RANGE, size=geom.m)
            u = unitary_from_control(geom, model, couplings, beta)
            if eps:
                u = u @ random_unitary_noise(geom.m, float(eps), rng)
            record = {"id": idx, "beta": [float(b) for b in beta]}
            record.update(unitary_to_json(u))
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    return out_path


def load_dataset(path):
    """(meta, records) from a JSON-lines dataset file."""
    with open(path) as fh:
        meta = json.loads(fh.readline())["meta"]
        records = [json.loads(line) for line in fh if line.strip()]
    return meta, records


def eval_warmstart(predictions_path, dataset_path, refine_config: dict | None = None) -> dict:
    """Score predicted betas against a dataset: fidelity of the realized unitary
    versus each record's stored unitary, success iff F > 0.69.

    refine_config (optional) chains successful predictions into full training runs
    and reports the fraction reaching F > 0.98.
    """
    meta, records = load_dataset(dataset_path)
    geom = _geometry_from_meta(meta)
    couplings = _couplings_from_meta(meta)
    model = direct_control_model()
    with open(predictions_path) as fh:
        preds = [json.loads(line) for line in fh if line.strip()]
    if len(preds) != len(records):
        raise InvariantError(
            f"{len(preds)} predictions for {len(records)} dataset records"
        )
    fids = []
    for rec, pred in zip(records, preds):
        if rec["id"] != pred["id"]:
            raise InvariantError(f"record id {rec['id']} misaligned with prediction {pred['id']}")
        u_rec = unitary_from_json(rec)
        u_pred = unitary_from_control(
            geom, model, couplings, np.asarray(pred["beta"], dtype=float)
        )
        fids.append(fidelity(u_rec, u_pred))
    fids = np.asarray(fids)
    successes = fids > WARMSTART_SUCCESS_FIDELITY
    out = {
        "n": len(fids),
        "success_rate": float(np.mean(successes)),
        "mean_fidelity": float(np.mean(fids)),
    }
    if refine_config is not None:
        n_refine = int(refine_config.get("refine_runs", 0))
        hit = 0
        chained = 0
        for rec, pred, ok in zip(records, preds, successes):
            if not ok or chained >= n_refine:
                continue
            tcfg = build_trainer_config(
                refine_config["trainer"], seed=(int(refine_config["seed"]), rec["id"])
            )
            res = train(
                np.asarray(pred["beta"], dtype=float),
                unitary_from_json(rec),
                geom,
                model,
                couplings,
                tcfg,
            )
            hit += res.final_fidelity > 0.98
            chained += 1
        out["refined_runs"] = chained
        out["refined_success_rate"] = float(hit / chained) if chained else None
    return out


def simulate(config: dict, out_dir=None) -> dict:
    """Draw a chip instance and its overall unitary; serialize both."""
    geom = build_geometry(config["geometry"])
    rng = np.random.default_rng(np.random.SeedSequence((int(config["seed"]), 0)))
    params = sample_target_parameters(geom, rng)
    u = unitary_from_parameters(geom, params)
    doc = {"chip": chip_to_json(geom, params), "unitary": unitary_to_json(u)}
    if out_dir is not None:
        dump_json(doc, os.path.join(out_dir, "simulate.json"))
    return doc
