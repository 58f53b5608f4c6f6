"""Command-line entry point.

Science parameters live in the config file; flags only pick the
subcommand, the config path and the output directory.  Each run directory
receives ``config.txt`` (the fully-defaulted echo of the config),
``metadata.txt`` (versions, seeds, thread count) and the outputs, so that
``fracbsq <cmd> --config RUN/config.txt --out OTHER`` reproduces the CSVs.

Exit codes: 0 success, 2 config error, 3 numerical abort (candidate
blow-up), 4 invalid certificate or failed lemma verification.
"""

import argparse
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, io
from ._parallel import worker_count
from .config import ConfigError, parse_config
from .inequalities import (
    ConstantEstimate,
    check_exponent_triangle,
    check_interpolation,
    check_pointwise_decay,
    estimate_constant,
    random_scalar_field,
    sample_ratios,
    sample_rng,
)
from .spectral import CoupledState, leray_project, random_divfree_state, single_mode_field

log = logging.getLogger("fracbsq")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ABORT = 3
EXIT_INVALID = 4

CONFIG_NAME = "config.txt"
METADATA_NAME = "metadata.txt"
INIT_CHECKPOINT_NAME = "init.bsqg"


def initial_state(cfg, base_dir=None):
    """Initial data described by ``init.*`` keys."""
    grid = cfg.grid()
    kind = cfg["init.kind"]
    if kind == "random_divfree":
        return random_divfree_state(cfg["init.seed"], grid, cfg["init.decay"], cfg["init.amplitude"])
    if kind == "single_mode":
        # Amplitudes refer to normalized coefficients.
        raw = 1.0 / grid.amplitude_scale
        u = single_mode_field(grid, cfg["init.mode"], cfg["init.amplitude"] * raw * np.asarray(cfg["init.direction"]))
        theta = single_mode_field(grid, cfg["init.mode"], cfg["init.theta_amplitude"] * raw)
        return CoupledState(leray_project(u), theta, 0.0)
    path = Path(cfg["init.path"])
    if not path.is_absolute() and base_dir is not None:
        path = Path(base_dir) / path
    try:
        return io.read_checkpoint(path, expected_n=grid.n)
    except (OSError, io.CheckpointFormatError) as exc:
        raise ConfigError(f"init.path: {exc}") from None


def prepare_run_dir(cfg, out, x0):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    text = cfg.echo()
    if cfg["init.kind"] == "checkpoint":
        io.write_checkpoint(x0, out / INIT_CHECKPOINT_NAME)
        text = text.replace(f"init.path = {cfg['init.path']}\n", f"init.path = {INIT_CHECKPOINT_NAME}\n")
    with open(out / CONFIG_NAME, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return out


def write_metadata(out, cfg, command, extra=()):
    items = [
        ("command", command),
        ("package.version", __version__),
        ("python.version", platform.python_version()),
        ("numpy.version", np.__version__),
        ("scipy.version", scipy.__version__),
        ("platform", platform.platform()),
        ("env.BSQ_THREADS", os.environ.get("BSQ_THREADS", "")),
        ("threads.used", worker_count()),
        ("init.seed", cfg["init.seed"]),
        ("constants.seed", cfg["constants.seed"]),
    ]
    io.write_keyvalue(items + list(extra), Path(out) / METADATA_NAME)


def bilinear_constant(cfg, p, d, grid):
    if cfg["constants.value"] is not None:
        return ConstantEstimate.fixed(cfg["constants.value"], "bilinear")
    return estimate_constant(
        "bilinear", p, d, grid, cfg["constants.samples"], cfg["constants.seed"], cfg["constants.safety"]
    )


def cmd_certify(cfg, out, base_dir):
    from .picard import CertifyConfig, certify

    p, d, grid = cfg.gevrey(), cfg.dissipation(), cfg.grid()
    x0 = initial_state(cfg, base_dir)
    run = prepare_run_dir(cfg, out, x0)
    C_hat = bilinear_constant(cfg, p, d, grid)
    cc = CertifyConfig(
        time_nodes=cfg["picard.time_nodes"],
        tol=cfg["tolerances.picard_tol"],
        max_iter=cfg["tolerances.max_iter"],
        bilinear_constant=C_hat,
    )
    cert = certify(x0, p, d, cc)
    if cert.trajectory is not None:
        io.write_trajectory(cert.trajectory.states, run / "trajectory.bsqg")
        cert.trajectory_ref = "trajectory.bsqg"
    io.write_keyvalue(io.certificate_items(cert), run / "certificate.txt", comment="existence certificate")
    write_metadata(run, cfg, "certify")
    log.info("certificate valid=%s T=%.6g residual=%.3e", cert.valid, cert.admissible_T, cert.final_residual)
    return EXIT_OK if cert.valid else EXIT_INVALID


def cmd_evolve(cfg, out, base_dir):
    from .integrator import default_dt, evolve

    p, d, grid = cfg.gevrey(), cfg.dissipation(), cfg.grid()
    x0 = initial_state(cfg, base_dir)
    run = prepare_run_dir(cfg, out, x0)
    dt = cfg["time.dt"] if cfg["time.dt"] is not None else default_dt(grid, d)
    ckpt_path = run / "checkpoints.bsqg"
    if ckpt_path.exists():
        ckpt_path.unlink()

    def on_checkpoint(step, state):
        with open(ckpt_path, "ab") as fh:
            fh.write(io.encode_checkpoint(state))
        return step

    res = evolve(
        x0,
        cfg["time.t_end"],
        dt,
        p,
        d,
        ladder_nmax=cfg["ladder.n_max"],
        checkpoint_every=cfg["output.checkpoint_every"],
        on_checkpoint=on_checkpoint,
        dt_max=cfg["time.dt_max"],
    )
    io.write_series(res.series, run / "series.csv")
    io.write_checkpoint(res.final, run / "final.bsqg")
    write_metadata(
        run,
        cfg,
        "evolve",
        [("dt.used", res.dt), ("steps", len(res.series) - 1), ("aborted", res.aborted), ("abort.reason", res.reason)],
    )
    if res.aborted:
        log.warning("candidate blow-up: %s", res.reason)
        return EXIT_ABORT
    return EXIT_OK


def cmd_monitor(cfg, run, out):
    from .blowup import diagnose

    p, d, grid = cfg.gevrey(), cfg.dissipation(), cfg.grid()
    series = io.read_series(Path(run) / "series.csv")
    C = cfg["monitor.C"]
    source = "config"
    if C is None:
        C = bilinear_constant(cfg, p, d, grid).value
        source = "bilinear_constant"
    diag = diagnose(series, p, d, tstar=cfg["monitor.tstar"], C=C, mu=cfg["monitor.mu"], C2=cfg["monitor.C2"])
    cols = diag.columns()
    names = list(cols)
    io.write_table(names, np.column_stack([cols[k] for k in names]).tolist(), Path(out) / "diagnostics.csv")
    items = [
        ("tstar", "none" if diag.tstar_estimate is None else float(diag.tstar_estimate)),
        ("tstar.source", diag.tstar_source),
        ("C", float(C)),
        ("C.source", source),
        ("records", len(series)),
    ]
    items += [(f"corollary.{k}", float(v)) for k, v in diag.corollary.items()]
    for n in sorted(diag.functionals):
        items.append((f"functional_n{n}.final", float(diag.functionals[n][-1])))
        items.append((f"integral_n{n}.final", float(diag.integrals[n][-1])))
    io.write_keyvalue(items, Path(out) / "monitor.txt", comment="blow-up diagnostics (overlays, not a blow-up claim)")
    return EXIT_OK


def lemma_reports(cfg):
    """Randomized constant-free checks plus train/validate runs of the constant-bearing ones."""
    p, d, grid = cfg.gevrey(), cfg.dissipation(), cfg.grid()
    count = cfg["lemmas.samples"]
    seed = cfg["constants.seed"]
    out = {"pointwise_decay": [], "exponent_triangle": [], "interpolation": []}
    for i in range(count):
        rng = sample_rng(seed, i)
        a, b, lam = np.exp(rng.uniform(-3, 3, size=3))
        out["pointwise_decay"].append(check_pointwise_decay(a, b, lam))
        xi, eta = rng.integers(-20, 21, size=(2, 3))
        out["exponent_triangle"].append(
            check_exponent_triangle(xi, eta, rng.uniform(0, 3), rng.uniform(1, 4))
        )
        f = random_scalar_field(rng, grid)
        out["interpolation"].append(check_interpolation(f, p, rng.uniform(1, 4)))
    summary = []
    train = max(100, count)
    safety = cfg["constants.safety"]
    delta = cfg["lemmas.delta"]
    for which in ("product", "product_interp_i", "product_interp_ii", "l1_interp", "embedding"):
        try:
            c = estimate_constant(which, p, d, grid, train, seed, safety, delta=delta)
        except ValueError as exc:
            summary.append((f"{which}.skipped", str(exc)))
            continue
        val = sample_ratios(which, p, d, grid, seed, train, train, delta=delta)
        summary += [
            (f"{which}.constant", c.value),
            (f"{which}.train_max_ratio", c.max_ratio),
            (f"{which}.validation_max_ratio", float(val.max())),
            (f"{which}.validation_violations", int(np.sum(val > c.value * (1 + 1e-9)))),
        ]
    return out, summary


def cmd_verify_lemmas(cfg, out):
    reports, summary = lemma_reports(cfg)
    items = []
    for label, batch in reports.items():
        items += io.report_items(batch, label)
    items += summary
    io.write_keyvalue(items, Path(out) / "lemmas.txt", comment="lemma verification report")
    write_metadata(out, cfg, "verify-lemmas")
    bad = sum(1 for batch in reports.values() for r in batch if not r.holds)
    bad += sum(v for k, v in summary if k.endswith("validation_violations"))
    return EXIT_OK if bad == 0 else EXIT_INVALID


def cmd_export(checkpoint, out):
    """Retained-mode coefficient table (normalized) for each record of a checkpoint file."""
    states = io.read_trajectory(checkpoint)
    rows = []
    for idx, st in enumerate(states):
        grid = st.grid
        c = st.as_array() * grid.amplitude_scale
        for i, j, l in zip(*np.nonzero(grid.dealias_mask)):
            k = grid.k[:, i, j, l]
            v = c[:, i, j, l]
            rows.append([idx, st.time, *k, *np.ravel(np.column_stack([v.real, v.imag]))])
    cols = ["record", "time", "k1", "k2", "k3"]
    for name in ("u1", "u2", "u3", "theta"):
        cols += [f"{name}_re", f"{name}_im"]
    io.write_table(cols, rows, out)
    return EXIT_OK


def build_parser():
    ap = argparse.ArgumentParser(prog="fracbsq", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("certify", "evolve", "verify-lemmas"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", required=True, help="run directory to create or overwrite")
    sp = sub.add_parser("monitor")
    sp.add_argument("--run", required=True, help="run directory produced by evolve")
    sp.add_argument("--out", default=None, help="output directory (default: the run directory)")
    sp = sub.add_parser("export")
    sp.add_argument("--checkpoint", required=True, help="checkpoint or trajectory file")
    sp.add_argument("--out", required=True, help="CSV path")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "export":
            return cmd_export(args.checkpoint, args.out)
        if args.command == "monitor":
            cfg = parse_config(Path(args.run) / CONFIG_NAME)
            out = Path(args.out or args.run)
            out.mkdir(parents=True, exist_ok=True)
            return cmd_monitor(cfg, args.run, out)
        cfg = parse_config(args.config)
        base = Path(args.config).resolve().parent
        if args.command == "certify":
            return cmd_certify(cfg, args.out, base)
        if args.command == "evolve":
            return cmd_evolve(cfg, args.out, base)
        Path(args.out).mkdir(parents=True, exist_ok=True)
        with open(Path(args.out) / CONFIG_NAME, "w", encoding="utf-8", newline="") as fh:
            fh.write(cfg.echo())
        return cmd_verify_lemmas(cfg, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (io.CheckpointFormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
