"""Command line front end.

Subcommands: solve, density, projector, verify, gen, stats.  Every run is
a pure function of (config, seed): rerunning writes byte-identical outputs
except for the timestamp inside resolved_config.json.

Exit codes: 0 success, 2 configuration error, 3 numeric or convergence
failure.  Only standard-library imports happen at module import time so
that --threads can cap BLAS pools before numpy loads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from .errors import ConfigError, NumericError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_THREAD_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)


def _fmt(x: float) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) if isinstance(v, float) else str(v)
                              for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _echo_config(run, out_dir: Path) -> None:
    echo = dict(run.resolved)
    echo["timestamp"] = datetime.now(timezone.utc).isoformat()
    _write_json(out_dir / "resolved_config.json", echo)


def _prepare(args):
    from .config import load_config

    run = load_config(args.config, seed_override=args.seed,
                      out_override=args.out)
    run.output_dir.mkdir(parents=True, exist_ok=True)
    _echo_config(run, run.output_dir)
    return run


def _require_block(run, name: str) -> dict:
    if name not in run.blocks:
        raise ConfigError(f"config has no '{name}' block")
    return run.blocks[name]


def cmd_solve(args) -> int:
    import numpy as np

    from .detequiv import CovarianceFamily, solve_along_grid
    from .matio import write_matrix_binary

    run = _prepare(args)
    cfg = _require_block(run, "solve")
    if cfg["z_grid"] is not None:
        from .config import _as_complex

        z_list = [_as_complex(v, "solve.z_grid") for v in cfg["z_grid"]]
    elif cfg["contour"] is not None:
        from .config import parse_contour

        nodes, _ = parse_contour(cfg["contour"], "solve.contour").path_nodes()
        z_list = [complex(z) for z in nodes]
    else:
        raise ConfigError("solve needs a z_grid or a contour")
    if not z_list:
        raise ConfigError("solve.z_grid is empty")
    family = CovarianceFamily.from_ensemble(run.ensemble)
    result = solve_along_grid(family, z_list, tol=cfg["tol"],
                              max_iter=cfg["max_iter"], damping=cfg["damping"])
    k = family.n_classes
    header = ["z_re", "z_im", "iterations", "residual"]
    for c in range(1, k + 1):
        header += [f"lambda_class_{c}_re", f"lambda_class_{c}_im"]
    header += ["trace_qtilde_re", "trace_qtilde_im"]
    rows = []
    for z, sol in zip(z_list, result.solutions):
        if sol is None:
            continue
        row = [float(z.real), float(z.imag), sol.iterations, float(sol.residual)]
        for lam in sol.lam_by_class:
            row += [float(lam.real), float(lam.imag)]
        tr = sol.trace_q_tilde
        row += [float(tr.real), float(tr.imag)]
        rows.append(row)
    _write_csv(run.output_dir / "solve.csv", header, rows)
    if cfg["dump_q_tilde"]:
        for idx, sol in enumerate(result.solutions):
            if sol is not None:
                write_matrix_binary(run.output_dir / f"qtilde_{idx:04d}.bin",
                                    np.asarray(sol.q_tilde))
    if result.failures:
        for idx, exc in result.failures:
            print(f"solve: node {idx} at z={z_list[idx]!r} failed: {exc}",
                  file=sys.stderr)
        if not args.keep_going:
            return EXIT_NUMERIC
    return EXIT_OK


def _density_values_deterministic(run, grid_x, eta, cfg):
    import numpy as np

    from .detequiv import CovarianceFamily, solve_along_grid
    from .errors import NodeError
    from .spectral import _lead_in

    family = CovarianceFamily.from_ensemble(run.ensemble)
    z_list = [complex(x, eta) for x in grid_x]
    lead = _lead_in(z_list[0], depth=max(4.0 * eta, 2.0))
    result = solve_along_grid(family, lead + z_list)
    if result.failures:
        idx, exc = result.failures[0]
        grid_idx = max(idx - len(lead), 0)
        raise NodeError(grid_idx, (lead + z_list)[idx], exc)
    return np.array([sol.stieltjes for sol in result.solutions[len(lead):]])


def _density_values_mc(run, grid_x, eta, n_draws):
    import numpy as np

    from .ensembles import sample_matrix

    ens = run.ensemble
    streams = ens.streams()
    acc = np.zeros(len(grid_x), dtype=np.complex128)
    zs = np.asarray(grid_x) + 1j * eta
    for k in range(n_draws):
        X = sample_matrix(ens, k, streams)
        w = np.linalg.eigvalsh(X @ X.T / ens.n)
        acc += (1.0 / (zs[:, None] - w[None, :])).mean(axis=1)
    return acc / n_draws


def cmd_density(args) -> int:
    import numpy as np

    from .errors import SignConventionError
    from .spectral import DensityGrid

    run = _prepare(args)
    cfg = _require_block(run, "density")
    eta = float(cfg["eta"])
    if eta <= 0:
        raise ConfigError("density.eta must be positive")
    points = int(cfg["points"])
    if points < 2:
        raise ConfigError("density.points must be at least 2")
    grid_x = np.linspace(float(cfg["x_min"]), float(cfg["x_max"]), points)
    if cfg["mc"]:
        g_vals = _density_values_mc(run, grid_x, eta, int(cfg["n_draws"]))
    else:
        g_vals = _density_values_deterministic(run, grid_x, eta, cfg)
    ims = g_vals.imag
    tol = 1e-12 * max(1.0, float(np.max(np.abs(ims))))
    if (ims > tol).any() and (ims < -tol).any():
        raise SignConventionError("Im g changes sign across the density grid")
    grid = DensityGrid(x=grid_x, eta=eta, rho=np.abs(ims) / np.pi)
    _write_csv(run.output_dir / "density.csv", ["x", "rho"],
               [[float(x), float(r)] for x, r in zip(grid.x, grid.rho)])
    return EXIT_OK


def cmd_projector(args) -> int:
    import numpy as np

    from .config import parse_contour
    from .detequiv import CovarianceFamily
    from .ensembles import sample_matrix, spectrum_stats
    from .matio import read_matrix
    from .resolvent import ResolventSample
    from .spectral import MIN_CLEARANCE, empirical_projector_trace, projector_estimate

    run = _prepare(args)
    cfg = _require_block(run, "projector")
    contour = parse_contour(cfg["contour"], "projector.contour")
    if cfg["A"] == "identity":
        A = None
    else:
        A = read_matrix(Path(args.config).parent / cfg["A"])
    stats = spectrum_stats(run.ensemble, 16, 0.05)
    clearance = contour.clearance_to(stats.support_intervals)
    if clearance < MIN_CLEARANCE:
        raise NumericError(
            f"contour clearance {clearance:.4g} below the required "
            f"{MIN_CLEARANCE}; support estimate "
            f"{[list(iv) for iv in stats.support_intervals]}"
        )
    rows = []
    det = projector_estimate(CovarianceFamily.from_ensemble(run.ensemble),
                             contour, A, tol=cfg["tol"],
                             max_iter=cfg["max_iter"])
    rows.append(["deterministic", float(det.real), float(det.imag)])
    if cfg["mc"]:
        n_draws = int(cfg["n_draws"])
        streams = run.ensemble.streams()
        acc = 0.0 + 0.0j
        for k in range(n_draws):
            s = ResolventSample(sample_matrix(run.ensemble, k, streams))
            acc += empirical_projector_trace(s, contour, A)
        mc = acc / n_draws
        rows.append(["mc_mean", float(mc.real), float(mc.imag)])
    _write_csv(run.output_dir / "projector.csv",
               ["label", "value_re", "value_im"], rows)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .suites import run_suite

    run = _prepare(args)
    cfg = _require_block(run, "verify")
    z = complex(cfg["z"][0], cfg["z"][1]) if isinstance(cfg["z"], list) \
        else complex(cfg["z"])
    any_fail = False
    for name in cfg["suites"]:
        result = run_suite(name, run.ensemble, int(cfg["n_draws"]),
                           cfg["n_list"], z)
        _write_json(run.output_dir / f"verify_{name}.json", result)
        print(f"verify[{name}]: {result['status']}")
        any_fail = any_fail or result["status"] == "fail"
    return EXIT_NUMERIC if any_fail else EXIT_OK


def cmd_gen(args) -> int:
    from .ensembles import sample_matrix
    from .matio import write_matrix_binary, write_matrix_text

    run = _prepare(args)
    cfg = run.blocks.get("gen", {"draw_index": 0, "format": "csv"})
    draw = int(cfg["draw_index"])
    X = sample_matrix(run.ensemble, draw)
    if cfg["format"] == "bin":
        write_matrix_binary(run.output_dir / f"sample_{draw:04d}.bin", X)
    elif cfg["format"] == "csv":
        write_matrix_text(run.output_dir / f"sample_{draw:04d}.csv", X)
    else:
        raise ConfigError(f"gen.format must be 'csv' or 'bin', got {cfg['format']!r}")
    return EXIT_OK


def cmd_stats(args) -> int:
    from .ensembles import spectrum_stats

    run = _prepare(args)
    cfg = run.blocks.get("stats", {"n_draws": 100, "eps": 0.05})
    stats = spectrum_stats(run.ensemble, int(cfg["n_draws"]), float(cfg["eps"]))
    _write_json(run.output_dir / "stats.json", {
        "nu_hat": stats.nu_hat,
        "eps": stats.eps,
        "a_eps_frequency": stats.a_eps_frequency,
        "support_intervals": [list(iv) for iv in stats.support_intervals],
        "mean_eigenvalues": [float(v) for v in stats.mean_eigenvalues],
        "n_draws": stats.n_draws,
    })
    return EXIT_OK


_COMMANDS = {
    "solve": cmd_solve,
    "density": cmd_density,
    "projector": cmd_projector,
    "verify": cmd_verify,
    "gen": cmd_gen,
    "stats": cmd_stats,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rmeq",
        description="Deterministic equivalents of sample-covariance "
                    "resolvents, with Monte Carlo verification suites.",
    )
    parser.add_argument("--config", required=True, help="path to the JSON run config")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS thread pools (default: library default)")
    parser.add_argument("--out", default=None, help="override output_dir")
    parser.add_argument("--keep-going", action="store_true",
                        help="do not fail the run on per-node solver failures")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("--threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        if "numpy" in sys.modules:
            print("warning: numpy already loaded; --threads has no effect",
                  file=sys.stderr)
        for var in _THREAD_VARS:
            os.environ[var] = str(args.threads)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    raise SystemExit(main())
