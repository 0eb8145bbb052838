"""Command-line front end: generate / solve / eval / plot.

Exit codes: 0 success, 2 bad input, 3 solver nonconvergence (a partial
result is still written), 4 internal numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path

import numpy as np

from . import datasets
from .graphs import graph_from_json, graph_to_json, load_graph
from .metrics import c_acc, m_acc, mc_acc, pairwise_f_score
from .oracles import baseline_pipeline
from .pipeline import COUPLINGS, PipelineConfig, solve_joint

EXIT_OK = 0
EXIT_BAD_INPUT = 2
EXIT_NONCONVERGED = 3
EXIT_NUMERICAL = 4

CSV_FIELDS = ["scenario", "sigma", "method", "m_acc", "f1", "f2", "c_acc", "mc_acc", "secs"]


class InputError(Exception):
    pass


def _load_json(path) -> dict:
    p = Path(path)
    if not p.exists():
        raise InputError(f"no such file: {p}")
    try:
        with open(p) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise InputError(f"invalid JSON in {p}: {e}") from e


def _dump_json(obj, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


# -- generate ---------------------------------------------------------------

def cmd_generate(args) -> int:
    spec = _load_json(args.scenario)
    name = spec.get("name") or Path(args.scenario).stem
    sigma_grid = spec.get("sigma_grid")
    if sigma_grid is None:
        sigma_grid = [float(spec.get("noise_sigma", 0.0))]
    seeds = spec.get("seeds")
    if seeds is None:
        seeds = [args.seed]
    elif isinstance(seeds, int):
        seeds = [args.seed + i for i in range(seeds)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    instances = []
    for sigma in sigma_grid:
        for seed in seeds:
            d = dict(spec)
            d.pop("name", None)
            d.pop("sigma_grid", None)
            d.pop("seeds", None)
            d["noise_sigma"] = float(sigma)
            d["seed"] = int(seed)
            scen = datasets.scenario_from_json(d)
            g1, g2 = datasets.gen_pair(scen)
            iid = f"{name}_s{sigma:g}_r{seed}"
            f1, f2 = f"{iid}.g1.json", f"{iid}.g2.json"
            _dump_json(graph_to_json(g1), out / f1)
            _dump_json(graph_to_json(g2), out / f2)
            instances.append(
                {
                    "id": iid,
                    "sigma": float(sigma),
                    "seed": int(seed),
                    "g1": f1,
                    "g2": f2,
                    "n": g1.n,
                    "gt_match": list(range(g1.n)),
                }
            )
    manifest = {
        "name": name,
        "scenario": spec,
        "sigma_grid": [float(s) for s in sigma_grid],
        "seeds": [int(s) for s in seeds],
        "instances": instances,
    }
    _dump_json(manifest, out / "manifest.json")
    print(f"wrote {len(instances)} pair(s) + manifest to {out}")
    return EXIT_OK


# -- solve ------------------------------------------------------------------

def _preset_config(name: str) -> dict:
    try:
        text = resources.files("matchcut.presets").joinpath(f"{name}.json").read_text()
    except FileNotFoundError:
        raise InputError(f"unknown preset {name!r}")
    return json.loads(text)


def _merge_config(args) -> tuple[PipelineConfig, str]:
    """defaults < preset < --config file < explicit flags."""
    cfg: dict = {}
    if args.preset:
        cfg.update(_preset_config(args.preset))
    if args.config:
        cfg.update(_load_json(args.config))
    method = cfg.pop("method", None)

    if args.k is not None:
        cfg["k"] = args.k
    if args.dim is not None:
        cfg["dim"] = None if args.dim == "auto" else int(args.dim)
    if args.lambda_m is not None:
        cfg["lambda_m"] = "auto" if args.lambda_m == "auto" else float(args.lambda_m)
    if args.lambda_c is not None:
        cfg["lambda_c"] = "auto" if args.lambda_c == "auto" else float(args.lambda_c)
    if args.tol is not None:
        cfg["tol"] = args.tol
    if args.max_iters is not None:
        cfg["max_iters"] = args.max_iters
    if args.energy is not None:
        cfg["energy"] = args.energy
    if args.d_min is not None:
        cfg["d_min"] = args.d_min
    if args.d_max is not None:
        cfg["d_max"] = args.d_max
    if args.coupling is not None:
        cfg["coupling"] = args.coupling
    if args.no_coupling:
        cfg["coupling"] = "none"
    if args.decoupled_lbar:
        cfg["coupling"] = "lbar"
    if args.repair:
        cfg["repair"] = True
    if args.pad:
        cfg["pad"] = True
    if "dim" in cfg and cfg["dim"] == "auto":
        cfg["dim"] = None

    known = set(PipelineConfig.__dataclass_fields__)
    unknown = set(cfg) - known
    if unknown:
        raise InputError(f"unknown config keys: {sorted(unknown)}")
    pc = PipelineConfig(**cfg)
    try:
        pc.validate()
    except ValueError as e:
        raise InputError(str(e))
    if method is None:
        method = {
            "moment": "joint",
            "zform": "joint-zform",
            "lbar": "joint-lbar",
            "none": "joint-nocoupling",
        }[pc.coupling]
    if args.method:
        method = args.method
    return pc, method


def _solve_one(g1_path, g2_path, pc: PipelineConfig, method: str, iid=None, sigma=None):
    g1 = load_graph(g1_path)
    g2 = load_graph(g2_path)
    t0 = time.perf_counter()
    if method == "baseline":
        X, y1, y2 = baseline_pipeline(g1, g2)
        secs = time.perf_counter() - t0
        doc = {
            "id": iid or Path(g1_path).stem.replace(".g1", ""),
            "method": "baseline",
            "pair": [Path(g1_path).name, Path(g2_path).name],
            "sigma": sigma,
            "n": g1.n,
            "perm": [int(v) for v in np.argmax(X, axis=0)],
            "y1": [int(v) for v in y1],
            "y2": [int(v) for v in y2],
            "status": "optimal",
            "secs": round(secs, 6),
        }
        return doc, EXIT_OK
    res = solve_joint(g1, g2, pc)
    secs = time.perf_counter() - t0
    doc = res.to_json_dict()
    doc.update(
        {
            "id": iid or Path(g1_path).stem.replace(".g1", ""),
            "method": method,
            "pair": [Path(g1_path).name, Path(g2_path).name],
            "sigma": sigma,
            "secs": round(secs, 6),
        }
    )
    code = EXIT_OK if res.converged else EXIT_NONCONVERGED
    return doc, code


def _solve_instance_task(task):
    # module-level worker so it pickles for the process pool
    g1, g2, cfg_kw, method, iid, sigma, out_path = task
    doc, code = _solve_one(g1, g2, PipelineConfig(**cfg_kw), method, iid, sigma)
    _dump_json(doc, out_path)
    return iid, doc.get("status", "?"), code


def cmd_solve(args) -> int:
    pc, method = _merge_config(args)
    if args.baseline:
        method = "baseline"
    if args.manifest:
        man = _load_json(args.manifest)
        base = Path(args.manifest).parent
        out = Path(args.out or "results")
        out.mkdir(parents=True, exist_ok=True)
        tasks = []
        for inst in sorted(man.get("instances", []), key=lambda r: r["id"]):
            tasks.append(
                (
                    str(base / inst["g1"]),
                    str(base / inst["g2"]),
                    pc.to_json_dict(),
                    method,
                    inst["id"],
                    inst.get("sigma"),
                    str(out / f"{inst['id']}.{method}.result.json"),
                )
            )
        if not tasks:
            raise InputError("manifest has no instances")
        worst = EXIT_OK
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as ex:
                for iid, status, code in ex.map(_solve_instance_task, tasks):
                    print(f"{iid}: {status}")
                    worst = max(worst, code)
        else:
            for t in tasks:
                iid, status, code = _solve_instance_task(t)
                print(f"{iid}: {status}")
                worst = max(worst, code)
        return worst

    if not args.pair:
        raise InputError("solve needs --pair A B or --manifest")
    doc, code = _solve_one(args.pair[0], args.pair[1], pc, method)
    _dump_json(doc, args.out or "result.json")
    print(f"{doc['id']}: {doc.get('status', '?')} -> {args.out or 'result.json'}")
    return code


# -- eval ---------------------------------------------------------------------

def _result_files(path) -> list:
    p = Path(path)
    if p.is_dir():
        files = sorted(p.glob("*.result.json")) or sorted(p.glob("*.json"))
        if not files:
            raise InputError(f"no result JSONs under {p}")
        return files
    if not p.exists():
        raise InputError(f"no such result: {p}")
    return [p]


def _eval_row(doc: dict, man: dict, base: Path) -> dict:
    index = {inst["id"]: inst for inst in man.get("instances", [])}
    inst = index.get(doc.get("id"))
    if inst is None:
        pair = tuple(doc.get("pair") or ())
        for cand in man.get("instances", []):
            if (cand["g1"], cand["g2"]) == pair:
                inst = cand
                break
    if inst is None:
        raise InputError(f"result {doc.get('id')!r} not in manifest")
    g1 = graph_from_json(_load_json(base / inst["g1"]))
    g2 = graph_from_json(_load_json(base / inst["g2"]))
    if g1.gt_cluster is None or g2.gt_cluster is None:
        raise InputError(f"instance {inst['id']} carries no ground-truth labels")
    gt = np.asarray(inst["gt_match"], dtype=int)
    n = g1.n
    X_gt = np.zeros((n, n))
    X_gt[gt, np.arange(n)] = 1.0
    perm = np.asarray(doc["perm"], dtype=int)
    X = np.zeros((n, n))
    ok = perm >= 0
    X[perm[ok], np.where(ok)[0]] = 1.0
    m = m_acc(X, X_gt) if ok.any() else 0.0
    if doc.get("y1") is None:
        f1 = f2 = 0.0
    else:
        f1 = pairwise_f_score(doc["y1"], g1.gt_cluster)
        f2 = pairwise_f_score(doc["y2"], g2.gt_cluster)
    return {
        "scenario": inst["id"],
        "sigma": inst.get("sigma", ""),
        "method": doc.get("method", "joint"),
        "m_acc": f"{m:.6f}",
        "f1": f"{f1:.6f}",
        "f2": f"{f2:.6f}",
        "c_acc": f"{c_acc(f1, f2):.6f}",
        "mc_acc": f"{mc_acc(m, f1, f2):.6f}",
        "secs": f"{float(doc.get('secs', 0.0)):.3f}",
    }


def cmd_eval(args) -> int:
    man = _load_json(args.gt)
    base = Path(args.gt).parent
    rows = []
    for f in _result_files(args.result):
        rows.append(_eval_row(_load_json(f), man, base))
    rows.sort(key=lambda r: (r["scenario"], r["method"]))
    out = Path(args.out)
    new = not out.exists()
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "a", newline="") as f:
        w = csv.DictWriter(f, fieldnames=CSV_FIELDS)
        if new:
            w.writeheader()
        w.writerows(rows)
    print(f"appended {len(rows)} row(s) to {out}")
    return EXIT_OK


# -- plot ---------------------------------------------------------------------

def cmd_plot(args) -> int:
    path = Path(args.csv)
    if not path.exists():
        raise InputError(f"no such csv: {path}")
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    if not rows:
        raise InputError("empty CSV")
    metric = args.metric
    if metric not in CSV_FIELDS:
        raise InputError(f"unknown metric {metric!r}")
    series: dict[str, dict[float, list[float]]] = {}
    for r in rows:
        try:
            sig = float(r["sigma"])
        except (ValueError, TypeError):
            sig = 0.0
        series.setdefault(r["method"], {}).setdefault(sig, []).append(float(r[metric]))

    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for method in sorted(series):
        pts = sorted(series[method].items())
        xs = [p[0] for p in pts]
        ys = [float(np.median(p[1])) for p in pts]
        ax.plot(xs, ys, marker="o", label=method)
    ax.set_xlabel("noise sigma")
    ax.set_ylabel(metric)
    ax.set_ylim(-0.02, 1.05)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, format="svg")
    print(f"wrote {args.out}")
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="matchcut", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write synthetic graph pairs + manifest")
    g.add_argument("--scenario", required=True, help="scenario spec JSON")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run the joint pipeline on a pair")
    s.add_argument("--pair", nargs=2, metavar=("A", "B"))
    s.add_argument("--manifest", help="solve every instance of a manifest")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--config", help="JSON run-config (flags override)")
    s.add_argument("--preset", help="bundled preset name (cmu, small11, mid28, princeton)")
    s.add_argument("--k", type=int)
    s.add_argument("--dim", help="embedding dimension or 'auto'")
    s.add_argument("--lambda-m", dest="lambda_m", help="matching weight or 'auto'")
    s.add_argument("--lambda-c", dest="lambda_c", help="clustering weight or 'auto'")
    s.add_argument("--no-coupling", action="store_true")
    s.add_argument("--decoupled-lbar", action="store_true")
    s.add_argument("--coupling", choices=list(COUPLINGS))
    s.add_argument("--tol", type=float)
    s.add_argument("--max-iters", dest="max_iters", type=int)
    s.add_argument("--energy", type=float)
    s.add_argument("--d-min", dest="d_min", type=int)
    s.add_argument("--d-max", dest="d_max", type=int)
    s.add_argument("--repair", action="store_true",
                   help="re-assign matches within the rounded clusters (ablation)")
    s.add_argument("--pad", action="store_true",
                   help="pad unequal pairs with zero-affinity dummy nodes")
    s.add_argument("--baseline", action="store_true", help="spectral matching + k-means instead of the SDP")
    s.add_argument("--method", help="method label recorded in results")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    e = sub.add_parser("eval", help="score results against a manifest into CSV")
    e.add_argument("--result", required=True, help="result JSON or directory")
    e.add_argument("--gt", required=True, help="manifest JSON with ground truth")
    e.add_argument("--out", required=True, help="CSV to append to")
    e.set_defaults(func=cmd_eval)

    pl = sub.add_parser("plot", help="metric-vs-sigma SVG from an eval CSV")
    pl.add_argument("--csv", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--metric", default="mc_acc")
    pl.set_defaults(func=cmd_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except (np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ValueError, KeyError, TypeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
