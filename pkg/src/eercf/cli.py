"""Command-line interface for the retrieval engine.

Subcommands:

* ``ingest``    — convert external feature arrays into the binary dataset format.
* ``search``    — run queries against a gallery, one JSON line per query.
* ``eval``      — retrieval metrics over a manifest's ground-truth pairs.
* ``sweep``     — metrics across several recall depths (CSV/figure report).
* ``flops``     — analytic per-pair cost tables.
* ``synth``     — write a synthetic dataset with planted ground truth.
* ``losscheck`` — gradient and property verification of the loss suite.

Exit codes: 0 on success, 1 on validation/usage errors, 2 on I/O or file
format errors.  The environment variable ``EERCF_THREADS`` caps the worker
count used by ``eval``, ``sweep`` and batch ``search``.
"""

from __future__ import annotations

import argparse
import json
import sys
import zipfile
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import embedding_store as store
from .errors import FormatError, InvalidParams, ValidationError
from .flops import (
    PRESETS,
    CostModelInput,
    CostRow,
    MethodKind,
    flops_table,
    preset_table,
)
from .losses import (
    BatchFeatures,
    LossConfig,
    grad_check,
    inter_loss,
    inter_op,
    intra_op,
    pearson_distance,
    total_op,
)
from .ranking import Metrics, SearchConfig, evaluate, search, search_many, to_json_line
from .testkit import MODES, SynthConfig, generate
from .tib import TibConfig


class _UsageError(Exception):
    """Raised for malformed flags; mapped to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise _UsageError(message)


def _search_config(args: argparse.Namespace) -> SearchConfig:
    weights = (5 / 11, 5 / 11, 1 / 11)
    if getattr(args, "weights", None):
        parts = args.weights.split(",")
        if len(parts) != 3:
            raise InvalidParams(f"--weights needs three comma-separated reals, got {args.weights!r}")
        weights = tuple(float(p) for p in parts)  # type: ignore[assignment]
    return SearchConfig(
        top_k=args.top_k,
        fusion_weights=weights,
        tib=TibConfig(temperature_frame=args.pi_frame, temperature_patch=args.pi_patch),
    )


def _add_search_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--top-k", type=int, default=50, help="recall depth (default 50)")
    parser.add_argument("--pi-frame", type=float, default=0.1,
                        help="frame-level attention temperature (default 0.1)")
    parser.add_argument("--pi-patch", type=float, default=0.01,
                        help="patch-level attention temperature (default 0.01)")
    parser.add_argument("--weights", type=str, default=None,
                        help="fusion weights as 'w1,w2,w3' (default 5,5,1; normalized)")


def _add_dataset_flags(parser: argparse.ArgumentParser, with_manifest: bool) -> None:
    parser.add_argument("--gallery", required=True,
                        help="videos.bin file, or a dataset directory containing it")
    parser.add_argument("--texts", required=True,
                        help="texts.bin file, or a dataset directory containing it")
    if with_manifest:
        parser.add_argument("--manifest", required=True,
                            help="manifest.json file, or a dataset directory containing it")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eercf", description=__doc__.splitlines()[0], allow_abbrev=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p_ingest = sub.add_parser(
        "ingest", help="convert external arrays into the binary dataset format",
        description="Reads <input>/videos/*.npz (arrays 'frames' T x D and "
        "'patches' T x P x D), <input>/texts.jsonl ({'id', 'feature', optional "
        "'caption'} per line; features are normalized), and <input>/pairs.json "
        "([{'text_id', 'video_id'}, ...]); validates and writes videos.bin, "
        "texts.bin and manifest.json.",
        allow_abbrev=False)
    p_ingest.add_argument("--input", required=True, help="directory with external data")
    p_ingest.add_argument("--out", required=True, help="output dataset directory")
    p_ingest.add_argument("--dataset", default=None, help="dataset name (default: input dir name)")

    p_search = sub.add_parser("search", help="rank gallery videos for one or all queries",
                              allow_abbrev=False)
    _add_dataset_flags(p_search, with_manifest=False)
    group = p_search.add_mutually_exclusive_group(required=True)
    group.add_argument("--query-id", help="run a single query by text id")
    group.add_argument("--all", action="store_true", help="run every query in the text file")
    _add_search_flags(p_search)
    p_search.add_argument("--workers", type=int, default=1, help="parallel query workers")
    p_search.add_argument("--out", default=None, help="write JSON lines here instead of stdout")

    p_eval = sub.add_parser("eval", help="retrieval metrics over ground-truth pairs",
                            allow_abbrev=False)
    _add_dataset_flags(p_eval, with_manifest=True)
    _add_search_flags(p_eval)
    p_eval.add_argument("--workers", type=int, default=1, help="parallel query workers")
    p_eval.add_argument("--format", choices=("text", "json"), default="text")
    p_eval.add_argument("--plot", default=None, help="also render a metrics figure (PNG/PDF)")

    p_sweep = sub.add_parser("sweep", help="metrics across several recall depths",
                             allow_abbrev=False)
    _add_dataset_flags(p_sweep, with_manifest=True)
    p_sweep.add_argument("--ks", default="10,20,50,100",
                         help="comma-separated recall depths (default 10,20,50,100)")
    p_sweep.add_argument("--pi-frame", type=float, default=0.1)
    p_sweep.add_argument("--pi-patch", type=float, default=0.01)
    p_sweep.add_argument("--weights", type=str, default=None)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--format", choices=("text", "json"), default="text")
    p_sweep.add_argument("--csv", default=None, help="write the sweep as CSV")
    p_sweep.add_argument("--plot", default=None, help="render the sweep as a figure")

    p_flops = sub.add_parser("flops", help="analytic per-pair cost tables", allow_abbrev=False)
    p_flops.add_argument("--preset", choices=sorted(PRESETS), default=None,
                         help="benchmark-scale preset for the standard comparison table")
    p_flops.add_argument("--method", default=None,
                         help="single method kind: " + ", ".join(k.value for k in MethodKind))
    p_flops.add_argument("--N", type=int, default=None, help="gallery size")
    p_flops.add_argument("--Nv", type=int, default=None, help="frames per video")
    p_flops.add_argument("--Nt", type=int, default=None, help="words per text")
    p_flops.add_argument("--Np", type=int, default=None, help="patches per video")
    p_flops.add_argument("--Nr", type=int, default=None, help="rerank candidates")
    p_flops.add_argument("--D", type=int, default=None, help="embedding dimension")
    p_flops.add_argument("--format", choices=("text", "json"), default="text")
    p_flops.add_argument("--csv", default=None, help="write the table as CSV")
    p_flops.add_argument("--plot", default=None, help="render the table as a figure")

    p_synth = sub.add_parser("synth", help="write a synthetic dataset", allow_abbrev=False)
    p_synth.add_argument("--out", required=True, help="output dataset directory")
    p_synth.add_argument("--videos", type=int, required=True, help="number of gallery videos")
    p_synth.add_argument("--queries", type=int, required=True, help="number of query texts")
    p_synth.add_argument("--dim", type=int, default=32)
    p_synth.add_argument("--frames", type=int, default=4)
    p_synth.add_argument("--patches", type=int, default=3, help="patches per frame")
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--noise", type=float, default=0.1, help="query noise level")
    p_synth.add_argument("--mode", choices=MODES, default="none")

    p_loss = sub.add_parser("losscheck", help="verify loss gradients and properties",
                            allow_abbrev=False)
    p_loss.add_argument("--batch", type=int, default=8, help="batch size (default 8)")
    p_loss.add_argument("--dim", type=int, default=16, help="feature dimension (default 16)")
    p_loss.add_argument("--seeds", type=int, default=20, help="number of seeded trials")
    p_loss.add_argument("--eps", type=float, default=1e-5, help="finite-difference step")
    p_loss.add_argument("--tau", type=float, default=1.0,
                        help="contrastive temperature for the certification "
                        "(default 1.0; sharp values saturate the softmax and "
                        "push flat gradient coordinates below finite-difference "
                        "resolution)")
    p_loss.add_argument("--alpha", type=float, default=0.05)
    p_loss.add_argument("--beta", type=float, default=0.001)
    p_loss.add_argument("--format", choices=("text", "json"), default="text")

    return parser


# ---------------------------------------------------------------------------
# Subcommand handlers
# ---------------------------------------------------------------------------

def _cmd_ingest(args: argparse.Namespace) -> int:
    input_dir = Path(args.input)
    videos_dir = input_dir / "videos"
    npz_files = sorted(videos_dir.glob("*.npz"))
    if not npz_files:
        raise InvalidParams(f"no video files found under {videos_dir}")
    records = []
    for npz_path in npz_files:
        try:
            data = np.load(npz_path)
        except (ValueError, OSError, zipfile.BadZipFile) as exc:
            raise FormatError(f"could not read {npz_path}: {exc}") from exc
        with data:
            if "frames" not in data or "patches" not in data:
                raise InvalidParams(f"{npz_path} must contain 'frames' and 'patches' arrays")
            records.append(store.VideoRecord(
                id=npz_path.stem, frames=data["frames"], patches=data["patches"]))

    texts = []
    texts_path = input_dir / "texts.jsonl"
    with open(texts_path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                entry = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{texts_path}:{line_no}: {exc}") from exc
            if "id" not in entry or "feature" not in entry:
                raise InvalidParams(f"{texts_path}:{line_no}: needs 'id' and 'feature'")
            texts.append(store.TextRecord.from_vector(
                entry["id"], np.asarray(entry["feature"], dtype=np.float64),
                caption=entry.get("caption")))

    pairs_path = input_dir / "pairs.json"
    try:
        raw_pairs = json.loads(pairs_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{pairs_path}: {exc}") from exc
    pairs = tuple((str(p["text_id"]), str(p["video_id"])) for p in raw_pairs)

    dim = records[0].dim
    manifest = store.Manifest(
        dataset=args.dataset or input_dir.name, dim=dim, pairs=pairs,
        extra={"counts": {"videos": len(records), "texts": len(texts)}})
    out = store.write_gallery(records, texts, manifest, args.out)
    store.load_dataset(out)  # re-validate what we just wrote
    print(f"dataset  {manifest.dataset}")
    print(f"dim      {dim}")
    print(f"videos   {len(records)}")
    print(f"texts    {len(texts)}")
    print(f"pairs    {len(pairs)}")
    print(f"out      {out}")
    return 0


def _cmd_search(args: argparse.Namespace) -> int:
    gallery = store.load_gallery(args.gallery)
    texts = store.load_texts(args.texts)
    config = _search_config(args)
    if args.query_id is not None:
        by_id = {t.id: t for t in texts}
        if args.query_id not in by_id:
            raise InvalidParams(f"query id {args.query_id!r} not found in texts file")
        selected = [by_id[args.query_id]]
    else:
        selected = texts

    sink = open(args.out, "w", encoding="utf-8") if args.out else sys.stdout
    try:
        if args.query_id is not None or args.workers == 1:
            for text in selected:
                sink.write(to_json_line(text.id, search(text, gallery, config)) + "\n")
        else:
            for text, ranked in zip(selected, search_many(selected, gallery, config,
                                                          workers=args.workers)):
                sink.write(to_json_line(text.id, ranked) + "\n")
    finally:
        if args.out:
            sink.close()
    return 0


def _metrics_text(metrics: Metrics, queries: int, top_k: int) -> str:
    lines = [f"queries  {queries}", f"top-k    {top_k}"]
    for label, value in (("R@1", metrics.r_at_1), ("R@5", metrics.r_at_5),
                         ("R@10", metrics.r_at_10), ("Mean", metrics.mean)):
        lines.append(f"{label:<8} {value:.1f}")
    return "\n".join(lines)


def _cmd_eval(args: argparse.Namespace) -> int:
    gallery = store.load_gallery(args.gallery)
    texts = store.load_texts(args.texts)
    manifest = store.load_manifest(args.manifest)
    config = _search_config(args)
    metrics = evaluate(texts, manifest.ground_truth(), gallery, config, workers=args.workers)
    if args.format == "json":
        payload = {"queries": len(texts), "top_k": config.top_k, **metrics.as_dict()}
        print(json.dumps(payload, indent=2))
    else:
        print(_metrics_text(metrics, len(texts), config.top_k))
    if args.plot:
        from . import report

        path = report.metrics_figure(metrics, args.plot,
                                     title=f"{manifest.dataset} (top-k={config.top_k})")
        print(f"figure   {path}", file=sys.stderr)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    gallery = store.load_gallery(args.gallery)
    texts = store.load_texts(args.texts)
    manifest = store.load_manifest(args.manifest)
    try:
        ks = [int(part) for part in args.ks.split(",") if part.strip()]
    except ValueError:
        raise InvalidParams(f"--ks must be comma-separated integers, got {args.ks!r}") from None
    if not ks:
        raise InvalidParams("--ks must name at least one depth")
    ground_truth = manifest.ground_truth()
    results: list[Metrics] = []
    for k in ks:
        namespace = argparse.Namespace(top_k=k, pi_frame=args.pi_frame,
                                       pi_patch=args.pi_patch, weights=args.weights)
        config = _search_config(namespace)
        results.append(evaluate(texts, ground_truth, gallery, config, workers=args.workers))
    if args.format == "json":
        payload = [{"top_k": k, **m.as_dict()} for k, m in zip(ks, results)]
        print(json.dumps(payload, indent=2))
    else:
        print(f"{'top-k':>6}  {'R@1':>6}  {'R@5':>6}  {'R@10':>6}  {'Mean':>6}")
        for k, m in zip(ks, results):
            print(f"{k:>6}  {m.r_at_1:>6.1f}  {m.r_at_5:>6.1f}  {m.r_at_10:>6.1f}  {m.mean:>6.1f}")
    if args.csv or args.plot:
        from . import report

        if args.csv:
            print(f"csv      {report.write_sweep_csv(ks, results, args.csv)}", file=sys.stderr)
        if args.plot:
            path = report.sweep_figure(ks, results, args.plot,
                                       title=f"{manifest.dataset}: depth sweep")
            print(f"figure   {path}", file=sys.stderr)
    return 0


def _flops_rows(args: argparse.Namespace) -> list[CostRow]:
    overrides = {
        name: value
        for name, value in (("N", args.N), ("N_v", args.Nv), ("N_t", args.Nt),
                            ("N_p", args.Np), ("N_r", args.Nr), ("D", args.D))
        if value is not None
    }
    if args.preset and args.method:
        raise InvalidParams("--preset and --method are mutually exclusive")
    if args.preset:
        return preset_table(args.preset, **overrides)
    params = CostModelInput(**{**dict(N=1000, N_v=12, N_t=32, N_p=588, N_r=50, D=512),
                               **overrides})
    if args.method:
        kind = MethodKind.from_string(args.method)
        return flops_table([(kind.value, kind, params)])
    return flops_table([(kind.value, kind, params) for kind in MethodKind])


def _cmd_flops(args: argparse.Namespace) -> int:
    rows = _flops_rows(args)
    if args.format == "json":
        payload = [
            {"label": r.label, "kind": r.kind.value, "formula": r.formula,
             "per_pair_macs": r.per_pair, "ratio_to_cheapest": r.ratio_to_cheapest}
            for r in rows
        ]
        print(json.dumps(payload, indent=2))
    else:
        width = max(len(r.label) for r in rows)
        fwidth = max(len(r.formula) for r in rows)
        print(f"{'method':<{width}}  {'per-pair MACs':>14}  {'':>8}  {'ratio':>8}  formula")
        for r in rows:
            print(f"{r.label:<{width}}  {r.per_pair:>14,.1f}  {r.per_pair / 1000:>7.1f}k"
                  f"  {r.ratio_to_cheapest:>7.1f}x  {r.formula:<{fwidth}}")
    if args.csv or args.plot:
        from . import report

        if args.csv:
            print(f"csv      {report.write_cost_csv(rows, args.csv)}", file=sys.stderr)
        if args.plot:
            print(f"figure   {report.cost_figure(rows, args.plot)}", file=sys.stderr)
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    config = SynthConfig(
        n_videos=args.videos, n_queries=args.queries, dim=args.dim, frames=args.frames,
        patches_per_frame=args.patches, seed=args.seed, noise=args.noise, mode=args.mode)
    gallery, texts, manifest = generate(config)
    out = store.write_gallery(list(gallery), texts, manifest, args.out)
    print(f"dataset  {manifest.dataset}")
    print(f"dim      {config.dim}")
    print(f"videos   {len(gallery)}")
    print(f"texts    {len(texts)}")
    print(f"seed     {config.seed}")
    print(f"out      {out}")
    return 0


def _unit_rows(rng: np.random.Generator, b: int, d: int) -> np.ndarray:
    rows = rng.standard_normal((b, d))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def _cmd_losscheck(args: argparse.Namespace) -> int:
    if args.batch < 2:
        raise InvalidParams(f"--batch must be >= 2, got {args.batch}")
    if args.dim < 2:
        raise InvalidParams(f"--dim must be >= 2, got {args.dim}")
    if args.seeds < 1:
        raise InvalidParams(f"--seeds must be >= 1, got {args.seeds}")
    config = LossConfig(alpha=args.alpha, beta=args.beta, infonce_temperature=args.tau)
    b, d = args.batch, args.dim

    worst_inter = worst_intra = worst_total = 0.0
    for seed in range(args.seeds):
        rng = np.random.default_rng(seed)
        inputs = {"f_v": _unit_rows(rng, b, d), "f_t": _unit_rows(rng, b, d)}
        worst_inter = max(worst_inter, grad_check(inter_op(args.tau), inputs, eps=args.eps))
        worst_intra = max(worst_intra, grad_check(intra_op(args.alpha), inputs, eps=args.eps))
        total_inputs = {
            f"{side}_l{i}": _unit_rows(rng, b, d) for i in (1, 2, 3) for side in ("f_v", "f_t")
        }
        worst_total = max(worst_total, grad_check(total_op(config), total_inputs, eps=args.eps))

    rng = np.random.default_rng(12345)
    worst_affine = 0.0
    range_ok = True
    for _ in range(1000):
        x = rng.standard_normal(b)
        y = rng.standard_normal(b)
        base = pearson_distance(x, y)
        if not (0.0 <= base <= 2.0):
            range_ok = False
        m1, m2 = rng.uniform(0.1, 3.0, size=2)
        if rng.random() < 0.5:
            m1, m2 = -m1, -m2
        n1, n2 = rng.uniform(-5.0, 5.0, size=2)
        worst_affine = max(worst_affine, abs(pearson_distance(m1 * x + n1, m2 * y + n2) - base))

    rng = np.random.default_rng(999)
    batch = BatchFeatures(_unit_rows(rng, b, d), _unit_rows(rng, b, d))
    nonneg = inter_loss(batch, tau=args.tau).value >= 0.0

    checks = [
        ("inter gradient vs finite differences", worst_inter, 1e-4, worst_inter < 1e-4),
        ("intra gradient vs finite differences", worst_intra, 1e-4, worst_intra < 1e-4),
        ("total gradient vs finite differences", worst_total, 1e-4, worst_total < 1e-4),
        ("correlation-distance affine invariance", worst_affine, 1e-6, worst_affine < 1e-6),
        ("correlation distance within [0, 2]", 0.0 if range_ok else 1.0, 0.5, range_ok),
        ("contrastive loss nonnegative", 0.0 if nonneg else 1.0, 0.5, nonneg),
    ]
    all_ok = all(ok for _, _, _, ok in checks)
    if args.format == "json":
        payload = [
            {"check": name, "worst": value, "threshold": threshold, "pass": ok}
            for name, value, threshold, ok in checks
        ]
        print(json.dumps(payload, indent=2))
    else:
        width = max(len(name) for name, *_ in checks)
        for name, value, threshold, ok in checks:
            status = "PASS" if ok else "FAIL"
            print(f"{status}  {name:<{width}}  worst={value:.3e}  threshold={threshold:.0e}")
    return 0 if all_ok else 1


_HANDLERS: dict[str, Callable[[argparse.Namespace], int]] = {
    "ingest": _cmd_ingest,
    "search": _cmd_search,
    "eval": _cmd_eval,
    "sweep": _cmd_sweep,
    "flops": _cmd_flops,
    "synth": _cmd_synth,
    "losscheck": _cmd_losscheck,
}


def main(argv: Sequence[str] | None = None) -> int:
    """Parse ``argv`` and dispatch; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _HANDLERS[args.command](args)
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    """Console-script shim."""
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
