"""Command-line front end.

Subcommands: ``entropy`` (state entropy in nats), ``relent`` (relative
entropy of two states), ``mi`` (total correlation), ``ree`` (free-set
distance bracket), ``seq run`` (experiment manifest to CSV tables plus a
JSON verdict block), ``verify`` (identity suites).

Exit codes: 0 success, 1 usage or parse error, 2 numerical failure (flagged
oracle, degenerate operation, sampling cap), 3 verification-suite failure.
All error text goes to standard error.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import io as reeio
from .channels import identity_operation, local_unitary_operation, local_projection_operation
from .entropy import mutual_information, relative_entropy, von_neumann_entropy
from .errors import (
    DegenerateOperationError,
    FreeConeViolationError,
    OracleConvergenceError,
    SamplingCapError,
    SupportViolationError,
)
from .operators import DensityOperator, SystemLayout
from .sequences import (
    StateSequence,
    gen_constant,
    gen_dominated,
    gen_lsc_gap,
    gen_mixture,
    gen_pushforward,
    lsc_gap_weights,
    run_continuity_harness,
)
from .solver import SolverConfig, free_distance
from .states import random_faithful_density, random_traceless_hermitian
from .verify import run_identity_suites

NUMERICAL_ERRORS = (
    SupportViolationError,
    OracleConvergenceError,
    SamplingCapError,
    DegenerateOperationError,
    FreeConeViolationError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # route argparse failures to exit code 1
        raise UsageError(message)


def _parse_dims(text: str) -> list[int]:
    try:
        dims = [int(x) for x in text.lower().split("x")]
    except ValueError as exc:
        raise UsageError(f"bad dims {text!r}; expected like 2x2x3") from exc
    if not dims or any(d < 1 for d in dims):
        raise UsageError(f"bad dims {text!r}")
    return dims


def _load_state(path: str, dims: str | None = None) -> DensityOperator:
    try:
        state, _ = reeio.load_state(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    except reeio.FormatError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    if dims is not None:
        layout = _parse_dims(dims)
        if int(np.prod(layout)) != state.dim:
            raise UsageError(
                f"--dims {dims} does not match the state dimension {state.dim}"
            )
        state = DensityOperator(state.positive, layout)
    return state


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else f"{x:.6f}"


# ---------------------------------------------------------------------------
# Manifest-driven sequence construction
# ---------------------------------------------------------------------------

_PARAM_KEYS = {
    "constant": {"state"},
    "dominated": {"c", "delta", "sigma"},
    "mixture": {"a", "b", "p", "p_limit"},
    "pushforward": {"base", "operation", "rate", "gamma"},
    "lsc_gap": {"dim_schedule", "weight_schedule"},
}


def _check_params(family: str, params: dict) -> None:
    unknown = set(params) - _PARAM_KEYS[family]
    if unknown:
        raise reeio.FormatError(f"unknown params for family {family}: {sorted(unknown)}")


def _matrix_exp_hermitian(h: np.ndarray, angle: float) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * angle * w)) @ v.conj().T


def build_sequence(
    family: str,
    params: dict,
    layout: SystemLayout,
    n: int,
    seed: int,
    base_dir: str = ".",
    cone_model=None,
) -> StateSequence:
    """Construct a sequence family from manifest parameters."""
    _check_params(family, params)
    if family == "constant":
        if "state" in params:
            state, _ = reeio.load_state(params["state"])
        else:
            state = random_faithful_density(layout, seed)
        return gen_constant(state, n)
    if family == "dominated":
        if "sigma" in params:
            sigma, _ = reeio.load_state(params["sigma"])
        else:
            sigma = random_faithful_density(layout, seed + 1)
        return gen_dominated(
            sigma, float(params.get("c", 0.5)), n, seed, params.get("delta")
        )
    if family == "mixture":
        frag_a, frag_b = params["a"], params["b"]
        seq_a = build_sequence(
            frag_a["family"], frag_a.get("params", {}), layout, n,
            frag_a.get("seed", seed + 11), base_dir, cone_model,
        )
        seq_b = build_sequence(
            frag_b["family"], frag_b.get("params", {}), layout, n,
            frag_b.get("seed", seed + 23), base_dir, cone_model,
        )
        p_limit = float(params.get("p_limit", 0.5))
        p = params.get("p") or [p_limit + (1.0 - p_limit) / (2.0 * k) for k in range(1, n + 1)]
        return gen_mixture(seq_a, seq_b, [float(x) for x in p], p_limit)
    if family == "pushforward":
        frag = params["base"]
        base = build_sequence(
            frag["family"], frag.get("params", {}), layout, n,
            frag.get("seed", seed + 31), base_dir, cone_model,
        )
        kind = params.get("operation", "local_unitary_drift")
        d0 = layout.dims[0]
        if kind == "local_unitary_drift":
            rate = float(params.get("rate", 1.0))
            h = random_traceless_hermitian(d0, seed + 41)
            h /= max(float(np.max(np.abs(np.linalg.eigvalsh(h)))), 1e-12)
            ops = []
            for k in range(1, n + 1):
                u = _matrix_exp_hermitian(h, rate / k)
                blocks = [u] + [np.eye(d) for d in layout.dims[1:]]
                ops.append(local_unitary_operation(blocks, layout))
            limit_op = identity_operation(layout)
        elif kind == "local_filter":
            gamma = float(params.get("gamma", 0.5))
            diag = np.ones(d0)
            diag[1:] = math.sqrt(gamma)
            filt = local_projection_operation(np.diag(diag), 1, layout)
            ops = [filt] * n
            limit_op = filt
        else:
            raise reeio.FormatError(f"unknown pushforward operation {kind!r}")
        return gen_pushforward(base, ops, limit_op, model=cone_model, seed=seed + 47)
    if family == "lsc_gap":
        dims = params.get("dim_schedule") or [min(2 + (k - 1) // (max(n, 2) // 3 + 1), 4) for k in range(1, n + 1)]
        weights = params.get("weight_schedule", "auto")
        if weights == "auto":
            weights = lsc_gap_weights(dims)
        return gen_lsc_gap([int(d) for d in dims], [float(w) for w in weights])
    raise reeio.FormatError(f"unknown family {family!r}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def _cmd_entropy(args) -> int:
    state = _load_state(args.state, args.dims)
    print(_fmt(von_neumann_entropy(state)))
    return 0


def _cmd_relent(args) -> int:
    rho = _load_state(args.rho, args.dims)
    sigma = _load_state(args.sigma, args.dims)
    print(_fmt(relative_entropy(rho, sigma, args.tol)))
    return 0


def _cmd_mi(args) -> int:
    state = _load_state(args.state, args.dims)
    if state.layout.m < 2:
        raise UsageError("mutual information needs a multipartite layout; pass --dims")
    print(_fmt(mutual_information(state)))
    return 0


def _cmd_ree(args) -> int:
    state = _load_state(args.state, args.dims)
    try:
        model = reeio.parse_model_descriptor(args.free_set, state.layout)
    except reeio.FormatError as exc:
        raise UsageError(str(exc)) from exc
    from .freesets import OracleConfig

    cfg = SolverConfig(
        max_iterations=args.max_iter,
        stopping_gap=args.tol,
        oracle=OracleConfig(seed=args.seed),
    )
    result = free_distance(state, model, cfg)
    print(f"[{_fmt(result.bracket[0])}, {_fmt(result.bracket[1])}] iterations={result.iterations}")
    if not result.converged:
        print(f"warning: {result.diagnostic}", file=sys.stderr)
        return 2
    return 0


def _cmd_seq_run(args) -> int:
    try:
        manifest = reeio.load_manifest(args.manifest)
    except OSError as exc:
        raise UsageError(f"cannot read {args.manifest}: {exc}") from exc
    except reeio.FormatError as exc:
        raise UsageError(f"{args.manifest}: {exc}") from exc
    import os

    base_dir = os.path.dirname(os.path.abspath(args.manifest))
    try:
        models = [
            reeio.parse_model_descriptor(d, manifest.layout, base_dir)
            for d in manifest.model_descriptors
        ]
    except reeio.FormatError as exc:
        raise UsageError(str(exc)) from exc
    cone_model = models[0] if manifest.family == "pushforward" else None
    try:
        seq = build_sequence(
            manifest.family, manifest.params, manifest.layout, manifest.n,
            manifest.seed, base_dir, cone_model,
        )
        report = run_continuity_harness(seq, models, manifest.harness)
    except reeio.FormatError as exc:
        raise UsageError(str(exc)) from exc
    paths = reeio.write_report(report, args.out, manifest.seed)
    for m in report.models:
        print(
            f"{m.label}: predicted={m.predicted} observed={m.observed} "
            f"agreement={'yes' if m.agreement else 'NO'}"
        )
    for p in paths:
        print(f"wrote {p}")
    if any(not m.agreement for m in report.models) or any(
        not c.ok for c in report.implications
    ):
        print("error: harness found a predicted/observed disagreement", file=sys.stderr)
        return 2
    return 0


def _cmd_verify(args) -> int:
    summary = run_identity_suites(seed=args.seed, states=args.states)
    for line in summary.lines():
        print(line)
    return 0 if summary.ok else 3


def _build_parser() -> _Parser:
    parser = _Parser(prog="reelab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("entropy", help="entropy of a state, in nats")
    p.add_argument("state")
    p.add_argument("--dims", default=None)
    p.set_defaults(fn=_cmd_entropy)

    p = sub.add_parser("relent", help="relative entropy D(rho || sigma), or inf")
    p.add_argument("rho")
    p.add_argument("sigma")
    p.add_argument("--dims", default=None)
    p.add_argument("--tol", type=float, default=1e-10, help="support-comparison tolerance")
    p.set_defaults(fn=_cmd_relent)

    p = sub.add_parser("mi", help="total correlation across the layout's factors")
    p.add_argument("state")
    p.add_argument("--dims", default=None)
    p.set_defaults(fn=_cmd_mi)

    p = sub.add_parser("ree", help="free-set distance bracket")
    p.add_argument("state")
    p.add_argument("--free-set", required=True)
    p.add_argument("--dims", default=None)
    p.add_argument("--tol", type=float, default=1e-4, help="stopping gap in nats")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=_cmd_ree)

    p = sub.add_parser("seq", help="sequence experiments")
    seq_sub = p.add_subparsers(dest="seq_command", required=True)
    run_p = seq_sub.add_parser("run", help="run a manifest and write reports")
    run_p.add_argument("manifest")
    run_p.add_argument("--out", default="reports")
    run_p.set_defaults(fn=_cmd_seq_run)

    p = sub.add_parser("verify", help="run the identity suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--states", type=int, default=200)
    p.set_defaults(fn=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
