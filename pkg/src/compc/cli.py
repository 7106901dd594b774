"""Operator front end: run scenarios, sweep the threshold grid, audit.

Scenario files are flat text: `key = value` lines for parameters,
`input = 1 2 ; 3 4` rows for source matrices, `adversary = 3 Silent`
corruption entries, and one program op per line in prefix form
(`MUL ra rb -> rc`). Results go to stdout and optionally to files as
line-delimited records with a stable key order, so identical configs
and seeds produce identical bytes; the sweep's wall-time column is the
one deliberate exception.

Exit codes: 0 success, 2 configuration error, 3 protocol abort,
4 leakage flagged by an audit. A run's `correct` field is judged
against a plain Python-integer evaluation of the same program, kept
free of any protocol code.
"""

import argparse
import hashlib
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .audit import (LEAK_PRODUCT, LEAK_SOURCE, AuditTemplate, enumerate_views,
                    monte_carlo_audit, product_round_audit, tv_distance)
from .errors import CompcError, ParameterViolation, ProtocolAbort, TooFewSurvivors
from .gf import DEFAULT_PRIME, FMatrix
from .mpc import ProgramOp, multiply_semi_honest, recovery_threshold
from .net import STRATEGY_NAMES, Scenario, _ser, run_scenario
from .sharing import reconstruct

OK, CONFIG_ERROR, ABORT, LEAKY = 0, 2, 3, 4

_OPS = {
    "SHARE": ("share", 2, True),
    "MUL": ("mul", 2, True),
    "ADD": ("add", 2, True),
    "TRANSPOSE": ("transpose", 1, True),
    "D2R": ("d2r", 1, True),
    "R2D": ("r2d", 1, True),
    "REVEAL": ("reveal", 1, False),
}


@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    scenario: str = ""
    out: str = ""
    n: int = None
    t: int = None
    m: int = None
    prime: int = None
    seed: int = None
    strategy: str = ""
    grid: str = ""
    samples: int = 2000


class ConfigError(Exception):
    pass


def parse_program_line(line):
    head, _, tail = line.partition("->")
    tokens = head.split()
    mnemonic = tokens[0].upper()
    if mnemonic not in _OPS:
        raise ConfigError(f"unknown op {tokens[0]!r}")
    kind, arity, has_dest = _OPS[mnemonic]
    args = tokens[1:]
    dest = tail.strip()
    if len(args) != arity or bool(dest) != has_dest:
        raise ConfigError(f"malformed op line {line!r}")
    if kind == "share":
        try:
            src = int(args[0])
        except ValueError as exc:
            raise ConfigError(f"bad source index in {line!r}") from exc
        if args[1] not in ("direct", "reverse"):
            raise ConfigError(f"bad direction in {line!r}")
        return ProgramOp("share", (src, args[1]), dest)
    if kind == "reveal":
        return ProgramOp("reveal", (args[0],))
    return ProgramOp(kind, tuple(args), dest)


def parse_scenario_text(text):
    """Parse the flat scenario format into plain settings + program."""
    settings = {"prime": DEFAULT_PRIME, "seed": 0}
    adversaries, inputs, program = [], [], []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line and not line.partition("=")[0].strip().isupper():
            key, _, value = (x.strip() for x in line.partition("="))
            if key in ("n", "t", "m", "z", "prime", "seed"):
                try:
                    settings[key] = int(value)
                except ValueError as exc:
                    raise ConfigError(f"bad integer for {key}: {value!r}") from exc
            elif key == "adversary":
                parts = value.split()
                if len(parts) != 2:
                    raise ConfigError(f"adversary needs party and strategy: {raw!r}")
                try:
                    adversaries.append((int(parts[0]), parts[1]))
                except ValueError as exc:
                    raise ConfigError(f"bad adversary party: {raw!r}") from exc
            elif key == "input":
                try:
                    rows = [[int(v) for v in row.split()]
                            for row in value.split(";")]
                except ValueError as exc:
                    raise ConfigError(f"bad input row: {raw!r}") from exc
                inputs.append(rows)
            else:
                raise ConfigError(f"unknown setting {key!r}")
        else:
            program.append(parse_program_line(line))
    return settings, tuple(adversaries), inputs, tuple(program)


def load_scenario(config):
    try:
        with open(config.scenario, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc}") from exc
    settings, adversaries, raw_inputs, program = parse_scenario_text(text)
    for field in ("n", "t", "m", "prime", "seed"):
        override = getattr(config, field)
        if override is not None:
            settings[field] = override
    for field in ("n", "t", "m", "z"):
        if field not in settings:
            raise ConfigError(f"scenario is missing {field}")
    if config.strategy:
        if config.strategy not in STRATEGY_NAMES:
            raise ConfigError(f"unknown strategy {config.strategy!r}")
        if adversaries:
            adversaries = tuple((party, config.strategy)
                                for party, _ in adversaries)
        else:
            last = settings["n"]
            adversaries = tuple((last - i, config.strategy)
                                for i in range(settings["t"]))
    p = settings["prime"]
    inputs = tuple(FMatrix(rows, p) for rows in raw_inputs)
    shares = [op for op in program if op.kind == "share"]
    if any(op.args[0] >= len(inputs) for op in shares):
        raise ConfigError("program shares more sources than inputs provided")
    if not program:
        raise ConfigError("scenario has no program")
    return Scenario(n=settings["n"], t=settings["t"], m=settings["m"], p=p,
                    seed=settings["seed"], z=settings["z"], program=program,
                    adversaries=tuple(adversaries), inputs=inputs)


def _py_matmul_t(x, y, p):
    """x @ y^T over plain Python ints, immune to any numpy conventions."""
    rows, inner = len(x), len(x[0])
    cols = len(y)
    return [[sum(x[i][k] * y[j][k] for k in range(inner)) % p
             for j in range(cols)] for i in range(rows)]


def direct_eval(program, inputs, p):
    """Reference evaluation of a program on the raw secret matrices."""
    regs = {}
    out = None
    for op in program:
        if op.kind == "share":
            regs[op.dest] = [[int(v) % p for v in row]
                             for row in inputs[op.args[0]].a.tolist()]
        elif op.kind == "mul":
            regs[op.dest] = _py_matmul_t(regs[op.args[0]], regs[op.args[1]], p)
        elif op.kind == "add":
            a, b = regs[op.args[0]], regs[op.args[1]]
            regs[op.dest] = [[(u + v) % p for u, v in zip(ra, rb)]
                             for ra, rb in zip(a, b)]
        elif op.kind == "transpose":
            src = regs[op.args[0]]
            regs[op.dest] = [list(col) for col in zip(*src)]
        elif op.kind in ("d2r", "r2d"):
            regs[op.dest] = regs[op.args[0]]
        elif op.kind == "reveal":
            out = regs[op.args[0]]
        else:
            raise ConfigError(f"unknown program op {op.kind!r}")
    return out


def _digest(matrix):
    return hashlib.sha256(_ser(matrix.a).encode()).hexdigest()


def _eliminations(transcript):
    found = {}
    for event in transcript.events:
        if event and event[0] == "eliminate":
            _, _, party, reason = event
            found.setdefault(int(party), str(reason))
    return found


def _emit(lines, out_path):
    text = "\n".join(lines) + ("\n" if lines else "")
    sys.stdout.write(text)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)


def cmd_run(config):
    scenario = load_scenario(config)
    name = os.path.splitext(os.path.basename(config.scenario))[0]
    try:
        transcript = run_scenario(scenario)
    except (ProtocolAbort, TooFewSurvivors) as exc:
        line = (f"record=run scenario={name} n={scenario.n} t={scenario.t} "
                f"m={scenario.m} p={scenario.p} seed={scenario.seed} "
                f"correct=false abort={exc.__class__.__name__} "
                f"eliminations=- master=-")
        _emit([line], config.out)
        return ABORT
    expected = direct_eval(scenario.program, scenario.inputs, scenario.p)
    master = transcript.master_output
    correct = (expected is None and master is None) or (
        master is not None and expected is not None
        and master.a.tolist() == expected)
    elimin = _eliminations(transcript)
    elim_txt = ",".join(f"{party}:{reason}"
                        for party, reason in sorted(elimin.items())) or "-"
    digest = _digest(master) if master is not None else "-"
    line = (f"record=run scenario={name} n={scenario.n} t={scenario.t} "
            f"m={scenario.m} p={scenario.p} seed={scenario.seed} "
            f"correct={'true' if correct else 'false'} abort=- "
            f"eliminations={elim_txt} master={digest}")
    _emit([line], config.out)
    if config.out:
        with open(config.out + ".transcript", "w", encoding="utf-8") as fh:
            fh.write(transcript.serialize())
    return OK if correct else 1


def _parse_sweep_grid(grid):
    """Grid syntax: `m=1,2;t=0,1;strategy=Silent,-` (strategy optional)."""
    dims = {"m": [1, 2], "t": [0, 1], "strategy": ["-"]}
    if grid:
        for part in grid.split(";"):
            key, _, values = part.partition("=")
            key = key.strip()
            if key not in dims or not values:
                raise ConfigError(f"bad grid dimension {part!r}")
            if key == "strategy":
                names = [v.strip() for v in values.split(",")]
                for name in names:
                    if name != "-" and name not in STRATEGY_NAMES:
                        raise ConfigError(f"unknown strategy {name!r}")
                dims[key] = names
            else:
                try:
                    dims[key] = [int(v) for v in values.split(",")]
                except ValueError as exc:
                    raise ConfigError(f"bad grid values {part!r}") from exc
    cells = []
    for m in dims["m"]:
        for t in dims["t"]:
            for strat in dims["strategy"]:
                cells.append((m, t, "-" if t == 0 else strat))
    return sorted(set(cells))


def _cell_seed(base, m, t, strategy):
    digest = hashlib.sha256(f"sweep|{base}|{m}|{t}|{strategy}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def _sweep_cell(cell, base_seed):
    m, t, strategy = cell
    n = recovery_threshold(m, t)
    p = DEFAULT_PRIME
    z = m
    seed = _cell_seed(base_seed, m, t, strategy)
    rng = np.random.Generator(np.random.Philox(key=seed))
    a = FMatrix.random(z, z, p, rng)
    b = FMatrix.random(z, z, p, rng)
    expected = _py_matmul_t(a.a.tolist(), b.a.tolist(), p)
    start = time.perf_counter()
    if strategy == "-":
        shares = multiply_semi_honest(a, b, m, t, n, rng)
        opened = reconstruct(list(shares.values()))
        correct = opened.a.tolist() == expected
        elim = 0
    else:
        program = (ProgramOp("share", (0, "direct"), "ra"),
                   ProgramOp("share", (1, "reverse"), "rb"),
                   ProgramOp("mul", ("ra", "rb"), "rc"),
                   ProgramOp("reveal", ("rc",)))
        adversaries = tuple((n - i, strategy) for i in range(t))
        scenario = Scenario(n=n, t=t, m=m, p=p, seed=seed, z=z,
                            program=program, adversaries=adversaries,
                            inputs=(a, b))
        transcript = run_scenario(scenario)
        correct = transcript.master_output.a.tolist() == expected
        elim = len(_eliminations(transcript))
    wall_ms = (time.perf_counter() - start) * 1000
    return (f"record=sweep m={m} t={t} n={n} strategy={strategy} "
            f"correct={'true' if correct else 'false'} eliminations={elim} "
            f"wall_ms={wall_ms:.1f}")


def _thread_count():
    raw = os.environ.get("COMPC_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError as exc:
            raise ConfigError(f"bad COMPC_THREADS value {raw!r}") from exc
    return min(8, os.cpu_count() or 1)


def cmd_sweep(config):
    cells = _parse_sweep_grid(config.grid)
    base_seed = config.seed if config.seed is not None else 0
    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        futures = [pool.submit(_sweep_cell, cell, base_seed) for cell in cells]
        lines = [f.result() for f in futures]
    _emit(lines, config.out)
    return OK


_AUDIT_X = [[1, 2]]
_AUDIT_Y = [[4, 0]]
_NARROW = (([[2]], [[3]]), ([[4]], [[1]]))
_WIDE = (([[1, 2]], [[3, 0]]), ([[0, 4]], [[2, 2]]))


def _pair(values, p):
    return (FMatrix(values[0], p), FMatrix(values[1], p))


def _audit_case(token, samples, seed):
    """Yield (record-line, leaky) for one audit grid token."""
    p = 5
    if token in ("sharing-m1", "sharing-m2", "sharing-leak"):
        m = 2 if token == "sharing-m2" else 1
        leak = LEAK_SOURCE if token == "sharing-leak" else ""
        tpl = AuditTemplate("sharing", 4, 1, m, p, 1, 2, leak)
        x, y = FMatrix(_AUDIT_X, p), FMatrix(_AUDIT_Y, p)
        for obs in range(1, tpl.n + 1):
            tv = tv_distance(enumerate_views(tpl, x, (obs,)),
                             enumerate_views(tpl, y, (obs,)))
            leaky = tv != 0
            yield (f"record=audit case={token} observer={obs} mode=exact "
                   f"tv={tv} kernels=- flags=- "
                   f"verdict={'leaky' if leaky else 'private'}"), leaky
    elif token == "product-narrow":
        tpl = AuditTemplate("product-round", 3, 1, 1, p, 1, 1)
        pa, pb = _pair(_NARROW[0], p), _pair(_NARROW[1], p)
        tv = tv_distance(enumerate_views(tpl, pa, (1,)),
                         enumerate_views(tpl, pb, (1,)))
        leaky = tv != 0
        yield (f"record=audit case={token} observer=1 mode=exact "
               f"tv={tv} kernels=- flags=- "
               f"verdict={'leaky' if leaky else 'private'}"), leaky
    elif token in ("product-wide", "product-leak"):
        leak = LEAK_PRODUCT if token == "product-leak" else ""
        tpl = AuditTemplate("product-round", 3, 1, 1, p, 1, 2, leak)
        pa, pb = _pair(_WIDE[0], p), _pair(_WIDE[1], p)
        for obs in range(1, tpl.n + 1):
            rep = product_round_audit(tpl, pa, pb, obs)
            leaky = rep.tv != 0 or not rep.kernels_match
            yield (f"record=audit case={token} observer={obs} mode=factored "
                   f"tv={rep.tv} kernels={'ok' if rep.kernels_match else 'broken'} "
                   f"flags=- verdict={'leaky' if leaky else 'private'}"), leaky
    elif token == "mc-sharing":
        share = ProgramOp("share", (0, "direct"), "r0")
        scenario = Scenario(n=4, t=1, m=1, p=p, seed=0, z=1, program=(share,))
        secrets = ((FMatrix([[2]], p),), (FMatrix([[4]], p),))
        report = monte_carlo_audit(scenario, secrets, (2,), samples, seed=seed)
        leaky = bool(report.flags)
        yield (f"record=audit case={token} observer=2 mode=sampled tv=- "
               f"kernels=- flags={len(report.flags)} "
               f"verdict={'leaky' if leaky else 'private'}"), leaky
    else:
        raise ConfigError(f"unknown audit case {token!r}")


DEFAULT_AUDIT_GRID = "sharing-m1,sharing-m2,product-wide"


def cmd_audit(config):
    grid = config.grid if config.grid is not None else DEFAULT_AUDIT_GRID
    tokens = [tok.strip() for tok in grid.split(",") if tok.strip()]
    seed = config.seed if config.seed is not None else 0
    lines, leaky_any = [], False
    for token in tokens:
        for line, leaky in _audit_case(token, config.samples, seed):
            lines.append(line)
            leaky_any = leaky_any or leaky
    _emit(lines, config.out)
    return LEAKY if leaky_any else OK


def cmd_bench(config):
    m = config.m if config.m is not None else 2
    t = config.t if config.t is not None else 1
    p = config.prime if config.prime is not None else DEFAULT_PRIME
    seed = config.seed if config.seed is not None else 0
    n = config.n if config.n is not None else recovery_threshold(m, t)
    z = m
    rng = np.random.Generator(np.random.Philox(key=seed))
    a, b = FMatrix.random(z, z, p, rng), FMatrix.random(z, z, p, rng)
    program = (ProgramOp("share", (0, "direct"), "ra"),
               ProgramOp("share", (1, "reverse"), "rb"),
               ProgramOp("mul", ("ra", "rb"), "rc"),
               ProgramOp("reveal", ("rc",)))
    scenario = Scenario(n=n, t=t, m=m, p=p, seed=seed, z=z,
                        program=program, inputs=(a, b))
    reps = 3
    lines = []
    start = time.perf_counter()
    for i in range(reps):
        run_scenario(replace(scenario, seed=seed + i))
    full = (time.perf_counter() - start) * 1000 / reps
    start = time.perf_counter()
    for i in range(reps):
        multiply_semi_honest(a, b, m, t, n,
                             np.random.Generator(np.random.Philox(key=i)))
    semi = (time.perf_counter() - start) * 1000 / reps
    lines.append(f"record=bench op=multiply-verified m={m} t={t} n={n} "
                 f"reps={reps} avg_ms={full:.1f}")
    lines.append(f"record=bench op=multiply-semi-honest m={m} t={t} n={n} "
                 f"reps={reps} avg_ms={semi:.1f}")
    _emit(lines, config.out)
    return OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="compc",
        description="Coded MPC scenario runner, threshold sweep, and audits")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    specs = {
        "run": "execute one scenario file and judge the output",
        "sweep": "grid of (m, t, strategy) cells at N = 3t+2m-1",
        "audit": "exact and sampled leakage audits",
        "bench": "wall-time of one multiplication setup",
    }
    for name, help_text in specs.items():
        cmd = sub.add_parser(name, help=help_text)
        if name == "run":
            cmd.add_argument("--scenario", required=True)
        cmd.add_argument("--out", default="")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--n", type=int, default=None)
        cmd.add_argument("--t", type=int, default=None)
        cmd.add_argument("--m", type=int, default=None)
        cmd.add_argument("--prime", type=int, default=None)
        cmd.add_argument("--strategy", default="")
        cmd.add_argument("--grid", default=None)
        cmd.add_argument("--samples", type=int, default=2000)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    config = RunConfig(subcommand=args.subcommand,
                       scenario=getattr(args, "scenario", ""),
                       out=args.out, n=args.n, t=args.t, m=args.m,
                       prime=args.prime, seed=args.seed,
                       strategy=args.strategy, grid=args.grid,
                       samples=args.samples)
    handler = {"run": cmd_run, "sweep": cmd_sweep,
               "audit": cmd_audit, "bench": cmd_bench}[config.subcommand]
    try:
        return handler(config)
    except (ConfigError, ParameterViolation) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_ERROR
    except (ProtocolAbort, TooFewSurvivors) as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return ABORT
    except CompcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
