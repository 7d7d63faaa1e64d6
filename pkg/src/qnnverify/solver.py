"""External SMT solver driver: run scripts, parse models, validate verdicts.

The solver is any executable accepting an SMT-LIB v2 file path as its last
argument and printing sat/unsat/unknown (plus get-value responses) on stdout.
Every satisfying model surfaced by this module is replayed through the
bit-exact interpreter first; a model the interpreter rejects aborts the run,
because it can only mean the encoder and the interpreter disagree.
"""

from __future__ import annotations

import enum
import os
import re
import shlex
import shutil
import subprocess
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .bvterm import SmtScript, emit_smtlib
from .encoder import EncodeOptions, ALL_ON, encode_robustness_query
from .errors import CounterexampleMismatchError, SolverError
from .model import QuantizedNetwork, classify

_STATUS_LINES = {"sat", "unsat", "unknown"}


class Outcome(enum.Enum):
    SAT = "sat"
    UNSAT = "unsat"
    UNKNOWN = "unknown"
    TIMEOUT = "timeout"
    SOLVER_ERROR = "solver_error"


@dataclass(frozen=True)
class SolverConfig:
    """How to launch the external solver."""

    executable: str
    extra_args: tuple[str, ...] = ()
    timeout_secs: float = 60.0
    workdir: str | None = None
    keep_files: bool = False

    def __post_init__(self) -> None:
        if self.timeout_secs <= 0:
            raise ValueError("timeout_secs must be positive")


@dataclass
class Verdict:
    """Classified result of one solver run."""

    outcome: Outcome
    model: dict | None = None
    wall_secs: float = 0.0
    validated: bool | None = None
    counterexample: list[int] | None = None
    detail: str = ""

    def __post_init__(self) -> None:
        if (self.model is not None) != (self.outcome is Outcome.SAT):
            raise ValueError("model must be present exactly for sat outcomes")
        if self.validated is not None and self.model is None:
            raise ValueError("validated is only meaningful with a model")


def default_solver_config(timeout_secs: float = 60.0) -> SolverConfig:
    """Locate a usable solver: QNNV_SOLVER, the repo shim, or a known binary."""
    env = os.environ.get("QNNV_SOLVER")
    if env:
        parts = shlex.split(env)
        return SolverConfig(parts[0], tuple(parts[1:]), timeout_secs)
    here = Path(__file__).resolve()
    candidates = [p / "tools" / "z3smt2" for p in (here.parents[2], here.parents[1], Path.cwd())]
    for cand in candidates:
        if cand.is_file() and os.access(cand, os.X_OK):
            return SolverConfig(str(cand), (), timeout_secs)
    for name in ("z3", "bitwuzla", "boolector", "cvc5"):
        path = shutil.which(name)
        if path:
            return SolverConfig(path, (), timeout_secs)
    raise SolverError(
        "no SMT solver found: set QNNV_SOLVER, or install tools/z3smt2 (npm install in tools/)"
    )


def run_solver(script_text: str, config: SolverConfig) -> tuple[str, str, float]:
    """Run the solver on the script; returns (raw status, stdout, wall seconds).

    Raw status is "sat" / "unsat" / "unknown" / "timeout"; any other situation
    raises SolverError.
    """
    fd, path = tempfile.mkstemp(suffix=".smt2", prefix="qnnv_", dir=config.workdir)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(script_text)
        argv = [config.executable, *config.extra_args, path]
        started = time.monotonic()
        try:
            proc = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=config.timeout_secs,
            )
        except subprocess.TimeoutExpired as exc:
            wall = time.monotonic() - started
            out = exc.stdout or ""
            if isinstance(out, bytes):
                out = out.decode("utf-8", "replace")
            # A solver wrapper can print its whole answer and then fail to
            # exit (WASM builds with lingering worker threads do this); use
            # the answer when it is provably complete.
            if out.endswith("\n") and out.count("(") == out.count(")"):
                for line in out.splitlines():
                    if line.strip() in _STATUS_LINES:
                        return line.strip(), out, wall
            return "timeout", "", wall
        except OSError as exc:
            raise SolverError(f"failed to launch solver {config.executable}: {exc}") from exc
        wall = time.monotonic() - started
        for line in proc.stdout.splitlines():
            line = line.strip()
            if line in _STATUS_LINES:
                return line, proc.stdout, wall
        raise SolverError(
            f"solver produced no verdict (exit {proc.returncode}): "
            f"stdout={proc.stdout[:500]!r} stderr={proc.stderr[:500]!r}"
        )
    finally:
        if config.keep_files:
            pass
        else:
            try:
                os.unlink(path)
            except OSError:
                pass


_VALUE_RE = re.compile(
    r"\(\s*([A-Za-z_][\w.!$@-]*)\s+(#b[01]+|#x[0-9a-fA-F]+|\(\s*_\s+bv(\d+)\s+\d+\s*\))\s*\)"
)


def _decode_literal(text: str, bv_match: str | None) -> int:
    if text.startswith("#b"):
        return int(text[2:], 2)
    if text.startswith("#x"):
        return int(text[2:], 16)
    return int(bv_match)  # (_ bvN W)


def parse_model(stdout: str, symbol_map: dict) -> dict[str, int]:
    """Extract input-variable values from get-value responses."""
    found: dict[str, int] = {}
    for m in _VALUE_RE.finditer(stdout):
        found[m.group(1)] = _decode_literal(m.group(2), m.group(3))
    top = (1 << symbol_map["input_bits"]) - 1
    model: dict[str, int] = {}
    for name in symbol_map["inputs"]:
        if name not in found:
            raise SolverError(f"{name} absent from model")
        value = found[name]
        if not (0 <= value <= top):
            raise SolverError(f"model value {value} for {name} outside [0, {top}]")
        model[name] = value
    return model


def assignment_vector(model: dict[str, int], symbol_map: dict) -> list[int]:
    return [model[name] for name in symbol_map["inputs"]]


def validate_counterexample(
    net: QuantizedNetwork,
    assignment: Sequence[int],
    sample: Sequence[int],
    label: int,
    epsilon: int,
) -> bool:
    """Interpreter-side check that a model truly witnesses non-robustness."""
    if len(assignment) != len(sample):
        return False
    if any(abs(a - s) > epsilon for a, s in zip(assignment, sample)):
        return False
    return classify(net, assignment) != label


def solve_script(script: SmtScript, config: SolverConfig) -> Verdict:
    """Run a script and classify the outcome; models parsed but not validated."""
    status, stdout, wall = run_solver(emit_smtlib(script), config)
    if status == "sat":
        model = parse_model(stdout, script.symbol_map)
        return Verdict(Outcome.SAT, model=model, wall_secs=wall)
    if status == "unsat":
        return Verdict(Outcome.UNSAT, wall_secs=wall)
    if status == "timeout":
        return Verdict(Outcome.TIMEOUT, wall_secs=wall)
    return Verdict(Outcome.UNKNOWN, wall_secs=wall)


def solve_robustness(
    net: QuantizedNetwork,
    sample: Sequence[int],
    label: int,
    epsilon: int,
    opts: EncodeOptions = ALL_ON,
    config: SolverConfig | None = None,
) -> Verdict:
    """Encode, solve, and (for sat) validate one robustness query.

    Raises CounterexampleMismatchError when the solver's model fails
    interpreter replay; that outcome is never returned as a normal verdict.
    """
    if config is None:
        config = default_solver_config()
    script = encode_robustness_query(net, sample, label, epsilon, opts)
    verdict = solve_script(script, config)
    if verdict.outcome is Outcome.SAT:
        vector = assignment_vector(verdict.model, script.symbol_map)
        ok = validate_counterexample(net, vector, sample, label, epsilon)
        if not ok:
            raise CounterexampleMismatchError(
                "encoder/interpreter mismatch: solver model failed replay "
                f"(assignment {vector}, sample {list(sample)}, label {label}, eps {epsilon})"
            )
        verdict.validated = True
        verdict.counterexample = vector
    return verdict
