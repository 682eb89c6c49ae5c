"""The RAN command language: a finite set of structured commands with a
canonical printer, a total parser, and a total allow-list validator.

Only five command forms exist (set_power, assign_rbs, set_scheduler_weights,
set_carrier, noop). Anything else is rejected, either at parse time or by the
validator; neither ever raises on malformed input beyond their documented
error values. The normative grammar ships in docs/grammar.ebnf.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

from .units import dbm_to_watts

# Totality guard: inputs beyond this many bytes are rejected up front.
MAX_INPUT_BYTES = 64 * 1024

DEFAULT_WEIGHT_TOLERANCE = 1e-6


class ParseError(Exception):
    """Raised for any input that is not a well-formed command program."""

    def __init__(self, offset: int, expected: tuple[str, ...], found: str = ""):
        self.offset = offset
        self.expected = expected
        self.found = found
        want = " or ".join(expected) if expected else "nothing"
        where = f" (found {found!r})" if found else ""
        super().__init__(f"at byte {offset}: expected {want}{where}")


class FramingError(Exception):
    """Raised when <ACTION> ... </ACTION> markers are absent, unordered,
    or nested."""


@dataclass(frozen=True)
class SetPower:
    entries: tuple[tuple[str, float], ...]  # (cell id, power dBm)


@dataclass(frozen=True)
class AssignRbs:
    entries: tuple[tuple[str, tuple[str, ...]], ...]  # (user id, rb ids)


@dataclass(frozen=True)
class SetSchedulerWeights:
    entries: tuple[tuple[str, float], ...]  # (flow id, weight)


@dataclass(frozen=True)
class SetCarrier:
    carrier: str
    on: bool


@dataclass(frozen=True)
class Noop:
    pass


Command = Union[SetPower, AssignRbs, SetSchedulerWeights, SetCarrier, Noop]

NOOP_PROGRAM: tuple[Command, ...] = (Noop(),)


# ── lexer ────────────────────────────────────────────────────────────────

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[()\[\],;=])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "number" | "ident" | "punct" | "end"
    text: str
    offset: int


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(pos, ("identifier", "number", "punctuation"), text[pos])
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup or "", m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


# ── parser ───────────────────────────────────────────────────────────────

_COMMAND_HEADS = ("set_power", "assign_rbs", "set_scheduler_weights", "set_scheduler", "set_carrier", "noop")


class _Parser:
    def __init__(self, tokens: list[_Token], flow_order: Sequence[str]):
        self.tokens = tokens
        self.pos = 0
        self.flow_order = list(flow_order)

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, *expected: str) -> "ParseError":
        tok = self.peek()
        return ParseError(tok.offset, expected, tok.text)

    def expect_punct(self, punct: str) -> None:
        tok = self.peek()
        if tok.kind != "punct" or tok.text != punct:
            raise self.fail(f"'{punct}'")
        self.advance()

    def expect_ident(self, what: str = "identifier") -> str:
        tok = self.peek()
        if tok.kind != "ident":
            raise self.fail(what)
        self.advance()
        return tok.text

    def expect_number(self) -> float:
        tok = self.peek()
        if tok.kind != "number":
            raise self.fail("number")
        self.advance()
        return float(tok.text)

    def program(self) -> tuple[Command, ...]:
        commands = [self.command()]
        while self.peek().kind == "punct" and self.peek().text == ";":
            self.advance()
            commands.append(self.command())
        if self.peek().kind != "end":
            raise self.fail("';'", "end of input")
        return tuple(commands)

    def command(self) -> Command:
        tok = self.peek()
        if tok.kind != "ident" or tok.text not in _COMMAND_HEADS:
            raise self.fail(*(f"'{h}'" for h in _COMMAND_HEADS))
        head = self.advance().text
        if head == "noop":
            self.expect_punct("(")
            self.expect_punct(")")
            return Noop()
        if head == "set_carrier":
            return self.set_carrier()
        if head == "set_power":
            return self.set_power()
        if head == "assign_rbs":
            return self.assign_rbs()
        if head == "set_scheduler_weights":
            return self.weights_pairs()
        return self.weights_alias()

    def set_carrier(self) -> SetCarrier:
        self.expect_punct("(")
        carrier = self.expect_ident("carrier id")
        self.expect_punct(",")
        state = self.expect_ident("'on' or 'off'")
        if state not in ("on", "off"):
            raise ParseError(self.tokens[self.pos - 1].offset, ("'on'", "'off'"), state)
        self.expect_punct(")")
        return SetCarrier(carrier=carrier, on=state == "on")

    def _power_pair(self) -> tuple[str, float]:
        cell = self.expect_ident("cell id")
        sep = self.peek()
        if sep.kind != "punct" or sep.text not in (",", "="):
            raise self.fail("','", "'='")
        self.advance()
        value = self.expect_number()
        unit = self.peek()
        if unit.kind != "ident" or unit.text != "dBm":
            raise self.fail("'dBm'")
        self.advance()
        return cell, value

    def set_power(self) -> SetPower:
        self.expect_punct("(")
        entries = [self._power_pair()]
        while self.peek().kind == "punct" and self.peek().text == ",":
            self.advance()
            entries.append(self._power_pair())
        self.expect_punct(")")
        return SetPower(entries=tuple(entries))

    def _rb_list(self) -> tuple[str, ...]:
        self.expect_punct("[")
        rbs = [self.expect_ident("rb id")]
        while self.peek().kind == "punct" and self.peek().text == ",":
            self.advance()
            rbs.append(self.expect_ident("rb id"))
        self.expect_punct("]")
        return tuple(rbs)

    def assign_rbs(self) -> AssignRbs:
        self.expect_punct("(")
        entries = []
        while True:
            user = self.expect_ident("user id")
            self.expect_punct("=")
            entries.append((user, self._rb_list()))
            if self.peek().kind == "punct" and self.peek().text == ",":
                self.advance()
                continue
            break
        self.expect_punct(")")
        return AssignRbs(entries=tuple(entries))

    def weights_pairs(self) -> SetSchedulerWeights:
        self.expect_punct("(")
        entries = []
        while True:
            flow = self.expect_ident("flow id")
            self.expect_punct("=")
            entries.append((flow, self.expect_number()))
            if self.peek().kind == "punct" and self.peek().text == ",":
                self.advance()
                continue
            break
        self.expect_punct(")")
        return SetSchedulerWeights(entries=tuple(entries))

    def weights_alias(self) -> SetSchedulerWeights:
        # set_scheduler(weights=[...]) normalizes to SetSchedulerWeights with
        # weights bound positionally in flow order.
        self.expect_punct("(")
        key = self.peek()
        if key.kind != "ident" or key.text != "weights":
            raise self.fail("'weights'")
        self.advance()
        self.expect_punct("=")
        self.expect_punct("[")
        values = [self.expect_number()]
        while self.peek().kind == "punct" and self.peek().text == ",":
            self.advance()
            values.append(self.expect_number())
        self.expect_punct("]")
        self.expect_punct(")")
        if len(values) > len(self.flow_order):
            raise ParseError(
                self.tokens[self.pos - 1].offset,
                (f"at most {len(self.flow_order)} weights (one per flow)",),
                str(len(values)),
            )
        entries = tuple(zip(self.flow_order, values))
        return SetSchedulerWeights(entries=entries)


def parse(text: str, flow_order: Sequence[str] | None = None) -> tuple[Command, ...]:
    """Parse a program into commands, or raise ParseError with the byte
    offset and the token set that was expected there.

    flow_order supplies the flow ids that the positional set_scheduler alias
    binds to; it defaults to flow_0, flow_1, ...
    """
    if len(text.encode("utf-8", errors="surrogatepass")) > MAX_INPUT_BYTES:
        raise ParseError(MAX_INPUT_BYTES, ("input under 64 KiB",))
    if flow_order is None:
        flow_order = tuple(f"flow_{i}" for i in range(64))
    return _Parser(_lex(text), flow_order).program()


# ── printer ──────────────────────────────────────────────────────────────


def _fmt_number(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite number in command: {x}")
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def render_command(command: Command) -> str:
    if isinstance(command, Noop):
        return "noop()"
    if isinstance(command, SetCarrier):
        return f"set_carrier({command.carrier}, {'on' if command.on else 'off'})"
    if isinstance(command, SetPower):
        body = ", ".join(f"{cell}={_fmt_number(p)}dBm" for cell, p in command.entries)
        return f"set_power({body})"
    if isinstance(command, AssignRbs):
        body = ", ".join(
            f"{user}=[{', '.join(rbs)}]" for user, rbs in command.entries
        )
        return f"assign_rbs({body})"
    if isinstance(command, SetSchedulerWeights):
        body = ", ".join(f"{flow}={_fmt_number(w)}" for flow, w in command.entries)
        return f"set_scheduler_weights({body})"
    raise ValueError(f"not a command: {command!r}")


def render_program(commands: Sequence[Command]) -> str:
    """Canonical text form; parse(render_program(cs)) == cs for well-formed
    command lists."""
    return "; ".join(render_command(c) for c in commands)


# ── validator ────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Reason:
    rule: str
    message: str


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    reasons: tuple[Reason, ...] = ()


@dataclass(frozen=True)
class ValidationScope:
    """Identifier universe and safety bounds a command list is checked
    against. current_powers_dbm feeds the total-power budget rule; cells
    missing from it count as radiating nothing."""

    cells: frozenset[str]
    users: frozenset[str]
    flows: frozenset[str]
    rbs: frozenset[str]
    carriers: frozenset[str]
    p_min_dbm: float
    p_max_cell_dbm: float
    p_max_w: float
    weight_tolerance: float = DEFAULT_WEIGHT_TOLERANCE
    current_powers_dbm: Mapping[str, float] = field(default_factory=dict)


def validate(commands: Sequence[Command], scope: ValidationScope) -> Verdict:
    """Total allow-list check. Never raises; rejection is a Verdict whose
    reasons name the violated rule.

    Rules: command type allow-listed; all ids known; per-cell powers within
    [p_min_dbm, p_max_cell_dbm] and resulting linear total within p_max_w;
    weights in [0, 1] summing to 1 within tolerance; rb lists disjoint
    across users; no cell/flow/carrier targeted twice in one list.
    """
    reasons: list[Reason] = []
    seen_cells: set[str] = set()
    seen_flows: set[str] = set()
    seen_carriers: set[str] = set()
    rb_owner: dict[str, str] = {}
    resulting_powers = {c: float(p) for c, p in scope.current_powers_dbm.items()}

    for command in commands:
        if isinstance(command, Noop):
            continue
        if isinstance(command, SetPower):
            for cell, dbm in command.entries:
                if cell in seen_cells:
                    reasons.append(Reason("duplicate-target", f"cell {cell} set twice"))
                seen_cells.add(cell)
                if cell not in scope.cells:
                    reasons.append(Reason("unknown-id", f"unknown cell {cell}"))
                    continue
                if not (scope.p_min_dbm <= dbm <= scope.p_max_cell_dbm):
                    reasons.append(
                        Reason(
                            "power-bounds",
                            f"power {dbm} dBm for {cell} outside "
                            f"[{scope.p_min_dbm}, {scope.p_max_cell_dbm}] dBm",
                        )
                    )
                else:
                    resulting_powers[cell] = dbm
        elif isinstance(command, AssignRbs):
            for user, rbs in command.entries:
                if user not in scope.users:
                    reasons.append(Reason("unknown-id", f"unknown user {user}"))
                for rb in rbs:
                    if rb not in scope.rbs:
                        reasons.append(Reason("unknown-id", f"unknown rb {rb}"))
                    elif rb in rb_owner and rb_owner[rb] != user:
                        reasons.append(
                            Reason("rb-overlap", f"{rb} assigned to both {rb_owner[rb]} and {user}")
                        )
                    else:
                        rb_owner[rb] = user
        elif isinstance(command, SetSchedulerWeights):
            total = 0.0
            for flow, weight in command.entries:
                if flow in seen_flows:
                    reasons.append(Reason("duplicate-target", f"flow {flow} set twice"))
                seen_flows.add(flow)
                if flow not in scope.flows:
                    reasons.append(Reason("unknown-id", f"unknown flow {flow}"))
                if not (0.0 <= weight <= 1.0):
                    reasons.append(
                        Reason("weight-bounds", f"weight {weight} for {flow} outside [0, 1]")
                    )
                total += weight
            if abs(total - 1.0) > scope.weight_tolerance:
                reasons.append(
                    Reason("weight-sum", f"weights sum to {total}, expected 1")
                )
        elif isinstance(command, SetCarrier):
            if command.carrier in seen_carriers:
                reasons.append(
                    Reason("duplicate-target", f"carrier {command.carrier} set twice")
                )
            seen_carriers.add(command.carrier)
            if command.carrier not in scope.carriers:
                reasons.append(Reason("unknown-id", f"unknown carrier {command.carrier}"))
        else:
            reasons.append(Reason("allowlist", f"not an allow-listed command: {command!r}"))

    # Budget over the resulting configuration, counting every known cell
    # regardless of carrier state (conservative upper bound on radiated power).
    total_w = sum(dbm_to_watts(p) for p in resulting_powers.values())
    if total_w > scope.p_max_w:
        reasons.append(
            Reason(
                "power-budget",
                f"resulting linear powers total {total_w:g} W over budget {scope.p_max_w:g} W",
            )
        )

    return Verdict(accepted=not reasons, reasons=tuple(reasons))


# ── reply framing ────────────────────────────────────────────────────────

ACTION_OPEN = "<ACTION>"
ACTION_CLOSE = "</ACTION>"


def extract_action(text: str) -> str:
    """Return the trimmed payload between the first <ACTION> marker and the
    next </ACTION>."""
    start = text.find(ACTION_OPEN)
    if start < 0:
        raise FramingError("no <ACTION> marker")
    inner_start = start + len(ACTION_OPEN)
    end = text.find(ACTION_CLOSE, inner_start)
    if end < 0:
        raise FramingError("no </ACTION> marker after <ACTION>")
    inner = text[inner_start:end]
    if ACTION_OPEN in inner:
        raise FramingError("nested <ACTION> markers")
    return inner.strip()
