"""Target input-output functions, wiring scenarios and the loss used to learn them."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .dynamics import Network, SimulationSettings, simulate_batch

TARGET_NAMES = ("band_pass", "valley", "threshold", "peak", "linear", "custom")
SCENARIO_KINDS = ("one_in_one_out", "one_in_many_out", "many_in_many_out",
                  "binary_in_many_out", "binary_in_multiplex_out")
LOW, HIGH = 0.1, 0.9
TOLERANCE_FRACTION = 0.05


def tolerance(b: int) -> float:
    """Per-channel learning tolerance for a batch of ``b`` points."""
    return TOLERANCE_FRACTION * b


def divergence_penalty(b: int) -> float:
    return 10.0 * b


@dataclass(frozen=True, eq=False)
class TargetFunction:
    name: str
    levels: np.ndarray
    outputs: np.ndarray

    def __post_init__(self):
        levels = np.array(self.levels, dtype=float)
        outputs = np.array(self.outputs, dtype=float)
        if self.name not in TARGET_NAMES:
            raise ValueError(f"unknown target {self.name!r}")
        if levels.ndim != 1 or levels.shape != outputs.shape or len(levels) < 2:
            raise ValueError("a target needs at least two (level, output) samples")
        if np.any(np.diff(levels) <= 0):
            raise ValueError("input levels must be strictly increasing")
        if np.any(outputs <= 0) or np.any(outputs >= 1):
            raise ValueError("desired outputs must lie strictly inside (0, 1)")
        for name, value in [("levels", levels), ("outputs", outputs)]:
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def b(self) -> int:
        return len(self.levels)

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.levels.tolist(), self.outputs.tolist()))


def make_target(name: str, b: int = 32, input_range=(0.0, 1.0), low: float = LOW, high: float = HIGH) -> TargetFunction:
    """Sample a built-in target at ``b`` equally spaced input levels.

    The shapes are piecewise-constant plateaus: band_pass is high on the
    middle third of the range, valley is its complement, threshold switches
    at the midpoint, and peak is high on the middle fifth only.
    """
    lo, hi = map(float, input_range)
    if b < 2:
        raise ValueError("b must be at least 2")
    if not lo < hi:
        raise ValueError("input range must satisfy lo < hi")
    x = np.linspace(lo, hi, b)
    u = (x - lo) / (hi - lo)
    if name == "band_pass":
        on = (u >= 1 / 3) & (u < 2 / 3)
    elif name == "valley":
        on = ~((u >= 1 / 3) & (u < 2 / 3))
    elif name == "threshold":
        on = u >= 0.5
    elif name == "peak":
        on = (u >= 0.4) & (u < 0.6)
    elif name == "linear":
        return TargetFunction(name, x, low + (high - low) * u)
    else:
        raise ValueError(f"unknown target {name!r}; built-ins are {TARGET_NAMES[:-1]}")
    return TargetFunction(name, x, np.where(on, high, low))


def encoding_label(code: int, n_inputs: int) -> str:
    """Binary label with the first input node as the rightmost bit."""
    return format(code, f"0{n_inputs}b")


def encoding_bits(code: int, n_inputs: int) -> tuple[int, ...]:
    """Bit per input node, in input-node order."""
    return tuple((code >> k) & 1 for k in range(n_inputs))


def parse_encoding(label: str) -> tuple[int, ...]:
    if not label or set(label) - {"0", "1"}:
        raise ValueError(f"bad encoding label {label!r}")
    return tuple(int(c) for c in reversed(label))


@dataclass(frozen=True)
class Channel:
    encoding: tuple[int, ...]
    output: int  # position in the network's output_nodes
    target: TargetFunction

    @property
    def label(self) -> str:
        return "".join(str(bit) for bit in reversed(self.encoding))


@dataclass(frozen=True)
class WiringScenario:
    kind: str
    n_inputs: int
    n_outputs: int
    channels: tuple[Channel, ...]

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}")
        if not self.channels:
            raise ValueError("a scenario needs at least one channel")
        b = self.channels[0].target.b
        seen = set()
        for ch in self.channels:
            if len(ch.encoding) != self.n_inputs:
                raise ValueError(f"encoding {ch.encoding} does not cover {self.n_inputs} inputs")
            if not any(ch.encoding):
                raise ValueError("the all-zeros encoding cannot be a training channel")
            if not 0 <= ch.output < self.n_outputs:
                raise ValueError(f"channel output {ch.output} out of range")
            if ch.target.b != b or not np.array_equal(ch.target.levels, self.channels[0].target.levels):
                raise ValueError("all channels must share the same input levels")
            key = (ch.encoding, ch.output)
            if key in seen:
                raise ValueError(f"duplicate channel {key}")
            seen.add(key)

    @property
    def levels(self) -> np.ndarray:
        return self.channels[0].target.levels

    @property
    def b(self) -> int:
        return len(self.levels)

    def permuted(self, order: Sequence[int]) -> "WiringScenario":
        return WiringScenario(self.kind, self.n_inputs, self.n_outputs, tuple(self.channels[i] for i in order))


def _targets(names, b, input_range):
    return [t if isinstance(t, TargetFunction) else make_target(t, b, input_range) for t in names]


def one_in_one_out(target="band_pass", b=32, input_range=(0.0, 1.0)) -> WiringScenario:
    (t,) = _targets([target], b, input_range)
    return WiringScenario("one_in_one_out", 1, 1, (Channel((1,), 0, t),))


def one_in_many_out(targets=("band_pass", "valley", "threshold"), b=32, input_range=(0.0, 1.0)) -> WiringScenario:
    ts = _targets(targets, b, input_range)
    return WiringScenario("one_in_many_out", 1, len(ts), tuple(Channel((1,), k, t) for k, t in enumerate(ts)))


def many_in_many_out(targets=("band_pass", "valley", "threshold"), b=32, input_range=(0.0, 1.0)) -> WiringScenario:
    ts = _targets(targets, b, input_range)
    n = len(ts)
    return WiringScenario("many_in_many_out", n, n, tuple(Channel((1,) * n, k, t) for k, t in enumerate(ts)))


def binary_in_many_out(n_inputs=2, targets=("band_pass", "valley", "threshold"), b=32,
                       input_range=(0.0, 1.0)) -> WiringScenario:
    ts = _targets(targets, b, input_range)
    if len(ts) != 2 ** n_inputs - 1:
        raise ValueError(f"{n_inputs} binary inputs need {2 ** n_inputs - 1} targets")
    chans = tuple(Channel(encoding_bits(code, n_inputs), code - 1, t) for code, t in enumerate(ts, start=1))
    return WiringScenario("binary_in_many_out", n_inputs, len(ts), chans)


def binary_in_multiplex_out(n_inputs=2, targets=("band_pass", "valley", "threshold"), b=32,
                            input_range=(0.0, 1.0)) -> WiringScenario:
    ts = _targets(targets, b, input_range)
    if len(ts) != 2 ** n_inputs - 1:
        raise ValueError(f"{n_inputs} binary inputs need {2 ** n_inputs - 1} targets")
    chans = tuple(Channel(encoding_bits(code, n_inputs), 0, t) for code, t in enumerate(ts, start=1))
    return WiringScenario("binary_in_multiplex_out", n_inputs, 1, chans)


_BUILDERS = {
    "one_in_one_out": lambda ts, b, r, n: one_in_one_out(ts[0], b, r),
    "one_in_many_out": lambda ts, b, r, n: one_in_many_out(ts, b, r),
    "many_in_many_out": lambda ts, b, r, n: many_in_many_out(ts, b, r),
    "binary_in_many_out": lambda ts, b, r, n: binary_in_many_out(n, ts, b, r),
    "binary_in_multiplex_out": lambda ts, b, r, n: binary_in_multiplex_out(n, ts, b, r),
}


@dataclass(frozen=True)
class TaskSpec:
    """A learning task: the scenario plus the simulation settings it is scored under."""

    scenario: WiringScenario
    input_range: tuple[float, float] = (0.0, 1.0)
    settings: SimulationSettings = field(default_factory=SimulationSettings)

    @property
    def b(self) -> int:
        return self.scenario.b

    @classmethod
    def build(cls, kind="one_in_one_out", targets=("band_pass",), b=32, input_range=(0.0, 1.0),
              n_inputs=2, settings=None) -> "TaskSpec":
        if kind not in _BUILDERS:
            raise ValueError(f"unknown scenario kind {kind!r}")
        sc = _BUILDERS[kind](list(targets), b, tuple(input_range), n_inputs)
        return cls(sc, tuple(map(float, input_range)), settings or SimulationSettings())

    def template(self, n_nodes: int) -> Network:
        """Unit-rate zero-weight network with this task's node roles.

        Inputs occupy the first nodes and outputs the last ones.
        """
        sc = self.scenario
        if sc.n_inputs + sc.n_outputs > n_nodes:
            raise ValueError(f"{n_nodes} nodes cannot host {sc.n_inputs} inputs and {sc.n_outputs} outputs")
        return Network.from_weights(np.zeros((n_nodes, n_nodes)), range(sc.n_inputs),
                                    range(n_nodes - sc.n_outputs, n_nodes))

    def to_dict(self) -> dict:
        sc = self.scenario
        return {
            "kind": sc.kind,
            "b": sc.b,
            "input_range": list(self.input_range),
            "n_inputs": sc.n_inputs,
            "channels": [{"encoding": ch.label, "output": ch.output, "target": ch.target.name}
                         for ch in sc.channels],
            "simulation": {"dt": self.settings.dt, "max_steps": self.settings.max_steps,
                           "convergence_eps": self.settings.convergence_eps},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TaskSpec":
        known = {"kind", "b", "input_range", "n_inputs", "targets", "channels", "simulation"}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown task fields: {sorted(unknown)}")
        kind = doc.get("kind", "one_in_one_out")
        b = int(doc.get("b", 32))
        rng = tuple(map(float, doc.get("input_range", (0.0, 1.0))))
        settings = SimulationSettings(**doc.get("simulation", {}))
        if "channels" in doc:
            chans = []
            for ch in doc["channels"]:
                enc = parse_encoding(ch["encoding"])
                chans.append(Channel(enc, int(ch["output"]), make_target(ch["target"], b, rng)))
            n_in = len(chans[0].encoding)
            n_out = max(ch.output for ch in chans) + 1
            return cls(WiringScenario(kind, n_in, n_out, tuple(chans)), rng, settings)
        return cls.build(kind, doc.get("targets", ["band_pass"]), b, rng, int(doc.get("n_inputs", 2)), settings)


def channel_loss(outputs, targets) -> np.ndarray:
    """Sum over the batch of half squared errors (last axis)."""
    return np.sum(0.5 * (np.asarray(outputs) - np.asarray(targets)) ** 2, axis=-1)


def _input_block(net: Network, n_inputs: int, encodings, levels) -> np.ndarray:
    """(len(encodings) * b, n) input vectors, one encoding after another."""
    n, b = net.n_nodes, len(levels)
    if len(net.input_nodes) != n_inputs:
        raise ValueError(f"network has {len(net.input_nodes)} input nodes, scenario expects {n_inputs}")
    block = np.zeros((len(encodings), b, n))
    for e, bits in enumerate(encodings):
        for k, bit in enumerate(bits):
            if bit:
                block[e, :, net.input_nodes[k]] = levels
    return block.reshape(-1, n)


class PopulationLoss(NamedTuple):
    per_channel: np.ndarray  # (P, C)
    total: np.ndarray        # (P,)
    diverged: np.ndarray     # (P, C) bool
    outputs: np.ndarray      # (P, C, b)


def population_loss(weights, template: Network, task: TaskSpec) -> PopulationLoss:
    """Score P weight matrices that share ``template``'s rates and node roles."""
    sc = task.scenario
    W = np.asarray(weights, dtype=float)
    if W.ndim == 2:
        W = W[None]
    if len(template.output_nodes) != sc.n_outputs:
        raise ValueError(f"network has {len(template.output_nodes)} output nodes, scenario expects {sc.n_outputs}")
    b = sc.b
    encodings = sorted({ch.encoding for ch in sc.channels})
    inputs = _input_block(template, sc.n_inputs, encodings, sc.levels)
    res = simulate_batch(W, inputs, template.k1, template.k2, task.settings)
    P = W.shape[0]
    states = res.states.reshape(P, len(encodings), b, -1)
    div = res.diverged.reshape(P, len(encodings), b).any(axis=2)
    C = len(sc.channels)
    per = np.empty((P, C))
    cdiv = np.empty((P, C), dtype=bool)
    outs = np.empty((P, C, b))
    for c, ch in enumerate(sc.channels):
        e = encodings.index(ch.encoding)
        y = states[:, e, :, template.output_nodes[ch.output]]
        outs[:, c] = y
        per[:, c] = channel_loss(y, ch.target.outputs)
        cdiv[:, c] = div[:, e]
    per[cdiv] = divergence_penalty(b)
    total = np.array([math.fsum(row) for row in per])
    return PopulationLoss(per, total, cdiv, outs)


class LossResult(NamedTuple):
    total: float
    per_channel: list[float]
    diverged: list[bool]
    outputs: np.ndarray  # (C, b)


def evaluate_loss(net: Network, task: TaskSpec) -> LossResult:
    pl = population_loss(net.weights, net, task)
    return LossResult(float(pl.total[0]), pl.per_channel[0].tolist(), pl.diverged[0].tolist(), pl.outputs[0])


def is_learned(per_channel, b: int) -> bool:
    """True when every channel's loss is below 5% of the batch size."""
    if b < 2:
        raise ValueError("b must be at least 2")
    per_channel = np.atleast_1d(np.asarray(per_channel, dtype=float))
    return bool(np.all(per_channel < tolerance(b)))


class EncodingResponse(NamedTuple):
    curves: np.ndarray  # (b, n_outputs)
    diverged: bool


def encoding_sweep(net: Network, n_inputs: int, levels, settings: SimulationSettings = SimulationSettings()
                   ) -> dict[str, EncodingResponse]:
    """Steady-state output curves for every binary encoding, all-zeros included."""
    levels = np.asarray(levels, dtype=float)
    codes = list(range(2 ** n_inputs))
    encodings = [encoding_bits(c, n_inputs) for c in codes]
    inputs = _input_block(net, n_inputs, encodings, levels)
    res = simulate_batch(net.weights, inputs, net.k1, net.k2, settings)
    b = len(levels)
    states = res.states[0].reshape(len(codes), b, -1)
    div = res.diverged[0].reshape(len(codes), b).any(axis=1)
    outs = list(net.output_nodes)
    return {encoding_label(c, n_inputs): EncodingResponse(states[c][:, outs], bool(div[c])) for c in codes}
