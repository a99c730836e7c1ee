"""Five-stage synthetic classification workflow.

load_data -> analyze -> preprocess -> train -> evaluate. Artifacts are
canonical JSON; all arithmetic goes through :mod:`provenact.numerics`.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

from . import canonical
from .action import Action, ArtifactExists, ArtifactRef, Metadata, Produces
from .adapters import Adapter, AdapterFailure, AdapterRegistry, register_adapter
from .numerics import dot, mean, pstdev, sigmoid

N_FEATURES = 4
CLUSTER_OFFSET = 1.5
NOISE = 1.0
TRAIN_FRACTION_NUM, TRAIN_FRACTION_DEN = 4, 5

_MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK64

    def next(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def uniform(self) -> float:
        """Float in [0, 1) from the top 53 bits (exact)."""
        return (self.next() >> 11) * (1.0 / (1 << 53))


# --- pure functions -------------------------------------------------------

def generate_rows(seed: int, n_rows: int) -> list[tuple[list[float], int]]:
    """Two clusters centred at +-1.5 on every axis with uniform noise in [-1, 1).

    The hyperplane sum(x) = 0 separates them with margin, so the data are
    linearly separable.
    """
    rng = SplitMix64(seed)
    rows = []
    for _ in range(n_rows):
        label = rng.next() >> 63
        centre = CLUSTER_OFFSET if label else -CLUSTER_OFFSET
        x = [centre + NOISE * (2.0 * rng.uniform() - 1.0) for _ in range(N_FEATURES)]
        rows.append((x, label))
    return rows


def column_stats(rows) -> dict:
    cols = list(zip(*(x for x, _ in rows)))
    means = [mean(c) for c in cols]
    return {
        "n_rows": len(rows),
        "mean": means,
        "std": [pstdev(c, m) for c, m in zip(cols, means)],
        "min": [min(c) for c in cols],
        "max": [max(c) for c in cols],
    }


def standardize(rows, stats: Mapping) -> list[tuple[list[float], int]]:
    out = []
    for x, y in rows:
        z = []
        for v, m, s in zip(x, stats["mean"], stats["std"]):
            # zero-variance column: pass through unscaled
            z.append(v if s == 0.0 else (v - m) / s)
        out.append((z, y))
    return out


def split_index(n_rows: int) -> int:
    """Rows before this index train, the rest test."""
    return n_rows * TRAIN_FRACTION_NUM // TRAIN_FRACTION_DEN


def design(rows) -> tuple[list[list[float]], list[int]]:
    """Prepend a constant 1.0 column for the bias weight."""
    return [[1.0, *x] for x, _ in rows], [y for _, y in rows]


def logistic_gradient(w, X, y) -> list[float]:
    """Mean log-loss gradient: (1/n) * sum_i (sigmoid(w.x_i) - y_i) * x_i."""
    g = [0.0] * len(w)
    for xi, yi in zip(X, y):
        r = sigmoid(dot(w, xi)) - yi
        for j, xij in enumerate(xi):
            g[j] += r * xij
    n = len(X)
    return [gj / n for gj in g]


def gradient_descent(X, y, learning_rate: float, iterations: int, weights=None, start: int = 0) -> list[float]:
    w = list(weights) if weights is not None else [0.0] * len(X[0])
    for _ in range(start, iterations):
        g = logistic_gradient(w, X, y)
        w = [wj - learning_rate * gj for wj, gj in zip(w, g)]
    return w


def accuracy(w, X, y) -> tuple[int, int]:
    correct = sum(1 for xi, yi in zip(X, y) if (dot(w, xi) >= 0.0) == bool(yi))
    return correct, len(X)


# --- payload codecs ---------------------------------------------------------

def encode_dataset(rows, seed: int) -> bytes:
    return canonical.to_bytes({"seed": seed, "rows": [[list(x), y] for x, y in rows]})


def decode_dataset(data: bytes) -> list[tuple[list[float], int]]:
    return [(list(x), int(y)) for x, y in canonical.loads(data)["rows"]]


def _params(parameters: Mapping, *names):
    return [parameters[n] for n in names]


# --- adapters ---------------------------------------------------------------

class LoadData(Adapter):
    name = "load_data"
    version = "1.0.0"
    required_parameters = ("n_rows",)
    required_seeds = ("data",)
    outputs = ("dataset",)

    def seed_for(self, seeds: Mapping[str, int]) -> int:
        return seeds["data"]

    def run(self, inputs, parameters, seeds):
        (n_rows,) = _params(parameters, "n_rows")
        seed = self.seed_for(seeds)
        return {"dataset": encode_dataset(generate_rows(seed, int(n_rows)), seed)}


class UnseededLoadData(LoadData):
    """Test/baseline variant whose seed drifts with an unlogged call counter."""

    version = "1.0.0+unseeded"
    deterministic = False

    def seed_for(self, seeds):
        return (seeds["data"] + self.calls) & _MASK64


class Analyze(Adapter):
    name = "analyze"
    version = "1.0.0"
    required_inputs = ("dataset",)
    outputs = ("stats",)

    def run(self, inputs, parameters, seeds):
        return {"stats": canonical.to_bytes(column_stats(decode_dataset(inputs["dataset"])))}


class Preprocess(Adapter):
    name = "preprocess"
    version = "1.0.0"
    required_inputs = ("dataset", "stats")
    outputs = ("dataset_std",)

    def run(self, inputs, parameters, seeds):
        data = canonical.loads(inputs["dataset"])
        rows = standardize(decode_dataset(inputs["dataset"]), canonical.loads(inputs["stats"]))
        return {"dataset_std": encode_dataset(rows, data["seed"])}


class InjectedTrainingFault(AdapterFailure):
    pass


class Train(Adapter):
    """Full-batch logistic regression from zero weights.

    An optional ``checkpoint`` input resumes from saved weights.
    """

    name = "train"
    version = "1.0.0"
    required_inputs = ("dataset",)
    optional_inputs = ("checkpoint",)
    required_parameters = ("learning_rate", "iterations")
    outputs = ("model",)

    def prepare(self, inputs, parameters):
        lr, iterations = _params(parameters, "learning_rate", "iterations")
        rows = decode_dataset(inputs["dataset"])
        X, y = design(rows[: split_index(len(rows))])
        weights, start = None, 0
        if "checkpoint" in inputs:
            ckpt = canonical.loads(inputs["checkpoint"])
            weights, start = ckpt["weights"], ckpt["completed"]
        return X, y, float(lr), int(iterations), weights, start

    def run(self, inputs, parameters, seeds):
        X, y, lr, iterations, weights, start = self.prepare(inputs, parameters)
        w = gradient_descent(X, y, lr, iterations, weights, start)
        return {"model": encode_model(w, lr, iterations)}


class FaultyTrain(Train):
    """Fails half way through unless resumed from a checkpoint."""

    version = "1.0.0+fault"

    def run(self, inputs, parameters, seeds):
        if "checkpoint" in inputs:
            return super().run(inputs, parameters, seeds)
        X, y, lr, iterations, weights, start = self.prepare(inputs, parameters)
        halt = iterations // 2
        w = gradient_descent(X, y, lr, halt)
        ckpt = canonical.to_bytes({"weights": w, "completed": halt})
        raise InjectedTrainingFault(
            f"injected fault after {halt} of {iterations} iterations",
            partial_outputs={"checkpoint": ckpt},
        )


def encode_model(w, learning_rate: float, iterations: int) -> bytes:
    return canonical.to_bytes({"weights": list(w), "learning_rate": learning_rate, "iterations": iterations})


class Evaluate(Adapter):
    name = "evaluate"
    version = "1.0.0"
    required_inputs = ("model", "dataset")
    outputs = ("report",)

    def run(self, inputs, parameters, seeds):
        w = canonical.loads(inputs["model"])["weights"]
        rows = decode_dataset(inputs["dataset"])
        X, y = design(rows[split_index(len(rows)):])
        correct, n = accuracy(w, X, y)
        return {"report": canonical.to_bytes({"accuracy": correct / n if n else 0.0, "n_correct": correct, "n_test": n})}


def workload_registry(*, inject_failure: bool = False, unseeded: bool = False) -> AdapterRegistry:
    registry = AdapterRegistry()
    adapters = [
        UnseededLoadData() if unseeded else LoadData(),
        Analyze(),
        Preprocess(),
        FaultyTrain() if inject_failure else Train(),
        Evaluate(),
    ]
    for a in adapters:
        register_adapter(registry, a.name, a)
    return registry


# --- action templates -------------------------------------------------------

STAGES = ("load_data", "analyze", "preprocess", "train", "evaluate")

# stage -> (input name -> artifact name it consumes)
STAGE_INPUTS: dict[str, dict[str, str]] = {
    "load_data": {},
    "analyze": {"dataset": "dataset"},
    "preprocess": {"dataset": "dataset", "stats": "stats"},
    "train": {"dataset": "dataset_std"},
    "evaluate": {"model": "model", "dataset": "dataset_std"},
}
STAGE_OUTPUT = {"load_data": "dataset", "analyze": "stats", "preprocess": "dataset_std", "train": "model", "evaluate": "report"}
REQUIRED_ARTIFACTS = tuple(STAGE_OUTPUT.values())


@dataclass(frozen=True)
class WorkloadConfig:
    seed: int = 42
    n_rows: int = 200
    learning_rate: float = 0.1
    iterations: int = 200


def stage_parameters(stage: str, config: WorkloadConfig) -> dict:
    if stage == "load_data":
        return {"n_rows": config.n_rows}
    if stage == "train":
        return {"learning_rate": config.learning_rate, "iterations": config.iterations}
    return {}


def make_action(
    stage: str,
    config: WorkloadConfig,
    producers: Mapping[str, str],
    planner_config: Mapping | None = None,
    extra_inputs: Mapping[str, ArtifactRef] | None = None,
) -> Action:
    """Build the action for ``stage``; ``producers`` maps artifact name -> node id.

    The id and logical timestamp are placeholders; the engine stamps them.
    """
    inputs = {
        name: ArtifactRef.ref(producers[artifact], artifact)
        for name, artifact in STAGE_INPUTS[stage].items()
    }
    inputs.update(extra_inputs or {})
    seeds = {"data": config.seed} if stage == "load_data" else {}
    return Action(
        id="pending",
        action_type=stage,
        inputs=inputs,
        parameters=stage_parameters(stage, config),
        preconditions=tuple(ArtifactExists(a) for a in STAGE_INPUTS[stage].values()),
        effects=(Produces(STAGE_OUTPUT[stage]),),
        metadata=Metadata(planner_config=dict(planner_config or {}), seeds=seeds),
    )
