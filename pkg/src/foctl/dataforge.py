"""Synthetic data generation and the dataset interchange format.

Models are drawn with uniform entries and rescaled so the spectral radius of
A stays at or below 0.95; cost matrices come from Gram products with a small
ridge on the input weight so it is strictly positive definite.  Six process
noise families are supported, each (apart from the heavy-tailed one) scaled
to a target standard deviation and centered to zero mean.

A dataset on disk is a JSON manifest plus one CSV per trajectory
(``k, x_0..x_{n-1}, u_0..u_{m-1}``), an optional CSV per noise sequence, and
a single CSV of optimal input sequences.  Floats are serialized with 17
significant digits, so serialize -> parse -> serialize is byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from json import encoder as _json_encoder
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import Convention, FoltiModel, Trajectory, propagators, simulate
from .glcore import FracOrder
from .lqr import CostSpec, build_stacked, solve_least_squares

__all__ = [
    "NOISE_FAMILIES",
    "GenSpec",
    "Dataset",
    "random_model",
    "random_cost",
    "sample_noise",
    "generate",
    "write_dataset",
    "read_dataset",
    "dumps_json",
    "format_float",
    "write_csv",
]

NOISE_FAMILIES = ("gaussian", "cauchy", "gamma", "sinc_squared", "uniform", "poisson")

_SINC_HALF_WIDTH = 8.0 * np.pi
_SINC_GRID_POINTS = 20001


def format_float(x: float) -> str:
    return format(float(x), ".17g")


def _floatstr(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError("non-finite floats are not representable in the interchange format")
    return format_float(x)


def _reject_unknown(obj):
    raise TypeError(f"object of type {type(obj).__name__} is not JSON serializable")


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with every float rendered at 17 significant digits."""
    iterencode = _json_encoder._make_iterencode(
        {},
        _reject_unknown,
        _json_encoder.encode_basestring_ascii,
        " " * indent,
        _floatstr,
        ": ",
        ",",
        False,
        False,
        False,
    )
    return "".join(iterencode(obj, 0)) + "\n"


def _sinc_squared_profile() -> tuple[np.ndarray, np.ndarray, float, float]:
    """Grid, CDF, standard deviation, and captured mass of the truncated density."""
    x = np.linspace(-_SINC_HALF_WIDTH, _SINC_HALF_WIDTH, _SINC_GRID_POINTS)
    pdf = np.sinc(x / np.pi) ** 2  # numpy sinc is sin(pi t)/(pi t); undo the pi scaling
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (pdf[1:] + pdf[:-1]) * np.diff(x))])
    mass = cdf[-1]
    cdf /= mass
    second = np.trapezoid(x**2 * pdf, x) / mass
    captured = mass / np.pi  # total mass of the untruncated density is pi
    return x, cdf, float(np.sqrt(second)), float(captured)


_SINC_GRID, _SINC_CDF, _SINC_STD, SINC_CAPTURED_MASS = _sinc_squared_profile()


def sample_noise(family: str, scale: float, shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Zero-mean noise draws of the requested family, std ``scale`` where it exists.

    The heavy-tailed family has no moments; ``scale`` is its scale parameter
    and no standardization applies.
    """
    if scale < 0:
        raise ValueError(f"noise scale must be non-negative, got {scale}")
    if family == "gaussian":
        return scale * rng.standard_normal(shape)
    if family == "uniform":
        return rng.uniform(-scale * np.sqrt(3.0), scale * np.sqrt(3.0), shape)
    if family == "gamma":
        theta = scale / np.sqrt(2.0)
        return rng.gamma(2.0, theta, shape) - 2.0 * theta
    if family == "poisson":
        return scale * (rng.poisson(1.0, shape) - 1.0)
    if family == "cauchy":
        return scale * rng.standard_cauchy(shape)
    if family == "sinc_squared":
        draws = np.interp(rng.random(shape), _SINC_CDF, _SINC_GRID)
        return (scale / _SINC_STD) * draws
    raise ValueError(f"unknown noise family {family!r}; expected one of {NOISE_FAMILIES}")


@dataclass(frozen=True)
class GenSpec:
    """Recipe for one synthetic dataset."""

    n: int
    m: int
    horizon: int
    n_trajectories: int
    alpha: tuple[float, ...] | None = None
    alpha_mode: str = "fixed"
    noise_family: str = "gaussian"
    noise_scale: float = 0.01
    seed: int = 0
    store_noise: bool = False

    def __post_init__(self):
        for name in ("n", "m", "horizon"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.n_trajectories < 0:
            raise ValueError(f"n_trajectories must be non-negative, got {self.n_trajectories}")
        if self.alpha_mode not in ("fixed", "sampled"):
            raise ValueError(f"alpha_mode must be 'fixed' or 'sampled', got {self.alpha_mode!r}")
        if self.alpha_mode == "fixed":
            if self.alpha is None:
                raise ValueError("alpha_mode 'fixed' requires an alpha vector")
            alpha = tuple(float(a) for a in self.alpha)
            if len(alpha) != self.n:
                raise ValueError(f"alpha has length {len(alpha)}, expected {self.n}")
            FracOrder(np.array(alpha))  # range check
            object.__setattr__(self, "alpha", alpha)
        if self.noise_family not in NOISE_FAMILIES:
            raise ValueError(
                f"unknown noise family {self.noise_family!r}; expected one of {NOISE_FAMILIES}"
            )
        if self.noise_scale < 0:
            raise ValueError(f"noise_scale must be non-negative, got {self.noise_scale}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["alpha"] = list(self.alpha) if self.alpha is not None else None
        return d


@dataclass(frozen=True)
class Dataset:
    """In-memory dataset: models, rollouts, costs, optimal inputs, provenance."""

    spec: GenSpec
    models: list[FoltiModel]
    shared_model: bool
    trajectories: list[Trajectory]
    costs: list[CostSpec]
    optimal_controls: list[np.ndarray]
    noises: list[np.ndarray] | None
    provenance: dict = field(default_factory=dict)

    def model_for(self, index: int) -> FoltiModel:
        return self.models[0] if self.shared_model else self.models[index]

    @property
    def convention(self) -> Convention:
        return Convention(self.provenance.get("convention", Convention.A_MINUS_DIAG.value))

    def __len__(self) -> int:
        return len(self.trajectories)


def random_model(spec: GenSpec, rng: np.random.Generator) -> FoltiModel:
    """Stable random model: uniform entries, spectral radius of A capped at 0.95."""
    a = rng.uniform(-1.0, 1.0, (spec.n, spec.n))
    radius = float(np.max(np.abs(np.linalg.eigvals(a))))
    if radius > 0.95:
        a *= 0.95 / radius
    b = rng.uniform(-1.0, 1.0, (spec.n, spec.m))
    if spec.alpha_mode == "fixed":
        alpha = np.array(spec.alpha)
    else:
        alpha = np.full(spec.n, rng.uniform(0.1, 0.9))  # commensurate: one shared order
    return FoltiModel(a=a, b=b, order=FracOrder(alpha))


def random_cost(n: int, m: int, rng: np.random.Generator, ridge: float = 1e-6) -> CostSpec:
    """Gram-product weights; the input weight gets a ridge so it is strictly PD."""
    mq = rng.uniform(-1.0, 1.0, (n, n))
    mr = rng.uniform(-1.0, 1.0, (m, m))
    mf = rng.uniform(-1.0, 1.0, (n, n))
    return CostSpec(q=mq.T @ mq, r=mr.T @ mr + ridge * np.eye(m), q_f=mf.T @ mf)


def _trajectory_stream(seed: int, index: int) -> np.random.Generator:
    # stream 0 is the model draw; trajectory i uses stream i + 1, independent
    # of how many trajectories the run asks for
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def generate(spec: GenSpec, workers: int = 1) -> Dataset:
    """Draw a dataset: rollouts under sampled noise plus noise-free optimal inputs.

    All randomness derives from per-index child streams of the seed, so the
    output is independent of the worker count and ordered by index.
    """
    model_rng = _trajectory_stream(spec.seed, 0)
    base_model = random_model(spec, model_rng)

    def make_one(i: int):
        rng = _trajectory_stream(spec.seed, i + 1)
        if spec.alpha_mode == "sampled":
            alpha = np.full(spec.n, rng.uniform(0.1, 0.9))
            model = FoltiModel(a=base_model.a, b=base_model.b, order=FracOrder(alpha))
        else:
            model = base_model
        x0 = rng.standard_normal(spec.n)
        inputs = rng.uniform(-1.0, 1.0, (spec.horizon, spec.m))
        noise = sample_noise(spec.noise_family, spec.noise_scale, (spec.horizon, spec.n), rng)
        cost = random_cost(spec.n, spec.m, rng)
        traj = simulate(model, x0, inputs, noise=noise)
        props = propagators(model, spec.horizon)
        stacked = build_stacked(model, props, cost, spec.horizon)
        optimal = solve_least_squares(stacked, x0).u_seq
        return model, traj, cost, optimal, noise

    indices = range(spec.n_trajectories)
    if workers > 1 and spec.n_trajectories > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(make_one, indices))
    else:
        results = [make_one(i) for i in indices]

    shared = spec.alpha_mode == "fixed"
    models = [base_model] if shared else [r[0] for r in results]
    if not results and not shared:
        models = [base_model]

    provenance = {
        "toolkit_version": __version__,
        "seed": spec.seed,
        "convention": Convention.A_MINUS_DIAG.value,
        "spec": spec.to_dict(),
    }
    if spec.noise_family == "sinc_squared":
        provenance["sinc_squared"] = {
            "half_width": _SINC_HALF_WIDTH,
            "captured_mass": SINC_CAPTURED_MASS,
        }
    return Dataset(
        spec=spec,
        models=models,
        shared_model=shared,
        trajectories=[r[1] for r in results],
        costs=[r[2] for r in results],
        optimal_controls=[np.asarray(r[3]) for r in results],
        noises=[r[4] for r in results] if spec.store_noise else None,
        provenance=provenance,
    )


def _matrix_rows(mat: np.ndarray) -> list[list[float]]:
    return [[float(v) for v in row] for row in np.atleast_2d(np.asarray(mat, dtype=float))]


def _model_dict(model: FoltiModel) -> dict:
    return {
        "a": _matrix_rows(model.a),
        "b": _matrix_rows(model.b),
        "alpha": [float(v) for v in model.order.alpha],
    }


def model_from_dict(d: dict) -> FoltiModel:
    return FoltiModel(
        a=np.array(d["a"], dtype=float),
        b=np.array(d["b"], dtype=float),
        order=FracOrder(np.array(d["alpha"], dtype=float)),
    )


def _cost_dict(cost: CostSpec) -> dict:
    return {"q": _matrix_rows(cost.q), "r": _matrix_rows(cost.r), "q_f": _matrix_rows(cost.q_f)}


def cost_from_dict(d: dict) -> CostSpec:
    return CostSpec(
        q=np.array(d["q"], dtype=float),
        r=np.array(d["r"], dtype=float),
        q_f=np.array(d["q_f"], dtype=float),
    )


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    """Write one delimited table, floats at 17 significant digits."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_float(v) if isinstance(v, float) else v for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def trajectory_csv_rows(traj: Trajectory) -> tuple[list[str], list[list]]:
    header = ["k"] + [f"x_{i}" for i in range(traj.n)] + [f"u_{i}" for i in range(traj.m)]
    rows = []
    for k in range(traj.horizon + 1):
        row: list = [k] + [float(v) for v in traj.states[k]]
        if k < traj.horizon:
            row += [float(v) for v in traj.inputs[k]]
        else:
            row += [""] * traj.m  # no input at the final step
        rows.append(row)
    return header, rows


def write_dataset(dataset: Dataset, out_dir: str | Path) -> Path:
    """Write the dataset in interchange form; returns the manifest path."""
    out = Path(out_dir)
    (out / "trajectories").mkdir(parents=True, exist_ok=True)

    traj_files = []
    noise_files = [] if dataset.noises is not None else None
    for i, traj in enumerate(dataset.trajectories):
        rel = f"trajectories/traj_{i:05d}.csv"
        header, rows = trajectory_csv_rows(traj)
        write_csv(out / rel, header, rows)
        traj_files.append(rel)
        if dataset.noises is not None:
            nrel = f"trajectories/noise_{i:05d}.csv"
            nheader = ["k"] + [f"w_{j}" for j in range(traj.n)]
            nrows = [[k] + [float(v) for v in dataset.noises[i][k]] for k in range(traj.horizon)]
            write_csv(out / nrel, nheader, nrows)
            noise_files.append(nrel)

    controls_file = None
    if dataset.optimal_controls:
        controls_file = "optimal_controls.csv"
        m = dataset.optimal_controls[0].shape[1]
        header = ["traj", "k"] + [f"u_{i}" for i in range(m)]
        rows = []
        for i, u in enumerate(dataset.optimal_controls):
            for k in range(u.shape[0]):
                rows.append([i, k] + [float(v) for v in u[k]])
        write_csv(out / controls_file, header, rows)

    manifest = {
        "format": "foctl-dataset",
        "format_version": 1,
        "n": dataset.spec.n,
        "m": dataset.spec.m,
        "horizon": dataset.spec.horizon,
        "n_trajectories": len(dataset.trajectories),
        "spec": dataset.spec.to_dict(),
        "provenance": dataset.provenance,
        "shared_model": dataset.shared_model,
        "models": [_model_dict(m_) for m_ in dataset.models],
        "costs": [_cost_dict(c) for c in dataset.costs],
        "trajectory_files": traj_files,
        "noise_files": noise_files,
        "optimal_controls_file": controls_file,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(dumps_json(manifest), encoding="utf-8")
    return manifest_path


def _read_trajectory_csv(path: Path, n: int, m: int) -> Trajectory:
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        expected = ["k"] + [f"x_{i}" for i in range(n)] + [f"u_{i}" for i in range(m)]
        if header != expected:
            raise ValueError(f"{path}: unexpected header {header}, expected {expected}")
        states, inputs = [], []
        for row in reader:
            states.append([float(v) for v in row[1 : 1 + n]])
            u_fields = row[1 + n : 1 + n + m]
            if any(f != "" for f in u_fields):
                inputs.append([float(v) for v in u_fields])
    return Trajectory(states=np.array(states), inputs=np.array(inputs).reshape(len(inputs), m))


def read_dataset(path: str | Path) -> Dataset:
    """Load a dataset directory (or its manifest path) back into memory."""
    path = Path(path)
    manifest_path = path if path.name.endswith(".json") else path / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"dataset manifest not found at {manifest_path}")
    root = manifest_path.parent
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format") != "foctl-dataset":
        raise ValueError(f"{manifest_path} is not a dataset manifest")

    spec_d = dict(manifest["spec"])
    if spec_d.get("alpha") is not None:
        spec_d["alpha"] = tuple(spec_d["alpha"])
    spec = GenSpec(**spec_d)
    n, m = manifest["n"], manifest["m"]

    trajectories = [_read_trajectory_csv(root / rel, n, m) for rel in manifest["trajectory_files"]]
    noises = None
    if manifest.get("noise_files"):
        noises = []
        for rel in manifest["noise_files"]:
            with (root / rel).open(newline="", encoding="utf-8") as fh:
                reader = csv.reader(fh)
                next(reader)
                noises.append(np.array([[float(v) for v in row[1:]] for row in reader]))

    controls: list[np.ndarray] = []
    if manifest.get("optimal_controls_file"):
        per_traj: dict[int, list[list[float]]] = {}
        with (root / manifest["optimal_controls_file"]).open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                per_traj.setdefault(int(row[0]), []).append([float(v) for v in row[2:]])
        controls = [np.array(per_traj[i]) for i in sorted(per_traj)]

    return Dataset(
        spec=spec,
        models=[model_from_dict(d) for d in manifest["models"]],
        shared_model=manifest["shared_model"],
        trajectories=trajectories,
        costs=[cost_from_dict(d) for d in manifest["costs"]],
        optimal_controls=controls,
        noises=noises,
        provenance=manifest.get("provenance", {}),
    )


def config_hash(config: dict) -> str:
    """Stable hash of an effective configuration for provenance blocks."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
