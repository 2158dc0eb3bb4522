"""Multi-branch network: fixed branch, optional semester/year LSTMs, FC head."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .layers import LSTM, Concat, Conv1D, Dense, GlobalAvgPool, Layer, NoForwardCache, ShapeMismatch, SoftmaxCE


class FixedBranch(str, enum.Enum):
    DenseStack = "DenseStack"
    ConvStack = "ConvStack"


@dataclass(frozen=True)
class StageArchitecture:
    fixed_branch: FixedBranch = FixedBranch.DenseStack
    use_semester_lstm: bool = False
    use_year_lstm: bool = False
    head: tuple[int, ...] = (64, 64)
    n_classes: int = 2
    dense_units: tuple[int, ...] = (128, 128)
    conv_filters: tuple[int, ...] = (16, 16)
    conv_width: int = 5
    lstm_units: int = 64
    lstm_layers: int = 1
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "fixed_branch", FixedBranch(self.fixed_branch))
        if self.use_year_lstm and not self.use_semester_lstm:
            raise ValueError("a year LSTM implies a semester LSTM")
        sizes = (*self.head, *self.dense_units, *self.conv_filters, self.conv_width, self.lstm_units,
                 self.lstm_layers, self.n_classes)
        if any(int(s) < 1 for s in sizes):
            raise ValueError("all layer sizes must be >= 1")
        if self.n_classes < 2:
            raise ValueError("need at least two classes")

    def to_dict(self) -> dict:
        d = dict(vars(self))
        d["fixed_branch"] = self.fixed_branch.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "StageArchitecture":
        d = dict(d)
        for k in ("head", "dense_units", "conv_filters"):
            d[k] = tuple(d[k])
        return cls(**d)


@dataclass
class Inputs:
    fixed: np.ndarray
    semesters: np.ndarray | None = None
    semester_mask: np.ndarray | None = None
    years: np.ndarray | None = None
    year_mask: np.ndarray | None = None

    def take(self, idx) -> "Inputs":
        def t(a):
            return None if a is None else a[idx]
        return Inputs(self.fixed[idx], t(self.semesters), t(self.semester_mask), t(self.years), t(self.year_mask))

    def __len__(self) -> int:
        return self.fixed.shape[0]


@dataclass
class Grads:
    fixed: np.ndarray
    semesters: np.ndarray | None = None
    years: np.ndarray | None = None


class MultiBranchNet:
    """Parameters are exposed as ``"<layer>.<param>"``; layer names carry a
    branch prefix (``fixed``, ``sem``, ``year``, ``head``), so swapping the
    fixed branch leaves every other parameter block untouched."""

    def __init__(self, arch: StageArchitecture, n_fixed: int, n_semester: int = 0, n_year: int = 0, seed: int = 0):
        self.arch, self.seed = arch, seed
        self.n_fixed, self.n_semester, self.n_year = n_fixed, n_semester, n_year
        self.fixed_layers: list[Layer] = []
        width = n_fixed
        if arch.fixed_branch is FixedBranch.DenseStack:
            for k, u in enumerate(arch.dense_units):
                self.fixed_layers.append(Dense(f"fixed.dense{k}", width, u, arch.activation, seed))
                width = u
        else:
            length, channels = n_fixed, 1
            for k, f in enumerate(arch.conv_filters):
                w = min(arch.conv_width, length)
                conv = Conv1D(f"fixed.conv{k}", channels, f, w, arch.activation, seed)
                self.fixed_layers.append(conv)
                length, channels = conv.out_length(length), f
            self.fixed_layers.append(GlobalAvgPool("fixed.pool"))
            width = channels
        branch_width = [width]
        self.sem_layers = self._lstm_stack("sem", n_semester, seed) if arch.use_semester_lstm else []
        self.year_layers = self._lstm_stack("year", n_year, seed) if arch.use_year_lstm else []
        if self.sem_layers:
            branch_width.append(arch.lstm_units)
        if self.year_layers:
            branch_width.append(arch.lstm_units)
        self.concat = Concat("concat")
        width = sum(branch_width)
        self.head_layers: list[Layer] = []
        for k, u in enumerate(arch.head):
            self.head_layers.append(Dense(f"head.dense{k}", width, u, arch.activation, seed))
            width = u
        self.head_layers.append(Dense("head.out", width, arch.n_classes, "identity", seed))
        self.loss_layer = SoftmaxCE("softmax")
        self._forwarded = False

    def _lstm_stack(self, prefix: str, n_in: int, seed: int) -> list[LSTM]:
        if n_in < 1:
            raise ShapeMismatch(f"{prefix} LSTM needs at least one input feature")
        layers, width = [], n_in
        for k in range(self.arch.lstm_layers):
            last = k == self.arch.lstm_layers - 1
            layers.append(LSTM(f"{prefix}.lstm{k}", width, self.arch.lstm_units, seed, return_sequences=not last))
            width = self.arch.lstm_units
        return layers

    @property
    def layers(self) -> list[Layer]:
        return [*self.fixed_layers, *self.sem_layers, *self.year_layers, *self.head_layers]

    def parameters(self) -> dict[str, np.ndarray]:
        return {f"{l.name}.{k}": v for l in self.layers for k, v in l.params.items()}

    def gradients(self) -> dict[str, np.ndarray]:
        return {f"{l.name}.{k}": v for l in self.layers for k, v in l.grads.items()}

    def zero_grad(self) -> None:
        for l in self.layers:
            l.zero_grad()

    def n_parameters(self) -> int:
        return sum(v.size for v in self.parameters().values())

    # --- passes -----------------------------------------------------------
    def forward(self, inputs: Inputs) -> np.ndarray:
        """Logits for a batch."""
        h = inputs.fixed
        if h.ndim != 2 or h.shape[1] != self.n_fixed:
            raise ShapeMismatch(f"fixed input must be (batch, {self.n_fixed}), got {h.shape}")
        if self.arch.fixed_branch is FixedBranch.ConvStack:
            h = h[:, :, None]
        for l in self.fixed_layers:
            h = l.forward(h)
        parts = [h]
        for layers, x, m in ((self.sem_layers, inputs.semesters, inputs.semester_mask),
                             (self.year_layers, inputs.years, inputs.year_mask)):
            if not layers:
                continue
            if x is None:
                raise ShapeMismatch(f"{layers[0].name} needs a time-series input")
            for l in layers:
                x = l.forward(x, m)
            parts.append(x)
        h = self.concat.forward(parts)
        for l in self.head_layers:
            h = l.forward(h)
        self._forwarded = True
        return h

    def backward(self, dlogits: np.ndarray) -> Grads:
        """Accumulate parameter gradients and return input gradients."""
        if not self._forwarded:
            raise NoForwardCache("backward called before forward")
        d = dlogits
        for l in reversed(self.head_layers):
            d = l.backward(d)
        pieces = self.concat.backward(d)
        d = pieces[0]
        for l in reversed(self.fixed_layers):
            d = l.backward(d)
        if self.arch.fixed_branch is FixedBranch.ConvStack:
            d = d[:, :, 0]
        out = Grads(d)
        k = 1
        for name, layers in (("semesters", self.sem_layers), ("years", self.year_layers)):
            if layers:
                g = pieces[k]
                k += 1
                for l in reversed(layers):
                    g = l.backward(g)
                setattr(out, name, g)
        return out

    def loss(self, inputs: Inputs, labels: np.ndarray) -> tuple[float, np.ndarray]:
        logits = self.forward(inputs)
        p, loss = self.loss_layer.forward(logits, labels)
        return loss, p

    def loss_and_grad(self, inputs: Inputs, labels: np.ndarray) -> tuple[float, np.ndarray]:
        self.zero_grad()
        loss, p = self.loss(inputs, labels)
        self.backward(self.loss_layer.backward())
        return loss, p

    def predict_proba(self, inputs: Inputs, batch_size: int = 1024) -> np.ndarray:
        out = []
        for s in range(0, len(inputs), batch_size):
            logits = self.forward(inputs.take(slice(s, s + batch_size)))
            out.append(self.loss_layer.forward(logits)[0])
        return np.concatenate(out) if out else np.zeros((0, self.arch.n_classes))

    def predict(self, inputs: Inputs) -> np.ndarray:
        return np.argmax(self.predict_proba(inputs), axis=1)

    # --- state ------------------------------------------------------------
    def get_state(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.parameters().items()}

    def set_state(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        if set(params) != set(state):
            raise ShapeMismatch("parameter names differ from the network's")
        for k, v in state.items():
            if params[k].shape != np.shape(v):
                raise ShapeMismatch(f"{k}: shape {np.shape(v)} != {params[k].shape}")
            params[k][...] = v
