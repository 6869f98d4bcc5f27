"""Mock trainer: a tiny frozen transformer block adapted by real PEFT modules.

The base model is one weight-tied layer (attention + FFN) whose parameters
are frozen at construction. A configuration instantiates, per active layer,
a serial bottleneck on the FFN output, a parallel bottleneck on the FFN
input, and learned prefix rows concatenated to the attention keys/values;
only those module weights train. Targets come from a fixed teacher built on
the same frozen base, so adapter capacity genuinely improves the fit.

Everything is deterministic given (config, fidelity, seed): the dataset,
teacher, and base weights depend only on the worker-level task seed, and
adapter initialization is seeded by (seed, config). Scores are held-out
goodness-of-fit values in [0, 100].

A real fine-tuning backend would replace :class:`MockTrainer` with a class
of the same shape: see :class:`FullFineTuneStub` at the bottom.
"""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from dataclasses import dataclass

import torch
from torch import nn

torch.set_num_threads(1)
# size-0 modules are legitimate here (absent module = width 0)
warnings.filterwarnings("ignore", message="Initializing zero-element tensors")

DEFAULT_HIDDEN_DIM = 16
DEFAULT_MAX_STEPS = 400
DEFAULT_SEQ_LEN = 6
DEFAULT_SAMPLES = 64
DEFAULT_TASK_SEED = 1234
_HOLDOUT = 16
_LEARNING_RATE = 1e-2


@dataclass(frozen=True)
class WorkerConfig:
    """Parsed configuration text form."""

    layers: tuple[int, ...]
    d_sa: int
    d_pa: int
    l_pt: int

    @classmethod
    def from_dict(cls, data: dict) -> "WorkerConfig":
        layers = tuple(sorted(int(v) for v in data["layers"]))
        if len(set(layers)) != len(layers) or any(l < 1 for l in layers):
            raise ValueError(f"bad layers list {list(layers)}")
        sizes = [int(data[k]) for k in ("d_sa", "d_pa", "l_pt")]
        if any(s < 0 for s in sizes):
            raise ValueError(f"negative module size in {data}")
        return cls(layers, *sizes)

    @property
    def num_active(self) -> int:
        return len(self.layers)

    @property
    def size_sum(self) -> int:
        return self.d_sa + self.d_pa + self.l_pt

    def stable_hash(self) -> int:
        payload = json.dumps(
            {"layers": list(self.layers), "d_sa": self.d_sa,
             "d_pa": self.d_pa, "l_pt": self.l_pt},
            sort_keys=True, separators=(",", ":"),
        )
        return int.from_bytes(
            hashlib.blake2b(payload.encode(), digest_size=8).digest(), "big"
        ) >> 1


def trainable_param_count(config: WorkerConfig, hidden_dim: int) -> int:
    """Shared counting rule: active layers x 2 x hidden x (sum of sizes)."""
    return config.num_active * 2 * hidden_dim * config.size_sum


class Bottleneck(nn.Module):
    """Down/up projection with ReLU in between; no biases."""

    def __init__(self, hidden_dim: int, width: int):
        super().__init__()
        self.down = nn.Linear(hidden_dim, width, bias=False)
        self.up = nn.Linear(width, hidden_dim, bias=False)

    def forward(self, x):
        return self.up(torch.relu(self.down(x)))


class PrefixRows(nn.Module):
    """Learned rows prepended to attention keys and values."""

    def __init__(self, length: int, hidden_dim: int):
        super().__init__()
        self.p_k = nn.Parameter(torch.empty(length, hidden_dim))
        self.p_v = nn.Parameter(torch.empty(length, hidden_dim))

    def extend(self, k, v):
        if self.p_k.shape[0] == 0:
            return k, v
        batch = k.shape[0]
        pk = self.p_k.unsqueeze(0).expand(batch, -1, -1)
        pv = self.p_v.unsqueeze(0).expand(batch, -1, -1)
        return torch.cat([pk, k], dim=1), torch.cat([pv, v], dim=1)


class AdapterPass(nn.Module):
    """One active layer's trainable modules."""

    def __init__(self, hidden_dim: int, d_sa: int, d_pa: int, l_pt: int):
        super().__init__()
        self.serial = Bottleneck(hidden_dim, d_sa)
        self.parallel = Bottleneck(hidden_dim, d_pa)
        self.prefix = PrefixRows(l_pt, hidden_dim)


class FrozenBase(nn.Module):
    """Weight-tied attention + FFN block with all parameters frozen."""

    def __init__(self, hidden_dim: int, seed: int):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        scale = 1.0 / math.sqrt(hidden_dim)

        def mat(rows, cols):
            return nn.Parameter(
                torch.randn(rows, cols, generator=gen) * scale, requires_grad=False
            )

        self.w_q = mat(hidden_dim, hidden_dim)
        self.w_k = mat(hidden_dim, hidden_dim)
        self.w_v = mat(hidden_dim, hidden_dim)
        self.ffn_in = mat(hidden_dim, 2 * hidden_dim)
        self.ffn_out = mat(2 * hidden_dim, hidden_dim)
        self.readout = mat(hidden_dim, 1)
        self.hidden_dim = hidden_dim

    def ffn(self, x):
        return torch.tanh(x @ self.ffn_in) @ self.ffn_out

    def attention(self, h, prefix: PrefixRows | None):
        q = h @ self.w_q
        k = h @ self.w_k
        v = h @ self.w_v
        if prefix is not None:
            k, v = prefix.extend(k, v)
        scores = q @ k.transpose(1, 2) / math.sqrt(self.hidden_dim)
        return torch.softmax(scores, dim=-1) @ v

    def layer(self, h, adapters: AdapterPass | None):
        prefix = adapters.prefix if adapters is not None else None
        h = h + self.attention(h, prefix)
        f = self.ffn(h)
        out = h + f
        if adapters is not None:
            out = out + adapters.serial(f) + adapters.parallel(h)
        return out

    def predict(self, x, passes: list[AdapterPass | None]):
        h = x
        for adapters in passes:
            h = self.layer(h, adapters)
        return (h.mean(dim=1) @ self.readout).squeeze(-1)


class MockTrainer:
    """Trains only the adapter stack on a fixed synthetic regression task."""

    def __init__(
        self,
        hidden_dim: int = DEFAULT_HIDDEN_DIM,
        max_steps: int = DEFAULT_MAX_STEPS,
        seq_len: int = DEFAULT_SEQ_LEN,
        samples: int = DEFAULT_SAMPLES,
        task_seed: int = DEFAULT_TASK_SEED,
    ):
        self.hidden_dim = hidden_dim
        self.max_steps = max_steps
        self.base = FrozenBase(hidden_dim, task_seed)
        gen = torch.Generator().manual_seed(task_seed + 1)
        self.inputs = torch.randn(samples, seq_len, hidden_dim, generator=gen)
        with torch.no_grad():
            # teacher adapters carry real weight so capacity has something to learn
            teacher = self._build_passes(
                WorkerConfig((1, 2, 3), 8, 8, 2),
                seed=task_seed + 2,
                scale=1.0 / math.sqrt(hidden_dim),
            )
            self.targets = self.base.predict(self.inputs, teacher)
        self.train_x = self.inputs[:-_HOLDOUT]
        self.train_y = self.targets[:-_HOLDOUT]
        self.held_x = self.inputs[-_HOLDOUT:]
        self.held_y = self.targets[-_HOLDOUT:]
        self._target_var = float(self.held_y.var(unbiased=False)) or 1.0

    def _build_passes(
        self, config: WorkerConfig, seed: int, scale: float | None = None
    ) -> list[AdapterPass]:
        # students start near zero (adapter stack close to the identity)
        scale = 0.5 / self.hidden_dim if scale is None else scale
        torch.manual_seed(seed)
        passes = []
        for _ in range(config.num_active):
            ap = AdapterPass(self.hidden_dim, config.d_sa, config.d_pa, config.l_pt)
            for p in ap.parameters():
                nn.init.uniform_(p, -scale, scale)
            passes.append(ap)
        return passes

    def steps_for(self, fidelity: float) -> int:
        if not (0.0 < fidelity <= 1.0):
            raise ValueError(f"fidelity {fidelity} outside (0, 1]")
        return math.ceil(fidelity * self.max_steps)

    def _score(self, passes) -> float:
        with torch.no_grad():
            mse = float(
                torch.mean((self.base.predict(self.held_x, passes) - self.held_y) ** 2)
            )
        return 100.0 * max(0.0, 1.0 - mse / self._target_var)

    def train(self, config: WorkerConfig, fidelity: float, seed: int):
        """Returns (score, steps_run, trainable_params)."""
        init_seed = (int(seed) ^ config.stable_hash()) & 0x7FFFFFFF
        passes = self._build_passes(config, init_seed)
        params = [p for ap in passes for p in ap.parameters() if p.numel()]
        count = sum(p.numel() for p in params)
        assert count == trainable_param_count(config, self.hidden_dim)
        if not params:
            return self._score(passes), 0, 0
        steps = self.steps_for(fidelity)
        opt = torch.optim.Adam(params, lr=_LEARNING_RATE)
        for _ in range(steps):
            opt.zero_grad()
            loss = torch.mean(
                (self.base.predict(self.train_x, passes) - self.train_y) ** 2
            )
            loss.backward()
            opt.step()
        return self._score(passes), steps, count

    def baseline_score(self, config: WorkerConfig) -> float:
        """Score of the untrained model for this configuration."""
        init_seed = (0 ^ config.stable_hash()) & 0x7FFFFFFF
        return self._score(self._build_passes(config, init_seed))


def mock_train(
    config: WorkerConfig, fidelity: float, seed: int, trainer: MockTrainer | None = None
) -> float:
    trainer = trainer or MockTrainer()
    score, _, _ = trainer.train(config, fidelity, seed)
    return score


class FullFineTuneStub:
    """Where a real fine-tuning backend would plug in.

    A production worker would build the configured adapter/prefix modules
    inside an actual pretrained transformer, freeze the base weights, and
    run task fine-tuning with the usual recipe for this kind of setup
    (small constant learning rate around 1e-4, batch size 16-32, a fixed
    epoch budget with early stopping on the dev metric), then report the
    dev score. The stdio protocol and the trainable-parameter accounting
    stay exactly the same as for :class:`MockTrainer`.
    """

    def train(self, config: WorkerConfig, fidelity: float, seed: int):
        raise NotImplementedError("wire a real fine-tuning stack in here")
