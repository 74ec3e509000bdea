"""Feed-forward student: a stack of inverse-autoregressive affine flows.

Each flow predicts a per-sample (shift, log-scale) pair from a one-sample
-lagged view of its input and the conditioning, then applies
x_k = x_{k-1} * s_k + mu_k in parallel across time. The composition of all
flows is itself affine in the noise, so the stack also returns the total
shift and log-scale per sample, which is what distillation integrates over.
Generation is a single parallel pass; inversion (noise recovery) is
inherently sequential and provided as a diagnostic.
"""

from __future__ import annotations

import dataclasses

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ValidationError
from .teacher import GatedResidualLayer

LOG_SCALE_CLAMP = 7.0


@dataclasses.dataclass
class FlowConfig:
    """Student hyperparameters.

    Defaults: four flows of [10, 10, 10, 30] layers, dilation 2^(i % 10)
    within each flow, 64 residual channels, kernel 3, no skip connections,
    304 conditioning channels.
    """

    flow_layers: tuple = (10, 10, 10, 30)
    residual_channels: int = 64
    kernel_size: int = 3
    dilation_cycle: int = 10
    conditioning_channels: int = 304

    def validate(self) -> None:
        if not self.flow_layers or any(int(n) < 1 for n in self.flow_layers):
            raise ValidationError("flow_layers must be a non-empty tuple of positive ints")
        for name in ("residual_channels", "kernel_size", "dilation_cycle", "conditioning_channels"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"flow config field {name} must be >= 1")

    def dilations(self, n_layers: int) -> list[int]:
        return [2 ** (i % self.dilation_cycle) for i in range(n_layers)]


@dataclasses.dataclass
class FlowOutput:
    """Result of a parallel pass: x = z * exp(log_s_total) + mu_total."""

    x: torch.Tensor
    mu_total: torch.Tensor
    log_s_total: torch.Tensor


class AffineFlow(nn.Module):
    """One IAF stage: (shift, log-scale) from lagged input and conditioning.

    The input is shifted right by one before the dilated stack, so the
    parameters at position t depend on input positions <= t - 1 only; the
    affine update is then parallel over time. The 2-channel head is
    zero-initialized, making a fresh flow the identity map.
    """

    def __init__(self, config: FlowConfig, n_layers: int):
        super().__init__()
        self.input_conv = nn.Conv1d(1, config.residual_channels, 1)
        self.layers = nn.ModuleList(
            GatedResidualLayer(
                config.residual_channels,
                config.residual_channels,
                config.kernel_size,
                dilation,
                config.conditioning_channels,
                skip_channels=None,
            )
            for dilation in config.dilations(n_layers)
        )
        self.head = nn.Conv1d(config.residual_channels, 2, 1)
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)
        # Max lag of (mu, s) w.r.t. the flow input: 1 for the shift plus the
        # dilated stack's span.
        self.max_lag = 1 + sum(
            (config.kernel_size - 1) * d for d in config.dilations(n_layers)
        )

    def forward(self, u: torch.Tensor, cond: torch.Tensor):
        """Args: u (B, T), cond (B, T, C). Returns (mu, log_s), each (B, T)."""
        shifted = F.pad(u, (1, 0))[:, :-1]
        h = self.input_conv(shifted[:, None, :])
        c = cond.transpose(1, 2).contiguous()
        for layer in self.layers:
            h, _ = layer(h, c)
        out = self.head(F.relu(h))
        mu = out[:, 0]
        log_s = out[:, 1].clamp(-LOG_SCALE_CLAMP, LOG_SCALE_CLAMP)
        return mu, log_s


class FlowStack(nn.Module):
    """Composition of affine flows; maps logistic noise to a waveform."""

    def __init__(self, config: FlowConfig | None = None):
        super().__init__()
        config = config or FlowConfig()
        config.validate()
        self.config = config
        self.flows = nn.ModuleList(AffineFlow(config, int(n)) for n in config.flow_layers)

    def _validate(self, z: torch.Tensor, cond: torch.Tensor) -> None:
        if z.dim() != 2:
            raise ValidationError(f"student expects noise of shape (B, T), got {tuple(z.shape)}")
        if cond.dim() != 3 or cond.shape[:2] != z.shape:
            raise ValidationError(
                f"conditioning shape {tuple(cond.shape)} does not match noise {tuple(z.shape)}"
            )
        if cond.shape[2] != self.config.conditioning_channels:
            raise ValidationError(
                f"conditioning has {cond.shape[2]} channels, "
                f"expected {self.config.conditioning_channels}"
            )

    def forward(self, z: torch.Tensor, cond: torch.Tensor) -> FlowOutput:
        """One parallel pass through every flow.

        The per-sample affine maps compose: mu_total accumulates as
        mu_total * s_k + mu_k and log_s_total as the sum of log s_k, so the
        output marginal at each position is logistic(mu_total, s_total) for
        logistic noise input.
        """
        self._validate(z, cond)
        x = z
        mu_total = torch.zeros_like(z)
        log_s_total = torch.zeros_like(z)
        for flow in self.flows:
            mu, log_s = flow(x, cond)
            s = torch.exp(log_s)
            x = x * s + mu
            mu_total = mu_total * s + mu
            log_s_total = log_s_total + log_s
        return FlowOutput(x=x, mu_total=mu_total, log_s_total=log_s_total)


def sample_noise(
    shape,
    generator: torch.Generator | None = None,
    dtype: torch.dtype = torch.float32,
) -> torch.Tensor:
    """Standard logistic noise via the inverse CDF of clamped uniforms."""
    u = torch.rand(shape, generator=generator, dtype=dtype)
    u = u.clamp(1e-7, 1.0 - 1e-7)
    return torch.log(u) - torch.log1p(-u)


@torch.no_grad()
def invert_flow(x: torch.Tensor, cond: torch.Tensor, stack: FlowStack) -> torch.Tensor:
    """Recover the noise that generates x: the sequential inverse pass.

    Each flow is inverted sample by sample: u[t] = (x[t] - mu(u[<t])) / s(u[<t]).
    Because the parameter nets are strictly causal in their input, evaluating
    a flow on the window u[t - max_lag .. t] reproduces the full-signal
    parameters at position t, so the cost is O(T * max_lag) per flow.
    Diagnostic path; generation never inverts.
    """
    if x.dim() != 2:
        raise ValidationError(f"invert_flow expects (B, T), got {tuple(x.shape)}")
    for flow in reversed(stack.flows):
        x = _invert_single(x, cond, flow)
    return x


def _invert_single(x: torch.Tensor, cond: torch.Tensor, flow: AffineFlow) -> torch.Tensor:
    length = x.shape[1]
    u = torch.zeros_like(x)
    for t in range(length):
        a = max(0, t - flow.max_lag)
        mu, log_s = flow(u[:, a : t + 1], cond[:, a : t + 1, :])
        j = t - a
        u[:, t] = (x[:, t] - mu[:, j]) * torch.exp(-log_s[:, j])
    return u
