"""Training loop, objective, and the two-step (freeze stage 1) protocol."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import torch
from torch.utils.data import DataLoader

from exnet_trainer.model import TwoStageEnhancer
from exnet_trainer.stft import istft, pack, stft


@dataclass(frozen=True)
class TrainSettings:
    steps: int = 200
    batch_size: int = 16
    learning_rate: float = 1e-4
    beta_mae: float = 0.9
    beta_reg: float = 0.1
    seed: int = 0
    log_path: str | None = None

    def __post_init__(self):
        if abs(self.beta_mae + self.beta_reg - 1.0) > 1e-12:
            raise ValueError("loss weights must sum to 1")


def combined_loss(model: TwoStageEnhancer, y: torch.Tensor, x: torch.Tensor, x_ref: torch.Tensor,
                  beta_mae: float = 0.9, beta_reg: float = 0.1):
    """Time-domain MAE plus the distortionless regularizer.

    y, x: (B, M, T); x_ref: (B, T). The regularizer applies the stage-1
    weights (estimated from the noisy input) to the clean multichannel
    signal and penalizes its deviation from the reference channel.
    """
    cfg = model.cfg
    packed = pack(stft(y, cfg))
    w1, _, _, enhanced = model(packed)
    est = istft(enhanced, cfg)
    n = min(est.shape[-1], x_ref.shape[-1])
    mae = torch.mean(torch.abs(x_ref[:, :n] - est[:, :n]))

    x_spec = stft(x, cfg)
    x_d = istft((w1.conj().unsqueeze(-1) * x_spec).sum(dim=1), cfg)
    reg = torch.mean(torch.abs(x_ref[:, :n] - x_d[:, :n]))
    return beta_mae * mae + beta_reg * reg, mae, reg


def train(model: TwoStageEnhancer, dataset, settings: TrainSettings | None = None,
          optimizer: torch.optim.Optimizer | None = None) -> list:
    """Optimize the model; returns the per-step history.

    Aborts with diagnostics if the loss diverges to NaN/Inf. Only
    parameters with requires_grad participate, so the two-step protocol
    can reuse this loop with stage 1 frozen.
    """
    settings = settings or TrainSettings()
    torch.manual_seed(settings.seed)
    loader = DataLoader(dataset, batch_size=settings.batch_size, shuffle=True, drop_last=False)
    params = [p for p in model.parameters() if p.requires_grad]
    opt = optimizer or torch.optim.Adam(params, lr=settings.learning_rate)

    history = []
    step = 0
    while step < settings.steps:
        for y, x, x_ref in loader:
            loss, mae, reg = combined_loss(model, y, x, x_ref,
                                           settings.beta_mae, settings.beta_reg)
            if not torch.isfinite(loss):
                raise RuntimeError(
                    f"training diverged at step {step}: loss={loss.item()}, "
                    f"mae={mae.item()}, reg={reg.item()}"
                )
            opt.zero_grad()
            loss.backward()
            opt.step()
            history.append({"step": step, "loss": loss.item(), "mae": mae.item(),
                            "reg": reg.item()})
            step += 1
            if step >= settings.steps:
                break
    if settings.log_path:
        Path(settings.log_path).write_text(
            "\n".join(json.dumps(h) for h in history) + "\n"
        )
    return history


def two_step_protocol(model: TwoStageEnhancer, stage1_checkpoint, dataset,
                      settings: TrainSettings | None = None) -> list:
    """Freeze stage 1 at an earlier (non-reverberant) checkpoint and train
    only the stage-2 postfilter on the given (reverberant) dataset."""
    state = torch.load(stage1_checkpoint, weights_only=True)
    model.stage1.load_state_dict(state)
    for p in model.stage1.parameters():
        p.requires_grad_(False)
    model.stage1.eval()  # also freezes batch-norm statistics
    history = train(model, dataset, settings)
    return history
