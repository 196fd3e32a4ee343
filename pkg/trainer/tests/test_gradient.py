import numpy as np
import torch

from exnet_trainer.model import TwoStageEnhancer
from exnet_trainer.stft import StftSettings
from exnet_trainer.training import combined_loss


def test_finite_difference_gradients():
    """Analytic gradients of the combined loss agree with central differences
    on a sampled parameter subset (float64, toy geometry)."""
    torch.manual_seed(3)
    cfg = StftSettings(frame_len=64, hop=16)
    model = TwoStageEnhancer(num_mics=2, cfg=cfg).double()
    model.eval()  # deterministic loss for differencing
    t = 2400
    y = torch.randn(1, 2, t, dtype=torch.float64)
    x = torch.randn(1, 2, t, dtype=torch.float64)
    x_ref = x[:, 0]

    def loss_value():
        return combined_loss(model, y, x, x_ref)[0]

    loss_value().backward()
    rng = np.random.default_rng(0)
    named = [(n, p) for n, p in model.named_parameters() if p.grad is not None]
    checked = 0
    for idx in rng.choice(len(named), size=8, replace=False):
        name, p = named[idx]
        grads = p.grad.view(-1)
        j = int(torch.argmax(grads.abs()))
        analytic = grads[j].item()
        # central differences bottom out near |loss|*eps_mach/eps ~ 1e-10
        if abs(analytic) < 1e-8:
            continue
        flat = p.detach().view(-1)
        eps = 1e-6 * max(1.0, abs(flat[j].item()))
        with torch.no_grad():
            orig = flat[j].item()
            flat[j] = orig + eps
            plus = loss_value().item()
            flat[j] = orig - eps
            minus = loss_value().item()
            flat[j] = orig
        fd = (plus - minus) / (2.0 * eps)
        rel = abs(fd - analytic) / max(abs(analytic), abs(fd))
        assert rel < 1e-3, f"{name}: fd {fd} vs analytic {analytic} (rel {rel})"
        checked += 1
    assert checked >= 4
