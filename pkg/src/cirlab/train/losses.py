"""Batch losses over row-aligned composed/target token matrices.

Both losses expect unit-normalized rows so the dot product is cosine
similarity.  They are written as two independent code paths on purpose: the
divergence form is the ablation arm, not a wrapper over the primary loss.
"""

from __future__ import annotations

import torch


def _check(composed: torch.Tensor, targets: torch.Tensor, tau: float) -> None:
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    if composed.shape != targets.shape or composed.dim() != 2:
        raise ValueError(
            f"composed {tuple(composed.shape)} and targets {tuple(targets.shape)} must be equal (B, D)"
        )


def bbc_loss(composed: torch.Tensor, targets: torch.Tensor, tau: float) -> torch.Tensor:
    """Batch-based classification: softmax cross-entropy of each composed row
    against its own target among all in-batch targets.

    Computed as mean_i [logsumexp_j(s_ij/tau) - s_ii/tau] with an explicit
    max shift, so a singleton batch returns exactly 0.0 and a constant
    similarity matrix returns exactly log(B) up to float64 rounding.
    """
    _check(composed, targets, tau)
    sims = (composed.double() @ targets.double().T) / tau
    shift = sims.max(dim=1, keepdim=True).values
    lse = shift.squeeze(1) + torch.log(torch.exp(sims - shift).sum(dim=1))
    return (lse - sims.diagonal()).mean()


def kl_loss(composed: torch.Tensor, targets: torch.Tensor, tau: float) -> torch.Tensor:
    """Divergence between the row-softmax similarity distribution and the
    one-hot diagonal labels: -(1/B) sum_ij y_ij log p_ij with y = identity."""
    _check(composed, targets, tau)
    sims = (composed.double() @ targets.double().T) / tau
    p = torch.softmax(sims, dim=1)
    # y is the identity, so the double sum reduces to the diagonal terms
    return -(torch.log(p.diagonal())).mean()
