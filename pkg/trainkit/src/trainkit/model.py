"""EfficientNet-B0 binary classifier and staged unfreezing.

The backbone is torchvision's EfficientNet-B0 with the classification
head swapped for a single logit. Stage scopes name nested parameter
sets: the head alone, the head plus the last feature block (the final
top-level block of `features` together with the following projection
layer), and the full network.
"""

from __future__ import annotations

import pickle

import torch
from torch import nn
from torchvision import models

from trainkit import TrainkitError
from trainkit.schedules import STAGE_SCOPES

# features[-2] is the last MBConv stage, features[-1] the 1x1
# projection conv that follows it; "last block" means both.
FEATURE_CHANNELS = 1280


def build_model(pretrained: bool = False) -> nn.Module:
    """EfficientNet-B0 with a one-logit head.

    Args:
        pretrained: start from ImageNet weights instead of random init.
    """
    weights = models.EfficientNet_B0_Weights.IMAGENET1K_V1 if pretrained else None
    model = models.efficientnet_b0(weights=weights)
    in_features = model.classifier[1].in_features
    model.classifier[1] = nn.Linear(in_features, 1)
    return model


def _scope_modules(model: nn.Module, scope: str) -> list[nn.Module]:
    if scope == "head_only":
        return [model.classifier]
    if scope == "head_plus_last_block":
        return [model.classifier, model.features[-2], model.features[-1]]
    if scope == "full":
        return [model]
    raise TrainkitError(f"unknown trainable_scope {scope!r}; expected one of {STAGE_SCOPES}")


def trainable_parameter_names(model: nn.Module, scope: str) -> set[str]:
    """Fully qualified names of the parameters a scope trains."""
    wanted = set()
    for module in _scope_modules(model, scope):
        wanted.update(id(p) for p in module.parameters())
    return {name for name, p in model.named_parameters() if id(p) in wanted}


def set_trainable(model: nn.Module, scope: str) -> list[nn.Parameter]:
    """Freeze everything outside the scope, unfreeze inside it.

    Returns:
        The now-trainable parameters, for handing to the optimizer.
    """
    names = trainable_parameter_names(model, scope)
    out = []
    for name, p in model.named_parameters():
        p.requires_grad_(name in names)
        if name in names:
            out.append(p)
    return out


def save_checkpoint(path, model: nn.Module, meta: dict | None = None) -> None:
    """Serialize weights plus enough metadata to rebuild the net."""
    payload = {
        "arch": "efficientnet_b0",
        "num_logits": 1,
        "state_dict": model.state_dict(),
        "meta": meta or {},
    }
    torch.save(payload, path)


def load_checkpoint(path) -> tuple[nn.Module, dict]:
    """Rebuild a model from a checkpoint written by save_checkpoint."""
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except (OSError, RuntimeError, ValueError, EOFError,
            pickle.UnpicklingError) as exc:
        raise TrainkitError(f"cannot load checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("arch") != "efficientnet_b0":
        raise TrainkitError(f"{path}: not a trainkit efficientnet_b0 checkpoint")
    model = build_model(pretrained=False)
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload.get("meta", {})
