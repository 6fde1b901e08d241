"""Pixel-adaptive KAN pansharpening (bindings to the C++ core)."""

from ._core import (
    ConfigError,
    Network,
    ParseError,
    ShapeError,
    ValidationError,
    basis_eval,
    basis_grad,
    d_lambda,
    d_s,
    ergas,
    gradcheck,
    hqnr,
    lr_at_epoch,
    make_sample,
    normalize,
    pktn_read,
    pktn_write,
    psnr,
    q2n,
    q_index,
    sam,
    synth_scene,
    train,
    wald_degrade,
    write_dataset,
)

__all__ = [name for name in dir() if not name.startswith("_")]
