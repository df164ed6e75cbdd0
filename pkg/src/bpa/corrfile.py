"""Plain-text correspondence files.

One correspondence per line, whitespace separated, ``#`` starts a comment::

    mx my mz  sx sy sz  sigma                                  # 7 fields
    mx my mz  sx sy sz  sigma  qx(4)  qy(4)  l1 l2 l3          # 18 fields

In the long form ``qx`` and ``qy`` are the model and scene feature
orientations (scalar first) and ``l1 l2 l3`` the concentrations of the noise
Bingham centered on ``qx`` (see :func:`bpa.features.frame_bingham`).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import BPAError
from .features import frame_bingham
from .procrustes import Correspondence, OrientationPair

SHORT, LONG = 7, 18


class InputFormatError(BPAError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def _parse_line(fields: list[str], lineno: int) -> Correspondence:
    if len(fields) not in (SHORT, LONG):
        raise InputFormatError(lineno, f"expected {SHORT} or {LONG} fields, got {len(fields)}")
    try:
        v = np.array([float(f) for f in fields])
    except ValueError as exc:
        raise InputFormatError(lineno, str(exc)) from None
    if not np.all(np.isfinite(v)):
        raise InputFormatError(lineno, "non-finite value")
    try:
        pair = None
        if len(v) == LONG:
            qx, qy, lam = v[7:11], v[11:15], v[15:18]
            if min(np.linalg.norm(qx), np.linalg.norm(qy)) < 1e-12:
                raise InputFormatError(lineno, "zero quaternion")
            pair = OrientationPair(qx / np.linalg.norm(qx), qy / np.linalg.norm(qy), frame_bingham(qx, lam))
        return Correspondence(v[:3], v[3:6], v[6], pair)
    except (BPAError, ZeroDivisionError, FloatingPointError) as exc:
        raise InputFormatError(lineno, str(exc)) from None


def parse_correspondences(text: str) -> list[Correspondence]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if body:
            out.append(_parse_line(body.split(), lineno))
    if not out:
        raise InputFormatError(0, "no correspondences found")
    return out


def read_correspondences(path) -> list[Correspondence]:
    return parse_correspondences(Path(path).read_text())


def format_correspondence(c: Correspondence) -> str:
    vals = [*c.x, *c.y, c.sigma]
    if c.orientation is not None:
        o = c.orientation
        # concentrations in frame order (q o j, q o k, q o i); the dist stores them sorted
        ref = frame_bingham(o.q_x, np.zeros(3)).dirs
        lam = o.noise.lambdas[np.argmax(np.abs(ref.T @ o.noise.dirs), axis=1)]
        vals += [*o.q_x, *o.q_y, *lam]
    return " ".join(repr(float(v)) for v in vals)
