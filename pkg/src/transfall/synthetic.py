"""Synthetic accelerometer recordings with device and subject effects.

Each activity has a characteristic gravity direction and oscillation; each
subject scales amplitude and cadence; each device model applies its own
per-axis gain, bias and noise floor, with small unit-to-unit variation
between devices of the same model.  Device names follow ``<model>_<unit>``.
"""

from __future__ import annotations

import csv
import zlib
from pathlib import Path
from typing import Sequence

import numpy as np

ACTIVITIES = {
    # name: (gravity direction, oscillation Hz, oscillation amplitude in g)
    "sit": ((0.25, 0.10, 0.96), 0.0, 0.0),
    "stand": ((0.10, 0.98, 0.15), 0.0, 0.0),
    "walk": ((0.15, 0.95, 0.25), 1.8, 0.35),
    "run": ((0.20, 0.90, 0.35), 2.8, 0.90),
}


def _rng(*keys) -> np.random.Generator:
    return np.random.default_rng([zlib.crc32(str(k).encode()) for k in keys])


def device_profile(device: str, seed: int = 0) -> tuple[np.ndarray, np.ndarray, float]:
    """(gain, bias, noise) for one device unit."""
    model = device.rsplit("_", 1)[0]
    rm = _rng("model", model, seed)
    gain = rm.uniform(0.6, 1.6, size=3)
    bias = rm.uniform(-0.3, 0.3, size=3)
    noise = rm.uniform(0.02, 0.08)
    ru = _rng("unit", device, seed)
    gain = gain * (1 + 0.03 * ru.standard_normal(3))
    bias = bias + 0.02 * ru.standard_normal(3)
    return gain, bias, noise


def subject_profile(subject: str, seed: int = 0) -> tuple[float, float]:
    """(amplitude factor, cadence factor)."""
    r = _rng("subject", subject, seed)
    return r.uniform(0.8, 1.25), r.uniform(0.85, 1.15)


def recording(
    subject: str,
    device: str,
    activities: Sequence[str] = tuple(ACTIVITIES),
    seconds_per_activity: float = 20.0,
    rate_hz: float = 50.0,
    seed: int = 0,
) -> dict[str, np.ndarray]:
    """One continuous recording cycling through ``activities`` in order."""
    gain, bias, noise = device_profile(device, seed)
    amp_f, cad_f = subject_profile(subject, seed)
    r = _rng("rec", subject, device, seed)
    n_act = int(round(seconds_per_activity * rate_hz))
    blocks, labels = [], []
    for name in activities:
        g, hz, amp = ACTIVITIES[name]
        t = np.arange(n_act) / rate_hz
        g = np.asarray(g) / np.linalg.norm(g)
        phase = r.uniform(0, 2 * np.pi)
        osc = amp * amp_f * np.sin(2 * np.pi * hz * cad_f * t + phase)
        wobble = 0.05 * amp_f * np.sin(2 * np.pi * 0.3 * t)[:, None] * r.standard_normal(3)
        sig = g[None, :] * (1.0 + osc[:, None]) + wobble
        sig = sig + 0.02 * r.standard_normal(sig.shape)
        blocks.append(sig * gain + bias + noise * r.standard_normal(sig.shape))
        labels += [name] * n_act
    acc = np.concatenate(blocks)
    return {
        "timestamp": np.arange(len(acc)) / rate_hz,
        "acc": acc,
        "label": np.asarray(labels, dtype=object),
    }


def write_corpus(
    out_dir: str | Path,
    subjects: Sequence[str],
    devices: Sequence[str],
    activities: Sequence[str] = tuple(ACTIVITIES),
    seconds_per_activity: float = 20.0,
    rate_hz: float = 50.0,
    seed: int = 0,
) -> list[Path]:
    """Write one CSV per device holding every subject's recording."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for device in devices:
        path = out_dir / f"{device}.csv"
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["timestamp", "ax", "ay", "az", "label", "subject", "device"])
            for subject in subjects:
                rec = recording(subject, device, activities, seconds_per_activity, rate_hz, seed)
                for t, (x, y, z), lab in zip(rec["timestamp"], rec["acc"], rec["label"]):
                    w.writerow([f"{t:.4f}", f"{x:.6f}", f"{y:.6f}", f"{z:.6f}", lab, subject, device])
        paths.append(path)
    return paths
